"""Exact gadget algebra and observable reductions for Potts and 2-spin systems."""
