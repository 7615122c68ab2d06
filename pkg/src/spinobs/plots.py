"""Figures for the CLI's ``--figure`` option.

Every function returns PNG bytes. Rendering uses the Agg backend with fixed
metadata so repeated runs produce identical bytes.
"""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _render(fig) -> bytes:
    fig.tight_layout()
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=110, metadata=_META)
    plt.close(fig)
    return buf.getvalue()


def interpolation_figure(result, label: str = "activity") -> bytes:
    """Readings along the grid, and the running lower/upper sums of log Z."""
    fig, (a, b) = plt.subplots(1, 2, figsize=(9, 3.6))
    xs = np.asarray(result.grid)
    r = result.readings
    a.plot(xs, r.value, lw=1.2, label="reading")
    if np.any(r.hi > r.lo):
        a.fill_between(xs, r.lo, r.hi, alpha=0.3, label="reading interval")
    a.set_xlabel(label)
    a.set_ylabel("observable")
    a.legend(loc="best", fontsize=8)
    if len(xs) > 1:
        b.plot(xs[1:], result.base + result.lower_partial, lw=1, label="lower sum")
        b.plot(xs[1:], result.base + result.upper_partial, lw=1, label="upper sum")
    b.axhline(result.bracket.midpoint, color="k", lw=0.6, ls=":")
    b.set_xlabel(label)
    b.set_ylabel("log Z")
    b.legend(loc="best", fontsize=8)
    return _render(fig)


def path_decay_figure(trace, kappa) -> bytes:
    """B_l - 1 along path extensions against the geometric envelope kappa^l."""
    ls = np.arange(len(trace))
    excess = np.array([float(b) - 1 for b in trace])
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.semilogy(ls, excess, "o-", label="B_l - 1")
    ax.semilogy(ls, float(kappa) ** ls, "--", label="kappa^l")
    ax.set_xlabel("extension step l")
    ax.legend(fontsize=8)
    return _render(fig)


def convergence_figure(rows) -> bytes:
    """rows: (t, error, bound) for the iterative gadget builder."""
    t = np.array([r[0] for r in rows])
    err = np.array([max(float(r[1]), 1e-300) for r in rows])
    bound = np.array([float(r[2]) for r in rows])
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.semilogy(t, err, "o-", label="|R_t - x|")
    ax.semilogy(t, bound, "--", label="envelope")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    return _render(fig)


def library_figure(values, gaps, interval) -> bytes:
    """Library members as (value, gap) points with the target interval shaded."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.axvspan(float(interval[0]), float(interval[1]), color="0.9")
    ax.plot([float(v) for v in values], [float(g) for g in gaps], "o", ms=4)
    ax.set_xlabel("effective value")
    ax.set_ylabel("gap")
    return _render(fig)
