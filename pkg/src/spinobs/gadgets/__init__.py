"""Edge-interaction and field gadgets."""

from .core import (
    EdgeGadget,
    FieldGadget,
    RecipeError,
    RecursionMismatch,
    build_path,
    compose_edge,
    compose_field,
    cycle4_field,
    degenerate_edge,
    degenerate_field,
    edge_from_graph,
    edge_gadget_stats,
    field_from_graph,
    field_gadget_stats,
    odd_path,
    parse_recipes,
    single_edge,
)
from .recursion import FieldMaps, PottsHats
from .library import (
    BuildResult,
    GadgetLibrary,
    GadgetPair,
    LibraryError,
    RecursionConstants,
    SearchExhausted,
    build_dense_library,
    build_gadget,
    recursion_constants,
    search_gadget_pair,
)
