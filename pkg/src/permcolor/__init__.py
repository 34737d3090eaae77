"""Random permuted k-colorability: instances, exact solving, moment bounds."""

from permcolor.errors import (
    BudgetExhausted,
    CapExceeded,
    InvalidParameter,
    NoSignChange,
    NotAForest,
    PermColorError,
    PreconditionViolation,
)
from permcolor.graph_model import (
    DecoratedEdge,
    DecoratedGraph,
    ModelParams,
    Permutation,
    coboundary_graph,
    degree_sequence,
    sample_graph,
    sample_perm,
    unwind_tree,
)
from permcolor.solver import (
    SolveResult,
    available_colors,
    count_colorings,
    decide,
    is_proper,
    weight,
    z_weight,
)

__version__ = "0.1.0"
