"""Weight-sharing derivation, recursion schemes and weight-tied parametric cells."""
from .errors import CapExceeded, CatarchError, ShapeMismatch, ValidationError
from .functor import (
    ID, ONE, CoPrefix, Const, Id, Inl, Inr, Pow, Prod, Sum, Term,
    enumerate_terms, fmap, fold, free_join, free_pure, strength, unfold,
)
from .equivariance import (
    GroupAction, LinearRep, Perm, WeightSharingPattern,
    equivariance_basis, invariance_basis, orbit_pattern, pattern_of_basis,
    rep_entries, rep_vector,
)
from .nngraph import Graph, GraphBuilder, backward, export_dot, export_json, forward, import_json
from .para import ParamShape, ParaMap, Reparam, para_compose, para_embed, para_lift, reparam_apply, weight_tie
from .cells import (
    CellSpec, UnrolledNet, check_square, make_cell,
    unroll_fold, unroll_mealy, unroll_moore, unroll_stream, unroll_tree,
)
from .kernels import BACKEND

__version__ = "0.1.0"
