"""Exact p-adic ball trees and clustered cells, checked on finite quotients."""
from .cells import (
    LARGE,
    SMALL,
    CellCondition,
    ClassicalCell,
    ClusteredCell,
    equivalence_classes,
    eval_condition,
    fiber,
    is_regular,
    order_of,
    split_by_section,
)
from .decomposition import (
    decompose,
    minimality_audit,
    partition_ac1,
    partition_by_signature,
    rewrite_maximal_small,
    separate_subtrees,
    skolem_from_parts,
)
from .errors import CellkitError
from .kernels import BACKEND
from .oracle import QuotientSet, QuotientWindow, enumerate_window, set_equal, stability_check
from .padic import PadicNumber, ac, in_lambda_Qnm, ord_, parse_padic
from .trees import (
    Ball,
    MultiBall,
    branching_heights,
    build_tree,
    canonicalize_maximal,
    is_subset_maximal,
    signature,
    tree_type,
)

__version__ = "0.1.0"
