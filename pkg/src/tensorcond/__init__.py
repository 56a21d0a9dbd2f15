"""Condition numbers of tensor rank (CP) decompositions via Terracini's matrix."""
from .conditioning import (ConditionReport, cpdcond, is_weak3_orthogonal, norm_balance,
                           rank1_condition, rank1_terracini_singvals, weak3_condition)
from .decomp import KruskalInfo, cpd_gevd, kruskal_check, kruskal_rank
from .errors import (CapabilityError, ConvergenceError, DecompositionError,
                     DegenerateInputError, FormatError, ShapeError)
from .rng import SeededRng
from .scaling import (DistanceResult, GroupElement, IslPreconditionWarning, IslResult,
                      apply_group, distance, isl_rescale_diagonal, iterated_scaling,
                      pair_distance)
from .tensor import DenseTensor, Params, Shape, cpdgen, frobenius_norm, rank_one, unvecr, vecr
from .terracini import KernelBasis, TerraciniMatrix, build_terracini, kernel_basis

__version__ = "0.1.0"
