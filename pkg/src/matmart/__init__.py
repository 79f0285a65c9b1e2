"""Moment and tail bounds for operator norms of matrix martingales, with Monte Carlo checks."""

from .gls import PsiFunction, TailCurve, theorem41_tail, young_fenchel
from .mart_sim import MartingaleModel, assemble_martingale, generate_differences
from .moment_bounds import BoundProfile, MomentProfile, build_bound_profile
from .normed_space import NormSpec, extreme_points, operator_norm, operator_tensor_set
from .osekowski import k_os, os_constant

__version__ = "0.1.0"
