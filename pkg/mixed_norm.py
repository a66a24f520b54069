"""
Mixed Norm Module
Iterated weighted p-sums for ||f||_{L_P(Omega)}, the recursive slice form of the
norm, and the Minkowski integral inequality check
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from grid_core import Axis, GridError, GridFunction, IndexOutOfRange, MixnormError, ProductGrid, _along

logger = logging.getLogger(__name__)

# Above this an intermediate power sum is recomputed in the log domain
OVERFLOW_THRESHOLD = 1e300


class ExponentError(MixnormError):
    """Exponent outside [1, inf) or of the wrong length"""


class SharpConstantUndefined(ExponentError):
    """p / (p - 1) requested at p = 1"""


class MixedNormOverflow(MixnormError):
    """Norm not representable in double precision even in the log domain"""


@dataclass(frozen=True)
class ExponentVector:
    """P = (p_1, ..., p_n) with 1 <= p_i < inf"""
    p: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.p)
        if not values:
            raise ExponentError("Exponent vector is empty")
        for i, value in enumerate(values):
            if not (math.isfinite(value) and value >= 1.0):
                raise ExponentError(f"p_{i + 1} = {value} is outside [1, inf)")
        object.__setattr__(self, 'p', values)

    def __len__(self):
        return len(self.p)

    def __getitem__(self, i):
        return self.p[i]

    def __iter__(self):
        return iter(self.p)

    def tail(self) -> Optional["ExponentVector"]:
        """P with the first exponent removed (None when nothing is left)"""
        return ExponentVector(self.p[1:]) if len(self.p) > 1 else None

    def hardy_factor(self, i: int) -> float:
        """p_i / (p_i - 1), undefined at p_i = 1"""
        p = self.p[i]
        if p == 1.0:
            raise SharpConstantUndefined(f"p_{i + 1} = 1: the factor p/(p-1) is undefined")
        return p / (p - 1.0)

    def conjugate(self, i: int) -> float:
        """Hoelder conjugate p_i' (inf at p_i = 1)"""
        p = self.p[i]
        return math.inf if p == 1.0 else p / (p - 1.0)


ExponentLike = Union[ExponentVector, Sequence[float]]


def as_exponents(P: ExponentLike) -> ExponentVector:
    return P if isinstance(P, ExponentVector) else ExponentVector(tuple(P))


def _iterated(values: np.ndarray, grid: ProductGrid, P: ExponentVector) -> float:
    """Innermost axis first: |f|^p_n, sum, ^(p_{n-1}/p_n), ..., final ^(1/p_1)"""
    n = grid.ndim
    with np.errstate(over='ignore'):
        acc = values ** P[n - 1]
        for axis_index in range(n - 1, -1, -1):
            weights = grid.axes[axis_index].weights
            acc = np.sum(acc * weights, axis=-1)
            if axis_index > 0:
                acc = acc ** (P[axis_index - 1] / P[axis_index])
            if not np.all(np.isfinite(acc)) or np.max(acc, initial=0.0) > OVERFLOW_THRESHOLD:
                return math.nan
        return float(acc ** (1.0 / P[0]))


def _iterated_log(values: np.ndarray, grid: ProductGrid, P: ExponentVector) -> float:
    n = grid.ndim
    with np.errstate(divide='ignore'):
        log_acc = P[n - 1] * np.log(values)
        for axis_index in range(n - 1, -1, -1):
            log_weights = np.log(grid.axes[axis_index].weights)
            log_acc = logsumexp(log_acc + log_weights, axis=-1)
            if axis_index > 0:
                log_acc = log_acc * (P[axis_index - 1] / P[axis_index])
    return float(np.exp(log_acc / P[0]))


def mixed_norm(f: GridFunction, P: ExponentLike) -> float:
    """||f||_{L_P(Omega)} with chi_Omega applied through the mask"""
    P = as_exponents(P)
    if len(P) != f.grid.ndim:
        raise ExponentError(f"{len(P)} exponents for a {f.grid.ndim}-D function")

    values = np.abs(f.masked_values)
    if not np.all(np.isfinite(values)):
        raise MixedNormOverflow("Function holds non-finite values")
    scale = float(np.max(values, initial=0.0))
    if scale == 0.0:
        return 0.0
    values = values / scale

    result = _iterated(values, f.grid, P)
    if math.isnan(result) or result == 0.0:
        logger.debug("Intermediate power sum left the double range; switching to the log domain")
        result = _iterated_log(values, f.grid, P)
    with np.errstate(over='ignore'):
        result = float(np.float64(result) * scale)
    if not math.isfinite(result):
        raise MixedNormOverflow(f"Mixed norm with P={P.p} is not finite")
    return result


def axis_norm(values: np.ndarray, axis: Axis, p: float) -> float:
    """L_p(mu) norm of a function of one variable; p = inf gives the discrete esssup"""
    values = np.abs(np.asarray(values, dtype=float))
    if math.isinf(p):
        support = axis.weights > 0
        return float(np.max(values[support], initial=0.0))
    grid = ProductGrid((axis,))
    return mixed_norm(GridFunction(grid, values, grid.full_mask()), (p,))


def slice_norm(f: GridFunction, P_tail: Optional[ExponentLike], x1_index: int) -> float:
    """||f(x_1, .)||_{L_{P~}(Omega_{x_1})} for the slice at x1_index"""
    if f.grid.ndim == 1:
        if P_tail:
            raise ExponentError("A 1-D function has no tail exponents")
        k, size = int(x1_index), f.grid.shape[0]
        if not 0 <= k < size:
            raise IndexOutOfRange(f"Index {k} outside axis 0 of size {size}")
        return float(abs(f.masked_values[k]))
    return mixed_norm(f.slice((x1_index,)), P_tail)


def slice_norm_profile(f: GridFunction, P: ExponentLike) -> np.ndarray:
    """Slice norms for every node of the first axis"""
    P = as_exponents(P)
    tail = P.tail()
    return np.array([slice_norm(f, tail, k) for k in range(f.grid.shape[0])])


def recompose_from_slices(profile: np.ndarray, first_axis: Axis, p1: float) -> float:
    """Outer p_1-norm of the slice-norm profile; equals the mixed norm"""
    return axis_norm(profile, first_axis, p1)


class MinkowskiGap(NamedTuple):
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + 1e-12) + 1e-300


def minkowski_gap(f: GridFunction, p: float) -> MinkowskiGap:
    """Both sides of Minkowski's integral inequality for f(x_1, x_2)

    lhs = (int |int f d mu_1|^p d mu_2)^(1/p)
    rhs = int (int |f|^p d mu_2)^(1/p) d mu_1
    """
    if f.grid.ndim != 2:
        raise GridError("Minkowski's integral inequality needs a two-variable function")
    if not p >= 1.0:
        raise ExponentError(f"p = {p} is below 1")

    values = f.masked_values
    w1 = f.grid.axes[0].weights
    w2 = f.grid.axes[1].weights

    inner = np.sum(values * _along(w1, 0, 2), axis=0)
    lhs = float(np.sum(np.abs(inner) ** p * w2) ** (1.0 / p))

    slices = np.sum(np.abs(values) ** p * _along(w2, 1, 2), axis=1) ** (1.0 / p)
    rhs = float(np.sum(slices * w1))
    return MinkowskiGap(lhs, rhs)
