"""Osekowski constants and one-dimensional martingale Khintchine bounds."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DEFAULT_GRID_LO = 4.0
DEFAULT_GRID_HI = 1e4
DEFAULT_GRID_SIZE = 2000


def _check_order(p: float) -> None:
    if not p >= 4:
        raise ValueError(f"moment order must be >= 4, got {p!r}")


def os_constant(p: float) -> float:
    """Osekowski's constant Os(p) for p >= 4."""
    _check_order(p)
    return float(
        4.0 * np.sqrt(2.0) * (p / 4.0 + 1.0) ** (1.0 / p) * (1.0 + p / np.log(p / 2.0))
    )


def default_grid() -> np.ndarray:
    return np.geomspace(DEFAULT_GRID_LO, DEFAULT_GRID_HI, DEFAULT_GRID_SIZE)


def k_os(p_grid=None) -> float:
    """Best linearization coefficient of Os(p) against p / ln p.

    The ratio peaks at the left end of the admissible range, so a log-spaced
    grid on [4, 1e4] brackets the supremum.
    """
    if p_grid is None:
        return _k_os_default()
    grid = np.atleast_1d(np.asarray(p_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("p_grid must be nonempty")
    return float(max(os_constant(p) * np.log(p) / p for p in grid))


@lru_cache(maxsize=1)
def _k_os_default() -> float:
    return k_os(default_grid())


@dataclass(frozen=True)
class OsekowskiBound:
    p: float
    os_value: float
    linearized: float

    @classmethod
    def at(cls, p: float) -> "OsekowskiBound":
        return cls(p=p, os_value=os_constant(p), linearized=k_os() * p / np.log(p))


def khintchine_moment_bound(p: float, mu_max: float, linearized: bool = False) -> float:
    """Upper bound on sup_b |sum_i b(i) xi(i)|_p, uniform in the horizon.

    ``mu_max`` is the largest p-th moment norm over the martingale differences.
    With ``linearized=True`` the constant K_Os * p / ln p replaces Os(p).
    """
    _check_order(p)
    if mu_max < 0:
        raise ValueError("mu_max must be nonnegative")
    const = k_os() * p / np.log(p) if linearized else os_constant(p)
    return const * mu_max
