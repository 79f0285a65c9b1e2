"""Grand Lebesgue Space norms, Young-Fenchel conjugates and tail bounds.

For a generating function psi on (1, b) the conjugate is

    h*(u) = sup_{1 < p < b} (p u - p ln psi(p))

evaluated on a grid; psi is only assumed piecewise continuous, so no
derivative information is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import trapezoid

from .moment_bounds import BoundProfile, heavy_psi_value, slowly_varying

GRID_BODY = 6000
GRID_OPEN_CAP = 1e8
GRID_LEFT = 1 + 1e-9
ENDPOINT_POINTS = 400
ENDPOINT_DEPTH = 1e-12

SFunc = Union[str, Callable[[np.ndarray], np.ndarray]]


def _s_callable(s: SFunc) -> Callable:
    return slowly_varying(s) if isinstance(s, str) else s


@dataclass(frozen=True)
class PsiFunction:
    """A positive generating function on (1, b).

    ``func`` maps an array of orders to values; ``family`` and ``params``
    describe it for reports.
    """

    family: str
    upper: float
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    params: dict = field(default_factory=dict)

    def __call__(self, p):
        p_arr = np.asarray(p, dtype=float)
        if np.any(p_arr <= 1) or np.any(p_arr >= self.upper):
            raise ValueError(f"orders must lie in (1, {self.upper:g})")
        out = np.asarray(self.func(p_arr), dtype=float)
        return float(out) if np.ndim(p) == 0 else out

    def grid(self) -> np.ndarray:
        """Default evaluation grid, refined geometrically toward both endpoints."""
        b = self.upper
        if math.isinf(b):
            body = np.geomspace(GRID_LEFT, GRID_OPEN_CAP, GRID_BODY)
        else:
            width = b - 1.0
            body = 1.0 + width * np.linspace(1e-9, 1 - 1e-9, GRID_BODY)
            gaps = np.geomspace(width / GRID_BODY, max(ENDPOINT_DEPTH * b, 1e-13), ENDPOINT_POINTS)
            body = np.concatenate([body, b - gaps])
        left = 1.0 + np.geomspace(1e-9, 1e-3, ENDPOINT_POINTS // 4)
        grid = np.unique(np.concatenate([left, body]))
        return grid[(grid > 1) & (grid < b)]

    # built-in families

    @classmethod
    def constant(cls, value: float = 1.0, b: float = math.inf) -> "PsiFunction":
        return cls("constant", b, lambda p: np.full_like(p, value, dtype=float),
                   {"value": value, "b": b})

    @classmethod
    def power(cls, m: float) -> "PsiFunction":
        """psi(p) = p**(1/m); m = 2 is the subgaussian case."""
        if m <= 0:
            raise ValueError("m must be positive")
        return cls("power", math.inf, lambda p: p ** (1.0 / m), {"m": m})

    @classmethod
    def heavy(cls, b: float, gamma: float = 0.0, s: SFunc = "one") -> "PsiFunction":
        sf = _s_callable(s)
        return cls("heavy", b, lambda p: heavy_psi_value(b, gamma, sf, p),
                   {"b": b, "gamma": gamma, "S": s if isinstance(s, str) else "custom"})

    @classmethod
    def tabulated(cls, p_grid, values, b: Optional[float] = None) -> "PsiFunction":
        """Piecewise-constant psi taking the value at the next grid point up."""
        p_grid = np.asarray(p_grid, dtype=float)
        values = np.asarray(values, dtype=float)
        order = np.argsort(p_grid)
        p_grid, values = p_grid[order], values[order]
        if np.any(values <= 0):
            raise ValueError("psi must be strictly positive")
        upper = float(p_grid[-1]) if b is None else b

        def f(p):
            idx = np.minimum(np.searchsorted(p_grid, p * (1 - 1e-12)), len(p_grid) - 1)
            return values[idx]

        return cls("tabulated", upper, f, {"p": p_grid.tolist(), "psi": values.tolist()})

    @classmethod
    def from_beta(cls, bound: BoundProfile) -> "PsiFunction":
        """psi = beta from a bound profile, on (1, p_plus)."""

        def f(p):
            return np.array([bound.beta(float(q)) for q in np.ravel(p)]).reshape(np.shape(p))

        return cls("from_beta", bound.p_plus, f,
                   {"kappa": bound.kappa, "p_minus": bound.p_minus, "p_plus": bound.p_plus})


def _grid_for(psi: PsiFunction, p_grid) -> np.ndarray:
    grid = psi.grid() if p_grid is None else np.asarray(p_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("p_grid must be nonempty")
    return grid


def gls_norm(moment_fn: Callable, psi: PsiFunction, p_grid) -> float:
    """sup over the grid of moment_fn(p) / psi(p).

    Returns inf when the ratio keeps growing: the largest ratio in the last
    tenth of the grid exceeds ten times the largest ratio elsewhere.
    """
    grid = np.asarray(p_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("p_grid must be nonempty")
    ratios = np.array([moment_fn(p) for p in grid], dtype=float) / psi(grid)
    if not np.all(np.isfinite(ratios)):
        return math.inf
    cut = max(1, int(0.9 * grid.size))
    if grid.size >= 10 and ratios[cut:].max() > 10 * ratios[:cut].max():
        return math.inf
    return float(ratios.max())


class Conjugate:
    """Tabulated h = p ln psi(p) with fast evaluation of h*(u) at many points."""

    def __init__(self, psi: PsiFunction, p_grid=None):
        self.psi = psi
        self.p = _grid_for(psi, p_grid)
        # psi = 0 (a degenerate zero variable) gives h = -inf and a zero tail
        with np.errstate(divide="ignore"):
            self.h = self.p * np.log(psi(self.p))

    def __call__(self, u):
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.empty_like(u_arr)
        for start in range(0, u_arr.size, 256):
            chunk = u_arr[start:start + 256]
            out[start:start + 256] = (chunk[:, None] * self.p[None, :] - self.h[None, :]).max(axis=1)
        return float(out[0]) if np.ndim(u) == 0 else out


def young_fenchel(psi: PsiFunction, t: float, p_grid=None) -> float:
    """h*(t) = sup_p (p t - p ln psi(p)) over a grid inside psi's domain."""
    if t < 1:
        raise ValueError(f"the conjugate is taken for t >= 1, got {t!r}")
    return Conjugate(psi, p_grid)(float(t))


@dataclass
class TailCurve:
    t_grid: np.ndarray
    values: np.ndarray
    provenance: str
    K: Optional[float] = None

    def rows(self):
        for t, v in zip(self.t_grid, self.values):
            yield {"t": float(t), "bound": float(v), "provenance": self.provenance}


def _clamp(x):
    return np.clip(x, 0.0, 1.0)


def tail_bound_from_gls(t, K: float, psi: PsiFunction, p_grid=None, conj: Optional[Conjugate] = None):
    """2 exp(-h*(ln(t / K))) for t >= e K, clamped to [0, 1]."""
    if not K > 0:
        raise ValueError("K must be positive")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < math.e * K * (1 - 1e-12)):
        raise ValueError(f"tail estimate holds for t >= eK = {math.e * K:g}")
    conj = Conjugate(psi, p_grid) if conj is None else conj
    u = np.maximum(np.log(t_arr / K), 1.0)
    out = _clamp(2.0 * np.exp(-conj(u)))
    return float(out) if np.ndim(t) == 0 else out


def theorem41_tail(t, beta_as_psi: PsiFunction, p_grid=None, conj: Optional[Conjugate] = None):
    """exp(-h*[beta](ln t)) for t >= e, clamped to [0, 1]; bounds P(||Theta|| / sqrt(n) > t)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < math.e * (1 - 1e-12)):
        raise ValueError("tail estimate holds for t >= e")
    conj = Conjugate(beta_as_psi, p_grid) if conj is None else conj
    out = _clamp(np.exp(-conj(np.maximum(np.log(t_arr), 1.0))))
    return float(out) if np.ndim(t) == 0 else out


def log_tail_bound_from_gls(t, K: float, psi: PsiFunction, p_grid=None, conj: Optional[Conjugate] = None):
    """ln 2 - h*(ln(t / K)) without clamping, for shape fits where the bound underflows."""
    conj = Conjugate(psi, p_grid) if conj is None else conj
    out = math.log(2.0) - conj(np.log(np.asarray(t, dtype=float) / K))
    return out


def log_theorem41_tail(t, beta_as_psi: PsiFunction, p_grid=None, conj: Optional[Conjugate] = None):
    """-h*[beta](ln t) without clamping."""
    conj = Conjugate(beta_as_psi, p_grid) if conj is None else conj
    return -conj(np.log(np.asarray(t, dtype=float)))


def gls_tail_curve(t_grid, K: float, psi: PsiFunction, p_grid=None) -> TailCurve:
    t_grid = np.asarray(t_grid, dtype=float)
    vals = tail_bound_from_gls(t_grid, K, psi, p_grid)
    return TailCurve(t_grid, np.atleast_1d(vals), "gls_tail_2exp_conjugate", K)


def theorem41_curve(t_grid, bound: BoundProfile, p_grid=None) -> TailCurve:
    t_grid = np.asarray(t_grid, dtype=float)
    vals = theorem41_tail(t_grid, PsiFunction.from_beta(bound), p_grid)
    return TailCurve(t_grid, np.atleast_1d(vals), "normalized_norm_tail_exp_conjugate_beta")


def heavy_tail_T(b: float, gamma: float, s: SFunc, t):
    """t^-b (ln t)^gamma S(ln t) for t >= e, clamped to [0, 1]."""
    if b <= 1:
        raise ValueError("b must exceed 1")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < math.e * (1 - 1e-12)):
        raise ValueError("tail function is defined for t >= e")
    lt = np.log(t_arr)
    out = _clamp(t_arr ** (-b) * lt**gamma * np.asarray(_s_callable(s)(lt), dtype=float))
    return float(out) if np.ndim(t) == 0 else out


def heavy_tail_psi(b: float, gamma: float, s: SFunc, p):
    """(b - p)^(-(gamma + 1) / b) S(1 / (b - p))^(1 / b) for 1 <= p < b."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr >= b):
        raise ValueError(f"p must be below b = {b:g}")
    if np.any(p_arr < 1):
        raise ValueError("p must be at least 1")
    out = heavy_psi_value(b, gamma, _s_callable(s), p_arr)
    return float(out) if np.ndim(p) == 0 else out


def moments_from_tail(tail: Callable, p, t_max: float = 1e6, nodes: int = 10_000, t_min: float = 1e-8):
    """|xi|_p from the tail function via E|xi|^p = int_0^inf p t^(p-1) T(t) dt.

    Trapezoid rule in ln t on ``nodes`` log-spaced points of [t_min, t_max];
    mass beyond t_max is dropped.
    """
    s = np.linspace(math.log(t_min), math.log(t_max), nodes)
    t = np.exp(s)
    tail_vals = np.asarray(tail(t), dtype=float)
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    out = np.empty_like(p_arr)
    for k, q in enumerate(p_arr):
        integrand = q * t**q * tail_vals
        out[k] = (trapezoid(integrand, s) + t_min**q) ** (1.0 / q)
    return float(out[0]) if np.ndim(p) == 0 else out


def heavy_tail_function(b: float, gamma: float, s: SFunc = "one") -> Callable:
    """min(1, T^(b, gamma, S)) on t >= e and 1 below e, usable on all of (0, inf)."""

    def tail(t):
        t = np.asarray(t, dtype=float)
        upper = heavy_tail_T(b, gamma, s, np.maximum(t, math.e))
        return np.where(t < math.e, 1.0, upper)

    return tail


def fit_power_exponent(x, y) -> tuple[float, float]:
    """Least-squares fit y = c * x**a on positive data; returns (a, c)."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power fit needs positive data")
    a, lc = np.polyfit(np.log(x), np.log(y), 1)
    return float(a), float(math.exp(lc))


def fit_log_correction(t, log_bound, slope: Optional[float] = None, s: Optional[SFunc] = None) -> dict:
    """Fit ln bound = c + a ln t + g ln ln t + ln S(ln t), given ``log_bound`` = ln bound.

    With ``slope`` given, a is held fixed and only (c, g) are fitted.
    """
    t, lb = np.asarray(t, dtype=float), np.asarray(log_bound, dtype=float)
    lt = np.log(t)
    if s is not None:
        lb = lb - np.log(np.asarray(_s_callable(s)(lt), dtype=float))
    llt = np.log(lt)
    if slope is None:
        design = np.column_stack([np.ones_like(lt), lt, llt])
        c, a, g = np.linalg.lstsq(design, lb, rcond=None)[0]
    else:
        design = np.column_stack([np.ones_like(lt), llt])
        c, g = np.linalg.lstsq(design, lb - slope * lt, rcond=None)[0]
        a = slope
    return {"intercept": float(c), "slope": float(a), "log_exponent": float(g)}
