"""Moment bounds for operator norms of matrix martingales.

The chain is

    nu(p)   = K_Os * (p / ln p) * mu(p)                  p >= 4
    rho(p)  = nu(p) * (10 p - kappa) / (p - kappa)       p > max(kappa, 4)
    beta(p) = rho(p) on (p_minus, p_plus), and the infimum of rho over that
              interval for 1 <= p <= p_minus

and | ||Theta|| |_p <= sqrt(n) * beta(p) for p in [1, p_plus).  Here mu(p) is
the largest p-th moment norm over steps of the scalar field
sum_{i,j} z(i, j) xi_{i,j}(l), bounded by c_Z * max_{i,j} |xi_{i,j}(l)|_p with
c_Z = sup_z sum |z(i, j)|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .osekowski import k_os

GRID_SIZE = 200
GRID_CAP = 1e3
# geometric clustering toward a finite p_plus, as distances from the endpoint
ENDPOINT_DEPTH = 1e-10
ENDPOINT_POINTS = 120


class ConditionViolated(ValueError):
    """No p > max(kappa, 4) has a finite rho."""


def slowly_varying(name: str) -> Callable[[float], float]:
    """Built-in slowly varying corrections: ``"one"`` (S = 1) and ``"log"`` (S = ln(e + x))."""
    if name == "one":
        return lambda x: np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else 1.0
    if name == "log":
        return lambda x: np.log(math.e + np.asarray(x, dtype=float))
    raise ValueError(f"unknown slowly varying function {name!r}")


def heavy_psi_value(b: float, gamma: float, s: Callable, p):
    """(b - p)^(-(gamma + 1) / b) * S(1 / (b - p))^(1 / b), elementwise for p < b."""
    gap = b - np.asarray(p, dtype=float)
    return gap ** (-(gamma + 1.0) / b) * np.asarray(s(1.0 / gap), dtype=float) ** (1.0 / b)


@dataclass(frozen=True)
class MomentProfile:
    """p -> mu(p), the largest p-th moment norm of the martingale differences.

    Families:
      * ``tabulated``: values on a grid of orders; between grid points the value
        at the next grid point up is used (conservative, since moment norms are
        nondecreasing in p).  Orders past the last finite entry are infinite.
      * ``power_log``: C * p**delta * ln p.
      * ``heavy``: scale * (b - p)^(-(gamma + 1) / b) * S(1 / (b - p))^(1 / b), infinite for p >= b.
      * ``closed_form``: an arbitrary callable, with ``limit`` the first order at
        which it becomes infinite.
    """

    family: str
    params: dict = field(default_factory=dict)
    func: Optional[Callable[[float], float]] = field(default=None, repr=False, compare=False)

    @classmethod
    def tabulated(cls, p_grid, values) -> "MomentProfile":
        p_grid = np.asarray(p_grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if p_grid.shape != values.shape or p_grid.ndim != 1 or p_grid.size == 0:
            raise ValueError("tabulated profile needs matching 1-d grids")
        order = np.argsort(p_grid)
        return cls("tabulated", {"p": p_grid[order].tolist(), "mu": values[order].tolist()})

    @classmethod
    def constant(cls, value: float) -> "MomentProfile":
        return cls("closed_form", {"name": "constant", "value": value, "limit": math.inf},
                   lambda p: value)

    @classmethod
    def power_log(cls, c: float, delta: float) -> "MomentProfile":
        if c <= 0 or delta <= 0:
            raise ValueError("power_log needs C > 0 and delta > 0")
        return cls("power_log", {"C": c, "delta": delta})

    @classmethod
    def heavy(cls, b: float, gamma: float = 0.0, s: str = "one", scale: float = 1.0) -> "MomentProfile":
        if b <= 1:
            raise ValueError("heavy profile needs b > 1")
        return cls("heavy", {"b": b, "gamma": gamma, "S": s, "scale": scale})

    @classmethod
    def closed_form(cls, name: str, func: Callable[[float], float], limit: float = math.inf) -> "MomentProfile":
        return cls("closed_form", {"name": name, "limit": limit}, func)

    @property
    def limit(self) -> float:
        """Smallest order at which the profile is infinite (inf if never)."""
        if self.family == "heavy":
            return self.params["b"]
        if self.family == "closed_form":
            return self.params.get("limit", math.inf)
        if self.family == "tabulated":
            p, mu = np.array(self.params["p"]), np.array(self.params["mu"])
            finite = np.isfinite(mu)
            # orders past the last grid point are unknown, hence infinite
            return float(p[np.argmin(finite)]) if not finite.all() else math.nextafter(p[-1], math.inf)
        return math.inf

    def __call__(self, p: float) -> float:
        if p < 1:
            raise ValueError(f"moment order must be >= 1, got {p!r}")
        fam, prm = self.family, self.params
        if fam == "power_log":
            return prm["C"] * p ** prm["delta"] * math.log(p)
        if fam == "heavy":
            if p >= prm["b"]:
                return math.inf
            s = slowly_varying(prm["S"])
            return prm["scale"] * float(heavy_psi_value(prm["b"], prm["gamma"], s, p))
        if fam == "tabulated":
            grid = prm["p"]
            i = int(np.searchsorted(grid, p * (1 - 1e-12)))
            return math.inf if i >= len(grid) else float(prm["mu"][i])
        if fam == "closed_form":
            return math.inf if p >= self.limit else float(self.func(p))
        raise ValueError(f"unknown profile family {fam!r}")

    def scaled(self, factor: float) -> "MomentProfile":
        """Profile multiplied by a constant factor."""
        if factor == 1:
            return self
        if self.family == "tabulated":
            return MomentProfile.tabulated(self.params["p"], np.array(self.params["mu"]) * factor)
        if self.family == "power_log":
            return MomentProfile.power_log(self.params["C"] * factor, self.params["delta"])
        if self.family == "heavy":
            prm = dict(self.params, scale=self.params["scale"] * factor)
            return MomentProfile("heavy", prm)
        base = self
        return MomentProfile(
            "closed_form",
            dict(self.params, factor=self.params.get("factor", 1.0) * factor),
            lambda p: factor * base.func(p),
        )

    def to_dict(self) -> dict:
        return {"family": self.family, **{k: v for k, v in self.params.items()}}


def nu_osekowski(p: float, profile: MomentProfile) -> float:
    """K_Os * (p / ln p) * mu(p); infinite outside the profile's finiteness range."""
    if not p >= 4:
        raise ValueError(f"nu needs p >= 4, got {p!r}")
    mu = profile(p)
    if math.isinf(mu):
        return math.inf
    return k_os() * p / math.log(p) * mu


def _rho_factor(p: float, kappa: float) -> float:
    return (10.0 * p - kappa) / (p - kappa)


def rho(p: float, kappa: float, profile: MomentProfile) -> float:
    if not p > max(kappa, 4.0):
        raise ValueError(
            f"p = {p!r} is below the key-estimate threshold max(kappa, 4) = {max(kappa, 4.0)!r}"
        )
    return nu_osekowski(p, profile) * _rho_factor(p, kappa)


@dataclass(frozen=True)
class FinitenessInterval:
    p_minus: float
    p_plus: float
    violated: bool = False

    def __iter__(self):
        return iter((self.p_minus, self.p_plus))

    def contains(self, p: float) -> bool:
        return self.p_minus < p < self.p_plus


def finiteness_interval(profile: MomentProfile, kappa: float) -> FinitenessInterval:
    """Interval J0 = (p_minus, p_plus) where rho is finite.

    For tabulated profiles p_plus is the largest grid order with a finite entry.
    """
    lo = max(kappa, 4.0)
    if profile.family == "tabulated":
        p = np.array(profile.params["p"])
        mu = np.array(profile.params["mu"])
        stop = int(np.argmin(np.isfinite(mu))) if not np.isfinite(mu).all() else len(p)
        finite_p = p[:stop]
        if finite_p.size == 0 or finite_p.max() <= lo:
            return FinitenessInterval(lo, lo, violated=True)
        return FinitenessInterval(lo, float(finite_p.max()))
    hi = profile.limit
    if hi <= lo:
        return FinitenessInterval(lo, lo, violated=True)
    return FinitenessInterval(lo, hi)


def require_condition(interval: FinitenessInterval, kappa: float) -> None:
    if interval.violated:
        raise ConditionViolated(
            f"finiteness condition violated: no p > max(kappa, 4) = {max(kappa, 4.0):g} with finite rho"
        )


def rho_grid(interval: FinitenessInterval, size: int = GRID_SIZE) -> np.ndarray:
    """Log-spaced orders inside J0, with extra geometric points toward a finite p_plus."""
    lo = interval.p_minus * (1 + 1e-6)
    hi = min(interval.p_plus, GRID_CAP)
    if math.isfinite(interval.p_plus) and interval.p_plus <= GRID_CAP:
        width = interval.p_plus - interval.p_minus
        body = np.geomspace(lo, interval.p_plus - width / size, size)
        gaps = np.geomspace(width / size, max(ENDPOINT_DEPTH * interval.p_plus, 1e-13), ENDPOINT_POINTS)
        tail = interval.p_plus - gaps
        grid = np.concatenate([body, tail])
    else:
        grid = np.geomspace(lo, hi, size)
    # refine near the left endpoint as well
    left = interval.p_minus + (grid[0] - interval.p_minus) * np.geomspace(1, 1e3, 4)[1:]
    grid = np.unique(np.concatenate([grid, left]))
    return grid[(grid > interval.p_minus) & (grid < interval.p_plus)]


@dataclass
class BoundProfile:
    """nu, rho and beta tabulated on a grid, with the finiteness interval."""

    p_grid: np.ndarray
    nu_values: np.ndarray
    rho_values: np.ndarray
    beta_values: np.ndarray
    p_minus: float
    p_plus: float
    kappa: float
    n: int
    profile: MomentProfile = field(repr=False)
    beta_scale: float = 1.0
    # right limit of rho at p_minus, when the profile is continuous there
    rho_left: float = math.inf

    @property
    def rho_inf(self) -> float:
        return float(min(self.rho_values.min(), self.rho_left)) * self.beta_scale

    def rho_at(self, p: float) -> float:
        return rho(p, self.kappa, self.profile) * self.beta_scale

    def beta(self, p: float) -> float:
        return beta(p, (self.p_minus, self.p_plus), self.rho_at, rho_inf=self.rho_inf)

    def moment_bound(self, p: float) -> float:
        return theorem31_moment_bound(p, self.n, self)

    def rows(self):
        for p, nu, r, b in zip(self.p_grid, self.nu_values, self.rho_values, self.beta_values):
            yield {"p": float(p), "nu": float(nu), "rho": float(r), "beta": float(b)}


def beta(p: float, interval, rho_fn: Callable[[float], float], rho_inf: Optional[float] = None,
         grid: Optional[np.ndarray] = None) -> float:
    """rho(p) inside J0 and inf_{J0} rho for 1 <= p <= p_minus.

    The infimum is an exhaustive scan of ``grid`` (default: ``rho_grid``)
    unless ``rho_inf`` is supplied.
    """
    p_minus, p_plus = tuple(interval)
    if p >= p_plus:
        raise ValueError(f"beta is undefined for p >= p_plus = {p_plus!r}")
    if p < 1:
        raise ValueError("beta is defined for p >= 1")
    if p > p_minus:
        return rho_fn(p)
    if rho_inf is None:
        pts = rho_grid(FinitenessInterval(p_minus, p_plus)) if grid is None else grid
        rho_inf = min(rho_fn(s) for s in pts)
    return rho_inf


def build_bound_profile(
    profile: MomentProfile,
    kappa: float,
    n: int,
    p_grid=None,
    beta_scale: float = 1.0,
) -> BoundProfile:
    """Tabulate the bound chain; raises ConditionViolated if J0 is empty.

    ``beta_scale`` multiplies rho and beta and exists for negative controls.
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    interval = finiteness_interval(profile, kappa)
    require_condition(interval, kappa)
    grid = rho_grid(interval) if p_grid is None else np.asarray(p_grid, dtype=float)
    grid = grid[(grid > interval.p_minus) & (grid < interval.p_plus)]
    if grid.size == 0:
        raise ValueError("p grid has no points inside the finiteness interval")
    nus = np.array([nu_osekowski(p, profile) for p in grid])
    rhos = nus * np.array([_rho_factor(p, kappa) for p in grid])
    left = math.inf
    if profile.family != "tabulated" and interval.p_minus > kappa:
        left = nu_osekowski(interval.p_minus, profile) * _rho_factor(interval.p_minus, kappa)
    return BoundProfile(grid, nus, rhos, rhos * beta_scale, interval.p_minus, interval.p_plus,
                        kappa, int(n), profile, beta_scale, left)


def theorem31_moment_bound(p: float, n: int, bound: BoundProfile) -> float:
    """sqrt(n) * beta(p), an upper bound for the p-th moment norm of ||Theta||."""
    if n < 1:
        raise ValueError("n must be positive")
    return math.sqrt(n) * bound.beta(p)


def entry_moment_profile(law, modulation_bound: float = 1.0, c_z: float = 1.0) -> MomentProfile:
    """Moment profile of the scalar field built from an entry law.

    mu(p) = c_Z * modulation_bound * |xi|_p, the triangle-inequality bound for
    sum_{i,j} z(i, j) xi_{i,j} with predictable multipliers bounded by
    ``modulation_bound``.
    """
    factor = c_z * modulation_bound
    return MomentProfile.closed_form(
        f"{law.name}{'' if factor == 1 else f' x {factor:g}'}",
        lambda p: factor * law.abs_moment(p),
        limit=law.moment_limit,
    )
