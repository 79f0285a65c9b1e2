"""Simulation of matrix martingale-difference sequences.

Paths are generated in fixed blocks of ``BLOCK_SIZE`` path indices.  Each block
draws from its own Philox stream keyed by (seed, block index), so the output
does not depend on how blocks are scheduled across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize, special

BLOCK_SIZE = 4096
PARETO_T0 = math.e

ENTRY_LAWS = ("rademacher", "gaussian", "weibull_sym", "pareto_sym")
DEPENDENCE_MODES = ("independent", "sign_modulated")


@dataclass(frozen=True)
class MartingaleModel:
    """Law of a d x d martingale with horizon n.

    ``params`` holds the law parameters: ``sigma`` for gaussian, ``delta`` for
    weibull_sym, ``b`` and ``gamma`` for pareto_sym.
    """

    d: int
    n: int
    entry_law: str = "rademacher"
    params: dict = field(default_factory=dict)
    dependence: str = "independent"

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if self.entry_law not in ENTRY_LAWS + ("zero",):
            raise ValueError(f"unknown entry law {self.entry_law!r}")
        if self.dependence not in DEPENDENCE_MODES:
            raise ValueError(f"unknown dependence mode {self.dependence!r}")
        law = entry_law(self.entry_law, **self.params)
        object.__setattr__(self, "_law", law)

    @property
    def law(self) -> "EntryLaw":
        return self._law

    @property
    def modulation_bound(self) -> float:
        """sup of the predictable multiplier applied to the symmetric innovations."""
        return 2.0 if self.dependence == "sign_modulated" else 1.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["params"] = dict(self.law.params)
        return out


# ---------------------------------------------------------------------------
# entry laws


@dataclass(frozen=True)
class EntryLaw:
    """Symmetric scalar law with a sampler and exact absolute moments."""

    name: str
    params: dict
    draw: Callable[[np.random.Generator, tuple], np.ndarray] = field(repr=False)
    abs_moment: Callable[[float], float] = field(repr=False)
    tail: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    # moments of order >= moment_limit are infinite
    moment_limit: float = math.inf


def _rademacher() -> EntryLaw:
    return EntryLaw(
        "rademacher",
        {},
        lambda rng, shape: rng.integers(0, 2, size=shape) * 2.0 - 1.0,
        lambda p: 1.0,
        lambda t: np.where(np.asarray(t) <= 1.0, 1.0, 0.0),
    )


def _zero() -> EntryLaw:
    return EntryLaw("zero", {}, lambda rng, shape: np.zeros(shape), lambda p: 0.0,
                    lambda t: np.zeros_like(np.asarray(t, dtype=float)))


def gaussian_abs_moment(p: float, sigma: float = 1.0) -> float:
    """|N(0, sigma^2)|_p = sigma * sqrt(2) * (Gamma((p + 1) / 2) / sqrt(pi))^(1/p)."""
    return sigma * math.sqrt(2.0) * math.exp(
        (special.gammaln((p + 1) / 2) - 0.5 * math.log(math.pi)) / p
    )


def _gaussian(sigma: float = 1.0) -> EntryLaw:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return EntryLaw(
        "gaussian",
        {"sigma": sigma},
        lambda rng, shape: sigma * rng.standard_normal(shape),
        lambda p: gaussian_abs_moment(p, sigma),
        lambda t: special.erfc(np.asarray(t, dtype=float) / (sigma * math.sqrt(2.0))),
    )


def _weibull_sym(delta: float = 1.0) -> EntryLaw:
    """sign * E**delta with E standard exponential: P(|xi| > t) = exp(-t**(1/delta))."""
    if delta <= 0:
        raise ValueError("delta must be positive")

    def draw(rng, shape):
        sign = rng.integers(0, 2, size=shape) * 2.0 - 1.0
        return sign * rng.standard_exponential(shape) ** delta

    return EntryLaw(
        "weibull_sym",
        {"delta": delta},
        draw,
        lambda p: math.exp(special.gammaln(delta * p + 1) / p),
        lambda t: np.exp(-np.maximum(np.asarray(t, dtype=float), 0.0) ** (1.0 / delta)),
    )


class ParetoTail:
    """|xi| with P(|xi| > t) = t**-b * (ln t)**gamma for t >= t0, uniform core below t0."""

    def __init__(self, b: float, gamma: float = 0.0, t0: float = PARETO_T0):
        if b <= 1:
            raise ValueError("b must exceed 1")
        if t0 < math.e:
            raise ValueError("t0 must be at least e")
        if b * math.log(t0) <= gamma:
            raise ValueError("tail must be decreasing above t0: need b * ln(t0) > gamma")
        self.b, self.gamma, self.t0 = b, gamma, t0
        self.mass = self.prescribed(t0)

    def prescribed(self, t):
        t = np.asarray(t, dtype=float)
        return t ** (-self.b) * np.log(t) ** self.gamma

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        core = self.mass + (1.0 - self.mass) * (1.0 - np.clip(t, 0.0, self.t0) / self.t0)
        with np.errstate(divide="ignore", invalid="ignore"):
            upper = self.prescribed(np.maximum(t, self.t0))
        return np.where(t < self.t0, core, upper)

    def quantile_tail(self, u: np.ndarray) -> np.ndarray:
        """Solve survival(t) = u for u in (0, mass]."""
        if self.gamma == 0:
            return u ** (-1.0 / self.b)
        # ln T(t) = -b s + gamma ln s with s = ln t, decreasing for s > gamma / b
        logu = np.log(u)
        out = np.empty_like(u)
        s0 = math.log(self.t0)
        for k, lu in enumerate(logu):
            f = lambda s: -self.b * s + self.gamma * math.log(s) - lu
            hi = s0 + 1.0
            while f(hi) > 0:
                hi *= 2
            out[k] = math.exp(optimize.brentq(f, s0, hi, xtol=1e-14))
        return out

    def sample_abs(self, rng: np.random.Generator, shape) -> np.ndarray:
        u = rng.random(shape)
        out = np.empty(shape)
        tail = u < self.mass
        out[tail] = self.quantile_tail(np.maximum(u[tail], np.finfo(float).tiny))
        out[~tail] = self.t0 * (u[~tail] - self.mass) / (1.0 - self.mass)
        return out

    def abs_moment(self, p: float) -> float:
        if p >= self.b:
            return math.inf
        t0, m = self.t0, self.mass
        # int_0^t0 p t^(p-1) [m + (1-m)(1 - t/t0)] dt
        core = m * t0**p + (1.0 - m) * (t0**p - p * t0**p / (p + 1))
        if self.gamma == 0:
            upper = p * t0 ** (p - self.b) / (self.b - p)
        else:
            # substitute t = e^s
            f = lambda s: p * math.exp((p - self.b) * s) * s**self.gamma
            upper = integrate.quad(f, math.log(t0), math.inf, limit=200)[0]
        return (core + upper) ** (1.0 / p)


def _pareto_sym(b: float = 5.0, gamma: float = 0.0) -> EntryLaw:
    tail = ParetoTail(b, gamma)

    def draw(rng, shape):
        sign = rng.integers(0, 2, size=shape) * 2.0 - 1.0
        return sign * tail.sample_abs(rng, shape)

    law = EntryLaw("pareto_sym", {"b": b, "gamma": gamma}, draw, tail.abs_moment,
                   tail.survival, moment_limit=b)
    object.__setattr__(law, "pareto", tail)
    return law


_LAWS = {
    "rademacher": _rademacher,
    "gaussian": _gaussian,
    "weibull_sym": _weibull_sym,
    "pareto_sym": _pareto_sym,
    "zero": _zero,
}


def entry_law(name: str, **params) -> EntryLaw:
    try:
        factory = _LAWS[name]
    except KeyError:
        raise ValueError(f"unknown entry law {name!r}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# path generation


def modulation(v11: np.ndarray) -> np.ndarray:
    """Predictable multiplier g(V) = 1 + tanh(V(1, 1)), valued in (0, 2)."""
    return 1.0 + np.tanh(v11)


def block_rng(seed: int, block: int, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream, block))
    return np.random.Generator(np.random.Philox(ss))


def _simulate_block(model: MartingaleModel, rng: np.random.Generator, m: int) -> np.ndarray:
    """Differences for ``m`` paths, shape (m, n, d, d)."""
    d, n = model.d, model.n
    eps = model.law.draw(rng, (m, n, d, d))
    if model.dependence == "independent":
        return eps
    v11 = np.zeros(m)
    for k in range(n):
        eps[:, k] *= modulation(v11)[:, None, None]
        v11 = v11 + eps[:, k, 0, 0]
    return eps


def _blocks(paths: int):
    return [(b, min(BLOCK_SIZE, paths - b * BLOCK_SIZE)) for b in range(math.ceil(paths / BLOCK_SIZE))]


def generate_differences(
    model: MartingaleModel, seed: int, paths: int = 1, threads: int = 1, stream: int = 0
) -> np.ndarray:
    """Martingale differences for ``paths`` independent paths, shape (paths, n, d, d)."""
    return np.concatenate(
        map_blocks(model, seed, paths, lambda x: x, threads=threads, stream=stream), axis=0
    )


def map_blocks(model: MartingaleModel, seed: int, paths: int, reducer, threads: int = 1,
               stream: int = 0) -> list:
    """Apply ``reducer`` to each block of simulated differences, in block order."""
    if paths < 1:
        raise ValueError("paths must be positive")
    jobs = _blocks(paths)

    def work(job):
        block, m = job
        return reducer(_simulate_block(model, block_rng(seed, block, stream), m))

    if threads <= 1 or len(jobs) == 1:
        return [work(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, jobs))


@dataclass
class MartingalePath:
    differences: np.ndarray
    partial_sums: np.ndarray
    seed: Optional[int] = None

    @property
    def terminal(self) -> np.ndarray:
        return self.partial_sums[-1]


def assemble_martingale(differences, seed: Optional[int] = None) -> MartingalePath:
    """Partial sums V(0) = 0, V(k) = sum_{l <= k} xi(l)."""
    try:
        diffs = np.asarray(differences, dtype=float)
    except ValueError as exc:
        raise ValueError("differences must share one shape") from exc
    if diffs.dtype == object or diffs.ndim < 1 or len(diffs) == 0:
        raise ValueError("differences must be a nonempty sequence of equal-shape arrays")
    zero = np.zeros((1,) + diffs.shape[1:])
    return MartingalePath(diffs, np.concatenate([zero, np.cumsum(diffs, axis=0)]), seed)


def khintchine_sum(xi, b) -> float:
    """sum_i b(i) xi(i) for a scalar martingale path and a unit vector b."""
    xi = np.asarray(xi.differences if isinstance(xi, MartingalePath) else xi, dtype=float)
    xi = xi.reshape(len(xi), -1)
    if xi.shape[1] != 1:
        raise ValueError("khintchine_sum needs a one-dimensional martingale")
    b = np.asarray(b, dtype=float)
    if b.shape != (len(xi),):
        raise ValueError(f"b must have length {len(xi)}")
    if abs(b @ b - 1.0) > 1e-12:
        raise ValueError("b must be a Euclidean unit vector")
    return float(b @ xi[:, 0])


def terminal_values(model: MartingaleModel, seed: int, paths: int, threads: int = 1,
                    stream: int = 0) -> np.ndarray:
    """V(n) for each path, shape (paths, d, d), computed block by block."""
    return np.concatenate(
        map_blocks(model, seed, paths, lambda x: x.sum(axis=1), threads=threads, stream=stream),
        axis=0,
    )
