"""Monte Carlo domination checks of the moment and tail bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm as _normal

from . import mart_sim
from .gls import TailCurve
from .moment_bounds import BoundProfile, MomentProfile, entry_moment_profile
from .normed_space import NormSpec, operator_norms, operator_tensor_set
from .osekowski import os_constant

N_SIGMA = 3.0
WILSON_LEVEL = 0.99
AGGREGATION_NOTE = (
    "mu(p) = c_Z * modulation bound * max entry moment, c_Z = sup_z sum |z(i,j)|"
)


def empirical_moment(samples, p: float) -> tuple[float, float]:
    """(mean |s|^p)^(1/p) and its delta-method standard error."""
    s = np.abs(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("samples must be nonempty")
    if p < 1:
        raise ValueError("p must be >= 1")
    top = s.max()
    if top == 0:
        return 0.0, 0.0
    # work with s / max(s) so tiny or huge samples neither underflow nor overflow
    pw = (s / top) ** p
    m = pw.mean()
    se_m = pw.std(ddof=1) / math.sqrt(s.size) if s.size > 1 else 0.0
    est = top * m ** (1.0 / p)
    return float(est), float(est / (p * m) * se_m)


def wilson_band(k, n: int, level: float = WILSON_LEVEL):
    z = _normal.ppf(0.5 + level / 2)
    f = np.asarray(k, dtype=float) / n
    denom = 1 + z * z / n
    centre = (f + z * z / (2 * n)) / denom
    half = z * np.sqrt(f * (1 - f) / n + z * z / (4 * n * n)) / denom
    return np.maximum(centre - half, 0.0), np.minimum(centre + half, 1.0)


@dataclass
class TailEstimate:
    t: np.ndarray
    frequency: np.ndarray
    stderr: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def empirical_tail(samples, t_grid, level: float = WILSON_LEVEL) -> TailEstimate:
    """Fraction of samples >= t with a Wilson band, for each t."""
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("samples must be nonempty")
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    k = s.size - np.searchsorted(s, t, side="left")
    f = k / s.size
    lo, hi = wilson_band(k, s.size, level)
    return TailEstimate(t, f, np.sqrt(f * (1 - f) / s.size), lo, hi)


def tail_index(samples, top_fraction: float = 0.01, threshold_floor: float = 0.0) -> dict:
    """Log-log tail slope from the top fraction of |samples|.

    Maximum-likelihood (Hill) slope over exceedances of
    u = max(quantile(1 - top_fraction), threshold_floor); returns the negative
    tail index as ``slope``.
    """
    s = np.abs(np.asarray(samples, dtype=float).ravel())
    u = max(float(np.quantile(s, 1 - top_fraction)), threshold_floor)
    ex = s[s > u]
    if ex.size < 10:
        raise ValueError("too few exceedances for a tail fit")
    alpha = ex.size / np.log(ex / u).sum()
    return {"slope": -float(alpha), "stderr": float(alpha / math.sqrt(ex.size)),
            "threshold": u, "exceedances": int(ex.size)}


def tensor_c_z(spec: NormSpec) -> float:
    return operator_tensor_set(spec).abs_sum_sup()


def model_moment_profile(model: mart_sim.MartingaleModel, spec: NormSpec) -> MomentProfile:
    """Moment profile implied by a simulation model under the tensor set of ``spec``."""
    return entry_moment_profile(model.law, model.modulation_bound, tensor_c_z(spec))


@dataclass
class EmpiricalReport:
    model: dict
    spec: str
    d: int
    paths: int
    tail_paths: int
    seed: int
    kappa: float
    c_z: float
    aggregation: str
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r["verdict"] == "PASS" for r in self.rows)

    @property
    def failures(self) -> list:
        return [r for r in self.rows if r["verdict"] != "PASS"]

    def to_dict(self) -> dict:
        return {
            "model": self.model, "spec": self.spec, "d": self.d, "paths": self.paths,
            "tail_paths": self.tail_paths, "seed": self.seed, "kappa": self.kappa,
            "c_z": self.c_z, "aggregation": self.aggregation, "rows": self.rows,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EmpiricalReport":
        return cls(**data)


def verdict(empirical: float, stderr: float, bound: float) -> str:
    return "PASS" if empirical - N_SIGMA * stderr <= bound else "FAIL"


def normalized_norms(model: mart_sim.MartingaleModel, spec: NormSpec, paths: int, seed: int,
                     threads: int = 1, stream: int = 0) -> np.ndarray:
    """||V(n)|| under ``spec`` for each simulated path (not normalized by sqrt(n))."""
    terminal = mart_sim.terminal_values(model, seed, paths, threads, stream)
    return operator_norms(terminal, spec)


def bound_check_report(
    model: mart_sim.MartingaleModel,
    spec: NormSpec,
    bound: BoundProfile,
    tail: Optional[TailCurve],
    paths: int,
    seed: int,
    p_values: Sequence[float] = (4.0, 6.0, 8.0),
    tail_paths: Optional[int] = None,
    threads: int = 1,
) -> EmpiricalReport:
    """Simulate, compute ||Theta||, and compare against moment and tail bounds.

    Moment rows compare | ||Theta|| |_p with sqrt(n) * beta(p); tail rows compare
    the frequency of ||Theta|| / sqrt(n) >= t with the tail curve.
    """
    if model.d != spec.d:
        raise ValueError(f"model dimension {model.d} does not match norm dimension {spec.d}")
    if bound.n != model.n:
        raise ValueError(f"bound horizon {bound.n} does not match model horizon {model.n}")
    tail_paths = paths if tail_paths is None else tail_paths
    report = EmpiricalReport(model.to_dict(), spec.family, spec.d, paths, tail_paths, seed,
                             bound.kappa, tensor_c_z(spec), AGGREGATION_NOTE)
    norms = normalized_norms(model, spec, paths, seed, threads)
    for p in p_values:
        if p >= bound.p_plus:
            raise ValueError(f"moment order {p} is outside the finiteness range (p_plus = {bound.p_plus})")
        est, se = empirical_moment(norms, p)
        b = float(bound.moment_bound(p))
        report.rows.append({
            "kind": "moment", "x": float(p), "empirical": est, "stderr": se,
            "lower": est - N_SIGMA * se, "upper": est + N_SIGMA * se, "bound": b,
            "margin": b - est, "verdict": verdict(est, se, b),
            "provenance": "moment_bound_sqrt_n_beta",
        })
    if tail is not None:
        if tail_paths != paths:
            norms = normalized_norms(model, spec, tail_paths, seed, threads, stream=1)
        scaled = norms / math.sqrt(model.n)
        est = empirical_tail(scaled, tail.t_grid)
        for i, t in enumerate(tail.t_grid):
            b = float(tail.values[i])
            f, se = float(est.frequency[i]), float(est.stderr[i])
            report.rows.append({
                "kind": "tail", "x": float(t), "empirical": f, "stderr": se,
                "lower": float(est.lower[i]), "upper": float(est.upper[i]), "bound": b,
                "margin": b - f, "verdict": verdict(f, se, b), "provenance": tail.provenance,
            })
    return report


@dataclass
class KhintchineCheck:
    p: float
    direction: int
    empirical: float
    stderr: float
    bound: float
    passed: bool


def osekowski_domination(
    n: int = 16,
    paths: int = 100_000,
    p_values: Sequence[float] = (4.0, 6.0, 8.0),
    directions: int = 64,
    seed: int = 0,
    law: str = "rademacher",
    threads: int = 1,
) -> dict:
    """One-dimensional check of |sum_i b(i) xi(i)|_p <= Os(p) * max_l mu(l, p).

    mu(l, p) is the empirical p-th moment of the l-th difference.  Both the
    per-direction form and the sup-inside form (sup over sampled directions,
    and the exact sup ||xi||_2 over the whole sphere) are reported.
    """
    model = mart_sim.MartingaleModel(1, n, law)
    xi = mart_sim.generate_differences(model, seed, paths, threads)[:, :, 0, 0]
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(2**31,)))
    b = rng.standard_normal((directions, n))
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    q = xi @ b.T
    per_direction, sup_forms = [], []
    for p in p_values:
        mu_max = max(empirical_moment(xi[:, l], p)[0] for l in range(n))
        bound = os_constant(p) * mu_max
        for j in range(directions):
            est, se = empirical_moment(q[:, j], p)
            per_direction.append(KhintchineCheck(p, j, est, se, bound, est - N_SIGMA * se <= bound))
        sampled = empirical_moment(np.abs(q).max(axis=1), p)
        sphere = empirical_moment(np.linalg.norm(xi, axis=1), p)
        sup_forms.append({"p": p, "bound": bound, "sup_sampled": sampled, "sup_sphere": sphere})
    return {"per_direction": per_direction, "sup_forms": sup_forms}
