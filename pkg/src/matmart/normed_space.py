"""Finite-dimensional l_p norms, operator norms, extreme points and covering entropy.

Operator norms are represented as maxima of a bilinear form over rank-one
arrays z(i, j) = x_i * y_j, where x runs over extreme points of the dual unit
ball and y over extreme points of the primal unit ball, so that
sum_{i,j} A(i, j) z(i, j) = x . (A y).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import norm as _normal
from scipy.stats import qmc

DEFAULT_CLOUD_SIZE = 2**16
DEFAULT_EPS_GRID = np.geomspace(0.01, 0.3, 12)
# fraction of a sampled cloud a cover may use before the cloud resolution,
# not the set, dominates the count
SATURATION_FRACTION = 1 / 20
POWER_TOL = 1e-10
POWER_MAXITER = 10_000


@dataclass(frozen=True)
class NormSpec:
    """An l_p norm on R^d; ``p = inf`` is the max norm."""

    d: int
    p: float = 2.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d!r}")
        if not self.p >= 1:
            raise ValueError(f"norm exponent must be >= 1, got {self.p!r}")

    @classmethod
    def parse(cls, d: int, family: str) -> "NormSpec":
        """Build from a family name such as ``"l1"``, ``"l2"``, ``"linf"`` or ``"l3.5"``."""
        family = family.strip().lower()
        if family in ("linf", "l_inf", "inf"):
            return cls(d, math.inf)
        if family.startswith("l"):
            return cls(d, float(family[1:].lstrip("_")))
        raise ValueError(f"unknown norm family {family!r}")

    @property
    def family(self) -> str:
        if math.isinf(self.p):
            return "linf"
        return f"l{self.p:g}"

    def dual(self) -> "NormSpec":
        if self.p == 1:
            return NormSpec(self.d, math.inf)
        if math.isinf(self.p):
            return NormSpec(self.d, 1.0)
        return NormSpec(self.d, self.p / (self.p - 1.0))


def _lp(x: np.ndarray, p: float, axis: int = -1) -> np.ndarray:
    a = np.abs(x)
    if math.isinf(p):
        return a.max(axis=axis)
    if p == 1:
        return a.sum(axis=axis)
    # scale by the largest entry so tiny or huge vectors neither underflow nor overflow
    m = a.max(axis=axis, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    r = a / safe
    if p == 2:
        s = np.sqrt((r * r).sum(axis=axis))
    else:
        s = (r**p).sum(axis=axis) ** (1.0 / p)
    return s * np.squeeze(safe, axis=axis) * (np.squeeze(m, axis=axis) > 0)


def vector_norm(x, spec: NormSpec) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.d,):
        raise ValueError(f"expected a vector of length {spec.d}, got shape {x.shape}")
    return float(_lp(x, spec.p))


# ---------------------------------------------------------------------------
# extreme points


def _sphere_from_uniform(u: np.ndarray, d: int, p: float) -> np.ndarray:
    """Map points of the open unit cube onto the l_p unit sphere in R^d."""
    if d == 1:
        return np.where(u[:, :1] < 0.5, -1.0, 1.0)
    if d == 2 and p == 2:
        ang = 2 * np.pi * u[:, 0]
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    g = _normal.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / _lp(g, p)[:, None]


def _sobol(dims: int, m: int, seed: int) -> np.ndarray:
    """First ``m`` points of a scrambled Sobol sequence, drawn in a power-of-two batch."""
    k = max(int(m - 1).bit_length(), 0)
    return qmc.Sobol(dims, seed=seed).random_base2(k)[:m]


def _qmc_dims(d: int, p: float) -> int:
    return 1 if d == 2 and p == 2 else d


@dataclass(frozen=True)
class ExtremePointSet:
    """Extreme points of the unit ball of ``spec``.

    Polytope balls (l1, linf) carry the full finite list in ``points``;
    strictly convex balls are represented by a seeded low-discrepancy sampler.
    """

    spec: NormSpec
    points: Optional[np.ndarray] = None

    @property
    def finite(self) -> bool:
        return self.points is not None

    @property
    def qmc_dims(self) -> int:
        return 1 if self.finite else _qmc_dims(self.spec.d, self.spec.p)

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Deterministic map from uniforms of shape (m, qmc_dims) to points."""
        if self.finite:
            idx = np.minimum((u[:, 0] * len(self.points)).astype(int), len(self.points) - 1)
            return self.points[idx]
        return _sphere_from_uniform(u, self.spec.d, self.spec.p)

    def sample(self, m: int, seed: int = 0) -> np.ndarray:
        if self.finite:
            return self.points.copy()
        return self.from_uniform(_sobol(self.qmc_dims, m, seed))

    def max_l1(self) -> float:
        """sup of ||x||_1 over the set (analytic for sampled spheres)."""
        if self.finite:
            return float(_lp(self.points, 1).max())
        return self.spec.d ** (1.0 - 1.0 / self.spec.p)


def extreme_points(spec: NormSpec) -> ExtremePointSet:
    d = spec.d
    if spec.p == 1:
        eye = np.eye(d)
        return ExtremePointSet(spec, np.concatenate([eye, -eye]))
    if math.isinf(spec.p):
        cube = np.array(list(itertools.product((-1.0, 1.0), repeat=d)))
        return ExtremePointSet(spec, cube)
    return ExtremePointSet(spec)


# ---------------------------------------------------------------------------
# operator norms


def _spectral_2x2(a: np.ndarray) -> np.ndarray:
    """Closed-form spectral norm for a stack of 2x2 matrices."""
    s = (a * a).sum(axis=(-2, -1))
    det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    # largest eigenvalue of A^T A: (s + sqrt(s^2 - 4 det^2)) / 2
    disc = np.sqrt(np.maximum(s * s - 4 * det * det, 0.0))
    return np.sqrt((s + disc) / 2)


def power_iteration(w: np.ndarray, tol: float = POWER_TOL, maxiter: int = POWER_MAXITER) -> float:
    """Largest eigenvalue of a symmetric positive semidefinite matrix."""
    d = w.shape[0]
    v = np.ones(d) / np.sqrt(d) + np.linspace(0.0, 1e-3, d)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(maxiter):
        wv = w @ v
        nrm = np.linalg.norm(wv)
        if nrm == 0.0:
            return 0.0
        v = wv / nrm
        new = float(v @ w @ v)
        if abs(new - lam) <= tol * max(abs(new), 1.0):
            return new
        lam = new
    return lam


def _check_square(a: np.ndarray, spec: NormSpec) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    if a.shape[-1] != spec.d:
        raise ValueError(f"matrix dimension {a.shape[-1]} does not match spec dimension {spec.d}")
    return a


def operator_norms(a, spec: NormSpec) -> np.ndarray:
    """Operator norms for a stack of matrices of shape (..., d, d)."""
    a = _check_square(a, spec)
    d = spec.d
    if spec.p == 1 or math.isinf(spec.p):
        pts = extreme_points(spec).points
        images = np.einsum("...ij,kj->...ki", a, pts)
        return _lp(images, spec.p).max(axis=-1)
    if spec.p == 2:
        if d == 1:
            return np.abs(a[..., 0, 0])
        if d == 2:
            return _spectral_2x2(a)
        flat = a.reshape(-1, d, d)
        out = np.array([np.sqrt(max(power_iteration(m.T @ m), 0.0)) for m in flat])
        return out.reshape(a.shape[:-2])
    flat = a.reshape(-1, d, d)
    out = np.array([_lp_operator_norm(m, spec) for m in flat])
    return out.reshape(a.shape[:-2])


def operator_norm(a, spec: NormSpec) -> float:
    """sup_{x != 0} ||A x|| / ||x|| for a single square matrix."""
    a = _check_square(a, spec)
    if a.ndim != 2:
        raise ValueError("operator_norm takes a single matrix; use operator_norms for stacks")
    return float(operator_norms(a, spec))


def _lp_operator_norm(a: np.ndarray, spec: NormSpec, cloud: int = 4096) -> float:
    from scipy.optimize import minimize

    xs = extreme_points(spec).sample(cloud)
    vals = _lp(xs @ a.T, spec.p)
    x0 = xs[int(np.argmax(vals))]

    def neg_ratio(x):
        nx = _lp(x, spec.p)
        return -_lp(a @ x, spec.p) / nx if nx > 0 else 0.0

    res = minimize(neg_ratio, x0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14})
    return float(max(-res.fun, vals.max()))


# ---------------------------------------------------------------------------
# tensor extreme sets


@dataclass(frozen=True)
class TensorExtremeSet:
    """Rank-one arrays z(i, j) = x_i * y_j with x from ``x_side`` and y from ``y_side``."""

    x_side: ExtremePointSet
    y_side: ExtremePointSet

    def __post_init__(self):
        if self.x_side.spec.d != self.y_side.spec.d:
            raise ValueError(
                f"dimension mismatch: {self.x_side.spec.d} vs {self.y_side.spec.d}"
            )

    @property
    def d(self) -> int:
        return self.x_side.spec.d

    @property
    def finite(self) -> bool:
        return self.x_side.finite and self.y_side.finite

    def __len__(self) -> int:
        if not self.finite:
            raise TypeError("sampled tensor sets have no finite size")
        return len(self.x_side.points) * len(self.y_side.points)

    def elements(self) -> np.ndarray:
        """All elements as an array of shape (|X| * |Y|, d, d); finite sets only."""
        if not self.finite:
            raise TypeError("sampled tensor sets cannot be enumerated")
        return np.einsum("ai,bj->abij", self.x_side.points, self.y_side.points).reshape(
            -1, self.d, self.d
        )

    def cloud(self, size: int = DEFAULT_CLOUD_SIZE, seed: int = 0) -> np.ndarray:
        """Finite proxy for the set as flattened d*d vectors.

        Finite sets return their distinct elements; otherwise ``size`` points
        from a joint scrambled Sobol sequence over both factors.
        """
        if self.finite:
            return np.unique(self.elements().reshape(-1, self.d * self.d), axis=0)
        kx, ky = self.x_side.qmc_dims, self.y_side.qmc_dims
        u = _sobol(kx + ky, size, seed)
        x = self.x_side.from_uniform(u[:, :kx])
        y = self.y_side.from_uniform(u[:, kx:])
        return np.einsum("ni,nj->nij", x, y).reshape(size, self.d * self.d)

    def abs_sum_sup(self) -> float:
        """sup over the set of sum_{i,j} |z(i, j)|."""
        if not (self.x_side.finite or self.y_side.finite):
            # d^(1 - 1/p) * d^(1 - 1/q) as one power, exact for conjugate pairs
            px, py = self.x_side.spec.p, self.y_side.spec.p
            return float(self.d ** ((1.0 - 1.0 / px) + (1.0 - 1.0 / py)))
        return self.x_side.max_l1() * self.y_side.max_l1()


def tensor_extreme_set(x_side: ExtremePointSet, y_side: ExtremePointSet) -> TensorExtremeSet:
    return TensorExtremeSet(x_side, y_side)


def operator_tensor_set(spec: NormSpec) -> TensorExtremeSet:
    """Tensor set whose bilinear maximum is the operator norm under ``spec``."""
    return TensorExtremeSet(extreme_points(spec.dual()), extreme_points(spec))


def bilinear_norm(theta, z: TensorExtremeSet, samples: int = 2**22, seed: int = 0) -> float:
    """max over z in Z of sum_{i,j} theta(i, j) z(i, j).

    ``samples`` is the number of elements of Z examined when a side is
    sampled: a sampled side facing a finite one gets ``samples / |finite|``
    points, two sampled sides get sqrt(samples) points each, and the maximum
    runs over the full product.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (z.d, z.d):
        raise ValueError(f"expected a {z.d}x{z.d} matrix, got shape {theta.shape}")
    if samples < 1:
        raise ValueError("samples must be positive")
    sides = (z.x_side, z.y_side)
    if sides[0].finite or sides[1].finite:
        fixed = max(len(s.points) for s in sides if s.finite)
        per_side = max(samples // fixed, 1)
    else:
        per_side = math.isqrt(samples - 1) + 1
    xs = z.x_side.sample(per_side, seed)
    ys = z.y_side.sample(per_side, seed + 1)
    if len(xs) == 0 or len(ys) == 0:
        raise ValueError("empty tensor set")
    return float((xs @ theta @ ys.T).max())


# ---------------------------------------------------------------------------
# covering entropy


def greedy_cover_size(points: np.ndarray, eps: float, tree: Optional[cKDTree] = None) -> int:
    """Size of the greedy eps-net built by scanning ``points`` in order."""
    tree = cKDTree(points) if tree is None else tree
    covered = np.zeros(len(points), dtype=bool)
    count = 0
    for i in range(len(points)):
        if covered[i]:
            continue
        count += 1
        covered[tree.query_ball_point(points[i], eps)] = True
    return count


def _check_eps(eps: float) -> None:
    if not 0 < eps < 1 / math.e:
        raise ValueError(f"eps must lie in (0, 1/e), got {eps!r}")


def covering_entropy(
    z: TensorExtremeSet, eps: float, cloud_size: int = DEFAULT_CLOUD_SIZE, seed: int = 0
) -> float:
    """ln of the greedy eps-cover size of ``z`` under the entrywise Euclidean metric."""
    _check_eps(eps)
    pts = z.cloud(cloud_size, seed)
    return math.log(greedy_cover_size(pts, eps))


@dataclass
class EntropyProfile:
    eps_grid: np.ndarray
    entropy: np.ndarray
    cover_sizes: np.ndarray
    cloud_points: int
    used: np.ndarray = field(repr=False)
    intercept: float = 0.0
    slope: float = 0.0

    def rows(self):
        for e, h, n, u in zip(self.eps_grid, self.entropy, self.cover_sizes, self.used):
            yield {"eps": float(e), "entropy": float(h), "cover_size": int(n), "used_in_fit": bool(u)}


def entropic_dimension(eps_grid, entropy) -> tuple[float, float]:
    """Least-squares fit H = C + kappa * |ln eps|; returns (C, kappa) with kappa >= 0."""
    eps_grid = np.asarray(eps_grid, dtype=float)
    entropy = np.asarray(entropy, dtype=float)
    if eps_grid.shape != entropy.shape:
        raise ValueError("eps_grid and entropy must have equal length")
    if eps_grid.size < 4:
        raise ValueError(f"need at least 4 grid points, got {eps_grid.size}")
    for e in eps_grid:
        _check_eps(e)
    slope, intercept = np.polyfit(np.abs(np.log(eps_grid)), entropy, 1)
    if slope < 0:
        return float(entropy.mean()), 0.0
    return float(intercept), float(slope)


def entropy_profile(
    z: TensorExtremeSet,
    eps_grid=None,
    cloud_size: int = DEFAULT_CLOUD_SIZE,
    seed: int = 0,
) -> EntropyProfile:
    """Covering entropy on an eps grid plus the fitted entropic dimension.

    For sampled sets only grid points whose cover uses at most
    ``SATURATION_FRACTION`` of the cloud enter the fit.
    """
    eps_grid = np.sort(np.asarray(DEFAULT_EPS_GRID if eps_grid is None else eps_grid, dtype=float))
    for e in eps_grid:
        _check_eps(e)
    pts = z.cloud(cloud_size, seed)
    tree = cKDTree(pts)
    sizes = np.array([greedy_cover_size(pts, e, tree) for e in eps_grid])
    # greedy nets are not nested across eps; enforce monotonicity from the coarse end
    sizes = np.maximum.accumulate(sizes[::-1])[::-1]
    entropy = np.log(sizes)
    if z.finite:
        used = np.ones(len(eps_grid), dtype=bool)
    else:
        used = sizes <= SATURATION_FRACTION * len(pts)
    if used.sum() < 4:
        raise ValueError(
            f"only {int(used.sum())} eps values are resolved by a {len(pts)}-point cloud; "
            "increase cloud_size or coarsen eps_grid"
        )
    c, kappa = entropic_dimension(eps_grid[used], entropy[used])
    return EntropyProfile(eps_grid, entropy, sizes, len(pts), used, c, kappa)


def analytic_kappa(spec: NormSpec) -> float:
    """Conservative entropic dimension: 0 for polytope balls, 2(d-1) otherwise."""
    if spec.p == 1 or math.isinf(spec.p):
        return 0.0
    return 2.0 * (spec.d - 1)
