import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from matmart.gls import (
    Conjugate,
    PsiFunction,
    fit_log_correction,
    fit_power_exponent,
    gls_norm,
    gls_tail_curve,
    heavy_tail_T,
    heavy_tail_function,
    heavy_tail_psi,
    log_tail_bound_from_gls,
    log_theorem41_tail,
    moments_from_tail,
    tail_bound_from_gls,
    theorem41_curve,
    theorem41_tail,
    young_fenchel,
)
from matmart.mart_sim import gaussian_abs_moment
from matmart.moment_bounds import MomentProfile, build_bound_profile

# 30-digit mpmath values of the closed forms, frozen
E_HALF = 1.35914091422952262  # e / 2
E5_HALF = 74.2065795512883017  # e^5 / 2
TAIL_AT_E = 0.513762730626940424  # 2 exp(-e / 2)
SQRT_2_OVER_PI = 0.797884560802865356  # Gaussian |eta|_1 / sqrt(1)
PSI_49 = 1.58489319246111351  # 0.1^(-1/5)


def builtin_families():
    bound = build_bound_profile(MomentProfile.constant(1.0), 0.0, 1)
    return {
        "power1": PsiFunction.power(1),
        "power2": PsiFunction.power(2),
        "power3": PsiFunction.power(3),
        "constant": PsiFunction.constant(1.0, 7.0),
        "heavy": PsiFunction.heavy(5.0, 0.0),
        "heavy_log": PsiFunction.heavy(6.0, -0.5, "log"),
        "tabulated": PsiFunction.tabulated([2, 3, 5, 8], [1.0, 1.5, 1.6, 3.0]),
        "from_beta": PsiFunction.from_beta(bound),
    }


# -- GLS norm


def test_gls_norm_examples():
    psi = PsiFunction.power(2)
    grid = np.linspace(1.0001, 64, 4000)
    assert gls_norm(psi, psi, grid) == pytest.approx(1.0, rel=1e-14)
    assert gls_norm(lambda p: 2 * psi(p), psi, grid) == pytest.approx(2.0, rel=1e-14)
    ratios = [gaussian_abs_moment(p) / math.sqrt(p) for p in grid]
    g = gls_norm(gaussian_abs_moment, psi, grid)
    assert g == pytest.approx(0.80, abs=5e-3)
    assert grid[int(np.argmax(ratios))] < 1.01
    assert g == pytest.approx(SQRT_2_OVER_PI, rel=1e-3)
    with pytest.raises(ValueError):
        gls_norm(psi, psi, [])


def test_gls_norm_detects_growth():
    psi = PsiFunction.power(2)
    grid = np.linspace(2, 64, 100)
    assert gls_norm(lambda p: math.exp(p), psi, grid) == math.inf


# -- conjugate


def test_young_fenchel_closed_forms():
    psi = PsiFunction.power(2)
    assert young_fenchel(psi, 1.0) == pytest.approx(E_HALF, rel=1e-6)
    assert young_fenchel(psi, 3.0) == pytest.approx(E5_HALF, rel=1e-6)
    for t in np.linspace(1, 3, 41):
        assert young_fenchel(psi, t) == pytest.approx(math.exp(2 * t - 1) / 2, rel=1e-2)
    with pytest.raises(ValueError):
        young_fenchel(psi, 0.5)
    with pytest.raises(ValueError):
        young_fenchel(psi, 2.0, p_grid=[])


def test_young_fenchel_constant_psi():
    b = 7.0
    psi = PsiFunction.constant(1.0, b)
    grid = psi.grid()
    for t in (1.0, 2.5):
        assert young_fenchel(psi, t) == pytest.approx(grid.max() * t, rel=1e-15)
        assert young_fenchel(psi, t) == pytest.approx(b * t, rel=1e-9)


@given(st.floats(1.0, 5.0), st.floats(1.5, 60.0))
def test_conjugate_above_any_grid_point(t, p):
    psi = PsiFunction.power(2)
    assert young_fenchel(psi, t) >= p * t - p * math.log(psi(p)) - 1e-9


@pytest.mark.parametrize("name", list(builtin_families()))
def test_conjugate_convex_nondecreasing(name):
    psi = builtin_families()[name]
    conj = Conjugate(psi)
    u = np.linspace(1, 4, 301)
    h = conj(u)
    scale = np.abs(h).max()
    assert np.all(np.diff(h) >= -1e-9 * scale)
    assert np.all(h[2:] - 2 * h[1:-1] + h[:-2] >= -1e-9 * scale)


# -- tail bounds


def test_tail_bound_examples():
    psi = PsiFunction.power(2)
    assert tail_bound_from_gls(math.e, 1.0, psi) == pytest.approx(TAIL_AT_E, rel=1e-6)
    for t in (10.0, 30.0, 80.0):
        closed = 2 * math.exp(-(t**2) / (2 * math.e))
        assert tail_bound_from_gls(t, 1.0, psi) == pytest.approx(closed, rel=1e-4)
    v = tail_bound_from_gls(math.e * 2.0, 2.0, psi)
    assert 0 < v <= 1
    with pytest.raises(ValueError, match="eK"):
        tail_bound_from_gls(2.0, 1.0, psi)
    with pytest.raises(ValueError):
        tail_bound_from_gls(5.0, 0.0, psi)


def test_theorem41_rademacher_against_scan():
    bound = build_bound_profile(MomentProfile.constant(1.0), 0.0, 1)
    psi = PsiFunction.from_beta(bound)
    grid = np.concatenate([np.linspace(1.0001, 4, 300), bound.p_grid])
    scan = max(p - p * math.log(bound.beta(p)) for p in grid)
    assert log_theorem41_tail(math.e, psi, p_grid=grid) == pytest.approx(-scan, rel=1e-12)
    assert theorem41_tail(math.e, psi, p_grid=grid) == pytest.approx(min(1.0, math.exp(-scan)))
    assert theorem41_tail(math.e * 1.001, psi) <= 1.0
    with pytest.raises(ValueError):
        theorem41_tail(2.0, psi)


def test_theorem41_power_log_shape_nontrivial_range():
    # -ln(bound) ~ t^(1/(delta+1)) once the bound leaves the clamp at 1
    bound = build_bound_profile(MomentProfile.power_log(1.0, 1.0), 0.0, 1)
    psi = PsiFunction.from_beta(bound)
    t = np.geomspace(1e5, 1e8, 40)
    lb = log_theorem41_tail(t, psi)
    assert np.all(lb < 0)
    a, _ = fit_power_exponent(t, -lb)
    assert a == pytest.approx(0.5, abs=0.05)


def test_theorem41_weibull_model_shape_nontrivial_range():
    from matmart.mart_sim import MartingaleModel
    from matmart.normed_space import NormSpec, analytic_kappa
    from matmart.verify import model_moment_profile

    model = MartingaleModel(2, 25, "weibull_sym", {"delta": 1.0})
    spec = NormSpec(2)
    bound = build_bound_profile(model_moment_profile(model, spec), analytic_kappa(spec), model.n)
    psi = PsiFunction.from_beta(bound)
    # below inf beta the bound is identically 1; the shape shows far above it
    assert theorem41_tail(bound.rho_inf * 0.999, psi) == 1.0
    t = np.geomspace(1e8, 1e12, 40)
    lb = log_theorem41_tail(t, psi)
    a, _ = fit_power_exponent(t, -lb)
    assert a == pytest.approx(0.5, abs=0.05)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_subgaussian_exponent(m):
    psi = PsiFunction.power(m)
    grid = np.geomspace(1 + 1e-9, 64, 2000)
    mom = gaussian_abs_moment if m == 2 else (lambda p: 0.5 * p ** (1 / m))
    K = gls_norm(mom, psi, grid)
    assert K <= 1
    t = np.geomspace(math.e * 1.0001, 100, 60)
    lb = log_tail_bound_from_gls(t, K, psi)
    a, c = fit_power_exponent(t, math.log(2) - lb)
    assert a == pytest.approx(m, rel=0.05)
    assert c > 0
    assert np.all(lb <= math.log(2) - c * t**m * (1 - 1e-6))


@pytest.mark.parametrize("b,gamma,s", [(5.0, 0.0, "one"), (5.0, 1.0, "one"), (6.0, -0.5, "log")])
def test_heavy_round_trip(b, gamma, s):
    psi = PsiFunction.heavy(b, gamma, s)
    pg = psi.grid()
    pg = pg[pg < b - 1e-6]
    mom = dict(zip(pg, moments_from_tail(heavy_tail_function(b, gamma, s), pg)))
    K = gls_norm(mom.__getitem__, psi, pg)
    assert math.isfinite(K)
    lt = np.linspace(20, 200, 200)
    lb = log_tail_bound_from_gls(np.exp(lt), K, psi)
    free = fit_log_correction(np.exp(lt), lb, s=s)
    assert free["slope"] == pytest.approx(-b, abs=0.1)
    assert free["log_exponent"] == pytest.approx(gamma + 1, abs=0.3)
    # dominated by const * T^(b, gamma + 1, S): the log ratio stays bounded
    ref = -b * lt + (gamma + 1) * np.log(lt) + np.log(np.asarray(_s(s)(lt)))
    gap = lb - ref
    assert gap.max() - gap.min() < 1.0


def _s(name):
    from matmart.moment_bounds import slowly_varying

    return slowly_varying(name)


@pytest.mark.parametrize("name", list(builtin_families()))
def test_tail_curves_clamped_and_monotone(name):
    psi = builtin_families()[name]
    t = np.geomspace(math.e, 1e6, 80)
    curve = gls_tail_curve(t, 1.0, psi)
    assert np.all((curve.values >= 0) & (curve.values <= 1))
    assert np.all(np.diff(curve.values) <= 1e-15)
    assert curve.provenance == "gls_tail_2exp_conjugate"


def test_theorem41_curve_rows():
    bound = build_bound_profile(MomentProfile.heavy(6.0), 0.0, 4)
    curve = theorem41_curve(np.geomspace(math.e, 1e9, 30), bound)
    assert np.all(np.diff(curve.values) <= 1e-15)
    assert np.all((curve.values >= 0) & (curve.values <= 1))
    assert curve.values[-1] < 1
    row = next(curve.rows())
    assert set(row) == {"t", "bound", "provenance"}


# -- heavy tail helpers


def test_heavy_tail_T_examples():
    assert heavy_tail_T(5, 0, "one", math.e) == pytest.approx(math.exp(-5), rel=1e-14)
    assert heavy_tail_T(5, 2, "one", math.e) == pytest.approx(math.exp(-5), rel=1e-14)
    t = np.geomspace(1e2, 1e4, 50)
    a, _ = fit_power_exponent(t, heavy_tail_T(5, 0, "one", t))
    assert a == pytest.approx(-5, abs=0.01)
    with pytest.raises(ValueError):
        heavy_tail_T(5, 0, "one", 2.0)
    with pytest.raises(ValueError):
        heavy_tail_T(1, 0, "one", 5.0)


def test_heavy_tail_psi_examples():
    for p in (1.0, 2.5, 4.99):
        assert heavy_tail_psi(5, -1, "one", p) == pytest.approx(1.0)
    assert heavy_tail_psi(5, 0, "one", 4.0) == pytest.approx(1.0)
    assert heavy_tail_psi(5, 0, "one", 4.9) == pytest.approx(PSI_49, rel=1e-12)
    with pytest.raises(ValueError):
        heavy_tail_psi(5, 0, "one", 5.0)
    with pytest.raises(ValueError):
        heavy_tail_psi(5, 0, "one", 0.5)


def test_heavy_psi_diverges():
    psi = PsiFunction.heavy(5.0, 0.0)
    p = 5 - np.geomspace(1e-1, 1e-12, 20)
    v = psi(p)
    assert np.all(np.diff(v) > 0) and v[-1] > 100


def test_psi_domain_and_positivity():
    psi = PsiFunction.heavy(4.0, 1.0, "log")
    g = psi.grid()
    assert g.min() > 1 and g.max() < 4
    assert np.all(psi(g) > 0)
    with pytest.raises(ValueError):
        psi(4.0)
    with pytest.raises(ValueError):
        PsiFunction.tabulated([2, 3], [1.0, 0.0])


def test_moments_from_tail_exact_cases():
    # exponential tail: E|xi|^p = Gamma(p + 1)
    tail = lambda t: np.exp(-t)
    for p in (1.0, 2.0, 4.0):
        assert moments_from_tail(tail, p) == pytest.approx(math.gamma(p + 1) ** (1 / p), rel=1e-6)


def test_fit_helpers():
    x = np.geomspace(1, 100, 20)
    assert fit_power_exponent(x, 3 * x**1.7) == pytest.approx((1.7, 3.0))
    t = np.exp(np.linspace(20, 200, 50))
    lt = np.log(t)
    fit = fit_log_correction(t, 2.0 - 4.0 * lt + 1.5 * np.log(lt))
    assert fit["slope"] == pytest.approx(-4.0) and fit["log_exponent"] == pytest.approx(1.5)
    with pytest.raises(ValueError):
        fit_power_exponent([1, -1], [1, 1])
