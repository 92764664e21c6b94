import math

import numpy as np
import pytest

from hazardlab import asymptotics as asy
from hazardlab import conditions as cond
from hazardlab import crm, kernels

from conftest import seeded

GG = crm.GeneralizedGamma(0.5, 1.0)
EG1 = crm.ExtendedGamma(crm.Constant(1.0))
GRID = [50.0, 100.0, 200.0, 400.0, 800.0]


# ---------------------------------------------------------------------------
# I moments
# ---------------------------------------------------------------------------

def test_I_moments_closed_forms():
    k1, k2 = crm.moment(GG, 1), crm.moment(GG, 2)
    T = 7.0
    assert cond.I_moments(kernels.DykstraLaud(), GG, T, 2) \
        == pytest.approx(k2 * T ** 3 / 3, rel=1e-9)
    tau = 1.0
    assert cond.I_moments(kernels.Rectangular(tau), GG, T, 1) \
        == pytest.approx(k1 * (2 * T * tau - tau ** 2 / 2), rel=1e-9)
    with pytest.raises(ValueError):
        cond.I_moments(kernels.DykstraLaud(), GG, T, 4)


def test_I2_log_growth_for_sqrt_extended_gamma():
    # I2 ~ T^2 log T for the sqrt-profile extended gamma with the
    # monotone-increasing kernel
    eg = crm.ExtendedGamma(crm.AffineSqrt(1.0, 1.0))
    dl = kernels.DykstraLaud()
    ts = [100.0, 200.0, 400.0]
    vals = [cond.I_moments(dl, eg, T, 2) for T in ts]
    ratios = [v / (T * T * math.log(T)) for v, T in zip(vals, ts)]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))    # approaching 1 from below
    assert 0.3 < ratios[-1] < 1.0


# ---------------------------------------------------------------------------
# contraction norms
# ---------------------------------------------------------------------------

def test_condition_quantities_vanish_as_T_to_zero():
    # with C1 = sqrt(T), every rate-multiplied condition quantity vanishes
    # as the time integral empties (the 1/T-normalized kernels themselves
    # have finite limits)
    T = 1e-3
    c1 = math.sqrt(T)
    n = cond.contraction_norms(kernels.Rectangular(1.0), GG, T)
    quantities = [2 * c1 ** 2 * n.k1_l2_sq, c1 ** 4 * n.k1_l4_4,
                  c1 ** 4 * n.k11_l2_sq, c1 ** 4 * n.k21_l2_sq,
                  c1 ** 2 * n.k23_l2_sq, c1 ** 3 * n.k23_l3_3]
    for value in quantities:
        assert 0.0 <= value < 1e-2
    bigger = cond.contraction_norms(kernels.Rectangular(1.0), GG, 1.0)
    assert 2 * 1.0 * bigger.k1_l2_sq > quantities[0] * 50


def test_rect_norm_limits():
    k = [crm.moment(GG, i) for i in (1, 2, 3, 4)]
    T, tau = 800.0, 1.0
    n = cond.contraction_norms(kernels.Rectangular(tau), GG, T)
    assert 2 * T * n.k1_l2_sq == pytest.approx(32 * tau ** 3 * k[1] ** 2 / 3, rel=0.02)
    assert T * n.k23_l2_sq == pytest.approx(
        4 * tau ** 2 * k[3] + 32 * tau ** 3 * k[2] * k[0] + 64 * tau ** 4 * k[1] * k[0] ** 2,
        rel=0.02)


def test_ou_norm_limits():
    k = [crm.moment(GG, i) for i in (1, 2, 3, 4)]
    T, kap = 800.0, 1.0
    n = cond.contraction_norms(kernels.OrnsteinUhlenbeck(kap), GG, T)
    assert 2 * T * n.k1_l2_sq == pytest.approx(2 * k[1] ** 2 / kap, rel=0.02)
    assert T * n.k23_l2_sq == pytest.approx(
        k[3] + 8 * k[2] * k[0] / kap + 16 * k[1] * k[0] ** 2 / kap ** 2, rel=0.02)


def test_dl_norm_limit():
    # (2/T^2) ||k1||^2 -> (K2)^2 / 3 under the full symmetric norm
    k2 = crm.moment(GG, 2)
    n = cond.contraction_norms(kernels.DykstraLaud(), GG, 400.0)
    assert (2 / 400.0 ** 2) * n.k1_l2_sq == pytest.approx(k2 ** 2 / 3, rel=1e-3)


def test_cauchy_schwarz_contraction_bound():
    for kern in (kernels.Rectangular(1.0), kernels.OrnsteinUhlenbeck(1.0),
                 kernels.DykstraLaud(), kernels.UShaped(2.0)):
        for T in (20.0, 100.0):
            n = cond.contraction_norms(kern, GG, T)
            assert n.k11_l2_sq <= n.k1_l2_sq ** 2 * (1 + 1e-9) + 1e-9


def test_diagonal_restriction_identity():
    # k2(s, x) = k1(s, x; s, x) pointwise
    rng = seeded(401)
    for _ in range(30):
        kern = kernels.Rectangular(rng.uniform(0.5, 2.0))
        T = rng.uniform(1.0, 30.0)
        s, x = rng.uniform(0.1, 3.0), rng.uniform(0.0, T)
        k1_diag = s * s / T * kernels.Q_T(kern, T, x, x)
        k2 = s ** 2 / T * kernels.Q_T(kern, T, x, x)
        assert k1_diag == k2


def test_nonnegativity_of_condition_values():
    rep = cond.check_theorem(kernels.Rectangular(1.0), GG, cond.Theorem.PATH2ND,
                             asy.Power(0.5), [20.0, 40.0, 80.0, 160.0])
    for series in rep.values.values():
        assert all(v >= 0 for v in series)


def test_monte_carlo_norm_oracle_agreement():
    # full-dimensional importance sampling reproduces every reduced norm
    rng = seeded(402)
    configs = [
        (kernels.Rectangular(1.0), GG, 30.0),
        (kernels.Rectangular(0.7), EG1, 25.0),
        (kernels.OrnsteinUhlenbeck(1.0), GG, 30.0),
        (kernels.OrnsteinUhlenbeck(2.0), EG1, 20.0),
        (kernels.DykstraLaud(), GG, 25.0),
        (kernels.DykstraLaud(), crm.Beta(crm.Constant(1.5)), 25.0),
        (kernels.UShaped(2.0), GG, 25.0),
        (kernels.UShaped(1.5), EG1, 20.0),
        (kernels.Rectangular(1.5), crm.Beta(crm.Constant(2.0)), 30.0),
        (kernels.OrnsteinUhlenbeck(0.7), GG, 25.0),
    ]
    for kern, intensity, T in configs:
        analytic = cond.contraction_norms(kern, intensity, T).as_dict()
        mc = cond.mc_norm_oracle(kern, intensity, T, 1_000_000, rng)
        for name, (est, se) in mc.items():
            ref = analytic[name]
            assert abs(est - ref) <= 3.0 * se + 1e-4 * abs(ref), \
                (kern.label(), intensity.label(), name, ref, est, se)


# ---------------------------------------------------------------------------
# slope fitting and verdicts
# ---------------------------------------------------------------------------

def test_fit_slope_exact_power_laws():
    t = np.array(GRID)
    fit = cond.fit_slope(t, 1.0 / t)
    assert fit.slope == pytest.approx(-1.0, abs=1e-12) and fit.r2 == pytest.approx(1.0)
    fit = cond.fit_slope(t, 5.0 * t ** 0.5)
    assert fit.slope == pytest.approx(0.5, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(5.0), abs=1e-12)
    # precomputed: y = 1/T + 10/T^2 on the default grid fits in (-1.2, -1.0)
    fit = cond.fit_slope(t, 1.0 / t + 10.0 / t ** 2)
    assert -1.2 < fit.slope < -1.0 and fit.r2 > 0.99
    with pytest.raises(ValueError):
        cond.fit_slope(t, np.array([1.0, 2.0, 0.0, 1.0, 1.0]))
    with pytest.raises(ValueError):
        cond.fit_slope([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])


def test_verdict_classification():
    t = np.array(GRID)
    assert cond.classify(t, 3.0 + 1.0 / t).kind == "converges_to_positive"
    assert cond.classify(t, 2.0 / t).kind == "vanishes"
    assert cond.classify(t, 0.1 * t ** 0.8).kind == "diverges"
    # a steep but badly fit series earns no power-law verdict
    noisy = np.array([2.0 / 50, 0.05 / 100, 2.0 / 200, 0.03 / 400, 2.0 / 800])
    assert cond.classify(t, noisy).kind == "inconclusive"


def test_pathvar_delta_estimates():
    # delta(k): 4 tau K1 for the bandwidth kernel, 2^{3/2} K1 / sqrt(kappa)
    # for the exponential one; combined condition-3 norm -> sigma3^2
    grid = [50.0, 100.0, 200.0, 400.0]
    rep = cond.check_theorem(kernels.OrnsteinUhlenbeck(1.0), GG,
                             cond.Theorem.PATHVAR, asy.Power(0.5), grid)
    k1, k4 = crm.moment(GG, 1), crm.moment(GG, 4)
    assert rep.verdicts[1].kind == "vanishes"
    assert rep.verdicts[1].slope == pytest.approx(-0.5, abs=0.02)
    assert rep.delta_estimate == pytest.approx(2 ** 1.5 * k1, rel=0.03)
    assert rep.values[3][-1] == pytest.approx(k4, rel=0.02)
    rep = cond.check_theorem(kernels.Rectangular(1.0), GG,
                             cond.Theorem.PATHVAR, asy.Power(0.5), grid)
    assert rep.delta_estimate == pytest.approx(4.0 * k1, rel=0.03)
    assert rep.values[3][-1] == pytest.approx(4.0 * k4, rel=0.02)


def test_dl_raw_norms_vanish_at_zero_horizon():
    # the monotone kernel has an empty time slice at t = 0, so even the
    # 1/T-normalized kernels vanish with T (at least linearly)
    small = cond.contraction_norms(kernels.DykstraLaud(), GG, 1e-3).as_dict()
    big = cond.contraction_norms(kernels.DykstraLaud(), GG, 1e-1).as_dict()
    for name, value in small.items():
        assert 0.0 <= value < 1e-2
        assert value < 0.2 * big[name], name


def test_check_theorem_cumhaz_and_errors():
    rep = cond.check_theorem(kernels.Rectangular(1.0), GG, cond.Theorem.CUMHAZ,
                             asy.Power(-0.5), GRID)
    assert rep.verdicts[1].kind == "converges_to_positive"
    assert rep.verdicts[1].limit_est == pytest.approx(2.0, rel=0.02)   # 4 K2 tau^2
    assert rep.verdicts[2].kind == "vanishes"
    with pytest.raises(ValueError):
        cond.check_theorem(kernels.Rectangular(1.0), GG, "bogus", asy.Power(0.5), GRID)
    with pytest.raises(ValueError):
        cond.check_theorem(kernels.Rectangular(1.0), GG, cond.Theorem.CUMHAZ,
                           asy.Power(-0.5), [10.0, 20.0])


def test_report_serialization_round_trip():
    import json
    rep = cond.check_theorem(kernels.DykstraLaud(), GG, cond.Theorem.CUMHAZ,
                             asy.Power(-1.5), [20.0, 40.0, 80.0, 160.0])
    blob = json.loads(rep.to_json())
    assert blob["theorem"] == "cumhaz" and len(blob["t_grid"]) == 4
    csv = rep.to_csv_text().splitlines()
    assert csv[0] == "condition,T,value,verdict"
    assert len(csv) == 1 + 2 * 4


# ---------------------------------------------------------------------------
# sandwich comparison
# ---------------------------------------------------------------------------

def test_sandwich_degenerate_bounds():
    rep = cond.sandwich_compare(kernels.Rectangular(1.0), kernels.Rectangular(1.0),
                                GG, GG, kernels.Rectangular(1.0), GG,
                                [20.0, 40.0, 80.0, 160.0])
    assert rep.bracket_ok
    assert rep.i2_lower == pytest.approx(rep.i2_target)
    assert rep.i2_upper == pytest.approx(rep.i2_target)
    assert abs(rep.rate_ratio_slope) < 1e-9
    assert rep.variance_interval[0] == pytest.approx(rep.variance_interval[1])


def test_sandwich_extended_gamma_profile():
    # beta(x) in [L, M] on the window: the measure-lower bound has the
    # LARGER rate M (bigger beta -> smaller jump moments), so the I2
    # ordering flips relative to the profile bounds
    grid = [20.0, 40.0, 80.0, 160.0]
    kern = kernels.Rectangular(1.0)
    target = crm.ExtendedGamma(crm.AffineSqrt(1.0, 1.0))
    x_max = kernels.location_window(kern, max(grid))[1]
    L, M = 1.0, 1.0 + math.sqrt(x_max)
    rep = cond.sandwich_compare(kern, kern,
                                crm.ExtendedGamma(crm.Constant(M)),
                                crm.ExtendedGamma(crm.Constant(L)),
                                kern, target, grid)
    assert rep.bracket_ok
    assert all(l < m < h for l, m, h in zip(rep.i2_lower, rep.i2_target, rep.i2_upper))
    lo_var, hi_var = rep.variance_interval
    assert lo_var < hi_var


def test_sandwich_dominance_violation_names_point():
    with pytest.raises(ValueError, match=r"dominance violated at \(t="):
        cond.sandwich_compare(kernels.Rectangular(1.5), kernels.Rectangular(1.0),
                              GG, GG, kernels.Rectangular(1.2), GG,
                              [20.0, 40.0, 80.0, 160.0])
