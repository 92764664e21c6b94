import math

import numpy as np
import pytest
from scipy import integrate

from hazardlab import crm, kernels

from conftest import quad_K_T, quad_Q_T, seeded

GG = crm.GeneralizedGamma(0.5, 1.0)
EG1 = crm.ExtendedGamma(crm.Constant(1.0))


def test_eval_reference_values():
    assert kernels.eval_kernel(kernels.Rectangular(1.0), 2.0, 2.5) == 1.0
    assert kernels.eval_kernel(kernels.DykstraLaud(), 1.0, 2.0) == 0.0
    assert kernels.eval_kernel(kernels.OrnsteinUhlenbeck(2.0), 3.0, 3.0) == pytest.approx(2.0)
    assert kernels.eval_kernel(kernels.UShaped(2.0), 5.0, 3.0) == 1.0
    assert kernels.eval_kernel(kernels.UShaped(2.0), 3.0, 1.5) == 0.0


def test_parameter_validation():
    for bad in (0.0, -1.0, math.inf):
        with pytest.raises(ValueError):
            kernels.Rectangular(bad)
        with pytest.raises(ValueError):
            kernels.OrnsteinUhlenbeck(bad)
        with pytest.raises(ValueError):
            kernels.UShaped(bad)
    with pytest.raises(ValueError):
        kernels.K_T(kernels.DykstraLaud(), 0.0, 1.0)
    with pytest.raises(ValueError):
        kernels.Q_T(kernels.DykstraLaud(), -3.0, 1.0, 1.0)


def test_K_T_reference_values():
    assert kernels.K_T(kernels.Rectangular(1.0), 10.0, 5.0) == pytest.approx(2.0)
    assert kernels.K_T(kernels.DykstraLaud(), 3.0, 1.0) == pytest.approx(2.0)
    assert kernels.K_T(kernels.UShaped(2.0), 10.0, 1.0) == pytest.approx(8.0)
    k = kernels.OrnsteinUhlenbeck(2.0)
    assert kernels.K_T(k, 10.0, 3.0) == pytest.approx(1.0 * (1 - math.exp(-14.0)), rel=1e-12)


def _variant_sweep(rng):
    # 100 draws per kernel variant
    for make in (lambda: kernels.Rectangular(rng.uniform(0.3, 2.5)),
                 kernels.DykstraLaud,
                 lambda: kernels.OrnsteinUhlenbeck(rng.uniform(0.3, 3.0)),
                 lambda: kernels.UShaped(rng.uniform(0.5, 4.0))):
        for _ in range(100):
            yield make()


def test_K_T_matches_quadrature_100_draws_per_variant():
    rng = seeded(201)
    for kern in _variant_sweep(rng):
        T = rng.uniform(0.3, 40.0)
        x = rng.uniform(0.0, T + 4.0)
        closed = kernels.K_T(kern, T, x)
        oracle = quad_K_T(kern, T, x)
        assert closed == pytest.approx(oracle, rel=1e-10, abs=1e-11), (kern, T, x)


def test_Q_T_reference_values():
    assert kernels.Q_T(kernels.OrnsteinUhlenbeck(1.0), 20.0, 0.0, 0.0) \
        == pytest.approx(1.0 - math.exp(-40.0), rel=1e-14)
    assert kernels.Q_T(kernels.Rectangular(1.0), 20.0, 5.0, 5.0) == pytest.approx(2.0)
    assert kernels.Q_T(kernels.DykstraLaud(), 3.0, 1.0, 2.0) == pytest.approx(1.0)


def test_Q_T_properties_random_draws():
    rng = seeded(202)
    for kern in _variant_sweep(rng):
        T = rng.uniform(0.3, 30.0)
        x, y = rng.uniform(0.0, T + 3.0, 2)
        q = kernels.Q_T(kern, T, x, y)
        assert q == kernels.Q_T(kern, T, y, x)                  # exact symmetry
        qxx = kernels.Q_T(kern, T, x, x)
        qyy = kernels.Q_T(kern, T, y, y)
        assert q * q <= qxx * qyy + 1e-12                        # Cauchy-Schwarz
        if not isinstance(kern, kernels.OrnsteinUhlenbeck):
            assert qxx == pytest.approx(kernels.K_T(kern, T, x), abs=1e-14)
        sup_k = math.sqrt(2 * kern.kappa) if isinstance(kern, kernels.OrnsteinUhlenbeck) else 1.0
        assert qxx <= kernels.K_T(kern, T, x) * sup_k + 1e-12
        assert q == pytest.approx(quad_Q_T(kern, T, x, y), rel=1e-9, abs=1e-10)


def test_K_T_continuity_on_fine_grid():
    # no jump beyond the modulus bound for the continuous-K kernels
    for kern, lip in ((kernels.Rectangular(0.7), 2.0), (kernels.DykstraLaud(), 1.0),
                      (kernels.OrnsteinUhlenbeck(1.4), 2.0)):
        T = 9.0
        xs = np.linspace(0.0, T + 1.0, 4001)
        vals = kernels.K_T(kern, T, xs)
        h = xs[1] - xs[0]
        assert np.max(np.abs(np.diff(vals))) <= lip * h + 1e-12


def test_mean_hazard_reference_values():
    # homogeneous: slice mass times the first moment
    k1 = crm.moment(GG, 1)
    assert kernels.mean_hazard(kernels.Rectangular(1.0), GG, 5.0) == pytest.approx(2.0 * k1)
    assert kernels.mean_hazard(kernels.DykstraLaud(), GG, 3.0) == pytest.approx(3.0 * k1)
    assert kernels.mean_hazard(kernels.DykstraLaud(), GG, 0.0) == 0.0
    assert kernels.mean_hazard(kernels.UShaped(2.0), GG, 0.0) == pytest.approx(2.0 * k1)
    # against quadrature, including a non-homogeneous profile
    eg = crm.ExtendedGamma(crm.AffineSqrt(1.0, 1.0))
    for kern in (kernels.Rectangular(1.0), kernels.OrnsteinUhlenbeck(1.0),
                 kernels.DykstraLaud()):
        for t in (0.7, 3.0, 11.0):
            def f(x):
                return crm.moment_general(eg, 1.0, x) * kernels.eval_kernel(kern, t, x)
            oracle, _ = integrate.quad(f, 0.0, t + 2.0, points=[t], limit=300)
            assert kernels.mean_hazard(kern, eg, t) == pytest.approx(oracle, rel=1e-8, abs=1e-12)


def quad_kT3(kern, intensity, T, x):
    # independent double-quadrature oracle: (1/T) int k(t,x) E[h(t)] dt
    if isinstance(kern, kernels.Rectangular):
        pts = [x - kern.tau, x + kern.tau]
    elif isinstance(kern, kernels.UShaped):
        pts = [kern.beta_center - x, kern.beta_center + x]
    else:
        pts = [x]
    f = lambda t: kernels.eval_kernel(kern, t, x) * kernels.mean_hazard(kern, intensity, t)
    val, _ = integrate.quad(f, 0, T, points=[p for p in pts if 0 < p < T], limit=400)
    return val / T


def test_kT3_matches_double_quadrature():
    for kern, x in ((kernels.Rectangular(1.0), 1.7), (kernels.OrnsteinUhlenbeck(1.0), 1.0),
                    (kernels.DykstraLaud(), 2.0), (kernels.UShaped(2.0), 1.1)):
        val = kernels.kT3(kern, GG, 10.0, x)
        assert val == pytest.approx(quad_kT3(kern, GG, 10.0, x), rel=1e-7)
    # randomized sweep per variant (the double-quadrature oracle is the
    # expensive side, so fewer draws than the single-integral sweeps)
    rng = seeded(203)
    for make in (lambda: kernels.Rectangular(rng.uniform(0.4, 2.0)),
                 kernels.DykstraLaud,
                 lambda: kernels.OrnsteinUhlenbeck(rng.uniform(0.4, 2.5)),
                 lambda: kernels.UShaped(rng.uniform(0.8, 3.0))):
        for _ in range(10):
            kern = make()
            T = rng.uniform(4.0, 20.0)
            x = rng.uniform(0.0, kernels.location_window(kern, T)[1])
            assert kernels.kT3(kern, GG, T, x) \
                == pytest.approx(quad_kT3(kern, GG, T, x), rel=1e-7, abs=1e-12)
    # outside the location window the kernel cannot contribute
    assert kernels.kT3(kernels.Rectangular(1.0), GG, 10.0, 11.5) == 0.0
    # non-homogeneous fallback
    eg = crm.ExtendedGamma(crm.AffineSqrt(1.0, 1.0))
    val = kernels.kT3(kernels.Rectangular(1.0), eg, 12.0, 3.0)
    assert val == pytest.approx(quad_kT3(kernels.Rectangular(1.0), eg, 12.0, 3.0), rel=1e-7)


def test_kT3_bulk_value_definition_consistent():
    # for x away from both boundaries the w-integral of Q picks up 2 tau^2
    # from each side of x, so the value is (K1/T) * 4 tau^2; the
    # double-quadrature oracle pins the definition
    T, tau = 20.0, 1.0
    val = kernels.kT3(kernels.Rectangular(tau), GG, T, 5.0)
    assert val == pytest.approx(4.0 * tau ** 2 * crm.moment(GG, 1) / T, rel=1e-12)
    assert val == pytest.approx(quad_kT3(kernels.Rectangular(tau), GG, T, 5.0), rel=1e-9)


def test_location_window():
    assert kernels.location_window(kernels.Rectangular(2.0), 10.0) == (0.0, 12.0)
    assert kernels.location_window(kernels.DykstraLaud(), 5.0) == (0.0, 5.0)
    assert kernels.location_window(kernels.OrnsteinUhlenbeck(1.0), 5.0) == (0.0, 5.0)
    assert kernels.location_window(kernels.UShaped(3.0), 4.0) == (0.0, 3.0)
    # brute force: eval vanishes for all t <= T when x is beyond the window
    kern = kernels.UShaped(3.0)
    ts = np.linspace(0.0, 4.0, 500)
    for x in (3.01, 3.5, 6.0):
        assert np.all(kernels.eval_kernel(kern, ts, np.full_like(ts, x)) == 0.0)


def test_small_T_rectangular_still_exact():
    # the interval-intersection forms stay valid for T <= 2 tau
    kern = kernels.Rectangular(1.0)
    for T in (0.5, 1.0, 1.9):
        for x in (0.0, 0.3, 1.1, 2.5):
            assert kernels.K_T(kern, T, x) == pytest.approx(quad_K_T(kern, T, x), abs=1e-10)
            assert kernels.Q_T(kern, T, x, 0.4) == pytest.approx(
                quad_Q_T(kern, T, x, 0.4), abs=1e-10)
