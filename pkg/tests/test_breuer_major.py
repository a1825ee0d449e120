import math

import numpy as np
import pytest

from wienerchaos import breuer_major as bm
from wienerchaos import chaos2
from wienerchaos.numerics import RandomSource


@pytest.fixture(scope="module")
def const_03():
    return bm.limit_constants(bm.FbmModel(0.3, 2, 200))


def spectral_power_integral(H, k, periods=20000, nodes=48):
    """``int_R S(l)^k dl`` for the increment spectral density, period by period."""
    c = math.gamma(2 * H + 1) * math.sin(math.pi * H) / (2 * math.pi)
    x, w = np.polynomial.legendre.leggauss(nodes)
    total = 0.0
    for start in range(0, periods, 500):
        lo = 2 * math.pi * np.arange(start, min(start + 500, periods))
        lam = lo[:, None] + math.pi * (x[None, :] + 1)
        s = c * 2 * (1 - np.cos(lam)) * lam ** (-1 - 2 * H)
        total += float(np.sum(s**k * w[None, :])) * math.pi
    # period-averaged tail: mean of (1 - cos)^k is C(2k, k) / 2^k
    big = 2 * math.pi * periods
    p = k * (1 + 2 * H)
    total += (2 * c) ** k * math.comb(2 * k, k) / 2**k * big ** (1 - p) / (p - 1)
    return 2 * total


def test_model_validation():
    for bad in [dict(H=0.0, q=2, T=1), dict(H=0.7, q=2, T=1), dict(H=0.3, q=3, T=1),
                dict(H=0.3, q=2, T=1.1, delta=0.25), dict(H=0.3, q=2, T=-1)]:
        with pytest.raises(ValueError):
            bm.FbmModel(**bad)
    assert bm.FbmModel(0.3, 2, 10, 0.25).steps == 40


def test_rho_values():
    assert bm.fbm_rho(0.3, 0.0) == 1.0
    assert bm.fbm_rho(0.3, 1.0) == pytest.approx((2**0.6 - 2) / 2, abs=1e-15)
    assert bm.fbm_rho(0.3, 1.0) == pytest.approx(-0.2421, abs=5e-5)
    assert bm.fbm_rho(0.5, 1.5) == pytest.approx(0.0, abs=1e-15)
    x = np.linspace(-30, 30, 601)
    v = bm.fbm_rho(0.3, x)
    assert np.allclose(v, v[::-1], atol=0)
    assert np.allclose(v, [bm.fbm_rho(0.3, t) for t in x], rtol=1e-13, atol=1e-16)


def test_rho_tail_matches_asymptote():
    H = 0.3
    x = 1e5
    assert bm.fbm_rho(H, x) == pytest.approx(H * (2 * H - 1) * x ** (2 * H - 2), rel=1e-8)


def test_rho_power_sums_are_cauchy():
    k = np.arange(1, 10**7 + 1, dtype=float)
    r2 = bm.fbm_rho(0.3, k) ** 2
    # consecutive partial sums differ by less than 1e-10 well before k = 10^4
    assert r2[10**3] < 1e-10
    # the tail itself follows (H(2H-1))^2 N^-1.8 / 1.8 and drops below 1e-10 by 10^5
    for n in (10**4, 10**5):
        tail = float(np.sum(r2[n:]))
        approx = (0.3 * 0.4) ** 2 * (n**-1.8 - (10**7) ** -1.8) / 1.8
        assert tail == pytest.approx(approx, rel=0.01)
    assert float(np.sum(r2[10**5:])) < 1e-10


def test_variance_closed_forms():
    assert bm.variance_constants(bm.FbmModel(0.5, 2, 10)).sigma2_inf == pytest.approx(4 / 3, abs=1e-9)
    assert bm.variance_constants(bm.FbmModel(0.5, 4, 10)).sigma2_inf == pytest.approx(9.6, abs=1e-9)
    # sigma^2(T) for H = 1/2: 2 q! int_0^1 (1 - x/T)(1 - x)^q
    T = 10
    exact = 4 * (1 / 3 - 1 / (12 * T))
    assert bm.variance_constants(bm.FbmModel(0.5, 2, T)).sigma2_T == pytest.approx(exact, abs=1e-12)


def test_variance_increases_to_limit():
    vals = [bm.variance_constants(bm.FbmModel(0.3, 2, T)) for T in (50, 200, 1000)]
    s2 = [v.sigma2_T for v in vals]
    assert s2[0] < s2[1] < s2[2] < vals[0].sigma2_inf
    assert abs(s2[2] / vals[0].sigma2_inf - 1) < 0.02


def test_variance_direct_2d_at_T5():
    m = bm.FbmModel(0.3, 2, 5)
    assert bm.sigma2_direct(m).value == pytest.approx(bm.variance_constants(m).sigma2_T, abs=1e-8)


def test_integer_prefactors():
    assert bm.gamma_prefactor(2) == 4
    assert bm.gamma_prefactor(4) == 864
    assert isinstance(bm.sigma_hat_weight(4, 2), int)


def test_half_constants_sign_and_support():
    c = bm.limit_constants(bm.FbmModel(0.5, 2, 10))
    assert c.radius == 1.0
    assert c.triple_product > 0
    assert c.gamma_hat < 0
    assert c.curve_coefficient == pytest.approx(c.gamma_hat / 3)
    assert all(v >= 0 for v in c.sigma_hat_s2.values())


def test_half_constants_against_spectral_route():
    # rho = (1 - |x|)_+ ; spectral density of unit Brownian increments
    c = bm.limit_constants(bm.FbmModel(0.5, 2, 10))
    tp = 2 * math.pi
    assert c.integrals[1] == pytest.approx(tp**3 * spectral_power_integral(0.5, 4), rel=1e-6)
    assert c.triple_product == pytest.approx(tp**2 * spectral_power_integral(0.5, 3), rel=1e-6)


def test_constants_against_spectral_route(const_03):
    tp = 2 * math.pi
    assert const_03.sigma2_inf == pytest.approx(2 * tp * spectral_power_integral(0.3, 2), rel=1e-5)
    assert const_03.integrals[1] == pytest.approx(tp**3 * spectral_power_integral(0.3, 4), rel=1e-5)
    assert const_03.triple_product == pytest.approx(tp**2 * spectral_power_integral(0.3, 3), rel=1e-5)
    assert const_03.converged


def test_sigma_hat_assembly(const_03):
    c = const_03
    total = sum(bm.sigma_hat_weight(2, s) * c.integrals[s] for s in c.integrals)
    assert c.sigma_hat2 == pytest.approx(4 * total / c.sigma2_inf**2, rel=1e-14)
    assert c.gamma_hat == pytest.approx(-4 * c.triple_product / c.sigma2_inf**1.5, rel=1e-14)


def test_q2_mesh_spectrum_matches_limit_ratio(const_03):
    m = bm.FbmModel(0.3, 2, 200, 0.25)
    rep = chaos2.normal_approx_report(chaos2.standardize(bm.zt_spectrum(m)))
    assert rep.alpha == pytest.approx(const_03.alpha_limit, rel=0.10)


def test_mesh_halving_reduces_bias():
    levels = bm.mesh_halving(bm.FbmModel(0.3, 2, 50, 0.25), levels=3)
    gaps = [abs(l.variance_ratio - 1) for l in levels]
    assert gaps[0] > gaps[1] > gaps[2]
    assert [l.delta for l in levels] == [0.25, 0.125, 0.0625]


def test_field_covariance():
    m = bm.FbmModel(0.3, 2, 5, 0.25)
    x = bm.simulate_increment_field(m, RandomSource(11), 10**4)
    assert x.shape == (10**4, 20)
    for lag in (0, 4, 8):
        prod = x[:, 0] * x[:, lag]
        se = prod.std(ddof=1) / math.sqrt(len(prod))
        assert abs(prod.mean() - bm.fbm_rho(0.3, lag * 0.25)) < 5 * se
    y = bm.simulate_increment_field(m, RandomSource(11), 10**4)
    assert np.array_equal(x, y)


def test_field_independent_beyond_unit_lag_at_half():
    m = bm.FbmModel(0.5, 2, 5, 0.25)
    x = bm.simulate_increment_field(m, RandomSource(2), 10**4)
    prod = x[:, 0] * x[:, 6]
    assert abs(prod.mean()) < 5 * prod.std(ddof=1) / 100


def test_field_budget():
    with pytest.raises(ValueError):
        bm.simulate_increment_field(bm.FbmModel(0.3, 2, 2000, 0.25), RandomSource(0))


def test_sample_moments():
    m = bm.FbmModel(0.5, 2, 200, 0.25)
    z = bm.sample_ZT(m, RandomSource(5), 10**5)
    assert abs(z.mean()) < 5 * z.std() / math.sqrt(len(z))
    assert abs(z.var() - 1) < 0.05
    assert bm.discrete_sigma2(m) / bm.variance_constants(m).sigma2_T == pytest.approx(z.var(), rel=0.02)


def test_sample_q4_centered():
    z = bm.sample_ZT(bm.FbmModel(0.5, 4, 20, 0.25), RandomSource(6), 20000)
    assert abs(z.mean()) < 5 * z.std() / math.sqrt(len(z))


def test_sampling_worker_independent():
    m = bm.FbmModel(0.3, 2, 10, 0.25)
    a = bm.sample_ZT(m, RandomSource(9), 20000, workers=1)
    b = bm.sample_ZT(m, RandomSource(9), 20000, workers=3)
    assert np.array_equal(a, b)


def test_verify_limit_half():
    c = bm.limit_constants(bm.FbmModel(0.5, 2, 10))
    v = bm.verify_limit([bm.FbmModel(0.5, 2, T) for T in (25, 100)], RandomSource(1), 100000, constants=c)
    for h in v.horizons:
        for p in h.points:
            if p.z in (-1.0, 1.0):
                assert p.predicted == 0.0
        at0 = next(p for p in h.points if p.z == 0.0)
        assert abs(at0.measured - at0.predicted) < 4 * at0.se + 0.02
        # E[Z sqrt(T)(||DZ||^2/2 - 1)] -> -gamma
        assert abs(h.covariance + c.gamma_hat) < 5 * h.covariance_se + 0.1
    assert v.distance_ratio() < 3


def test_verify_limit_rejects_mixed_models():
    with pytest.raises(ValueError):
        bm.verify_limit([bm.FbmModel(0.5, 2, 10), bm.FbmModel(0.3, 2, 10)], RandomSource(0), 10)
