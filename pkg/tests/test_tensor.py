import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wienerchaos import chaos2
from wienerchaos.tensor import (
    GridTensor,
    chaos_variance_report,
    contract,
    inner,
    multiplication_coefficients,
    norm,
    rho_weight,
    symmetrize,
)


def random_symmetric_tensor(rng, q, m, length=1.0):
    return symmetrize(GridTensor(rng.standard_normal((m,) * q), length, symmetric=False))


def kernel_with_eigenvalues(rng, lam, length=1.0):
    m = len(lam)
    h = length / m
    qmat, _ = np.linalg.qr(rng.standard_normal((m, m)))
    vals = (qmat * lam) @ qmat.T / h
    return GridTensor((vals + vals.T) / 2, length)


def rank_one(q, m):
    # g normalized in L^2[0,1]; f = g^{(x)q} / sqrt(q!) so that I_q(f) = H_q(N) / sqrt(q!)
    x = (np.arange(m) + 0.5) / m
    g = np.cos(np.pi * x) * math.sqrt(2)
    g /= math.sqrt(np.sum(g * g) / m)
    f = g
    for _ in range(q - 1):
        f = np.multiply.outer(f, g)
    return GridTensor(f / math.sqrt(math.factorial(q)))


def gauss_expectation(fn, deg=80):
    x, w = np.polynomial.hermite_e.hermegauss(deg)
    return float(np.sum(w * fn(x)) / math.sqrt(2 * math.pi))


def he(k, x):
    return np.polynomial.hermite_e.hermeval(x, [0] * k + [1])


def test_contract_examples():
    rng = np.random.default_rng(0)
    f = GridTensor(rng.standard_normal(5), 2.0)
    g = GridTensor(rng.standard_normal(5), 2.0)
    assert contract(f, g, 1) == pytest.approx(0.4 * np.dot(f.values, g.values), rel=1e-15)
    outer = contract(f, g, 0)
    assert np.array_equal(outer.values, np.multiply.outer(f.values, g.values))
    eye = GridTensor(np.eye(2), 2.0)
    assert np.array_equal(contract(eye, eye, 1).values, np.eye(2))


def test_contract_brute_force_order3():
    rng = np.random.default_rng(1)
    m, h = 4, 0.25
    f = random_symmetric_tensor(rng, 3, m)
    g = random_symmetric_tensor(rng, 2, m)
    c = contract(f, g, 1).values
    for a, b, d in itertools.product(range(m), repeat=3):
        ref = h * sum(f.values[a, b, k] * g.values[d, k] for k in range(m))
        assert c[a, b, d] == pytest.approx(ref, abs=1e-12)


def test_contract_errors():
    f = GridTensor(np.eye(3))
    with pytest.raises(ValueError):
        contract(f, GridTensor(np.eye(4)), 1)
    with pytest.raises(ValueError):
        contract(f, GridTensor(np.eye(3), 2.0), 1)
    with pytest.raises(ValueError):
        contract(f, f, 3)


def test_contract_bilinear_and_scaling():
    rng = np.random.default_rng(2)
    f, g, k = (random_symmetric_tensor(rng, 2, 6) for _ in range(3))
    fg = GridTensor(f.values + 2 * g.values)
    lhs = contract(fg, k, 1).values
    rhs = contract(f, k, 1).values + 2 * contract(g, k, 1).values
    assert np.allclose(lhs, rhs, atol=1e-13)
    assert np.allclose(contract(f.scaled(3), f.scaled(3), 1).values, 9 * contract(f, f, 1).values)


def test_symmetrize():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((4, 4))
    s2 = symmetrize(GridTensor(a, symmetric=False))
    assert np.allclose(s2.values, (a + a.T) / 2, atol=1e-15)
    t = symmetrize(GridTensor(rng.standard_normal((3, 3, 3)), symmetric=False))
    for p in itertools.permutations(range(3)):
        assert np.max(np.abs(np.transpose(t.values, p) - t.values)) <= 1e-15
    assert np.array_equal(symmetrize(t).values, t.values)
    f = GridTensor(np.eye(3))
    assert np.array_equal(symmetrize(f).values, f.values)
    with pytest.raises(ValueError):
        symmetrize(GridTensor(np.zeros((2,) * 7), symmetric=False))


def test_grid_tensor_validation():
    with pytest.raises(ValueError):
        GridTensor(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        GridTensor(np.zeros((2, 3)), symmetric=False)
    with pytest.raises(ValueError):
        GridTensor(np.zeros(3), length=0)
    with pytest.raises(ValueError):
        GridTensor(np.zeros((40,) * 5), symmetric=False)


def test_multiplication_coefficients():
    assert multiplication_coefficients(0, 0) == [(0, 1)]
    assert multiplication_coefficients(2, 2) == [(0, 1), (1, 4), (2, 2)]
    assert multiplication_coefficients(1, 3) == [(0, 1), (1, 3)]
    with pytest.raises(ValueError):
        multiplication_coefficients(13, 1)


def test_rho_weights_integer():
    assert rho_weight(2) == 4
    assert rho_weight(4) == 864


def test_zero_tensor_report():
    for q in (2, 3, 4):
        r = chaos_variance_report(GridTensor(np.zeros((5,) * q)))
        assert r.phi == 1.0 and r.rho == 0.0 and r.rho_defined


def test_equal_spectrum_phi():
    rng = np.random.default_rng(4)
    for m in (2, 5, 17):
        f = kernel_with_eigenvalues(rng, np.full(m, 1 / math.sqrt(2 * m)))
        r = chaos_variance_report(f)
        assert r.phi**2 == pytest.approx(2 / m, rel=1e-12)
        assert r.phi_squared_from_parts() == pytest.approx(r.phi**2, rel=1e-12)


@pytest.mark.parametrize("q", [2, 3, 4])
def test_rank_one_oracle(q):
    m = 8 if q == 4 else 20
    r = chaos_variance_report(rank_one(q, m))
    fq1 = math.factorial(q - 1)
    phi2 = gauss_expectation(lambda x: (1 - he(q - 1, x) ** 2 / fq1) ** 2)
    assert r.chaos_norm == pytest.approx(1.0, rel=1e-12)
    assert r.phi**2 == pytest.approx(phi2, rel=1e-10)
    third = gauss_expectation(lambda x: he(q, x) ** 3) / math.factorial(q) ** 1.5
    if q % 2:
        assert r.rho == 0.0
    else:
        assert r.rho == pytest.approx(-third / (2 * r.phi), rel=1e-10)


def test_q2_matches_chaos2_on_random_kernels():
    rng = np.random.default_rng(5)
    for _ in range(50):
        m = int(rng.integers(2, 41))
        f = random_symmetric_tensor(rng, 2, m, length=float(rng.uniform(0.5, 3)))
        f = f.scaled(1 / math.sqrt(2 * inner(f, f)) * rng.uniform(0.7, 1.3))
        rep = chaos_variance_report(f)
        nar = chaos2.normal_approx_report(chaos2.spectrum(f))
        assert rep.phi == pytest.approx(nar.phi, rel=1e-10)
        assert rep.rho == pytest.approx(nar.rho, rel=1e-9, abs=1e-12)


def test_symmetrized_norm_not_larger():
    rng = np.random.default_rng(6)
    for q in (2, 3, 4):
        r = chaos_variance_report(random_symmetric_tensor(rng, q, 6))
        for k in r.contraction_norms:
            assert r.contraction_norms[k] <= r.raw_contraction_norms[k] * (1 + 1e-12)


def test_condition_diagnostics():
    rng = np.random.default_rng(7)
    r = chaos_variance_report(random_symmetric_tensor(rng, 3, 5), conditions=True)
    assert set(r.condition_norms) == {(1, l) for l in range(1, 4)} | {(2, 1)}
    assert all(v is None or v >= 0 for v in r.condition_norms.values())


def test_norm_matches_weighted_sum():
    f = GridTensor(np.full((4, 4), 2.0), 2.0)
    assert norm(f) == pytest.approx(math.sqrt(16 * 4 * 0.25), rel=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_phi_parts_property(q, m, seed):
    r = chaos_variance_report(random_symmetric_tensor(np.random.default_rng(seed), q, m))
    assert abs(r.phi_squared_from_parts() - r.phi**2) <= 1e-12 * max(1, r.phi**2)
