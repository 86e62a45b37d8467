import json
import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lowrankpoly.hermite import (
    CoefficientVector,
    MultiIndex,
    basis,
    hermite_variance,
    linearization_coeff,
    multi_index_space,
    oscillator_eval,
    oscillator_table,
    phi_eval,
    poly_eval,
    poly_gradient,
)
from oracles import central_difference, gauss_hermite, hermite_e_monomial, poly_eval_monomial


def test_oscillator_examples():
    assert oscillator_eval(0, 3.7) == 1.0
    assert oscillator_eval(2, 1.0) == pytest.approx(0.0, abs=1e-15)
    # He_3(z) = z^3 - 3z, evaluated directly
    assert oscillator_eval(3, 2.0) == pytest.approx((8 - 6) / math.sqrt(6), rel=1e-14)


@pytest.mark.parametrize("ell", range(0, 13))
def test_oscillator_matches_explicit_polynomial(ell):
    z = np.linspace(-5, 5, 41)
    expected = np.polynomial.polynomial.polyval(z, hermite_e_monomial(ell)) / math.sqrt(math.factorial(ell))
    np.testing.assert_allclose(oscillator_table(ell, z)[:, ell], expected, rtol=1e-10, atol=1e-10)


def test_oscillator_rejects_negative_degree():
    with pytest.raises(ValueError):
        oscillator_eval(-1, 0.0)


def test_recurrence_consistency():
    z = np.linspace(-5, 5, 101)
    T = oscillator_table(13, z)
    for k in range(1, 13):
        lhs = z * T[:, k]
        rhs = math.sqrt(k + 1) * T[:, k + 1] + math.sqrt(k) * T[:, k - 1]
        scale = np.maximum(np.abs(lhs), 1.0)
        assert np.all(np.abs(lhs - rhs) <= 1e-10 * scale)


def test_high_degree_stays_finite():
    T = oscillator_table(30, np.array([-8.0, 0.0, 8.0]))
    assert np.all(np.isfinite(T))


def test_multi_index_space_examples():
    assert multi_index_space(1, 2) == [MultiIndex(()), MultiIndex((0,)), MultiIndex((0, 0))]
    assert multi_index_space(2, 1) == [MultiIndex(()), MultiIndex((0,)), MultiIndex((1,))]
    assert len(multi_index_space(2, 2)) == 6


@pytest.mark.parametrize("r,d", [(1, 1), (1, 5), (2, 3), (3, 4), (4, 2)])
def test_multi_index_space_is_graded_lex_and_complete(r, d):
    idx = multi_index_space(r, d)
    assert len(idx) == math.comb(r + d, d)
    assert len(set(idx)) == len(idx)
    assert idx[0] == MultiIndex(())
    keys = [(I.degree, I.entries) for I in idx]
    assert keys == sorted(keys)
    assert all(I.degree <= d and all(e < r for e in I.entries) for I in idx)


def test_multi_index_normalizes_order():
    assert MultiIndex((1, 0, 1)) == MultiIndex((0, 1, 1))
    assert MultiIndex((2, 0)).degree == 2


def test_phi_eval_examples():
    assert phi_eval(MultiIndex(()), [0.3, -2.0]) == 1.0
    assert phi_eval(MultiIndex((0, 0)), [1.0, 5.0]) == pytest.approx(0.0, abs=1e-15)
    assert phi_eval(MultiIndex((0, 1)), [2.0, 3.0]) == pytest.approx(6.0)


def test_phi_eval_dimension_mismatch():
    with pytest.raises(ValueError):
        phi_eval(MultiIndex((2,)), [1.0, 2.0])


def test_poly_eval_square():
    assert poly_eval(CoefficientVector.zeros(2, 3), [1.0, 2.0]) == 0.0
    assert poly_eval(CoefficientVector(1, 2, [1.0, 0.0, math.sqrt(2)]), [3.0]) == pytest.approx(9.0)
    # the vector (sqrt2, 0, sqrt2) carries constant sqrt2 rather than 1: p(3) = 8 + sqrt2
    assert poly_eval(CoefficientVector(1, 2, [math.sqrt(2), 0.0, math.sqrt(2)]), [3.0]) == pytest.approx(
        8 + math.sqrt(2)
    )


def test_poly_eval_dimension_mismatch():
    with pytest.raises(ValueError):
        poly_eval(CoefficientVector.zeros(2, 2), [1.0])


@pytest.mark.parametrize("r,d", [(1, 4), (2, 3), (3, 3), (4, 2)])
def test_poly_eval_matches_monomial_expansion(r, d, rng):
    b = basis(r, d)
    for _ in range(5):
        c = CoefficientVector(r, d, rng.standard_normal(b.size))
        z = rng.standard_normal(r) * 1.5
        expected = poly_eval_monomial(r, d, c.values, b.indices, z)
        assert poly_eval(c, z) == pytest.approx(expected, rel=1e-10, abs=1e-10)


def test_poly_gradient_examples():
    np.testing.assert_array_equal(poly_gradient(CoefficientVector.zeros(3, 2), [1.0, 2.0, 3.0]), np.zeros(3))
    g = poly_gradient(CoefficientVector(1, 2, [math.sqrt(2), 0.0, math.sqrt(2)]), [3.0])
    assert g == pytest.approx([6.0])


@given(
    r=st.integers(1, 4),
    d=st.integers(1, 5),
    seed=st.integers(0, 2**32 - 1),
)
def test_poly_gradient_matches_finite_differences(r, d, seed):
    rng = np.random.default_rng(seed)
    c = CoefficientVector(r, d, rng.standard_normal(basis(r, d).size))
    z = rng.standard_normal(r)
    fd = central_difference(lambda u: poly_eval(c, u), z)
    g = poly_gradient(c, z)
    assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1.0)


def test_derivative_operator_lowers_degree():
    b = basis(3, 4)
    for j in range(3):
        D = b.derivative[j]
        src_deg = b.degrees[np.nonzero(D)[1]]
        dst_deg = b.degrees[np.nonzero(D)[0]]
        assert np.all(dst_deg == src_deg - 1)


def test_linearization_examples():
    assert linearization_coeff(0, 0, 0) == 1.0
    assert linearization_coeff(1, 1, 1) == 0.0
    assert linearization_coeff(1, 1, 2) == pytest.approx(math.sqrt(2))
    assert linearization_coeff(0, 1, 3) == 0.0  # triangle condition fails


def test_linearization_symmetric():
    for a in range(6):
        for b in range(6):
            for c in range(6):
                vals = {linearization_coeff(*p) for p in permutations((a, b, c))}
                assert max(vals) - min(vals) <= 1e-12 * max(1.0, max(vals))


def test_linearization_second_degree_corollary():
    # E[phi_2 phi_a phi_b] for b = a+2 and b = a
    for a in range(8):
        assert linearization_coeff(2, a, a + 2) == pytest.approx(math.sqrt((a + 1) * (a + 2) / 2))
        assert linearization_coeff(2, a, a) == pytest.approx(a * math.sqrt(2))


def test_variance_examples():
    assert hermite_variance(CoefficientVector(2, 2, [3.0, 0, 0, 0, 0, 0])) == 0.0
    assert hermite_variance(CoefficientVector(1, 2, [math.sqrt(2), 0.0, math.sqrt(2)])) == pytest.approx(2.0)


def test_variance_matches_monte_carlo():
    rng = np.random.default_rng(7)
    c = CoefficientVector(2, 3, rng.standard_normal(10))
    g = rng.standard_normal((1_000_000, 2))
    vals = c.basis.features(g) @ c.values
    assert hermite_variance(c) == pytest.approx(np.var(vals), rel=0.01)


def test_orthonormality_small():
    pts, wts = gauss_hermite(2, 2 * 3 + 2)
    F = basis(2, 3).features(pts)
    G = F.T @ (wts[:, None] * F)
    np.testing.assert_allclose(G, np.eye(F.shape[1]), atol=1e-10)


@pytest.mark.parametrize("ell,ell2", [(1, 1), (2, 2), (3, 3), (2, 3), (1, 2)])
def test_cross_direction_inner_products(ell, ell2):
    rng = np.random.default_rng(100 + 10 * ell + ell2)
    n = 6
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    w = rng.standard_normal(n)
    w = 0.7 * v + 0.3 * w / np.linalg.norm(w)
    w /= np.linalg.norm(w)
    g = rng.standard_normal((400_000, n))
    prod = oscillator_table(max(ell, ell2), g @ v)[:, ell] * oscillator_table(max(ell, ell2), g @ w)[:, ell2]
    expected = float(v @ w) ** ell if ell == ell2 else 0.0
    se = prod.std() / math.sqrt(len(prod))
    assert abs(prod.mean() - expected) <= 3 * se


def test_coefficient_vector_json_roundtrip(rng):
    c = CoefficientVector(3, 2, rng.standard_normal(10))
    obj = json.loads(c.to_json())
    assert set(obj) == {"r", "d", "values"}
    assert CoefficientVector.from_json(c.to_json()) == c


def test_coefficient_vector_wrong_length():
    with pytest.raises(ValueError):
        CoefficientVector(2, 2, [1.0, 2.0])


def test_coefficient_vector_from_terms():
    c = CoefficientVector.from_terms(2, 2, {(): 1.0, (1, 0): 2.0})
    assert c[()] == 1.0
    assert c[(0, 1)] == 2.0
    assert c.values.sum() == 3.0
