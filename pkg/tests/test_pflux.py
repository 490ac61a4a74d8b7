import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from plaplace.pflux import (
    FluxMatrix,
    PExponent,
    Regime,
    RegimeError,
    aniso_flux,
    epsilon_absorption,
    f_map,
    ineq7_gap,
    ineq8_gap,
    p_flux,
    p_flux_regularized,
    tol_alg,
    young3_gap,
)

ps = st.floats(2.0, 10.0)
dims = st.integers(1, 3)


def vec(dim, lo=-50.0, hi=50.0):
    return arrays(np.float64, (dim,), elements=st.floats(lo, hi))


@st.composite
def pairs(draw):
    d = draw(dims)
    return draw(vec(d)), draw(vec(d)), draw(ps)


def test_regimes():
    assert PExponent(3).regime is Regime.DEGENERATE
    assert PExponent(1.5).regime is Regime.SINGULAR_EXPERIMENTAL
    assert PExponent(3).conjugate == pytest.approx(1.5)
    with pytest.raises(RegimeError):
        PExponent(1.0)
    with pytest.raises(RegimeError):
        PExponent(2.0).require_degenerate(strict=True)
    with pytest.raises(RegimeError):
        p_flux([1.0, 0.0], 1.5)


def test_p_flux_examples():
    np.testing.assert_array_equal(p_flux([3.0, 4.0], 2), [3.0, 4.0])
    np.testing.assert_array_equal(p_flux([0.0, 0.0], 5), [0.0, 0.0])
    np.testing.assert_allclose(p_flux([3.0, 4.0], 4), [75.0, 100.0], rtol=1e-15)


def test_f_map_examples():
    np.testing.assert_array_equal(f_map([3.0, 4.0], 2), [3.0, 4.0])
    np.testing.assert_allclose(f_map([3.0, 4.0], 4), [15.0, 20.0], rtol=1e-15)


@given(pairs())
def test_f_map_square_norm(args):
    a, _, p = args
    lhs = np.sum(f_map(a, p) ** 2)
    assert lhs == pytest.approx(np.linalg.norm(a) ** p, rel=1e-12, abs=1e-300)


@given(pairs())
def test_flux_through_f(args):
    a, _, p = args
    F = f_map(a, p)
    # scaled norm: |F|^2 underflows for tiny gradients
    big = np.max(np.abs(F))
    nF = big * np.linalg.norm(F / big) if big > 0 else 0.0
    expected = nF ** (1 - 2 / p) * F if nF > 0 else F
    np.testing.assert_allclose(p_flux(a, p), expected, rtol=1e-12, atol=1e-300)


@given(pairs(), st.floats(0.01, 100.0))
def test_homogeneity(args, s):
    a, _, p = args
    np.testing.assert_allclose(p_flux(s * a, p), s ** (p - 1) * p_flux(a, p), rtol=1e-11, atol=1e-300)
    np.testing.assert_allclose(f_map(s * a, p), s ** (p / 2) * f_map(a, p), rtol=1e-11, atol=1e-300)


@given(vec(3), ps, st.integers(0, 2**32 - 1))
def test_rotation_equivariance(a, p, seed):
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((3, 3)))
    np.testing.assert_allclose(p_flux(q @ a, p), q @ p_flux(a, p),
                               rtol=1e-10, atol=1e-10 * (1 + np.linalg.norm(a)) ** (p - 1))


@given(pairs())
def test_monotone(args):
    a, b, p = args
    mono = np.dot(p_flux(b, p) - p_flux(a, p), b - a)
    assert mono >= -tol_alg(a, b, p)


@given(pairs())
def test_ineq7_nonnegative(args):
    a, b, p = args
    assert ineq7_gap(a, b, p) >= -tol_alg(a, b, p)


@given(pairs())
def test_ineq8_nonnegative(args):
    a, b, p = args
    assert ineq8_gap(a, b, p) >= -tol_alg(a, b, p)


@given(pairs())
def test_gaps_vanish_on_diagonal(args):
    a, _, p = args
    assert ineq7_gap(a, a, p) == 0.0
    assert ineq8_gap(a, a, p) == 0.0


@given(pairs())
def test_ineq7_collapses_at_p2(args):
    a, b, _ = args
    assert abs(ineq7_gap(a, b, 2.0)) <= 1e-12 * (1 + np.sum((a - b) ** 2))


def test_ineq8_hand_value():
    assert ineq8_gap([0.0, 0.0], [1.0, 0.0], 2.0) == pytest.approx(1.0)


def test_near_coincident_pairs(rng):
    # the inequalities are tight where a ~ b; probe relative perturbations down to 1e-9
    for p in (2.5, 3.0, 4.0, 7.0, 10.0):
        a = rng.standard_normal((2000, 3)) * 10.0 ** rng.uniform(-2, 2, (2000, 1))
        b = a * (1 + 10.0 ** rng.uniform(-9, -3, (2000, 1)))
        tol = tol_alg(a, b, p)
        assert np.all(ineq7_gap(a, b, p) >= -tol)
        assert np.all(ineq8_gap(a, b, p) >= -tol)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(1e-3, 10),
       st.floats(2.001, 10.0))
def test_young3(a, b, c, eps, p):
    assert young3_gap(a, b, c, eps, p) >= -1e-10 * (1 + a * b * c)


def test_young3_trivial_cases():
    assert young3_gap(0.0, 0.0, 0.0, 1.0, 3.0) == 0.0
    assert young3_gap(0.0, 2.0, 5.0, 0.3, 4.0) >= 0.0
    with pytest.raises(RegimeError):
        young3_gap(1.0, 1.0, 1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        young3_gap(-1.0, 1.0, 1.0, 1.0, 3.0)


def test_epsilon_absorption_values():
    assert epsilon_absorption(2.0) == pytest.approx(np.sqrt(0.5), rel=1e-15)
    assert epsilon_absorption(3.0) == pytest.approx(0.272166, abs=1e-6)
    for p in np.linspace(2, 10, 17):
        e = epsilon_absorption(p)
        assert abs(p * (p - 1) * e ** 2 / 2 - 2 / p ** 2) <= 1e-14


def test_flux_matrix_validation():
    with pytest.raises(ValueError):
        FluxMatrix([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        FluxMatrix([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(ValueError):
        FluxMatrix(np.eye(2), lam=2.0)
    m = FluxMatrix([[2.0, 0.0], [0.0, 1.0]])
    assert m.lam == pytest.approx(1.0) and m.lam_max == pytest.approx(2.0)


def test_aniso_examples():
    m = FluxMatrix([[2.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(aniso_flux([1.0, 0.0], m, 4), [4.0, 0.0])
    np.testing.assert_array_equal(aniso_flux([0.0, 0.0], m, 4), [0.0, 0.0])


@given(pairs())
def test_aniso_identity_reduces(args):
    a, _, p = args
    m = FluxMatrix.identity(a.shape[0])
    np.testing.assert_allclose(aniso_flux(a, m, p), p_flux(a, p), rtol=1e-13, atol=1e-300)


@given(vec(2, -10, 10), ps, st.floats(0.2, 5), st.floats(0.2, 5), st.floats(-0.9, 0.9))
def test_aniso_ellipticity(a, p, l1, l2, c):
    off = c * np.sqrt(l1 * l2)
    m = FluxMatrix([[l1, off], [off, l2]])
    lhs = np.dot(aniso_flux(a, m, p), a)
    assert lhs >= m.lam ** (p / 2) * np.linalg.norm(a) ** p * (1 - 1e-10) - 1e-300


def test_regularized_flux():
    np.testing.assert_array_equal(p_flux_regularized([0.0, 0.0], 4, 0.5), [0.0, 0.0])
    a = np.array([0.3, -1.2])
    np.testing.assert_array_equal(p_flux_regularized(a, 2, 7.0), a)
    np.testing.assert_allclose(p_flux_regularized([1.0, 0.0], 4, 1.0), [2.0, 0.0])
    np.testing.assert_allclose(p_flux_regularized(a, 3.5, 1e-9), p_flux(a, 3.5), rtol=1e-12)
    with pytest.raises(ValueError):
        p_flux_regularized(a, 3, 0.0)
