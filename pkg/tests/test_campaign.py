import numpy as np
import pytest
from hypothesis import given, strategies as st

from plaplace.campaign import (
    ProblemSpec,
    VerifyParams,
    check_exact_convergence,
    check_heat_explicit,
    check_inequalities,
    check_oracle_gate,
    exact_levels,
    observed_order,
    oracle_residual,
    solve_levels,
    strictly_decreasing,
)
from plaplace.solver import Scheme, SolveConfig
from plaplace.verifier import CutoffPair, SpatialBump, TimeCutoff, estimate9_ratio

EXPLICIT = SolveConfig(scheme=Scheme.EXPLICIT)


@given(st.floats(0.5, 4.0), st.floats(1e-3, 1e3))
def test_observed_order_recovers_power_law(order, scale):
    hs = [0.1, 0.05, 0.025, 0.0125]
    assert observed_order(hs, [scale * h ** order for h in hs]) == pytest.approx(order, rel=1e-9)


def test_strictly_decreasing():
    assert strictly_decreasing([3, 2, 1]) and not strictly_decreasing([3, 3, 1])


def test_problem_spec_defaults_and_errors():
    assert ProblemSpec(p=3.0).extent == (-6.0, 6.0)
    assert ProblemSpec(initial="tent").extent == (-2.0, 2.0)
    assert ProblemSpec(initial="heat_sine", p=2.0).extent == (0.0, 1.0)
    with pytest.raises(ValueError, match="initial"):
        ProblemSpec(initial="gauss")
    with pytest.raises(ValueError, match="boundary"):
        ProblemSpec(boundary="periodic")
    with pytest.raises(ValueError, match="positive start"):
        ProblemSpec(time=(0.0, 1.0))
    tent = ProblemSpec(initial="tent", boundary="exact")
    with pytest.raises(ValueError, match="no exact boundary"):
        tent.problem(tent.grid(16, 16))
    with pytest.raises(ValueError, match="closed form"):
        exact_levels(tent, [16])


def test_exact_levels_match_oracle_grid():
    spec = ProblemSpec(p=3.0)
    u = exact_levels(spec, [32], [8])[0]
    assert u.grid.shape == (9, 33) and u.values.max() > 0


def test_solve_levels_parallel_matches_serial():
    spec = ProblemSpec(p=3.0)
    a = solve_levels(spec, EXPLICIT, [16, 32], [8, 8])
    b = solve_levels(spec, EXPLICIT, [16, 32], [8, 8], jobs=2)
    for x, y in zip(a, b):
        assert np.array_equal(x.values, y.values)


def test_boundary_setup_insensitivity():
    # exact data on [-6, 6] against zero data on [-9, 9] at the same spacing
    base = ProblemSpec(p=3.0, boundary="exact")
    wide = ProblemSpec(p=3.0, boundary="zero", extent=(-9.0, 9.0))
    u = solve_levels(base, EXPLICIT, [64], [64])[0]
    w = solve_levels(wide, EXPLICIT, [96], [64])[0]
    assert u.grid.h == w.grid.h
    np.testing.assert_allclose(w.values[:, 16:81], u.values, atol=1e-10)
    # cutoffs fixed in physical coordinates give the same estimate on both
    def cut(g):
        return CutoffPair(SpatialBump((0.0,), 4.5), TimeCutoff.for_grid(g))
    a = estimate9_ratio(u, 3.0, cut(u.grid))
    b = estimate9_ratio(w, 3.0, cut(w.grid))
    assert b.ratio == pytest.approx(a.ratio, rel=1e-8)


def test_verify_params_geometry():
    spec = ProblemSpec(p=3.0)
    g = spec.grid(64, 64)
    vp = VerifyParams()
    assert all(c.zeta.fits(g) for c in vp.test_functions(spec, g))
    assert vp.offset_steps(spec, g) == round(6.0 / 16 / g.h)
    r = vp.region(spec)
    assert r.margin == pytest.approx(6.0 - 0.7 * 3.3019272488946263)


def test_check_inequalities_small_run():
    res = check_inequalities(samples=20_000, seed=3)
    assert res.passed
    assert all(r["passed"] and r.get("worst_gap_over_tol", 0.0) <= 1.0 for r in res.rows)
    assert check_inequalities(samples=20_000, seed=3).rows == res.rows


def test_oracle_residual_decreases():
    spec = ProblemSpec(p=3.0)
    r = [oracle_residual(spec, n) for n in (64, 128, 256)]
    assert strictly_decreasing(r)


def test_oracle_gate_fails_on_impossible_order():
    assert check_oracle_gate(ps=(3.0,), levels=(32, 64)).passed
    assert not check_oracle_gate(ps=(3.0,), levels=(32, 64), min_order=5.0).passed


def test_convergence_checks():
    assert check_heat_explicit((16, 32)).passed
    spec = ProblemSpec(p=2.0, initial="heat_sine", time=(0.0, 0.1))
    res = check_exact_convergence(spec, EXPLICIT, [16, 32], [128, 512], min_order=1.5, name="heat")
    assert res.passed and res.rows[1]["l2_error"] < res.rows[0]["l2_error"]
    assert res.rows[-1]["order"] == pytest.approx(2.0, abs=0.1)
