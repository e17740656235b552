import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from normlab import descent as ds
from normlab import geometry as geo
from normlab.errors import CollapseDetected, InvalidEpsilon, UnequalNorms
from normlab.rng import make_rng
from oracles import central_diff, rel_err


def pairs(alpha, **kw):
    return ds.init_pairs(ds.PairInitSpec(angle_alpha=alpha, **kw))


# ---- initialisation


def test_init_extreme_angles():
    np.testing.assert_allclose(pairs(1.0).pair_cosines(), 1.0, atol=1e-12)
    np.testing.assert_allclose(pairs(-1.0).pair_cosines(), -1.0, atol=1e-12)


def test_init_random_angles_near_right_angle():
    s = pairs(0.0)
    angles = np.arccos(s.pair_cosines())
    assert abs(angles.mean() - np.pi / 2) < 0.1


def test_init_norms_and_determinism():
    s = pairs(0.3, target_norm=4.0, seed=7)
    np.testing.assert_allclose(geo.row_norms(s.A), 4.0)
    np.testing.assert_allclose(geo.row_norms(s.B), 4.0)
    t = pairs(0.3, target_norm=4.0, seed=7)
    np.testing.assert_array_equal(s.A, t.A)
    np.testing.assert_array_equal(s.B, t.B)


def test_init_rejects_bad_alpha():
    with pytest.raises(ValueError):
        ds.PairInitSpec(angle_alpha=1.5)


# ---- single steps


def test_hand_step():
    s = ds.EmbeddingSet([[1.0, 0.0]], [[0.0, 1.0]])
    out = ds.descent_step(s, ds.DescentConfig(learning_rate=1.0))
    np.testing.assert_allclose(out.A[0], [1, 1])
    assert np.linalg.norm(out.A[0]) == pytest.approx(np.sqrt(2))


@pytest.mark.parametrize("mode", ["attraction_only", "infonce"])
@given(seed=st.integers(0, 10_000), lr=st.floats(1e-3, 2.0))
def test_norms_never_shrink(mode, seed, lr):
    s = pairs(0.0, num_pairs=8, dimension=5, seed=seed)
    out = ds.descent_step(s, ds.DescentConfig(learning_rate=lr, mode=mode))
    assert np.all(geo.row_norms(out.A) >= geo.row_norms(s.A) - 1e-12)
    assert np.all(geo.row_norms(out.B) >= geo.row_norms(s.B) - 1e-12)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("tau", [0.5, 1.0])
def test_infonce_mode_gradients_match_finite_differences(seed, tau):
    s = pairs(0.0, num_pairs=4, dimension=3, seed=seed)
    cfg = ds.DescentConfig(mode="infonce", temperature=tau)
    gA, gB = ds.gradients(s, cfg)
    fA = central_diff(lambda A: ds.infonce_set_loss(ds.EmbeddingSet(A, s.B), tau), s.A)
    fB = central_diff(lambda B: ds.infonce_set_loss(ds.EmbeddingSet(s.A, B), tau), s.B)
    assert rel_err(gA, fA) <= 1e-5
    assert rel_err(gB, fB) <= 1e-5


def test_weight_decay_shrinks():
    s = pairs(1.0, num_pairs=3, dimension=4)
    out = ds.descent_step(s, ds.DescentConfig(learning_rate=0.1, weight_decay=0.5))
    np.testing.assert_allclose(out.A, 0.9 * s.A, rtol=1e-12)


def test_unstable_weight_decay_collapses():
    s = pairs(0.0, num_pairs=3, dimension=4)
    with pytest.raises(CollapseDetected):
        ds.descent_step(s, ds.DescentConfig(learning_rate=0.1, weight_decay=10))


def test_gradscale_changes_step_by_norm():
    s = ds.EmbeddingSet([[3.0, 0.0]], [[0.0, 3.0]])
    plain = ds.descent_step(s, ds.DescentConfig(learning_rate=0.1))
    scaled = ds.descent_step(s, ds.DescentConfig(learning_rate=0.1, gradscale_p=1))
    np.testing.assert_allclose(scaled.A - s.A, 3.0 * (plain.A - s.A), rtol=1e-12)


# ---- convergence runs


def test_identical_pairs_converge_at_step_zero():
    r = ds.run_to_convergence(ds.PairInitSpec(angle_alpha=1.0, target_norm=5.0), ds.DescentConfig())
    assert (r.outcome, r.steps) == ("converged", 0)


def test_steps_increase_with_norm():
    cfg = ds.DescentConfig(learning_rate=0.1)
    steps = [ds.run_to_convergence(ds.PairInitSpec(num_pairs=100, target_norm=r), cfg).steps for r in (1, 2, 4)]
    assert steps[0] < steps[1] < steps[2]


def test_large_weight_decay_collapses_runs():
    cfg = ds.DescentConfig(learning_rate=0.1, weight_decay=10)
    for rho in (1, 4, 7):
        assert ds.run_to_convergence(ds.PairInitSpec(num_pairs=50, target_norm=rho), cfg).outcome == "collapsed"


def test_exhausted_when_step_budget_small():
    r = ds.run_to_convergence(ds.PairInitSpec(num_pairs=20, target_norm=8.0), ds.DescentConfig(learning_rate=0.1, max_steps=5))
    assert r.outcome == "exhausted"
    assert r.steps == 5
    assert [t[0] for t in r.norm_trace] == list(range(6))


def test_run_is_deterministic():
    spec = ds.PairInitSpec(num_pairs=50, target_norm=2.0, seed=3)
    cfg = ds.DescentConfig(learning_rate=0.1, mode="infonce")
    assert ds.run_to_convergence(spec, cfg) == ds.run_to_convergence(spec, cfg)


# ---- cosine-change bound


def test_bound_hand_case():
    delta, bound = ds.theorem_bound_check([1, 0], [0, 1], 0.1)
    assert delta == pytest.approx(0.19802, abs=1e-5)
    assert bound == pytest.approx(0.2, abs=1e-12)
    assert delta < bound


def test_bound_hand_case_exact():
    # after one step both points sit at (1, 0.1) / (0.1, 1): cos = 0.2 / 1.01
    delta, _ = ds.theorem_bound_check([1, 0], [0, 1], 0.1)
    assert delta == pytest.approx(0.2 / 1.01, rel=1e-12)


def test_bound_collinear():
    assert ds.theorem_bound_check([2, 0], [2, 0], 0.5) == (0.0, 0.0)


def test_bound_requires_equal_norms():
    with pytest.raises(UnequalNorms):
        ds.theorem_bound_check([1, 0], [0, 2], 0.1)


def _random_pair(rng, d, rho):
    z = geo.normalize_rows(rng.standard_normal((2, d))) * rho
    return z[0], z[1]


@pytest.mark.parametrize("rho", [0.5, 1, 2, 8])
@pytest.mark.parametrize("lr", [0.01, 0.1, 1])
def test_bound_holds_for_non_obtuse_pairs(rho, lr):
    rng = make_rng(0)
    checked = 0
    for _ in range(200):
        z_i, z_j = _random_pair(rng, 8, rho)
        if z_i @ z_j < 0:
            z_j = -z_j
        delta, bound = ds.theorem_bound_check(z_i, z_j, lr)
        assert delta < bound
        checked += 1
    assert checked == 200


def test_bound_fails_for_obtuse_pair():
    # cos phi = -0.5 at unit norm: the step overshoots the claimed bound
    z_i = np.array([1.0, 0.0])
    z_j = np.array([-0.5, np.sqrt(0.75)])
    delta, bound = ds.theorem_bound_check(z_i, z_j, 0.1)
    assert bound == pytest.approx(0.15)
    assert delta == pytest.approx(0.15633, abs=1e-5)
    assert delta > bound


# ---- opposite halves and the tail bound


def test_opposite_halves_rates():
    assert ds.opposite_halves_rate(pairs(1.0)) == 0.0
    assert ds.opposite_halves_rate(pairs(-1.0)) == 1.0
    assert abs(ds.opposite_halves_rate(pairs(0.0, num_pairs=10_000)) - 0.5) <= 0.02


def test_chebyshev_values():
    assert ds.chebyshev_opposite_bound(20, 0.5) == pytest.approx(0.1)
    assert ds.chebyshev_opposite_bound(1000, 0.5) == pytest.approx(0.002)
    for eps in (0.0, 1.0, -0.2):
        with pytest.raises(InvalidEpsilon):
            ds.chebyshev_opposite_bound(20, eps)


def test_empirical_tail_below_bound():
    rate = ds.empirical_cosine_tail(20, 0.5, 100_000, make_rng(0))
    assert rate <= 0.1
    assert ds.empirical_cosine_tail(20, 0.5, 5000, make_rng(1)) == ds.empirical_cosine_tail(20, 0.5, 5000, make_rng(1))
