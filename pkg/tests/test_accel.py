import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rwm import debug
from rwm.accel import (cover, partial_iteration, partial_step, phase_plan, run_two_phase, solve, split_time,
                       visited_count)
from rwm.engine import RwmConfig, init_state, propagate, run, step
from rwm.multinet import GENERAL, QuerySpec

from builders import edges_network, random_general, random_multiplex, PATH5
from rwm.multinet import as_multiplex


@pytest.mark.parametrize("decay, eps, K, v, mode, expected", [
    (0.7, 0.01, 3, None, "multiplex", 20),
    (0.5, 0.01, 3, None, "multiplex", 10),
    (0.7, 0.01, 3, 100, GENERAL, 36),
])
def test_split_time_examples(decay, eps, K, v, mode, expected):
    assert split_time(RwmConfig(decay=decay, epsilon=eps), K, v, mode) == expected


def test_split_time_closed_form():
    for decay in (0.2, 0.5, 0.9):
        for K in (1, 2, 5):
            cfg = RwmConfig(decay=decay, epsilon=0.05)
            t = split_time(cfg, K)
            assert decay ** t <= 0.05 * (1 - decay) / K * (1 + 1e-12) < decay ** (t - 1)


def test_phase_plan_general_takes_largest_layer():
    mn = random_general([10, 40], np.random.default_rng(0))
    cfg = RwmConfig()
    plan = phase_plan(mn, cfg)
    assert plan.split_time == split_time(cfg, 2, 40, GENERAL)
    assert plan.phase2_max == cfg.max_iters - plan.split_time


def test_cover_pops_in_bfs_order_until_theta():
    net = edges_network(*PATH5)
    mn = as_multiplex([net])
    x = np.array([0.1, 0.2, 0.4, 0.2, 0.1])
    sp_ = cover(mn, 0, x, np.array([2]), 0.55)
    assert sp_.nodes.tolist() == [2, 1]  # 0.4 + 0.2 covers 0.55; 1 before 3 by index
    assert sp_.covered_mass == pytest.approx(0.6)
    assert sp_.enqueued == 4  # 2, then 1 and 3, then 0 when 1 is popped
    forced = cover(mn, 0, x, np.array([2]), 0.55, min_pops=4)
    assert forced.nodes.tolist() == [2, 1, 3, 0]
    np.testing.assert_allclose(forced.covered_vector(5), [0.1, 0.2, 0.4, 0.2, 0])


def test_cover_respects_relevance_support():
    a = edges_network([(0, 1)], 3)
    b = edges_network([(0, 2)], 3, 1)
    mn = as_multiplex([a, b])
    x = np.array([0.2, 0.4, 0.4])
    assert cover(mn, 0, x, np.array([0]), 1.0, np.array([1.0, 0.0])).nodes.tolist() == [0, 1]
    assert cover(mn, 0, x, np.array([0]), 1.0, np.array([0.5, 0.5])).nodes.tolist() == [0, 1, 2]


def test_full_cover_partial_step_is_exact():
    mn = random_multiplex(30, 3, np.random.default_rng(1))
    cfg = RwmConfig(theta=1.0)
    state = init_state(mn, QuerySpec.single(0, 5), cfg)
    for _ in range(6):
        state = step(state, mn, cfg)
    what = state.relevance_hat
    for i in range(3):
        z, split = partial_step(mn, i, state.vectors[i], state.x0[i], what[i], cfg)
        exact = cfg.alpha * propagate(mn, i, state.vectors[i], what[i], state.x0[i]) + (1 - cfg.alpha) * state.x0[i]
        np.testing.assert_allclose(z, exact, atol=1e-14)


def test_a1_first_phase_is_exact():
    mn = random_multiplex(40, 3, np.random.default_rng(2))
    cfg = RwmConfig(vector_tol=0, max_iters=60)
    q = QuerySpec.single(0, 1)
    exact, fast = [], []
    run(mn, q, cfg, callback=lambda s: exact.append(s))
    state, plan = run_two_phase(mn, q, cfg, callback=lambda s: fast.append(s))
    te = plan.split_time
    for a, b in zip(exact[:te], fast[:te]):
        np.testing.assert_array_equal(a.relevance, b.relevance)
    np.testing.assert_array_equal(fast[-1].relevance, fast[te - 1].relevance)
    assert len(fast) == cfg.max_iters


def test_a1_close_to_exact():
    mn = random_general([30, 25], np.random.default_rng(3))
    cfg = RwmConfig()
    q = QuerySpec.single(0, 0)
    a, b = solve(mn, q, cfg, "exact"), solve(mn, q, cfg, "a1")
    for x, y in zip(a.vectors, b.vectors):
        assert np.abs(x - y).sum() < 5 * cfg.epsilon


def test_prefix_length_never_shrinks():
    mn = random_multiplex(200, 3, np.random.default_rng(4), extra=150)
    cfg = RwmConfig(theta=0.8)
    state = init_state(mn, QuerySpec.single(0, 0), cfg)
    pops = [0, 0, 0]
    history = []
    for _ in range(25):
        state = partial_iteration(state, mn, cfg, pops=pops)
        history.append(list(pops))
    assert np.all(np.diff(np.array(history), axis=0) >= 0)


def test_partial_runs_are_local_and_counted():
    mn = random_multiplex(2000, 3, np.random.default_rng(5), extra=1500)
    cfg = RwmConfig(alpha=0.5)
    before = debug.checks.partial_checked
    state = solve(mn, QuerySpec.single(0, 0), cfg, "a2")
    assert debug.checks.partial_checked - before == 3 * state.t
    assert max(visited_count(state)) < 2000
    assert max(visited_count(solve(mn, QuerySpec.single(0, 0), cfg, "exact"))) > max(visited_count(state))


def test_unknown_strategy():
    mn = random_multiplex(5, 1, np.random.default_rng(0))
    with pytest.raises(ValueError, match="unknown strategy"):
        solve(mn, QuerySpec.single(0, 0), RwmConfig(), "fast")


@given(seed=st.integers(0, 10_000), theta=st.floats(0.3, 1.0), alpha=st.floats(0.1, 1.0), general=st.booleans())
def test_partial_step_error_bound(seed, theta, alpha, general):
    rng = np.random.default_rng(seed)
    if general:
        mn = random_general([int(rng.integers(4, 20)), int(rng.integers(4, 20))], rng, density=0.15)
    else:
        mn = random_multiplex(int(rng.integers(4, 30)), 2, rng, extra=int(rng.integers(0, 20)))
    cfg = RwmConfig(alpha=alpha, theta=theta)
    state = init_state(mn, QuerySpec.single(0, 0), cfg)
    for _ in range(int(rng.integers(1, 8))):
        state = step(state, mn, cfg)
    what = state.relevance_hat
    for i in range(mn.K):
        x, x0 = state.vectors[i], state.x0[i]
        z, split = partial_step(mn, i, x, x0, what[i], cfg)
        exact = alpha * propagate(mn, i, x, what[i], x0) + (1 - alpha) * x0
        assert split.covered_mass >= theta - 1e-12 or split.nodes.size == split.enqueued
        assert abs(z.sum() - 1) < 1e-12 and z.min() >= 0
        assert np.abs(z - exact).sum() <= 2 * alpha * (1 - split.covered_mass) + 1e-12
