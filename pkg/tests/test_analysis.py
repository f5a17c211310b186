import numpy as np
import pytest
from scipy.linalg import solve_discrete_lyapunov

from contention_lqg.analysis import (UtilityConfig, closed_form_pst_cost,
                                     empirical_cost_decomposition,
                                     equal_priorities, log_utility_total,
                                     mss_check, priority_coefficients,
                                     success_probabilities,
                                     utility_optimal_probabilities)
from contention_lqg.plants import PlantParams
from contention_lqg.riccati import solve_gains


def test_mss_stable_plant_always_passes(scalar_params):
    for p in (0.0, 0.3, 1.0):
        for q in (0.0, 0.5, 1.0):
            assert mss_check(scalar_params, p, q)


def test_mss_boundary_hand_values():
    params = PlantParams(A=1.2, B=1.0, C=1.5, W=1.0, V=1.5, Q=1.0, R=0.1)
    assert not mss_check(params, 0.4, 0.5)   # 0.8 * 1.44 = 1.152
    assert mss_check(params, 0.5, 1.0)       # 0.5 * 1.44 = 0.72


def test_mss_rejects_bad_probability(scalar_params):
    with pytest.raises(ValueError):
        mss_check(scalar_params, 1.3, 0.5)


def test_closed_form_always_connected_limit(scalar_params, scalar_gains):
    # qp=1: every slot succeeds, only the instantaneous terms survive
    expected = (np.trace(scalar_gains.P @ scalar_params.W)
                + np.trace(scalar_gains.Theta @ scalar_gains.Y))
    assert closed_form_pst_cost(scalar_params, scalar_gains, 1.0, 1.0) == \
        pytest.approx(float(expected), rel=1e-10)


def test_closed_form_never_connected_lyapunov_oracle():
    # qp=0 with an open-loop stable plant: the cost series collapses to
    # tr(PW) + tr(S Y) with S = sum_j A^j W A^j', the fixed point of
    # S = A S A' + W.
    params = PlantParams(
        A=np.array([[0.8, 0.1], [0.0, 0.7]]), B=np.array([[0.0], [1.0]]),
        C=np.array([[1.0, 0.0]]), W=0.1 * np.eye(2),
        V=np.array([[0.2]]), Q=np.eye(2), R=np.array([[0.1]]))
    g = solve_gains(params)
    s = solve_discrete_lyapunov(params.A, params.W)
    expected = float(np.trace(g.P @ params.W) + np.trace(s @ g.Y))
    got = closed_form_pst_cost(params, g, 0.0, 1.0)
    assert got == pytest.approx(expected, rel=1e-9)


def test_closed_form_diverges_outside_stability_region():
    params = PlantParams(A=1.2, B=1.0, C=1.5, W=1.0, V=1.5, Q=1.0, R=0.1)
    gains = solve_gains(params)
    with pytest.raises(ValueError, match="diverges"):
        closed_form_pst_cost(params, gains, 0.4, 0.5)


def test_closed_form_decreases_in_success_probability(scalar_params,
                                                      scalar_gains):
    costs = [closed_form_pst_cost(scalar_params, scalar_gains, p, 1.0)
             for p in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert all(a > b for a, b in zip(costs, costs[1:]))


def test_empirical_decomposition_floor(scalar_params, scalar_gains):
    # zero remote error leaves exactly the tr(P W) floor
    val = empirical_cost_decomposition(np.zeros(100), scalar_gains,
                                       W=scalar_params.W)
    assert val == pytest.approx(
        float(np.trace(scalar_gains.P @ scalar_params.W)))


def test_empirical_decomposition_quadratic_term(scalar_params, scalar_gains):
    e = np.array([1.0, -2.0, 3.0])
    val = empirical_cost_decomposition(e, scalar_gains, W=scalar_params.W)
    expected = (float(np.trace(scalar_gains.P @ scalar_params.W))
                + float(scalar_gains.Y[0, 0]) * np.mean(e ** 2))
    assert val == pytest.approx(expected)


def test_utility_optimum_is_normalized_priority():
    cfg = UtilityConfig(c=[3.0, 1.0])
    assert np.allclose(utility_optimal_probabilities(cfg), [0.75, 0.25])


def test_equal_priorities_give_uniform_rates():
    cfg = UtilityConfig(c=equal_priorities(4))
    assert np.allclose(utility_optimal_probabilities(cfg), 0.25)


def test_utility_config_validation():
    with pytest.raises(ValueError, match="positive"):
        UtilityConfig(c=[1.0, 0.0])
    with pytest.raises(ValueError, match="alpha"):
        UtilityConfig(c=[1.0], alpha=[1.5])


def test_success_probability_product_form():
    eta = success_probabilities([0.5, 0.5])
    assert np.allclose(eta, [0.25, 0.25])
    eta = success_probabilities([0.2, 0.3, 0.4])
    assert eta[0] == pytest.approx(0.2 * 0.7 * 0.6)


def test_log_utility_degenerate_rates():
    assert log_utility_total([1.0, 1.0], [1.0, 0.5]) == -np.inf


def test_optimum_maximizes_log_utility():
    c = np.array([2.0, 1.0, 1.0])
    p_star = utility_optimal_probabilities(UtilityConfig(c=c))
    u_star = log_utility_total(c, p_star)
    rng = np.random.default_rng(0)
    for _ in range(50):
        alt = rng.uniform(0.01, 0.99, size=3)
        assert u_star >= log_utility_total(c, alt)


def test_priority_coefficients_blend(scalar_params, scalar_gains):
    A, W = scalar_params.A, scalar_params.W
    tw = float(np.trace(A @ W @ A.T @ scalar_gains.Y))
    tt = float(np.trace(A @ scalar_gains.Theta @ A.T @ scalar_gains.Y))
    c = priority_coefficients([scalar_params], [scalar_gains], 0.3)
    assert c[0] == pytest.approx(0.3 * tw + 0.7 * tt)
