import numpy as np
import pytest

from contention_lqg.estimation import (LocalEstimator, RemoteEstimator,
                                       compute_errors, kalman_predict,
                                       kalman_step, kalman_update,
                                       remote_predict, remote_step,
                                       remote_update)


def _local(two_state_params, two_state_gains):
    return LocalEstimator(params=two_state_params, gains=two_state_gains)


def test_kalman_update_algebra(two_state_params, two_state_gains):
    est = _local(two_state_params, two_state_gains)
    est.x_pred = np.array([1.0, -2.0])
    y = np.array([0.7])
    kalman_update(est, y)
    innov = y - two_state_params.C @ np.array([1.0, -2.0])
    assert np.allclose(est.x_upd,
                       np.array([1.0, -2.0]) + two_state_gains.L @ innov)


def test_kalman_predict_algebra(two_state_params, two_state_gains):
    est = _local(two_state_params, two_state_gains)
    est.x_upd = np.array([0.5, 0.5])
    kalman_predict(est, np.array([2.0]))
    expected = (two_state_params.A @ np.array([0.5, 0.5])
                + two_state_params.B @ np.array([2.0]))
    assert np.allclose(est.x_pred, expected)


def test_kalman_step_orders_predict_then_update(two_state_params,
                                                two_state_gains):
    est_a = _local(two_state_params, two_state_gains)
    est_b = _local(two_state_params, two_state_gains)
    y, u = np.array([0.3]), np.array([-1.0])
    kalman_step(est_a, y, u)
    kalman_predict(est_b, u)
    kalman_update(est_b, y)
    assert np.allclose(est_a.x_upd, est_b.x_upd)
    assert np.allclose(est_a.x_pred, est_b.x_pred)


def test_remote_adopts_payload_on_success(two_state_params):
    est = RemoteEstimator(params=two_state_params, x_pred=np.array([1.0, 1.0]))
    remote_update(est, True, np.array([3.0, -3.0]))
    assert np.allclose(est.x_upd, [3.0, -3.0])


def test_remote_holds_prediction_without_success(two_state_params):
    est = RemoteEstimator(params=two_state_params, x_pred=np.array([1.0, 2.0]))
    remote_update(est, False, None)
    assert np.allclose(est.x_upd, [1.0, 2.0])


def test_remote_payload_protocol_enforced(two_state_params):
    est = RemoteEstimator(params=two_state_params)
    with pytest.raises(ValueError, match="protocol violation"):
        remote_update(est, True, None)
    with pytest.raises(ValueError, match="protocol violation"):
        remote_update(est, False, np.zeros(2))


def test_remote_step_predicts_with_applied_input(two_state_params):
    est = RemoteEstimator(params=two_state_params)
    remote_step(est, True, np.array([1.0, 0.0]), np.array([0.5]))
    expected = (two_state_params.A @ np.array([1.0, 0.0])
                + two_state_params.B @ np.array([0.5]))
    assert np.allclose(est.x_pred, expected)


def test_compute_errors_identities(two_state_params, two_state_gains):
    local = _local(two_state_params, two_state_gains)
    local.x_upd = np.array([1.0, 0.0])
    remote = RemoteEstimator(params=two_state_params,
                             x_pred=np.array([0.5, 0.5]))
    remote.x_upd = np.array([0.25, 0.75])
    x = np.array([2.0, 1.0])
    err = compute_errors(x, local, remote)
    assert np.allclose(err.e_pred, local.x_upd - remote.x_pred)
    assert np.allclose(err.e_hat, x - local.x_upd)
    assert np.allclose(err.e_bar, x - remote.x_upd)


def test_compute_errors_dimension_check(two_state_params, two_state_gains):
    local = _local(two_state_params, two_state_gains)
    remote = RemoteEstimator(params=two_state_params)
    with pytest.raises(ValueError, match="dimension mismatch"):
        compute_errors(np.zeros(3), local, remote)
