"""Tests for the two-channel filter recursions."""

import numpy as np
import pytest

from src.errors import CovarianceError, DimensionError, SingularInnovationError
from src.filter2c import (
    ALL_ARRIVALS,
    NO_ARRIVALS,
    ArrivalPair,
    FilterState,
    correction_gain,
    covariance_recursion,
    initial_state,
    innovation,
    predict,
    update_2c,
)
from .conftest import random_model, random_psd


class TestFilterState:
    """Tests for FilterState validation."""

    def test_initial_defaults(self, benchmark_model):
        s = initial_state(benchmark_model)
        np.testing.assert_array_equal(s.x_hat, np.zeros(2))
        np.testing.assert_array_equal(s.P, np.eye(2))
        assert s.k == 0
        assert s.trace == 2.0

    def test_rejects_asymmetric(self):
        with pytest.raises(CovarianceError):
            FilterState(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]])).validate()

    def test_rejects_indefinite(self):
        with pytest.raises(CovarianceError):
            FilterState(np.zeros(2), np.diag([1.0, -0.1])).validate()

    def test_rejects_wrong_shape(self):
        with pytest.raises(DimensionError):
            FilterState(np.zeros(2), np.eye(3)).validate()


class TestPredictUpdate:
    """Tests for predict and update_2c."""

    def test_predict_linear(self, benchmark_model):
        s = FilterState(np.array([1.0, 2.0]), np.eye(2))
        out = predict(benchmark_model, s)
        A = benchmark_model.jacobian(np.zeros(2))
        np.testing.assert_allclose(out.x_hat, A @ [1.0, 2.0])
        np.testing.assert_allclose(out.P, A @ A.T + benchmark_model.Q)
        assert out.k == 1

    def test_no_arrivals_is_identity(self, benchmark_model):
        s = initial_state(benchmark_model)
        assert update_2c(benchmark_model, s, NO_ARRIVALS) is s

    def test_measurement_presence_must_match(self, benchmark_model):
        s = initial_state(benchmark_model)
        with pytest.raises(ValueError):
            update_2c(benchmark_model, s, ArrivalPair(True, False))
        with pytest.raises(ValueError):
            update_2c(benchmark_model, s, ArrivalPair(False, False), y1=np.zeros(1))

    def test_wrong_measurement_size(self, benchmark_model):
        s = initial_state(benchmark_model)
        with pytest.raises(DimensionError):
            update_2c(benchmark_model, s, ArrivalPair(True, False), y1=np.zeros(2))

    def test_both_channels_match_stacked_kalman_update(self, benchmark_model):
        """Both arrivals use the textbook update with stacked C and R."""
        s = FilterState(np.array([0.3, -0.2]), np.array([[2.0, 0.3], [0.3, 1.0]]))
        y1, y2 = np.array([1.0]), np.array([0.5])
        out = update_2c(benchmark_model, s, ArrivalPair(True, True), y1, y2)
        C, R = benchmark_model.C, benchmark_model.R
        K = s.P @ C.T @ np.linalg.inv(C @ s.P @ C.T + R)
        np.testing.assert_allclose(out.x_hat, s.x_hat + K @ (np.r_[y1, y2] - C @ s.x_hat))
        np.testing.assert_allclose(out.P, (np.eye(2) - K @ C) @ s.P, atol=1e-12)

    def test_single_channel_uses_its_block(self, benchmark_model):
        s = FilterState(np.zeros(2), np.eye(2))
        out = update_2c(benchmark_model, s, ArrivalPair(False, True), y2=np.array([1.0]))
        # only the velocity is corrected
        assert out.x_hat[0] == 0.0
        assert out.x_hat[1] == pytest.approx(1.0 / 1.01)

    def test_update_never_increases_covariance(self, rng):
        """P⁺ ⪯ P for every arrival pattern over random instances."""
        for _ in range(100):
            model = random_model(rng, n_x=3, n_y1=1, n_y2=2)
            P = random_psd(rng, 3)
            s = FilterState(np.zeros(3), P)
            for arrivals in ALL_ARRIVALS:
                y1 = np.zeros(1) if arrivals.gamma1 else None
                y2 = np.zeros(2) if arrivals.gamma2 else None
                out = update_2c(model, s, arrivals, y1, y2)
                assert np.linalg.eigvalsh(P - out.P).min() >= -1e-10

    def test_singular_innovation_names_block(self):
        P = np.array([[1e20]])
        with pytest.raises(SingularInnovationError) as excinfo:
            correction_gain(P, np.array([[1.0], [1.0]]), np.eye(2), "C,R")
        assert excinfo.value.block == "C,R"

    def test_innovation(self, benchmark_model):
        s = FilterState(np.array([1.0, 2.0]), np.eye(2))
        nu, S = innovation(benchmark_model, s, 1, np.array([1.5]))
        np.testing.assert_allclose(nu, [0.5])
        np.testing.assert_allclose(S, [[1.01]])


class TestCovarianceRecursion:
    """Tests for the one-step covariance recursion."""

    def test_no_arrivals_open_loop(self, benchmark_model, benchmark_A):
        P = np.eye(2)
        out = covariance_recursion(benchmark_model, benchmark_A, P, NO_ARRIVALS)
        np.testing.assert_allclose(out, benchmark_A @ benchmark_A.T + benchmark_model.Q)

    def test_agrees_with_update_then_predict(self, benchmark_model, benchmark_A):
        P = np.array([[0.5, 0.1], [0.1, 0.4]])
        for arrivals in ALL_ARRIVALS:
            s = FilterState(np.zeros(2), P)
            y1 = np.zeros(1) if arrivals.gamma1 else None
            y2 = np.zeros(1) if arrivals.gamma2 else None
            expected = predict(benchmark_model, update_2c(benchmark_model, s, arrivals, y1, y2)).P
            np.testing.assert_allclose(covariance_recursion(benchmark_model, benchmark_A, P, arrivals), expected)
