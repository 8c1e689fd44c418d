"""Tests for models, Jacobians and polytopes."""

import itertools
import json
import math

import numpy as np
import pytest

from src.errors import ConfigError, DimensionError, PolytopeError
from src.model_core import (
    _trig_range,
    build_polytope,
    default_kinematic_envelope,
    jacobian_finite_diff,
    kinematic5dof_model,
    linear_benchmark_model,
    linear_model,
    load_model_config,
    model_from_dict,
    sample_envelope,
)

from .conftest import CONFIG_DIR


class TestSystemModel:
    """Tests for SystemModel construction and views."""

    def test_benchmark_dimensions(self, benchmark_model):
        """Linear benchmark has two states and one output per channel."""
        assert benchmark_model.n_x == 2
        assert benchmark_model.n_y1 == 1
        assert benchmark_model.n_y2 == 1
        assert benchmark_model.C.shape == (2, 2)
        np.testing.assert_array_equal(
            benchmark_model.jacobian(np.array([3.0, -1.0])), [[1.0, 0.05], [0.0, 0.995]]
        )

    def test_noise_blocks(self):
        """R11/R22/R12 are the blocks of the stacked R."""
        R = np.array([[2.0, 0.1, 0.2], [0.1, 3.0, 0.3], [0.2, 0.3, 4.0]])
        model = linear_model(np.eye(2), C1=np.ones((1, 2)), C2=np.ones((2, 2)), Q=np.eye(2), R=R)
        np.testing.assert_array_equal(model.R11, [[2.0]])
        np.testing.assert_array_equal(model.R22, R[1:, 1:])
        np.testing.assert_array_equal(model.R12, R[:1, 1:])
        np.testing.assert_array_equal(model.R21, R[1:, :1])

    def test_matrices_are_read_only(self, benchmark_model):
        """Model matrices cannot be mutated in place."""
        with pytest.raises(ValueError):
            benchmark_model.Q[0, 0] = 1.0

    def test_rejects_indefinite_noise(self):
        """Q must be positive definite."""
        with pytest.raises(ConfigError):
            linear_model(np.eye(2), C1=[[1.0, 0.0]], C2=[[0.0, 1.0]], Q=np.diag([1.0, -1.0]), R=np.eye(2))

    def test_rejects_mismatched_dimensions(self):
        """C columns must match the state dimension."""
        with pytest.raises(DimensionError):
            linear_model(np.eye(2), C1=[[1.0, 0.0, 0.0]], C2=[[0.0, 1.0]], Q=np.eye(2), R=np.eye(2))

    def test_measure_channels(self, benchmark_model):
        """measure returns C_i x and rejects unknown channels."""
        x = np.array([1.5, -0.5])
        np.testing.assert_array_equal(benchmark_model.measure(x, 1), [1.5])
        np.testing.assert_array_equal(benchmark_model.measure(x, 2), [-0.5])
        with pytest.raises(ValueError):
            benchmark_model.measure(x, 3)

    def test_state_dimension_checked(self, benchmark_model):
        with pytest.raises(DimensionError):
            benchmark_model.f(np.zeros(3))


class TestKinematicModel:
    """Tests for the 13-state kinematic model."""

    @pytest.mark.parametrize("variant", ["corrected", "repeated"])
    def test_jacobian_matches_finite_differences(self, variant, rng):
        """Analytical Jacobian agrees with central differences at random states."""
        model = kinematic5dof_model(variant=variant)
        for x in sample_envelope(model.default_envelope, 20, rng):
            np.testing.assert_allclose(model.jacobian(x), jacobian_finite_diff(model, x), atol=1e-7)

    def test_repeated_variant_copies_x_row(self, rng):
        """The "repeated" kinematics give y the same rate as x."""
        model = kinematic5dof_model(variant="repeated")
        x = sample_envelope(model.default_envelope, 1, rng)[0]
        A = model.jacobian(x)
        np.testing.assert_array_equal(A[1, 2:], A[0, 2:])

    def test_sensor_layout(self):
        """Channel 1 reads angles and velocities, channel 2 positions."""
        model = kinematic5dof_model()
        assert model.n_x == 13
        assert [int(np.flatnonzero(row)[0]) for row in model.C1] == list(range(3, 10))
        assert [int(np.flatnonzero(row)[0]) for row in model.C2] == [0, 1, 2]

    def test_trailing_layout(self):
        model = kinematic5dof_model(c1_layout="trailing")
        assert [int(np.flatnonzero(row)[0]) for row in model.C1] == list(range(6, 13))

    def test_unknown_variant(self):
        with pytest.raises(ConfigError):
            kinematic5dof_model(variant="other")

    def test_straight_motion_integrates_velocity(self):
        """With zero angles, x advances by Ts·v_x."""
        model = kinematic5dof_model()
        x = np.zeros(13)
        x[5] = 2.0
        assert model.f(x)[0] == pytest.approx(model.Ts * 2.0)


class TestTrigRange:
    """Tests for exact sin/cos ranges."""

    def test_small_interval(self):
        lo, hi = _trig_range(math.sin, -math.pi / 4, math.pi / 4)
        assert lo == pytest.approx(-math.sqrt(0.5))
        assert hi == pytest.approx(math.sqrt(0.5))

    def test_interval_containing_extremum(self):
        lo, hi = _trig_range(math.cos, -0.5, 0.5)
        assert hi == 1.0
        assert lo == pytest.approx(math.cos(0.5))

    def test_full_circle(self):
        assert _trig_range(math.cos, -math.pi, math.pi) == (-1.0, 1.0)


class TestPolytope:
    """Tests for build_polytope."""

    def test_linear_model_single_vertex(self, benchmark_model):
        """A constant Jacobian gives a one-vertex polytope."""
        polytope = build_polytope(benchmark_model)
        assert len(polytope) == 1
        np.testing.assert_array_equal(polytope.vertices[0], benchmark_model.jacobian(np.zeros(2)))

    def test_kinematic_vertex_count(self):
        polytope = build_polytope(kinematic5dof_model())
        assert 1 < len(polytope) <= 256
        assert polytope.n_x == 13

    def test_vertex_overflow(self):
        with pytest.raises(PolytopeError):
            build_polytope(kinematic5dof_model(), max_vertices=100)

    def test_inverted_envelope(self):
        envelope = default_kinematic_envelope()
        envelope[5] = (1.0, -1.0)
        with pytest.raises(PolytopeError):
            build_polytope(kinematic5dof_model(), envelope)

    def test_degenerate_interval_reduces_corners(self):
        """Pinning a velocity halves the number of corners."""
        envelope = default_kinematic_envelope()
        envelope[9] = (0.0, 0.0)
        assert len(build_polytope(kinematic5dof_model(), envelope)) <= 128

    def test_sampled_jacobians_inside_interval_hull(self, rng):
        """Every sampled A(x) lies inside the vertex interval hull."""
        model = kinematic5dof_model()
        envelope = default_kinematic_envelope(angle=0.5, velocity=1.0)
        polytope = build_polytope(model, envelope)
        for x in sample_envelope(envelope, 200, rng):
            assert polytope.contains_entrywise(model.jacobian(x), tol=1e-12)

    def test_sampled_jacobians_are_convex_combinations(self, rng):
        """A(x) equals the multilinear interpolation of the corner images."""
        model = kinematic5dof_model()
        envelope = default_kinematic_envelope(angle=0.7, velocity=1.5)
        param = model.parametrization
        bounds = param.bounds(envelope)
        corners = list(itertools.product(*[(0, 1)] * len(bounds)))
        images = [param.jacobian(np.array([bounds[i, c] for i, c in enumerate(corner)])) for corner in corners]
        vertex_bytes = {v.tobytes() for v in build_polytope(model, envelope).vertices}
        assert all(image.tobytes() in vertex_bytes for image in images)

        for x in sample_envelope(envelope, 25, rng):
            theta = param.params(x)
            t = (theta - bounds[:, 0]) / (bounds[:, 1] - bounds[:, 0])
            weights = [np.prod([t[i] if c else 1 - t[i] for i, c in enumerate(corner)]) for corner in corners]
            assert min(weights) >= -1e-12
            assert sum(weights) == pytest.approx(1.0)
            combo = sum(w * image for w, image in zip(weights, images))
            np.testing.assert_allclose(combo, model.jacobian(x), atol=1e-10)

    def test_centroid(self):
        polytope = build_polytope(kinematic5dof_model())
        np.testing.assert_allclose(polytope.centroid, np.mean(np.stack(polytope.vertices), axis=0))


class TestModelConfig:
    """Tests for config loading."""

    def test_linear_config(self):
        config = model_from_dict({"type": "linear", "candidates": {"grid": [0.0, 1.0]}})
        assert config.model_type == "linear"
        assert config.model.n_x == 2
        assert config.candidates == {"grid": [0.0, 1.0]}
        assert config.delta == 0.1

    def test_kinematic_noise_override(self):
        config = model_from_dict({"type": "kinematic5dof", "Q_diag": [2e-4] * 13})
        np.testing.assert_allclose(np.diag(config.model.Q), 2e-4)

    def test_custom_linear(self):
        config = model_from_dict({
            "type": "custom_linear",
            "A": [[2.0]],
            "C1": [[0.0]],
            "C2": [[1.0]],
            "R_diag": [1.0, 1.0],
        })
        assert config.model.jacobian(np.zeros(1))[0, 0] == 2.0
        np.testing.assert_array_equal(config.model.Q, [[1.0]])

    def test_unknown_type(self):
        with pytest.raises(ConfigError):
            model_from_dict({"type": "quadrotor"})

    def test_invalid_delta(self):
        with pytest.raises(ConfigError):
            model_from_dict({"type": "linear", "delta": 0})

    def test_bad_envelope_shape(self):
        with pytest.raises(ConfigError):
            model_from_dict({"type": "linear", "envelope": [[0.0, 1.0]]})

    def test_load_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_model_config(path)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_model_config(tmp_path / "missing.json")

    def test_load_shipped_configs(self):
        """The configs in configs/ load and validate."""
        for name in ("linear.json", "kinematic5dof.json", "scalar_unstable.json"):
            config = load_model_config(CONFIG_DIR / name)
            assert config.validate() == []

    def test_shipped_kinematic_envelope(self, rng):
        """The shipped vehicle envelope gives a 16-vertex hull containing every sampled A(x)."""
        config = load_model_config(CONFIG_DIR / "kinematic5dof.json")
        polytope = config.polytope()
        # level roll makes the yaw-rate axis drop out of the Jacobian
        assert len(polytope) == 16
        for x in sample_envelope(config.envelope, 100, rng):
            assert polytope.contains_entrywise(config.model.jacobian(x), tol=1e-12)

    def test_round_trip_through_file(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"type": "linear", "R_diag": [0.5, 0.25]}))
        config = load_model_config(path)
        np.testing.assert_array_equal(np.diag(config.model.R), [0.5, 0.25])
        assert config.source == path


def test_linear_benchmark_noise():
    model = linear_benchmark_model()
    np.testing.assert_array_equal(model.Q, 1e-4 * np.eye(2))
    np.testing.assert_array_equal(model.R, 1e-2 * np.eye(2))
