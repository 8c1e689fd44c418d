"""System models, benchmark definitions and Jacobian polytopes.

A model is the discrete-time system x_{k+1} = f(x_k) + B u_k + w_k with a
measurement vector split over two channels, y_i = C_i x + v_i.  The Jacobian
of f may vary with the state; models that want polytopic analysis declare a
multi-affine parametrization of it (see ``JacobianParametrization``).
"""

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
from scipy import linalg

from .errors import ConfigError, DimensionError, PolytopeError
from .utils import load_json_file

logger = logging.getLogger(__name__)

MODEL_TYPES = ("linear", "kinematic5dof", "custom_linear")
KINEMATICS_VARIANTS = ("corrected", "repeated")
C1_LAYOUTS = ("sensors", "trailing")

DEFAULT_MAX_VERTICES = 256
SAMPLE_PERIOD = 0.05

KINEMATIC_STATES = (
    "x", "y", "z", "phi", "psi",
    "v_x", "v_y", "v_z", "v_phi", "v_psi",
    "a_x", "a_y", "a_z",
)


@dataclass(frozen=True)
class JacobianParametrization:
    """Multi-affine description of the Jacobian, A(x) = jacobian(params(x)).

    ``jacobian`` must be affine in each parameter separately, so that the
    images of the corners of a parameter box contain every A(x) with params(x)
    inside the box in their convex hull.
    """

    names: tuple[str, ...]
    params: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    bounds: Callable[[np.ndarray], np.ndarray]

    @property
    def is_constant(self) -> bool:
        return len(self.names) == 0


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Discrete-time model with a two-channel measurement partition."""

    name: str
    dynamics: Callable[[np.ndarray], np.ndarray]
    jacobian_fn: Callable[[np.ndarray], np.ndarray]
    B: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Ts: float = SAMPLE_PERIOD
    parametrization: Optional[JacobianParametrization] = None
    default_envelope: Optional[np.ndarray] = None
    state_names: tuple[str, ...] = ()

    def __post_init__(self):
        for attr in ("B", "C1", "C2", "Q", "R"):
            arr = np.array(getattr(self, attr), dtype=float, ndmin=2)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

        n_x = self.Q.shape[0]
        if self.Q.shape != (n_x, n_x):
            raise DimensionError(f"Q must be square, got {self.Q.shape}")
        if self.B.shape[0] != n_x:
            raise DimensionError(f"B must have {n_x} rows, got {self.B.shape}")
        for attr in ("C1", "C2"):
            if getattr(self, attr).shape[1] != n_x:
                raise DimensionError(f"{attr} must have {n_x} columns")
        n_y = self.C1.shape[0] + self.C2.shape[0]
        if self.R.shape != (n_y, n_y):
            raise DimensionError(f"R must be {n_y}x{n_y} for the stacked C, got {self.R.shape}")
        if not self.Ts > 0:
            raise ConfigError("sample period Ts must be positive")
        for attr in ("Q", "R"):
            mat = getattr(self, attr)
            if not np.allclose(mat, mat.T, atol=1e-12):
                raise ConfigError(f"{attr} must be symmetric")
            try:
                linalg.cholesky(mat, lower=True)
            except linalg.LinAlgError as exc:
                raise ConfigError(f"{attr} must be positive definite") from exc

        if self.default_envelope is not None:
            env = np.array(self.default_envelope, dtype=float)
            env.setflags(write=False)
            object.__setattr__(self, "default_envelope", env)

    @property
    def n_x(self) -> int:
        return self.Q.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_y1(self) -> int:
        return self.C1.shape[0]

    @property
    def n_y2(self) -> int:
        return self.C2.shape[0]

    @property
    def n_y(self) -> int:
        return self.n_y1 + self.n_y2

    @property
    def C(self) -> np.ndarray:
        return np.vstack([self.C1, self.C2])

    @property
    def R11(self) -> np.ndarray:
        return self.R[: self.n_y1, : self.n_y1]

    @property
    def R12(self) -> np.ndarray:
        return self.R[: self.n_y1, self.n_y1:]

    @property
    def R21(self) -> np.ndarray:
        return self.R[self.n_y1:, : self.n_y1]

    @property
    def R22(self) -> np.ndarray:
        return self.R[self.n_y1:, self.n_y1:]

    def f(self, x: np.ndarray) -> np.ndarray:
        """One step of the noiseless dynamics."""
        x = self._check_state(x)
        return np.asarray(self.dynamics(x), dtype=float)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Analytical Jacobian ∂f/∂x at x."""
        x = self._check_state(x)
        return np.asarray(self.jacobian_fn(x), dtype=float)

    def measure(self, x: np.ndarray, channel: int) -> np.ndarray:
        """Noiseless output of channel 1 or 2."""
        x = self._check_state(x)
        if channel == 1:
            return self.C1 @ x
        if channel == 2:
            return self.C2 @ x
        raise ValueError(f"channel must be 1 or 2, got {channel}")

    def channel_dim(self, channel: int) -> int:
        return self.n_y1 if channel == 1 else self.n_y2

    def _check_state(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.n_x:
            raise DimensionError(f"state must have {self.n_x} entries, got {x.shape[0]}")
        return x


@dataclass(frozen=True, eq=False)
class JacobianPolytope:
    """Vertex matrices whose convex hull contains every linearized A(x)."""

    vertices: tuple[np.ndarray, ...]
    envelope: np.ndarray
    parameter_names: tuple[str, ...] = ()
    parameter_bounds: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        if len(self.vertices) < 1:
            raise PolytopeError("a polytope needs at least one vertex")
        n_x = self.vertices[0].shape[0]
        for vertex in self.vertices:
            if vertex.shape != (n_x, n_x):
                raise PolytopeError("all vertices must share the same n_x x n_x shape")

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def n_x(self) -> int:
        return self.vertices[0].shape[0]

    @property
    def centroid(self) -> np.ndarray:
        return np.mean(np.stack(self.vertices), axis=0)

    def interval_hull(self) -> tuple[np.ndarray, np.ndarray]:
        """Entry-wise minimum and maximum over the vertices."""
        stack = np.stack(self.vertices)
        return stack.min(axis=0), stack.max(axis=0)

    def contains_entrywise(self, A: np.ndarray, tol: float = 1e-12) -> bool:
        lo, hi = self.interval_hull()
        return bool(np.all(A >= lo - tol) and np.all(A <= hi + tol))


# --- benchmark models -------------------------------------------------------


def _constant_parametrization(A: np.ndarray) -> JacobianParametrization:
    A = np.array(A, dtype=float)
    A.setflags(write=False)
    return JacobianParametrization(
        names=(),
        params=lambda x: np.zeros(0),
        jacobian=lambda theta: A.copy(),
        bounds=lambda envelope: np.zeros((0, 2)),
    )


def linear_model(
    A: np.ndarray,
    C1: np.ndarray,
    C2: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    B: Optional[np.ndarray] = None,
    Ts: float = SAMPLE_PERIOD,
    name: str = "custom_linear",
    envelope: Optional[np.ndarray] = None,
    state_names: tuple[str, ...] = (),
) -> SystemModel:
    """Build a model with linear dynamics f(x) = A x."""
    A = np.array(A, dtype=float, ndmin=2)
    A.setflags(write=False)
    n_x = A.shape[0]
    if A.shape != (n_x, n_x):
        raise DimensionError(f"A must be square, got {A.shape}")
    if B is None:
        B = np.zeros((n_x, 1))
    if envelope is None:
        envelope = np.tile([-1.0, 1.0], (n_x, 1))
    return SystemModel(
        name=name,
        dynamics=lambda x: A @ x,
        jacobian_fn=lambda x: A.copy(),
        B=B,
        C1=C1,
        C2=C2,
        Q=Q,
        R=R,
        Ts=Ts,
        parametrization=_constant_parametrization(A),
        default_envelope=envelope,
        state_names=state_names,
    )


def linear_benchmark_model() -> SystemModel:
    """Linear one-dimensional motion: position measured on channel 1, velocity on channel 2."""
    A = np.array([[1.0, 0.05], [0.0, 0.995]])
    return linear_model(
        A=A,
        C1=np.array([[1.0, 0.0]]),
        C2=np.array([[0.0, 1.0]]),
        Q=1e-4 * np.eye(2),
        R=1e-2 * np.eye(2),
        B=np.zeros((2, 1)),
        Ts=SAMPLE_PERIOD,
        name="linear",
        state_names=("x", "v_x"),
    )


def _kinematic_rates(x: np.ndarray, variant: str) -> np.ndarray:
    _, _, _, phi, psi, vx, vy, vz, vphi, vpsi, ax, ay, az = x
    sphi, cphi, spsi, cpsi = math.sin(phi), math.cos(phi), math.sin(psi), math.cos(psi)
    xdot = vx * cpsi - vy * spsi * cphi + vz * spsi * sphi
    if variant == "repeated":
        ydot = xdot
    else:
        ydot = vx * spsi + vy * cpsi * cphi - vz * cpsi * sphi
    rates = np.zeros(13)
    rates[0] = xdot
    rates[1] = ydot
    rates[2] = vy * sphi + vz * cphi
    rates[3] = vphi
    rates[4] = vpsi * cphi
    rates[5:8] = (ax, ay, az)
    return rates


def _kinematic_params(x: np.ndarray) -> np.ndarray:
    phi, psi = x[3], x[4]
    return np.array(
        [math.sin(phi), math.cos(phi), math.sin(psi), math.cos(psi), x[5], x[6], x[7], x[9]]
    )


def _kinematic_jacobian_from_params(theta: np.ndarray, Ts: float, variant: str) -> np.ndarray:
    sphi, cphi, spsi, cpsi, vx, vy, vz, vpsi = theta
    J = np.zeros((13, 13))
    J[0, 3] = vy * spsi * sphi + vz * spsi * cphi
    J[0, 4] = -vx * spsi - vy * cpsi * cphi + vz * cpsi * sphi
    J[0, 5] = cpsi
    J[0, 6] = -spsi * cphi
    J[0, 7] = spsi * sphi
    if variant == "repeated":
        J[1, :] = J[0, :]
    else:
        J[1, 3] = -vy * cpsi * sphi - vz * cpsi * cphi
        J[1, 4] = vx * cpsi - vy * spsi * cphi + vz * spsi * sphi
        J[1, 5] = spsi
        J[1, 6] = cpsi * cphi
        J[1, 7] = -cpsi * sphi
    J[2, 3] = vy * cphi - vz * sphi
    J[2, 6] = sphi
    J[2, 7] = cphi
    J[3, 8] = 1.0
    J[4, 3] = -vpsi * sphi
    J[4, 9] = cphi
    J[5, 10] = J[6, 11] = J[7, 12] = 1.0
    return np.eye(13) + Ts * J


def _trig_range(fn: Callable[[float], float], lo: float, hi: float) -> tuple[float, float]:
    """Exact range of sin or cos over [lo, hi]."""
    if hi - lo >= 2 * math.pi:
        return -1.0, 1.0
    values = [fn(lo), fn(hi)]
    k = math.ceil(lo / (math.pi / 2))
    while k * math.pi / 2 <= hi:
        values.append(fn(k * math.pi / 2))
        k += 1
    # sin/cos at multiples of pi/2 are exact up to rounding; clamp to [-1, 1]
    return max(-1.0, min(values)), min(1.0, max(values))


def _kinematic_bounds(envelope: np.ndarray) -> np.ndarray:
    phi_lo, phi_hi = envelope[3]
    psi_lo, psi_hi = envelope[4]
    rows = [
        _trig_range(math.sin, phi_lo, phi_hi),
        _trig_range(math.cos, phi_lo, phi_hi),
        _trig_range(math.sin, psi_lo, psi_hi),
        _trig_range(math.cos, psi_lo, psi_hi),
        tuple(envelope[5]),
        tuple(envelope[6]),
        tuple(envelope[7]),
        tuple(envelope[9]),
    ]
    return np.array(rows, dtype=float)


def default_kinematic_envelope(angle: float = math.pi, velocity: float = 2.0) -> np.ndarray:
    """Angles in [-angle, angle], linear/angular velocities and accelerations in [-velocity, velocity]."""
    env = np.zeros((13, 2))
    env[0:3] = (-10.0, 10.0)
    env[3:5] = (-angle, angle)
    env[5:13] = (-velocity, velocity)
    return env


def kinematic5dof_model(
    variant: str = "corrected",
    c1_layout: str = "sensors",
    Ts: float = SAMPLE_PERIOD,
    q: float = 1e-4,
    r: float = 1e-2,
) -> SystemModel:
    """Constant-acceleration kinematics in x, y, z, roll φ and yaw ψ (13 states).

    Args:
        variant: "corrected" uses distinct x and y rows; "repeated" repeats the x row for y
        c1_layout: "sensors" reads φ, ψ and the five velocities on channel 1;
            "trailing" reads the last seven states
        Ts: Sample period in seconds
        q: Process-noise variance per state
        r: Measurement-noise variance per output
    """
    if variant not in KINEMATICS_VARIANTS:
        raise ConfigError(f"kinematics must be one of {KINEMATICS_VARIANTS}, got {variant!r}")
    if c1_layout not in C1_LAYOUTS:
        raise ConfigError(f"c1_layout must be one of {C1_LAYOUTS}, got {c1_layout!r}")

    C1 = np.zeros((7, 13))
    if c1_layout == "sensors":
        C1[:, 3:10] = np.eye(7)
    else:
        C1[:, 6:13] = np.eye(7)
    C2 = np.zeros((3, 13))
    C2[:, 0:3] = np.eye(3)

    def dynamics(x: np.ndarray) -> np.ndarray:
        return x + Ts * _kinematic_rates(x, variant)

    def jacobian_from_params(theta: np.ndarray) -> np.ndarray:
        return _kinematic_jacobian_from_params(theta, Ts, variant)

    parametrization = JacobianParametrization(
        names=("sin_phi", "cos_phi", "sin_psi", "cos_psi", "v_x", "v_y", "v_z", "v_psi"),
        params=_kinematic_params,
        jacobian=jacobian_from_params,
        bounds=_kinematic_bounds,
    )
    return SystemModel(
        name="kinematic5dof",
        dynamics=dynamics,
        jacobian_fn=lambda x: jacobian_from_params(_kinematic_params(x)),
        B=np.zeros((13, 1)),
        C1=C1,
        C2=C2,
        Q=q * np.eye(13),
        R=r * np.eye(10),
        Ts=Ts,
        parametrization=parametrization,
        default_envelope=default_kinematic_envelope(),
        state_names=KINEMATIC_STATES,
    )


# --- Jacobian checks and polytopes -------------------------------------------


def jacobian_finite_diff(model: SystemModel, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference approximation of ∂f/∂x at x."""
    if not h > 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    x = np.asarray(x, dtype=float).reshape(-1)
    J = np.empty((model.n_x, model.n_x))
    for j in range(model.n_x):
        step = np.zeros(model.n_x)
        step[j] = h
        J[:, j] = (model.f(x + step) - model.f(x - step)) / (2 * h)
    return J


def _check_envelope(model: SystemModel, envelope: Optional[np.ndarray]) -> np.ndarray:
    if envelope is None:
        envelope = model.default_envelope
    if envelope is None:
        raise PolytopeError(f"model '{model.name}' has no default envelope; pass one explicitly")
    envelope = np.array(envelope, dtype=float)
    if envelope.size == 0:
        raise PolytopeError("envelope must not be empty")
    if envelope.shape != (model.n_x, 2):
        raise PolytopeError(f"envelope must have one [lo, hi] pair per state ({model.n_x})")
    inverted = np.flatnonzero(envelope[:, 0] > envelope[:, 1])
    if inverted.size:
        raise PolytopeError(f"envelope has inverted bounds for states {inverted.tolist()}")
    return envelope


def build_polytope(
    model: SystemModel,
    envelope: Optional[np.ndarray] = None,
    max_vertices: int = DEFAULT_MAX_VERTICES,
) -> JacobianPolytope:
    """Enclose the Jacobians over an envelope of states in a vertex polytope.

    Each parameter of the model's multi-affine parametrization is bounded over
    the envelope; the vertices are the Jacobians at all corner combinations.

    Raises:
        PolytopeError: inverted/empty envelope, missing parametrization or
            more than ``max_vertices`` corners.
    """
    envelope = _check_envelope(model, envelope)
    param = model.parametrization
    if param is None:
        raise PolytopeError(f"model '{model.name}' declares no Jacobian parametrization")

    bounds = np.asarray(param.bounds(envelope), dtype=float).reshape(-1, 2)
    axes = [(lo,) if lo == hi else (lo, hi) for lo, hi in bounds]
    count = math.prod(len(axis) for axis in axes)
    if count > max_vertices:
        raise PolytopeError(
            f"polytope needs {count} vertices, more than max_vertices={max_vertices}"
        )

    vertices: list[np.ndarray] = []
    seen: set[bytes] = set()
    for corner in itertools.product(*axes):
        A = np.asarray(param.jacobian(np.array(corner, dtype=float)), dtype=float)
        key = A.tobytes()
        if key not in seen:
            seen.add(key)
            A.setflags(write=False)
            vertices.append(A)

    logger.debug("built polytope for %s: %d corners, %d distinct vertices", model.name, count, len(vertices))
    return JacobianPolytope(
        vertices=tuple(vertices),
        envelope=envelope,
        parameter_names=param.names,
        parameter_bounds=bounds,
    )


def sample_envelope(envelope: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` states uniformly from a per-state interval envelope."""
    envelope = np.asarray(envelope, dtype=float)
    return rng.uniform(envelope[:, 0], envelope[:, 1], size=(count, envelope.shape[0]))


# --- config files -------------------------------------------------------------


@dataclass
class ModelConfig:
    """A model config file resolved into a model plus analysis settings."""

    model: SystemModel
    model_type: str
    envelope: Optional[np.ndarray] = None
    max_vertices: int = DEFAULT_MAX_VERTICES
    kinematics: str = "corrected"
    candidates: Optional[dict[str, Any]] = None
    delta: float = 0.1
    simulation: dict[str, Any] = field(default_factory=dict)
    source: Optional[Path] = None
    raw: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> list[str]:
        """Validate analysis settings.

        Returns:
            List of validation error messages (empty if valid)
        """
        errors = []
        if self.max_vertices < 1:
            errors.append("max_vertices must be at least 1")
        if not self.delta > 0:
            errors.append("delta must be positive")
        if self.envelope is not None and self.envelope.shape != (self.model.n_x, 2):
            errors.append(f"envelope must list {self.model.n_x} [lo, hi] pairs")
        duration = self.simulation.get("duration")
        if duration is not None and not float(duration) > 0:
            errors.append("simulation.duration must be positive")
        return errors

    def polytope(self) -> JacobianPolytope:
        return build_polytope(self.model, self.envelope, self.max_vertices)


def _matrix(data: dict[str, Any], key: str, required: bool = True) -> Optional[np.ndarray]:
    if key not in data:
        if required:
            raise ConfigError(f"model config is missing '{key}'")
        return None
    try:
        return np.array(data[key], dtype=float, ndmin=2)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{key}' must be a row-major matrix of numbers") from exc


def _noise(data: dict[str, Any], diag_key: str, full_key: str, default: np.ndarray) -> np.ndarray:
    if full_key in data:
        return _matrix(data, full_key)
    if diag_key in data:
        return np.diag(np.array(data[diag_key], dtype=float).reshape(-1))
    return default


def model_from_dict(data: dict[str, Any], source: Optional[Path] = None) -> ModelConfig:
    """Build a ModelConfig from parsed JSON."""
    model_type = data.get("type")
    if model_type not in MODEL_TYPES:
        raise ConfigError(f"model type must be one of {MODEL_TYPES}, got {model_type!r}")

    kinematics = data.get("kinematics", "corrected")
    if model_type == "linear":
        base = linear_benchmark_model()
        model = linear_model(
            A=base.jacobian(np.zeros(2)),
            C1=base.C1,
            C2=base.C2,
            Q=_noise(data, "Q_diag", "Q", base.Q),
            R=_noise(data, "R_diag", "R", base.R),
            B=base.B,
            Ts=float(data.get("Ts", base.Ts)),
            name="linear",
            state_names=base.state_names,
        )
    elif model_type == "kinematic5dof":
        Ts = float(data.get("Ts", SAMPLE_PERIOD))
        model = kinematic5dof_model(
            variant=kinematics, c1_layout=data.get("c1_layout", "sensors"), Ts=Ts
        )
        model = replace(
            model,
            Q=_noise(data, "Q_diag", "Q", model.Q),
            R=_noise(data, "R_diag", "R", model.R),
        )
    else:
        A = _matrix(data, "A")
        C1 = _matrix(data, "C1")
        C2 = _matrix(data, "C2")
        n_x = A.shape[0]
        n_y = C1.shape[0] + C2.shape[0]
        model = linear_model(
            A=A,
            C1=C1,
            C2=C2,
            Q=_noise(data, "Q_diag", "Q", np.eye(n_x)),
            R=_noise(data, "R_diag", "R", np.eye(n_y)),
            B=_matrix(data, "B", required=False),
            Ts=float(data.get("Ts", SAMPLE_PERIOD)),
            name=str(data.get("name", "custom_linear")),
        )

    envelope = None
    if "envelope" in data:
        envelope = np.array(data["envelope"], dtype=float)
        if envelope.ndim != 2 or envelope.shape[1] != 2:
            raise ConfigError("envelope must be a list of [lo, hi] pairs")

    config = ModelConfig(
        model=model,
        model_type=model_type,
        envelope=envelope,
        max_vertices=int(data.get("max_vertices", DEFAULT_MAX_VERTICES)),
        kinematics=kinematics,
        candidates=data.get("candidates"),
        delta=float(data.get("delta", 0.1)),
        simulation=dict(data.get("simulation", {})),
        source=source,
        raw=data,
    )
    errors = config.validate()
    if errors:
        raise ConfigError("; ".join(errors))
    return config


def load_model_config(path: Path) -> ModelConfig:
    """Load a JSON model config file.

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: If the content is not a valid model config
    """
    path = Path(path)
    try:
        data = load_json_file(path)
    except ValueError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return model_from_dict(data, source=path)
