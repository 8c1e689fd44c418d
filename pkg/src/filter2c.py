"""Two-channel (extended) Kalman filter recursions."""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import CovarianceError, DimensionError, SingularInnovationError
from .model_core import SystemModel
from .utils import symmetrize

MAX_CONDITION = 1e14
SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10


@dataclass(frozen=True)
class ArrivalPair:
    """Which channels delivered a measurement at a step."""

    gamma1: bool
    gamma2: bool

    @property
    def any(self) -> bool:
        return self.gamma1 or self.gamma2


NO_ARRIVALS = ArrivalPair(False, False)
ALL_ARRIVALS = (
    ArrivalPair(False, False),
    ArrivalPair(True, False),
    ArrivalPair(False, True),
    ArrivalPair(True, True),
)


@dataclass(frozen=True, eq=False)
class FilterState:
    """State estimate and covariance at time index k."""

    x_hat: np.ndarray
    P: np.ndarray
    k: int = 0

    def validate(self) -> "FilterState":
        """Check symmetry and positive semidefiniteness of P.

        Raises:
            CovarianceError: If P is asymmetric or has a significantly negative eigenvalue
        """
        P = self.P
        if P.shape != (self.x_hat.shape[0], self.x_hat.shape[0]):
            raise DimensionError(f"P must be {self.x_hat.shape[0]}-square, got {P.shape}")
        if np.max(np.abs(P - P.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.max(np.abs(P))):
            raise CovarianceError("covariance is not symmetric")
        _check_psd(P, "covariance")
        return self

    @property
    def trace(self) -> float:
        return float(np.trace(self.P))


def initial_state(model: SystemModel, x0_hat: Optional[np.ndarray] = None, P0: Optional[np.ndarray] = None) -> FilterState:
    """x̂₀ = 0 and P₀ = I unless given."""
    x = np.zeros(model.n_x) if x0_hat is None else np.asarray(x0_hat, dtype=float).reshape(-1)
    P = np.eye(model.n_x) if P0 is None else np.asarray(P0, dtype=float)
    return FilterState(x_hat=x, P=symmetrize(P), k=0).validate()


def _check_psd(P: np.ndarray, what: str) -> None:
    if P.size == 0:
        return
    scale = max(np.linalg.norm(P, 2), 1e-300)
    lowest = np.linalg.eigvalsh(symmetrize(P))[0]
    if lowest < -PSD_TOL * scale:
        raise CovarianceError(f"{what} has eigenvalue {lowest:.3e} below -{PSD_TOL:g}·‖P‖")


def factor_innovation(S: np.ndarray, block: str):
    """Cholesky-factor an innovation covariance, rejecting near-singular blocks."""
    condition = np.linalg.cond(S)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularInnovationError(block, float(condition))
    try:
        return linalg.cho_factor(S, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularInnovationError(block, float(condition)) from exc


def channel_matrices(model: SystemModel, arrivals: ArrivalPair) -> tuple[np.ndarray, np.ndarray, str]:
    """(C, R, block name) used by the correction branch for an arrival pattern."""
    if arrivals.gamma1 and arrivals.gamma2:
        return model.C, model.R, "C,R"
    if arrivals.gamma1:
        return model.C1, model.R11, "C1,R11"
    if arrivals.gamma2:
        return model.C2, model.R22, "C2,R22"
    raise ValueError("no channel arrived")


def correction_gain(P: np.ndarray, C: np.ndarray, R: np.ndarray, block: str) -> np.ndarray:
    """Kalman gain P Cᵀ (C P Cᵀ + R)⁻¹ through a Cholesky solve."""
    S = symmetrize(C @ P @ C.T + R)
    factor = factor_innovation(S, block)
    # K = P Cᵀ S⁻¹  <=>  S Kᵀ = C P
    return linalg.cho_solve(factor, C @ P).T


def predict(model: SystemModel, s: FilterState, u: Optional[np.ndarray] = None) -> FilterState:
    """Time update: x̂' = f(x̂) + B u, P' = A P Aᵀ + Q with A the Jacobian at x̂."""
    if s.x_hat.shape[0] != model.n_x or s.P.shape != (model.n_x, model.n_x):
        raise DimensionError(f"filter state does not match model with n_x={model.n_x}")
    A = model.jacobian(s.x_hat)
    x_next = model.f(s.x_hat)
    if u is not None:
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.shape[0] != model.n_u:
            raise DimensionError(f"input must have {model.n_u} entries, got {u.shape[0]}")
        x_next = x_next + model.B @ u
    P_next = symmetrize(A @ s.P @ A.T + model.Q)
    return FilterState(x_hat=x_next, P=P_next, k=s.k + 1)


def update_2c(
    model: SystemModel,
    s: FilterState,
    arrivals: ArrivalPair,
    y1: Optional[np.ndarray] = None,
    y2: Optional[np.ndarray] = None,
) -> FilterState:
    """Measurement update using whichever channels arrived.

    Both channels use the stacked (C, R); a single channel uses (C1, R11) or
    (C2, R22); with no arrivals the state is returned unchanged.
    """
    if arrivals.gamma1 != (y1 is not None) or arrivals.gamma2 != (y2 is not None):
        raise ValueError("a measurement must be given exactly for the channels that arrived")
    if not arrivals.any:
        return s

    C, R, block = channel_matrices(model, arrivals)
    parts = [np.asarray(y, dtype=float).reshape(-1) for y in (y1, y2) if y is not None]
    y = np.concatenate(parts)
    if y.shape[0] != C.shape[0]:
        raise DimensionError(f"measurement for block {block} must have {C.shape[0]} entries")

    K = correction_gain(s.P, C, R, block)
    x_new = s.x_hat + K @ (y - C @ s.x_hat)
    P_new = symmetrize(s.P - K @ C @ s.P)
    _check_psd(P_new, "updated covariance")
    return replace(s, x_hat=x_new, P=P_new)


def innovation(
    model: SystemModel, s: FilterState, channel: int, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Innovation y − C_i x̂ and its covariance C_i P C_iᵀ + R_ii."""
    C = model.C1 if channel == 1 else model.C2
    R = model.R11 if channel == 1 else model.R22
    nu = np.asarray(y, dtype=float).reshape(-1) - C @ s.x_hat
    return nu, symmetrize(C @ s.P @ C.T + R)


def covariance_recursion(
    model: SystemModel, A_k: np.ndarray, P: np.ndarray, arrivals: ArrivalPair
) -> np.ndarray:
    """One step of the predicted-covariance recursion for a given arrival pattern."""
    P_post = P
    if arrivals.any:
        C, R, block = channel_matrices(model, arrivals)
        K = correction_gain(P, C, R, block)
        P_post = P - K @ C @ P
    return symmetrize(A_k @ P_post @ A_k.T + model.Q)
