"""Analysis operators and LMI conditions for the two-channel filter.

The expected one-step covariance map ``g``, its fixed-gain counterpart
``phi`` and the linear part ``L_operator`` act on a single Jacobian.  The
boundedness test and the trace-bound program accept a single matrix, a list
of matrices or a ``JacobianPolytope``; with several matrices one LMI is
imposed per vertex and the Lyapunov-like variable is shared.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence, Union

import numpy as np

from . import sdp
from .errors import DimensionError, SolverFailureError
from .filter2c import correction_gain
from .model_core import JacobianPolytope, SystemModel
from .utils import generate_cache_key, symmetrize

if TYPE_CHECKING:
    from .cache import CacheManager

logger = logging.getLogger(__name__)

LINEARIZATIONS = ("reference", "identity")

JacobianSet = Union[np.ndarray, Sequence[np.ndarray], JacobianPolytope]


@dataclass(frozen=True)
class RatePair:
    """Arrival probabilities of the two channels."""

    lambda1: float
    lambda2: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float, np.floating)) and 0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be a probability in [0, 1], got {value!r}")
            object.__setattr__(self, name, float(value))

    def as_tuple(self) -> tuple[float, float]:
        return (self.lambda1, self.lambda2)

    def __str__(self) -> str:
        return f"({self.lambda1:g}, {self.lambda2:g})"


@dataclass(frozen=True)
class BranchProbabilities:
    """Probabilities of the four arrival patterns."""

    both: float
    first: float
    second: float
    none: float

    @classmethod
    def from_rates(cls, rates: RatePair) -> "BranchProbabilities":
        l1, l2 = rates.as_tuple()
        return cls(both=l1 * l2, first=l1 * (1.0 - l2), second=(1.0 - l1) * l2, none=(1.0 - l1) * (1.0 - l2))


@dataclass(frozen=True, eq=False)
class GainTriple:
    """Gains applied when both channels, only channel 1 or only channel 2 arrive."""

    K: np.ndarray
    K1: np.ndarray
    K2: np.ndarray

    def check(self, model: SystemModel) -> "GainTriple":
        expected = {
            "K": (model.n_x, model.n_y),
            "K1": (model.n_x, model.n_y1),
            "K2": (model.n_x, model.n_y2),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionError(f"{name} must be {shape}, got {getattr(self, name).shape}")
        return self

    def closed_loop(self, A_k: np.ndarray, model: SystemModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(A + K C, A + K1 C1, A + K2 C2)."""
        return A_k + self.K @ model.C, A_k + self.K1 @ model.C1, A_k + self.K2 @ model.C2

    def noise_terms(self, model: SystemModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Q + K R Kᵀ, Q + K1 R11 K1ᵀ, Q + K2 R22 K2ᵀ)."""
        return (
            model.Q + self.K @ model.R @ self.K.T,
            model.Q + self.K1 @ model.R11 @ self.K1.T,
            model.Q + self.K2 @ model.R22 @ self.K2.T,
        )


@dataclass(frozen=True)
class AnalysisSettings:
    """Solver and formulation switches shared by the LMI programs."""

    tol: float = sdp.DEFAULT_TOL
    solver: str = "CLARABEL"
    omit_open_loop: bool = False
    linearization: str = "reference"

    def __post_init__(self):
        if self.linearization not in LINEARIZATIONS:
            raise ValueError(f"linearization must be one of {LINEARIZATIONS}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "solver": self.solver,
            "omit_open_loop": self.omit_open_loop,
            "linearization": self.linearization,
        }


DEFAULT_SETTINGS = AnalysisSettings()


@dataclass(eq=False)
class FeasibilityCertificate:
    """Solution of the boundedness LMI; Z lists hold one entry per vertex."""

    Y: np.ndarray
    Z: list[Optional[np.ndarray]]
    Z1: list[Optional[np.ndarray]]
    Z2: list[Optional[np.ndarray]]
    margin: float
    omit_open_loop: bool = False

    def assignment(self) -> dict[str, np.ndarray]:
        """Variable assignment of the assembled problem with zero margin."""
        values = {"Y": self.Y, "t": np.zeros((1, 1))}
        for j, (Z, Z1, Z2) in enumerate(zip(self.Z, self.Z1, self.Z2)):
            for prefix, value in (("Z", Z), ("Z1", Z1), ("Z2", Z2)):
                if value is not None:
                    values[f"{prefix}_{j}"] = value
        return values


@dataclass(eq=False)
class TraceBoundResult:
    """Outcome of the trace-maximization program."""

    status: str
    V: Optional[np.ndarray] = None
    tau: Optional[float] = None
    solution: Optional[sdp.SdpSolution] = None

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


# --- operators ----------------------------------------------------------------


def _riccati_term(A_k: np.ndarray, X: np.ndarray, C: np.ndarray, R: np.ndarray, block: str) -> np.ndarray:
    """A X Cᵀ (C X Cᵀ + R)⁻¹ C X Aᵀ."""
    K = correction_gain(X, C, R, block)
    return A_k @ K @ C @ X @ A_k.T


def _check_square(X: np.ndarray, model: SystemModel, what: str = "X") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape != (model.n_x, model.n_x):
        raise DimensionError(f"{what} must be {model.n_x}x{model.n_x}, got {X.shape}")
    return X


def g_operator(A_k: np.ndarray, model: SystemModel, rates: RatePair, X: np.ndarray) -> np.ndarray:
    """Expected predicted covariance after one step of the optimal filter."""
    X = _check_square(X, model)
    p = BranchProbabilities.from_rates(rates)
    result = A_k @ X @ A_k.T + model.Q
    if p.both > 0:
        result = result - p.both * _riccati_term(A_k, X, model.C, model.R, "C,R")
    if p.first > 0:
        result = result - p.first * _riccati_term(A_k, X, model.C1, model.R11, "C1,R11")
    if p.second > 0:
        result = result - p.second * _riccati_term(A_k, X, model.C2, model.R22, "C2,R22")
    return symmetrize(result)


def optimal_gains(A_k: np.ndarray, model: SystemModel, X: np.ndarray) -> GainTriple:
    """Gains that minimize phi for a given X: K = −A X Cᵀ (C X Cᵀ + R)⁻¹, likewise per channel."""
    X = _check_square(X, model)
    return GainTriple(
        K=-A_k @ correction_gain(X, model.C, model.R, "C,R"),
        K1=-A_k @ correction_gain(X, model.C1, model.R11, "C1,R11"),
        K2=-A_k @ correction_gain(X, model.C2, model.R22, "C2,R22"),
    )


def L_operator(
    A_k: np.ndarray, model: SystemModel, rates: RatePair, gains: GainTriple, Y: np.ndarray
) -> np.ndarray:
    """Linear part of phi: p_none·A Y Aᵀ + Σ p_b F_b Y F_bᵀ."""
    Y = _check_square(Y, model, "Y")
    gains.check(model)
    p = BranchProbabilities.from_rates(rates)
    F, F1, F2 = gains.closed_loop(A_k, model)
    result = p.none * A_k @ Y @ A_k.T
    result = result + p.both * F @ Y @ F.T + p.first * F1 @ Y @ F1.T + p.second * F2 @ Y @ F2.T
    return symmetrize(result)


def phi_noise_term(model: SystemModel, rates: RatePair, gains: GainTriple) -> np.ndarray:
    """Constant part of phi: p_none·Q + Σ p_b V_b."""
    gains.check(model)
    p = BranchProbabilities.from_rates(rates)
    V, V1, V2 = gains.noise_terms(model)
    return symmetrize(p.none * model.Q + p.both * V + p.first * V1 + p.second * V2)


def phi_operator(
    A_k: np.ndarray, model: SystemModel, rates: RatePair, gains: GainTriple, X: np.ndarray
) -> np.ndarray:
    """Expected predicted covariance under fixed gains."""
    return symmetrize(L_operator(A_k, model, rates, gains, X) + phi_noise_term(model, rates, gains))


# --- LMI programs ---------------------------------------------------------------


def jacobian_list(A: JacobianSet) -> list[np.ndarray]:
    """Normalize a matrix, a list of matrices or a polytope into a vertex list."""
    if isinstance(A, JacobianPolytope):
        return list(A.vertices)
    if isinstance(A, np.ndarray) and A.ndim == 2:
        return [A]
    vertices = [np.asarray(v, dtype=float) for v in A]
    if not vertices:
        raise ValueError("at least one Jacobian is required")
    return vertices


def strictness_margin(vertices: Sequence[np.ndarray], tol: float = sdp.DEFAULT_TOL) -> float:
    """ε used for strict inequalities: tol·(1 + max ‖A_j‖₂)."""
    return tol * (1.0 + max(np.linalg.norm(A, 2) for A in vertices))


def _branches(model: SystemModel, rates: RatePair) -> list[tuple[str, float, Optional[np.ndarray]]]:
    """Active branches as (name, √p, C); C is None for the open-loop branch."""
    p = BranchProbabilities.from_rates(rates)
    candidates = [
        ("Z", p.both, model.C),
        ("Z1", p.first, model.C1),
        ("Z2", p.second, model.C2),
        ("open", p.none, None),
    ]
    return [(name, math.sqrt(prob), C) for name, prob, C in candidates if prob > 0]


def assemble_psi(
    A: JacobianSet, model: SystemModel, rates: RatePair, omit_open_loop: bool = False
) -> sdp.SdpProblem:
    """Boundedness LMIs with a margin variable ``t``.

    For every vertex A_j: the block matrix with diagonal Y and first row
    √p_b(Y A_j + Z_b C_b) (plus √p_none·Y A_j unless ``omit_open_loop``) must
    dominate t·I.  Also Y ⪰ t·I, Y ⪯ I and t ≤ 1; the objective maximizes t.
    """
    vertices = jacobian_list(A)
    n = model.n_x
    eye = np.eye(n)
    problem = sdp.SdpProblem(objective=sdp.Objective("max_trace", "t"))
    problem.add_variable("Y", (n, n), symmetric=True)
    problem.add_variable("t", (1, 1))

    branches = [b for b in _branches(model, rates) if not (omit_open_loop and b[0] == "open")]
    margin_term = sdp.Term.scalar("t", -eye)

    for j, A_j in enumerate(vertices):
        if A_j.shape != (n, n):
            raise DimensionError(f"vertex {j} must be {n}x{n}, got {A_j.shape}")
        lmi = sdp.LmiConstraint(f"psi_{j}", [n] * (1 + len(branches)))
        lmi.put(0, 0, sdp.AffineBlock(terms=(sdp.Term.product("Y"), margin_term)))
        for b, (name, coef, C) in enumerate(branches, start=1):
            terms = [sdp.Term.product("Y", right=coef * A_j)]
            if C is not None:
                z_name = problem.add_variable(f"{name}_{j}", (n, C.shape[0]))
                terms.append(sdp.Term.product(z_name, right=coef * C))
            lmi.put(0, b, sdp.AffineBlock(terms=tuple(terms)))
            lmi.put(b, b, sdp.AffineBlock(terms=(sdp.Term.product("Y"), margin_term)))
        problem.add_constraint(lmi)

    lower = sdp.LmiConstraint("Y_lower", [n])
    lower.put(0, 0, sdp.AffineBlock(terms=(sdp.Term.product("Y"), margin_term)))
    upper = sdp.LmiConstraint("Y_upper", [n])
    upper.put(0, 0, sdp.AffineBlock(const=eye, terms=(sdp.Term.product("Y", left=-eye),)))
    cap = sdp.LmiConstraint("t_cap", [1])
    cap.put(0, 0, sdp.AffineBlock(const=np.ones((1, 1)), terms=(sdp.Term.scalar("t", -np.ones((1, 1))),)))
    for constraint in (lower, upper, cap):
        problem.add_constraint(constraint)
    return problem


def check_boundedness(
    A: JacobianSet,
    model: SystemModel,
    rates: RatePair,
    settings: AnalysisSettings = DEFAULT_SETTINGS,
) -> Optional[FeasibilityCertificate]:
    """Certificate that the expected covariance stays bounded, or None.

    Raises:
        SolverFailureError: If the conic solver fails numerically
    """
    vertices = jacobian_list(A)
    problem = assemble_psi(vertices, model, rates, omit_open_loop=settings.omit_open_loop)
    solution = sdp.solve(problem, tol=settings.tol, solver=settings.solver)
    if solution.status == sdp.SdpStatus.INFEASIBLE:
        # t is free, so the margin program always has a feasible point
        raise SolverFailureError(f"boundedness check at {rates} reported infeasible: {solution.diagnostic()}", solution)
    if not solution.ok:
        raise SolverFailureError(f"boundedness check at {rates} failed: {solution.diagnostic()}", solution)

    t_star = float(solution.assignment["t"][0, 0])
    eps = strictness_margin(vertices, settings.tol)
    logger.debug("boundedness at %s: margin %.3e (threshold %.3e)", rates, t_star, eps)
    if t_star <= eps:
        return None

    def per_vertex(prefix: str) -> list[Optional[np.ndarray]]:
        return [solution.assignment.get(f"{prefix}_{j}") for j in range(len(vertices))]

    return FeasibilityCertificate(
        Y=solution.assignment["Y"],
        Z=per_vertex("Z"),
        Z1=per_vertex("Z1"),
        Z2=per_vertex("Z2"),
        margin=t_star,
        omit_open_loop=settings.omit_open_loop,
    )


def psi_min_eigenvalues(
    A: JacobianSet, model: SystemModel, rates: RatePair, certificate: FeasibilityCertificate
) -> list[float]:
    """Smallest eigenvalue of every vertex LMI evaluated at a certificate."""
    problem = assemble_psi(A, model, rates, omit_open_loop=certificate.omit_open_loop)
    report = sdp.verify(problem, certificate.assignment())
    return [value for key, value in report.margins.items() if ":psi_" in key]


def critical_lambda(
    A: JacobianSet,
    model: SystemModel,
    fixed_channel: int,
    fixed_value: float,
    tol: float = 1e-3,
    settings: AnalysisSettings = DEFAULT_SETTINGS,
) -> float:
    """Smallest rate of the free channel for which boundedness is certified.

    ``fixed_channel`` is the channel whose rate is held at ``fixed_value``.
    Returns 0 if already bounded at rate 0 and ``1 + tol`` if not bounded
    even at rate 1.
    """
    if fixed_channel not in (1, 2):
        raise ValueError("fixed_channel must be 1 or 2")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not 0.0 <= fixed_value <= 1.0:
        raise ValueError("fixed_value must be in [0, 1]")
    vertices = jacobian_list(A)

    def bounded(free: float) -> bool:
        rates = RatePair(fixed_value, free) if fixed_channel == 1 else RatePair(free, fixed_value)
        return check_boundedness(vertices, model, rates, settings) is not None

    if bounded(0.0):
        return 0.0
    if not bounded(1.0):
        return 1.0 + tol
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bounded(mid):
            hi = mid
        else:
            lo = mid
    logger.debug("critical rate for channel %d: %.6g", 3 - fixed_channel, hi)
    return hi


def _gamma_top_left(
    A_j: np.ndarray, A_ref: np.ndarray, Q: np.ndarray, linearization: str
) -> sdp.AffineBlock:
    n = A_j.shape[0]
    minus_v = sdp.Term.product("V", left=-np.eye(n))
    if linearization == "identity":
        return sdp.AffineBlock(const=Q + A_j + A_j.T, terms=(minus_v,))
    # A_j V A_refᵀ + A_ref V A_jᵀ − A_ref V A_refᵀ; equals A V Aᵀ when A_j = A_ref
    return sdp.AffineBlock(
        const=Q,
        terms=(
            sdp.Term.product("V", left=A_j, right=A_ref.T),
            sdp.Term.product("V", left=A_ref, right=A_j.T),
            sdp.Term.product("V", left=-A_ref, right=A_ref.T),
            minus_v,
        ),
    )


def assemble_gamma(
    A: JacobianSet,
    model: SystemModel,
    rates: RatePair,
    linearization: str = "reference",
    scale: float = 1.0,
    eps: float = 0.0,
) -> sdp.SdpProblem:
    """Trace-maximization program over V with noise covariances divided by ``scale``."""
    vertices = jacobian_list(A)
    n = model.n_x
    Q = model.Q / scale
    R, R11, R22 = model.R / scale, model.R11 / scale, model.R22 / scale
    p = BranchProbabilities.from_rates(rates)
    branches = [
        (coef, C, Rb)
        for coef, C, Rb in (
            (math.sqrt(p.both), model.C, R),
            (math.sqrt(p.first), model.C1, R11),
            (math.sqrt(p.second), model.C2, R22),
        )
        if coef > 0
    ]
    identity_mode = linearization == "identity" and len(vertices) > 1
    A_ref = np.mean(np.stack(vertices), axis=0)

    problem = sdp.SdpProblem(objective=sdp.Objective("max_trace", "V"))
    problem.add_variable("V", (n, n), symmetric=True)
    positive = sdp.LmiConstraint("V_positive", [n])
    positive.put(0, 0, sdp.AffineBlock(const=-eps * np.eye(n), terms=(sdp.Term.product("V"),)))
    problem.add_constraint(positive)

    for j, A_j in enumerate(vertices):
        sizes = [n] + [C.shape[0] for _, C, _ in branches] + ([n] if identity_mode else [])
        lmi = sdp.LmiConstraint(f"gamma_{j}", sizes)
        reference = A_j if len(vertices) == 1 else A_ref
        lmi.put(0, 0, _gamma_top_left(A_j, reference, Q, "identity" if identity_mode else "reference"))
        for b, (coef, C, Rb) in enumerate(branches, start=1):
            lmi.put(0, b, sdp.AffineBlock(terms=(sdp.Term.product("V", left=coef * A_j, right=C.T),)))
            lmi.put(b, b, sdp.AffineBlock(const=Rb, terms=(sdp.Term.product("V", left=C, right=C.T),)))
        if identity_mode:
            last = len(sizes) - 1
            lmi.put(0, last, sdp.AffineBlock(const=np.eye(n)))
            lmi.put(last, last, sdp.AffineBlock(terms=(sdp.Term.product("V"),)))
        problem.add_constraint(lmi)
    return problem


def _noise_scale(model: SystemModel) -> float:
    return float(max(np.linalg.norm(model.Q, 2), np.linalg.norm(model.R, 2)))


def trace_bound(
    A: JacobianSet,
    model: SystemModel,
    rates: RatePair,
    settings: AnalysisSettings = DEFAULT_SETTINGS,
) -> TraceBoundResult:
    """Largest-trace V with g(V) ⪰ V; its trace bounds the steady expected covariance trace.

    Raises:
        SolverFailureError: If the conic solver fails numerically
    """
    vertices = jacobian_list(A)
    scale = _noise_scale(model)
    eps = strictness_margin(vertices, settings.tol)
    problem = assemble_gamma(vertices, model, rates, settings.linearization, scale=scale, eps=eps)
    solution = sdp.solve(problem, tol=settings.tol, solver=settings.solver)

    if solution.status == sdp.SdpStatus.UNBOUNDED:
        return TraceBoundResult("unbounded", solution=solution)
    if solution.status == sdp.SdpStatus.INFEASIBLE:
        return TraceBoundResult("infeasible", solution=solution)
    if not solution.ok:
        raise SolverFailureError(f"trace bound at {rates} failed: {solution.diagnostic()}", solution)

    V = symmetrize(solution.assignment["V"]) * scale
    tau = float(np.trace(V))
    logger.debug("trace bound at %s: tau=%.6g", rates, tau)
    return TraceBoundResult("feasible", V=V, tau=tau, solution=solution)


def pair_programs(
    A: JacobianSet, model: SystemModel, rates: RatePair, settings: AnalysisSettings = DEFAULT_SETTINGS
) -> dict[str, sdp.SdpProblem]:
    """The boundedness and trace-bound programs exactly as analyze_pair solves them."""
    vertices = jacobian_list(A)
    eps = strictness_margin(vertices, settings.tol)
    return {
        "psi": assemble_psi(vertices, model, rates, omit_open_loop=settings.omit_open_loop),
        "gamma": assemble_gamma(vertices, model, rates, settings.linearization, scale=_noise_scale(model), eps=eps),
    }


# --- per-pair analysis --------------------------------------------------------


PAIR_STATUSES = ("feasible", "infeasible", "unbounded", "solver_failure")


@dataclass(eq=False)
class PairAnalysis:
    """Boundedness decision and trace bound for one rate pair."""

    rates: RatePair
    status: str
    margin: Optional[float] = None
    tau: Optional[float] = None
    V: Optional[np.ndarray] = None
    message: str = ""
    bound_status: Optional[str] = None
    cached: bool = field(default=False, compare=False)

    @property
    def admissible(self) -> bool:
        """Certified bounded with a finite trace bound."""
        return self.status == "feasible" and self.tau is not None

    def to_dict(self) -> dict:
        return {
            "lambda1": self.rates.lambda1,
            "lambda2": self.rates.lambda2,
            "status": self.status,
            "margin": self.margin,
            "tau": self.tau,
            "V": None if self.V is None else self.V.tolist(),
            "message": self.message,
            "bound_status": self.bound_status,
        }

    @classmethod
    def from_dict(cls, data: dict, cached: bool = False) -> "PairAnalysis":
        V = data.get("V")
        return cls(
            rates=RatePair(data["lambda1"], data["lambda2"]),
            status=data["status"],
            margin=data.get("margin"),
            tau=data.get("tau"),
            V=None if V is None else np.array(V, dtype=float),
            message=data.get("message", ""),
            bound_status=data.get("bound_status"),
            cached=cached,
        )


def pair_cache_key(vertices: Sequence[np.ndarray], model: SystemModel, rates: RatePair, settings: AnalysisSettings) -> str:
    return generate_cache_key(
        "pair",
        *vertices,
        model.C1,
        model.C2,
        model.Q,
        model.R,
        lambda1=rates.lambda1,
        lambda2=rates.lambda2,
        vertex_count=len(vertices),
        **settings.to_dict(),
    )


def analyze_pair(
    A: JacobianSet,
    model: SystemModel,
    rates: RatePair,
    settings: AnalysisSettings = DEFAULT_SETTINGS,
    cache: Optional["CacheManager"] = None,
) -> PairAnalysis:
    """Run the boundedness check and the trace bound.

    Rates without a boundedness certificate are reported ``unbounded`` when
    the trace program is unbounded and ``infeasible`` otherwise.  Solver
    failures are recorded in the result instead of raised.
    """
    vertices = jacobian_list(A)
    key = pair_cache_key(vertices, model, rates, settings) if cache is not None else None
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            logger.debug("cache hit for %s", rates)
            return PairAnalysis.from_dict(hit, cached=True)

    try:
        certificate = check_boundedness(vertices, model, rates, settings)
        bound = trace_bound(vertices, model, rates, settings)
        if certificate is None:
            status = "unbounded" if bound.status == "unbounded" else "infeasible"
            message = "no boundedness certificate" + ("; trace bound unbounded" if status == "unbounded" else "")
            result = PairAnalysis(rates, status, message=message, bound_status=bound.status)
        elif bound.status == "feasible":
            result = PairAnalysis(
                rates, "feasible", margin=certificate.margin, tau=bound.tau, V=bound.V, bound_status=bound.status
            )
        elif bound.status == "unbounded":
            result = PairAnalysis(
                rates, "unbounded", margin=certificate.margin, message="trace bound unbounded", bound_status=bound.status
            )
        else:
            result = PairAnalysis(
                rates, "infeasible", margin=certificate.margin, message="trace program infeasible", bound_status=bound.status
            )
    except SolverFailureError as exc:
        logger.warning("solver failure at %s: %s", rates, exc)
        return PairAnalysis(rates, "solver_failure", message=str(exc))

    if cache is not None:
        cache.set(key, result.to_dict())
    return result
