"""Rate selection, read periods and the iterative relinearizing scheduler."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Any, Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError, NoFeasibleRateError, SolverFailureError
from .model_core import SystemModel
from .stability import (
    DEFAULT_SETTINGS,
    AnalysisSettings,
    JacobianSet,
    PairAnalysis,
    RatePair,
    analyze_pair,
    jacobian_list,
)
from .utils import write_csv

if TYPE_CHECKING:
    from .cache import CacheManager

logger = logging.getLogger(__name__)

NEVER = None
PENALTY_EXPONENT_CAP = 50.0
TIE_TOL = 1e-12
DEFAULT_DELTA = 0.1

LINEAR_GRID = tuple(round(0.1 * i, 10) for i in range(11))
KINEMATIC_GRID = (0.001, 0.01, 0.1, 0.5, 0.625)


def rate_to_period(lam: float) -> Optional[int]:
    """Read period ⌊1/λ⌋ in steps, or NEVER for λ = 0."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"rate must be in [0, 1], got {lam!r}")
    if lam == 0:
        return NEVER
    # absorbs representation error, e.g. 1/0.1 = 9.999999999999998
    return int(math.floor(1.0 / lam + 1e-9))


def rate_penalty(lam: float) -> float:
    """e^{1/(1−λ)} with the exponent capped so λ = 1 stays finite."""
    if lam >= 1.0:
        return math.exp(PENALTY_EXPONENT_CAP)
    return math.exp(min(1.0 / (1.0 - lam), PENALTY_EXPONENT_CAP))


def schedule_objective(tau: float, rates: RatePair) -> float:
    return tau + rate_penalty(rates.lambda1) + rate_penalty(rates.lambda2)


def parse_values(text: str) -> list[float]:
    """Parse ``"a,b,c"`` or an inclusive range ``"start:stop:step"`` into rates.

    Raises:
        ValueError: If the text is malformed or a value lies outside [0, 1]
    """
    text = text.strip()
    if not text:
        raise ValueError("empty value list")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:step, got '{text}'")
        start, stop, step = (float(p) for p in parts)
        if not step > 0 or stop < start:
            raise ValueError(f"invalid range '{text}'")
        count = int(round((stop - start) / step)) + 1
        values = [round(start + i * step, 12) for i in range(count)]
    else:
        values = [float(p) for p in text.split(",")]
    for value in values:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"rate {value} is outside [0, 1]")
    return values


@dataclass(frozen=True)
class CandidateSet:
    """Finite, non-empty list of rate pairs in evaluation order."""

    pairs: tuple[RatePair, ...]

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("candidate set must not be empty")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @classmethod
    def from_grid(cls, values1: Sequence[float], values2: Sequence[float]) -> "CandidateSet":
        """Cartesian product, λ₁ varying slowest."""
        return cls(tuple(RatePair(a, b) for a in values1 for b in values2))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "CandidateSet":
        return cls(tuple(RatePair(float(p[0]), float(p[1])) for p in pairs))

    @classmethod
    def from_config(cls, spec: dict[str, Any]) -> "CandidateSet":
        """Build from a config entry: ``{"pairs": [[l1, l2], ...]}`` or
        ``{"grid": [values]}`` / ``{"grid": {"lambda1": [...], "lambda2": [...]}}``."""
        try:
            if "pairs" in spec:
                return cls.from_pairs(spec["pairs"])
            grid = spec["grid"]
            if isinstance(grid, dict):
                return cls.from_grid(grid["lambda1"], grid["lambda2"])
            return cls.from_grid(grid, grid)
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise ConfigError(f"invalid candidate specification: {exc}") from exc

    @classmethod
    def linear_default(cls) -> "CandidateSet":
        return cls.from_grid(LINEAR_GRID, LINEAR_GRID)

    @classmethod
    def kinematic_default(cls) -> "CandidateSet":
        return cls.from_grid(KINEMATIC_GRID, KINEMATIC_GRID)

    @property
    def grid_axes(self) -> Optional[tuple[list[float], list[float]]]:
        """Axis values when the set is a full Cartesian grid in product order."""
        axis1 = sorted({p.lambda1 for p in self.pairs})
        axis2 = sorted({p.lambda2 for p in self.pairs})
        ordered = [p.as_tuple() for p in self.pairs]
        if ordered == [(a, b) for a in axis1 for b in axis2]:
            return axis1, axis2
        return None


@dataclass(eq=False)
class Schedule:
    """Chosen rate pair and the resulting read periods."""

    chosen: RatePair
    period1: Optional[int]
    period2: Optional[int]
    objective_value: float
    tau: float
    evaluations: list[PairAnalysis] = field(default_factory=list)

    @classmethod
    def from_rates(cls, rates: RatePair, tau: float = math.nan) -> "Schedule":
        return cls(
            chosen=rates,
            period1=rate_to_period(rates.lambda1),
            period2=rate_to_period(rates.lambda2),
            objective_value=schedule_objective(tau, rates) if math.isfinite(tau) else math.nan,
            tau=tau,
        )

    def to_dict(self) -> dict:
        return {
            "lambda1": self.chosen.lambda1,
            "lambda2": self.chosen.lambda2,
            "period1": self.period1,
            "period2": self.period2,
            "objective": self.objective_value,
            "tau": self.tau,
            "candidates": [e.to_dict() | {"V": None} for e in self.evaluations],
        }


def evaluate_candidates(
    A: JacobianSet,
    model: SystemModel,
    candidates: CandidateSet,
    settings: AnalysisSettings = DEFAULT_SETTINGS,
    cache: Optional["CacheManager"] = None,
    workers: int = 1,
) -> list[PairAnalysis]:
    """Analyze every candidate; results are returned in candidate order."""
    vertices = jacobian_list(A)

    def work(rates: RatePair) -> PairAnalysis:
        return analyze_pair(vertices, model, rates, settings, cache)

    if workers > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(work, candidates.pairs))
    return [work(rates) for rates in candidates.pairs]


def select_best(evaluations: Sequence[PairAnalysis]) -> Optional[tuple[PairAnalysis, float]]:
    """Admissible evaluation with the smallest objective.

    Objectives within TIE_TOL prefer the smaller λ₁+λ₂, then the smaller λ₁.
    """
    best: Optional[tuple[PairAnalysis, float]] = None
    for evaluation in evaluations:
        if not evaluation.admissible:
            continue
        value = schedule_objective(evaluation.tau, evaluation.rates)
        if best is None or value < best[1] - TIE_TOL:
            best = (evaluation, value)
        elif abs(value - best[1]) <= TIE_TOL:
            r, b = evaluation.rates, best[0].rates
            if (r.lambda1 + r.lambda2, r.lambda1) < (b.lambda1 + b.lambda2, b.lambda1):
                best = (evaluation, value)
    return best


def optimize_rates(
    A: JacobianSet,
    model: SystemModel,
    candidates: CandidateSet,
    settings: AnalysisSettings = DEFAULT_SETTINGS,
    cache: Optional["CacheManager"] = None,
    workers: int = 1,
) -> Schedule:
    """Pick the certified-bounded candidate minimizing τ + e^{1/(1−λ₁)} + e^{1/(1−λ₂)}.

    ``A`` is a polytope (or vertex list) for the robust program or a single
    Jacobian for the linear one.

    Raises:
        NoFeasibleRateError: If no candidate is certified bounded with finite τ
        SolverFailureError: If nothing is admissible and a solve failed numerically
    """
    evaluations = evaluate_candidates(A, model, candidates, settings, cache, workers)
    best = select_best(evaluations)
    if best is None:
        failures = [e for e in evaluations if e.status == "solver_failure"]
        if failures:
            raise SolverFailureError(
                f"no admissible pair; {len(failures)} candidate(s) hit solver failures: {failures[0].message}"
            )
        raise NoFeasibleRateError([(e.rates.lambda1, e.rates.lambda2, e.status) for e in evaluations])

    chosen, value = best
    logger.debug("chose %s with objective %.6g (tau %.6g)", chosen.rates, value, chosen.tau)
    return Schedule(
        chosen=chosen.rates,
        period1=rate_to_period(chosen.rates.lambda1),
        period2=rate_to_period(chosen.rates.lambda2),
        objective_value=value,
        tau=chosen.tau,
        evaluations=evaluations,
    )


# --- iterative scheduling ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IterativeState:
    """Bookkeeping of the relinearizing scheduler."""

    delta: float = DEFAULT_DELTA
    k1: float = -math.inf
    k2: float = -math.inf
    k_lin: Optional[int] = None
    A_lin: Optional[np.ndarray] = None
    schedule: Optional[Schedule] = None
    recomputed: bool = False

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")


def iterative_step(
    state: IterativeState,
    k: int,
    x_hat: np.ndarray,
    model: SystemModel,
    candidates: CandidateSet,
    settings: AnalysisSettings = DEFAULT_SETTINGS,
    cache: Optional["CacheManager"] = None,
    workers: int = 1,
) -> tuple[bool, bool, IterativeState]:
    """Decide which channels to read at step k, recomputing rates when A drifted.

    Rates are recomputed with the linear program at the current Jacobian when
    k = 0, or when ‖A_k − A_lin‖₂ ≥ δ and a channel was read since the last
    recomputation.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    A_k = model.jacobian(x_hat)
    recompute = k == 0 or state.schedule is None
    if not recompute:
        drift = float(np.linalg.norm(A_k - state.A_lin, 2))
        recompute = drift >= state.delta and state.k_lin <= max(state.k1, state.k2)

    if recompute:
        schedule = optimize_rates(A_k, model, candidates, settings, cache, workers)
        logger.debug(
            "step %d: recomputed rates %s, periods (%s, %s)", k, schedule.chosen, schedule.period1, schedule.period2
        )
        state = replace(state, k_lin=k, A_lin=A_k, schedule=schedule, recomputed=True)
    else:
        state = replace(state, recomputed=False)

    schedule = state.schedule
    read1 = schedule.period1 is not NEVER and k - state.k1 >= schedule.period1
    read2 = schedule.period2 is not NEVER and k - state.k2 >= schedule.period2
    state = replace(state, k1=k if read1 else state.k1, k2=k if read2 else state.k2)
    return read1, read2, state


@dataclass(frozen=True)
class PeriodRecord:
    k: int
    period1: Optional[int]
    period2: Optional[int]
    recomputed: bool


class IterativeScheduler:
    """Runs iterative_step and keeps a per-step history of the read periods."""

    def __init__(
        self,
        model: SystemModel,
        candidates: CandidateSet,
        delta: float = DEFAULT_DELTA,
        settings: AnalysisSettings = DEFAULT_SETTINGS,
        cache: Optional["CacheManager"] = None,
        workers: int = 1,
    ):
        self.model = model
        self.candidates = candidates
        self.settings = settings
        self.cache = cache
        self.workers = workers
        self.state = IterativeState(delta=delta)
        self.history: list[PeriodRecord] = []

    def step(self, k: int, x_hat: np.ndarray) -> tuple[bool, bool]:
        read1, read2, self.state = iterative_step(
            self.state, k, x_hat, self.model, self.candidates, self.settings, self.cache, self.workers
        )
        schedule = self.state.schedule
        self.history.append(PeriodRecord(k, schedule.period1, schedule.period2, self.state.recomputed))
        return read1, read2

    @property
    def recomputations(self) -> int:
        return sum(1 for record in self.history if record.recomputed)

    def mean_periods(self) -> tuple[Optional[float], Optional[float]]:
        """Average period per channel over steps where the channel was in use."""
        result = []
        for attr in ("period1", "period2"):
            values = [getattr(r, attr) for r in self.history if getattr(r, attr) is not NEVER]
            result.append(float(np.mean(values)) if values else None)
        return result[0], result[1]

    def write_periods_csv(self, path: Path) -> Path:
        rows = ([r.k, r.period1, r.period2, r.recomputed] for r in self.history)
        return write_csv(Path(path), ["k", "period1", "period2", "recomputed"], rows)
