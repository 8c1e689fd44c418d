"""Simulation harness: truth trajectories, arrival patterns and log replay."""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterator, Optional, Union

import numpy as np
from scipy import linalg

from .errors import ConfigError, LogFormatError, SimulationError, TwoChannelError
from .filter2c import ArrivalPair, FilterState, initial_state, innovation, predict, update_2c
from .model_core import SystemModel
from .scheduler import NEVER, CandidateSet, IterativeScheduler, Schedule
from .stability import DEFAULT_SETTINGS, AnalysisSettings, JacobianSet, RatePair, analyze_pair, jacobian_list
from .utils import save_json_file, write_csv

if TYPE_CHECKING:
    from .cache import CacheManager

logger = logging.getLogger(__name__)

STEADY_FRACTION = 0.2
DEFAULT_DURATION = 600.0


@dataclass(frozen=True)
class Stochastic:
    """Bernoulli arrivals with the given rates."""

    rates: RatePair


@dataclass(frozen=True)
class Scheduled:
    """Deterministic reads every period steps, starting at k = 0."""

    schedule: Schedule


@dataclass(frozen=True)
class Iterative:
    """Reads decided online by the relinearizing scheduler."""

    candidates: CandidateSet
    delta: float = 0.1


@dataclass(frozen=True)
class Replay:
    log_path: Path


SimMode = Union[Stochastic, Scheduled, Iterative, Replay]


@dataclass
class SimConfig:
    """One simulation run."""

    model: SystemModel
    mode: SimMode
    duration: float = DEFAULT_DURATION
    seed: int = 0
    x0: Optional[np.ndarray] = None
    x0_hat: Optional[np.ndarray] = None
    P0: Optional[np.ndarray] = None
    noise_scale: float = 1.0
    tau: Optional[float] = None
    settings: AnalysisSettings = DEFAULT_SETTINGS
    cache: Optional["CacheManager"] = None
    workers: int = 1

    def validate(self) -> list[str]:
        """Validate run settings.

        Returns:
            List of validation error messages (empty if valid)
        """
        errors = []
        if not self.duration > 0:
            errors.append("duration must be positive")
        if not self.noise_scale >= 0:
            errors.append("noise_scale must not be negative")
        if not 0 <= self.seed < 2**64:
            errors.append("seed must be a 64-bit unsigned integer")
        if self.x0 is not None and np.asarray(self.x0).reshape(-1).shape[0] != self.model.n_x:
            errors.append(f"x0 must have {self.model.n_x} entries")
        if isinstance(self.mode, Replay):
            errors.append("replay mode is run through replay(), not run()")
        return errors

    @property
    def steps(self) -> int:
        return int(math.floor(self.duration / self.model.Ts + 1e-9))


@dataclass(frozen=True, eq=False)
class StepRecord:
    k: int
    x_true: Optional[np.ndarray]
    x_hat: np.ndarray
    trace: float
    gamma1: bool
    gamma2: bool


@dataclass(eq=False)
class SimResult:
    """Per-step arrays of a run plus its summary.

    ``trace`` is the trace of the predicted covariance after step k and
    ``trace_post`` that of the updated covariance at step k.
    """

    model: SystemModel
    x_hat: np.ndarray
    trace: np.ndarray
    trace_post: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    x_true: Optional[np.ndarray] = None
    nis1: list[float] = field(default_factory=list)
    nis2: list[float] = field(default_factory=list)
    measurements: list[tuple[int, int, np.ndarray]] = field(default_factory=list)
    tau: Optional[float] = None
    seed: Optional[int] = None
    scheduler: Optional[IterativeScheduler] = None

    def __len__(self) -> int:
        return self.trace.shape[0]

    def records(self) -> Iterator[StepRecord]:
        for k in range(len(self)):
            yield StepRecord(
                k=k,
                x_true=None if self.x_true is None else self.x_true[k],
                x_hat=self.x_hat[k],
                trace=float(self.trace[k]),
                gamma1=bool(self.gamma1[k]),
                gamma2=bool(self.gamma2[k]),
            )

    @property
    def steady_trace(self) -> float:
        """Mean predicted-covariance trace over the final 20% of steps."""
        if len(self) == 0:
            return math.nan
        start = min(int(math.floor((1.0 - STEADY_FRACTION) * len(self))), len(self) - 1)
        return float(np.mean(self.trace[start:]))

    @property
    def rmse(self) -> Optional[list[float]]:
        if self.x_true is None or len(self) == 0:
            return None
        return np.sqrt(np.mean((self.x_true - self.x_hat) ** 2, axis=0)).tolist()

    def summary(self) -> dict:
        n = len(self)
        summary = {
            "steps": n,
            "steady_trace": self.steady_trace,
            "rmse": self.rmse,
            "reads1": int(self.gamma1.sum()),
            "reads2": int(self.gamma2.sum()),
            "rate1": float(self.gamma1.mean()) if n else None,
            "rate2": float(self.gamma2.mean()) if n else None,
            "tau": self.tau,
            "nis1": float(np.mean(self.nis1)) if self.nis1 else None,
            "nis2": float(np.mean(self.nis2)) if self.nis2 else None,
            "seed": self.seed,
        }
        if self.scheduler is not None:
            mean1, mean2 = self.scheduler.mean_periods()
            summary["recomputations"] = self.scheduler.recomputations
            summary["mean_period1"] = mean1
            summary["mean_period2"] = mean2
        return summary


def make_generators(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent Philox streams for noise and for arrivals."""
    noise_seq, arrival_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.Philox(noise_seq)), np.random.Generator(np.random.Philox(arrival_seq))


def _periodic_read(period: Optional[int], k: int) -> bool:
    return period is not NEVER and k % period == 0


class _Recorder:
    """Accumulates per-step arrays for a run of known length."""

    def __init__(self, model: SystemModel, steps: int, with_truth: bool):
        self.x_hat = np.zeros((steps, model.n_x))
        self.x_true = np.zeros((steps, model.n_x)) if with_truth else None
        self.trace = np.zeros(steps)
        self.trace_post = np.zeros(steps)
        self.gamma1 = np.zeros(steps, dtype=bool)
        self.gamma2 = np.zeros(steps, dtype=bool)
        self.nis1: list[float] = []
        self.nis2: list[float] = []
        self.measurements: list[tuple[int, int, np.ndarray]] = []


def _filter_step(
    model: SystemModel,
    s: FilterState,
    k: int,
    arrivals: ArrivalPair,
    y1: Optional[np.ndarray],
    y2: Optional[np.ndarray],
    rec: _Recorder,
) -> FilterState:
    """Update with the arrived channels, record, then predict."""
    try:
        for channel, y, sink in ((1, y1, rec.nis1), (2, y2, rec.nis2)):
            if y is not None:
                nu, S = innovation(model, s, channel, y)
                sink.append(float(nu @ np.linalg.solve(S, nu)))
                rec.measurements.append((k, channel, y))
        s = update_2c(model, s, arrivals, y1, y2)
        rec.x_hat[k] = s.x_hat
        rec.trace_post[k] = s.trace
        rec.gamma1[k], rec.gamma2[k] = arrivals.gamma1, arrivals.gamma2
        s = predict(model, s)
    except TwoChannelError as exc:
        raise SimulationError(k, exc) from exc
    except np.linalg.LinAlgError as exc:
        raise SimulationError(k, exc) from exc
    rec.trace[k] = s.trace
    return s


def run(config: SimConfig) -> SimResult:
    """Simulate truth and filter for ``config.steps`` steps.

    Measurement noise is drawn at every step whether or not a channel is read,
    so truth trajectories are identical across modes for the same seed.

    Raises:
        ConfigError: If the configuration is invalid
        SimulationError: If the filter fails numerically (carries the step index)
    """
    errors = config.validate()
    if errors:
        raise ConfigError("; ".join(errors))
    model = config.model
    steps = config.steps
    noise_rng, arrival_rng = make_generators(config.seed)
    Lq = linalg.cholesky(model.Q, lower=True)
    Lr = linalg.cholesky(model.R, lower=True)

    mode = config.mode
    scheduler = None
    tau = config.tau
    if isinstance(mode, Iterative):
        scheduler = IterativeScheduler(
            model, mode.candidates, mode.delta, config.settings, config.cache, config.workers
        )
    elif isinstance(mode, Scheduled) and tau is None and math.isfinite(mode.schedule.tau):
        tau = mode.schedule.tau

    x = np.zeros(model.n_x) if config.x0 is None else np.asarray(config.x0, dtype=float).reshape(-1)
    s = initial_state(model, config.x0_hat, config.P0)
    rec = _Recorder(model, steps, with_truth=True)

    for k in range(steps):
        if isinstance(mode, Stochastic):
            draws = arrival_rng.random(2)
            g1, g2 = bool(draws[0] < mode.rates.lambda1), bool(draws[1] < mode.rates.lambda2)
        elif isinstance(mode, Scheduled):
            g1 = _periodic_read(mode.schedule.period1, k)
            g2 = _periodic_read(mode.schedule.period2, k)
        else:
            try:
                g1, g2 = scheduler.step(k, s.x_hat)
            except np.linalg.LinAlgError as exc:
                raise SimulationError(k, exc) from exc

        y = model.C @ x + config.noise_scale * (Lr @ noise_rng.standard_normal(model.n_y))
        y1, y2 = y[: model.n_y1], y[model.n_y1 :]
        rec.x_true[k] = x
        s = _filter_step(model, s, k, ArrivalPair(g1, g2), y1 if g1 else None, y2 if g2 else None, rec)
        x = model.f(x) + config.noise_scale * (Lq @ noise_rng.standard_normal(model.n_x))

    logger.debug("run finished: %d steps, seed %d", steps, config.seed)
    return SimResult(
        model=model,
        x_hat=rec.x_hat,
        trace=rec.trace,
        trace_post=rec.trace_post,
        gamma1=rec.gamma1,
        gamma2=rec.gamma2,
        x_true=rec.x_true,
        nis1=rec.nis1,
        nis2=rec.nis2,
        measurements=rec.measurements,
        tau=tau,
        seed=config.seed,
        scheduler=scheduler,
    )


# --- measurement logs ---------------------------------------------------------------


def _log_width(model: SystemModel) -> int:
    return max(model.n_y1, model.n_y2)


def write_measurement_log(result: SimResult, path: Path) -> Path:
    """Write received measurements as ``k,channel,y1..ym`` rows (unused cells empty)."""
    width = _log_width(result.model)
    header = ["k", "channel"] + [f"y{i + 1}" for i in range(width)]
    rows = []
    for k, channel, y in result.measurements:
        values = [float(v) for v in y]
        rows.append([k, channel] + values + [None] * (width - len(values)))
    return write_csv(Path(path), header, rows)


def read_measurement_log(path: Path, model: SystemModel) -> dict[int, dict[int, np.ndarray]]:
    """Parse a measurement log into {k: {channel: y}}.

    Raises:
        FileNotFoundError: If the log does not exist
        LogFormatError: On a malformed row, a duplicate entry or a decreasing k
    """
    entries: dict[int, dict[int, np.ndarray]] = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise LogFormatError(1, "missing header")
        if header[:2] != ["k", "channel"] or len(header) < 3:
            raise LogFormatError(1, "header must start with k,channel,y...")
        last_k = -1
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise LogFormatError(line, f"expected {len(header)} fields, got {len(row)}")
            try:
                k = int(row[0])
                channel = int(row[1])
            except ValueError:
                raise LogFormatError(line, "k and channel must be integers") from None
            if k < 0:
                raise LogFormatError(line, "k must not be negative")
            if k < last_k:
                raise LogFormatError(line, f"k decreases from {last_k} to {k}")
            if channel not in (1, 2):
                raise LogFormatError(line, f"channel must be 1 or 2, got {channel}")
            dim = model.channel_dim(channel)
            cells = row[2:]
            if any(c.strip() == "" for c in cells[:dim]) or any(c.strip() for c in cells[dim:]):
                raise LogFormatError(line, f"channel {channel} needs exactly {dim} values")
            try:
                y = np.array([float(c) for c in cells[:dim]])
            except ValueError:
                raise LogFormatError(line, "measurement values must be numbers") from None
            if channel in entries.setdefault(k, {}):
                raise LogFormatError(line, f"duplicate entry for k={k}, channel {channel}")
            entries[k][channel] = y
            last_k = k
    return entries


def replay(
    model: SystemModel,
    log_path: Path,
    steps: Optional[int] = None,
    x0_hat: Optional[np.ndarray] = None,
    P0: Optional[np.ndarray] = None,
    tau: Optional[float] = None,
) -> SimResult:
    """Drive the filter with recorded measurements.

    Arrivals are whatever the log contains. ``steps`` defaults to one past
    the last logged k.
    """
    entries = read_measurement_log(Path(log_path), model)
    if steps is None:
        steps = max(entries) + 1 if entries else 0
    elif entries and max(entries) >= steps:
        logger.warning("log extends past step %d; later rows are ignored", steps - 1)

    s = initial_state(model, x0_hat, P0)
    rec = _Recorder(model, steps, with_truth=False)
    for k in range(steps):
        row = entries.get(k, {})
        y1, y2 = row.get(1), row.get(2)
        s = _filter_step(model, s, k, ArrivalPair(y1 is not None, y2 is not None), y1, y2, rec)

    return SimResult(
        model=model,
        x_hat=rec.x_hat,
        trace=rec.trace,
        trace_post=rec.trace_post,
        gamma1=rec.gamma1,
        gamma2=rec.gamma2,
        nis1=rec.nis1,
        nis2=rec.nis2,
        measurements=rec.measurements,
        tau=tau,
    )


def write_result_csv(result: SimResult, path: Path) -> Path:
    """Per-step export: k, traces, arrivals, estimation errors (empty without truth) and estimates."""
    n = result.model.n_x
    header = (
        ["k", "trace", "trace_post", "gamma1", "gamma2"]
        + [f"err_{i + 1}" for i in range(n)]
        + [f"xhat_{i + 1}" for i in range(n)]
    )

    def rows():
        for k in range(len(result)):
            err = [None] * n if result.x_true is None else list(result.x_true[k] - result.x_hat[k])
            yield (
                [k, float(result.trace[k]), float(result.trace_post[k]), bool(result.gamma1[k]), bool(result.gamma2[k])]
                + err
                + list(result.x_hat[k])
            )

    return write_csv(Path(path), header, rows())


def write_summary_json(result: SimResult, path: Path) -> Path:
    return save_json_file(result.summary(), Path(path))


# --- grid sweep -----------------------------------------------------------------------


@dataclass
class SweepRow:
    """Analysis and simulation outcome of one grid cell."""

    rates: RatePair
    status: str
    tau: Optional[float]
    sim_trace: Optional[float]
    margin: Optional[float] = None
    message: str = ""

    @property
    def bound_label(self) -> str:
        if self.status == "feasible":
            return repr(self.tau)
        return self.status.upper()

    def to_list(self) -> list:
        return [self.rates.lambda1, self.rates.lambda2, self.status, self.tau, self.sim_trace, self.margin, self.message]


SWEEP_HEADER = ["lambda1", "lambda2", "status", "tau", "sim_trace", "margin", "message"]


def grid_sweep(
    model: SystemModel,
    A: JacobianSet,
    grid: CandidateSet,
    duration: float,
    seeds: list[int],
    settings: AnalysisSettings = DEFAULT_SETTINGS,
    cache: Optional["CacheManager"] = None,
    workers: int = 1,
    x0: Optional[np.ndarray] = None,
) -> list[SweepRow]:
    """Trace bound and mean simulated steady trace (stochastic arrivals) per cell, in grid order."""
    vertices = jacobian_list(A)

    def cell(rates: RatePair) -> SweepRow:
        analysis = analyze_pair(vertices, model, rates, settings, cache)
        traces, message = [], analysis.message
        try:
            for seed in seeds:
                config = SimConfig(model, Stochastic(rates), duration=duration, seed=seed, x0=x0, tau=analysis.tau)
                traces.append(run(config).steady_trace)
        except SimulationError as exc:
            message = f"simulation failed: {exc}"
        sim_trace = float(np.mean(traces)) if traces and len(traces) == len(seeds) else None
        logger.debug("sweep cell %s: %s tau=%s sim=%s", rates, analysis.status, analysis.tau, sim_trace)
        return SweepRow(rates, analysis.status, analysis.tau, sim_trace, analysis.margin, message)

    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(cell, grid.pairs))
    return [cell(rates) for rates in grid.pairs]


def write_sweep_csv(rows: list[SweepRow], path: Path) -> Path:
    return write_csv(Path(path), SWEEP_HEADER, (row.to_list() for row in rows))


def write_sweep_grid_csv(rows: list[SweepRow], path: Path) -> Path:
    """λ₁ rows by λ₂ columns of τ (status label where there is no bound)."""
    axis1 = sorted({r.rates.lambda1 for r in rows})
    axis2 = sorted({r.rates.lambda2 for r in rows})
    lookup = {r.rates.as_tuple(): r for r in rows}
    header = ["lambda1\\lambda2"] + [repr(v) for v in axis2]
    body = []
    for a in axis1:
        line = [a]
        for b in axis2:
            row = lookup.get((a, b))
            line.append("" if row is None else row.bound_label)
        body.append(line)
    return write_csv(Path(path), header, body)
