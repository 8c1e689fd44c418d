"""Tests for rate selection and the iterative scheduler."""

import math
from unittest.mock import MagicMock, patch

import numpy as np
import pytest

from src.errors import ConfigError, NoFeasibleRateError, SolverFailureError
from src.model_core import load_model_config
from src.scheduler import (
    NEVER,
    CandidateSet,
    IterativeScheduler,
    IterativeState,
    Schedule,
    evaluate_candidates,
    iterative_step,
    optimize_rates,
    parse_values,
    rate_penalty,
    rate_to_period,
    schedule_objective,
    select_best,
)
from src.stability import PairAnalysis, RatePair

from .conftest import CONFIG_DIR


def _fake_analyzer(taus: dict, failures: tuple = ()):
    """analyze_pair stand-in: rates in ``taus`` are feasible with that τ."""

    def analyze(vertices, model, rates, settings=None, cache=None):
        key = rates.as_tuple()
        if key in failures:
            return PairAnalysis(rates, "solver_failure", message="stalled")
        if key in taus:
            return PairAnalysis(rates, "feasible", margin=0.1, tau=taus[key])
        return PairAnalysis(rates, "infeasible")

    return analyze


def _drifting_model(scale: float = 1.0):
    """Model stub whose Jacobian is (1 + x₀)·I."""
    model = MagicMock()
    model.jacobian.side_effect = lambda x: np.eye(2) * (scale + x[0])
    return model


class TestPeriods:
    """Tests for rate_to_period and the penalty."""

    @pytest.mark.parametrize(
        "lam,period",
        [(0.1, 10), (0.625, 1), (0.5, 2), (0.3, 3), (0.001, 1000), (0.01, 100), (1.0, 1)],
    )
    def test_rate_to_period(self, lam, period):
        """The period is the floor of 1/λ."""
        assert rate_to_period(lam) == period

    def test_zero_rate_never_reads(self):
        """A zero rate never reads."""
        assert rate_to_period(0.0) is NEVER

    def test_rate_out_of_range(self):
        """Rates above one are rejected by the option type."""
        with pytest.raises(ValueError):
            rate_to_period(1.2)

    def test_penalty(self):
        """The penalty is exp(1/(1-λ))."""
        assert rate_penalty(0.0) == pytest.approx(math.e)
        assert rate_penalty(0.5) == pytest.approx(math.exp(2.0))

    def test_penalty_capped(self):
        """The penalty saturates near λ = 1."""
        assert rate_penalty(1.0) == math.exp(50.0)
        assert rate_penalty(0.999) == math.exp(50.0)

    def test_objective(self):
        """The objective adds τ and both penalties."""
        value = schedule_objective(0.01, RatePair(0.1, 0.0))
        assert value == pytest.approx(0.01 + math.exp(1 / 0.9) + math.e)


class TestParseValues:
    """Tests for grid parsing."""

    def test_list(self):
        """Comma lists parse in order."""
        assert parse_values("0.1, 0.5,1") == [0.1, 0.5, 1.0]

    def test_range(self):
        """Ranges include both ends."""
        values = parse_values("0:1:0.1")
        assert len(values) == 11
        assert values[3] == 0.3
        assert values[-1] == 1.0

    @pytest.mark.parametrize("text", ["", "0:1", "1:0:0.1", "0:1:0", "1.5", "a,b", "0:2:0.5"])
    def test_invalid(self, text):
        """Malformed or out-of-range grids raise ValueError."""
        with pytest.raises(ValueError):
            parse_values(text)


class TestCandidateSet:
    """Tests for CandidateSet."""

    def test_grid_order(self):
        """λ₁ varies slowest."""
        candidates = CandidateSet.from_grid([0.0, 0.5], [0.1, 0.2])
        assert [p.as_tuple() for p in candidates] == [(0.0, 0.1), (0.0, 0.2), (0.5, 0.1), (0.5, 0.2)]
        assert candidates.grid_axes == ([0.0, 0.5], [0.1, 0.2])

    def test_defaults(self):
        """The default grids have 121 and 25 pairs."""
        assert len(CandidateSet.linear_default()) == 121
        assert len(CandidateSet.kinematic_default()) == 25

    def test_pairs_are_not_a_grid(self):
        """Explicit pairs carry no grid axes."""
        candidates = CandidateSet.from_pairs([[0.1, 0.0], [0.5, 0.5]])
        assert candidates.grid_axes is None

    def test_empty(self):
        """An empty candidate set is rejected."""
        with pytest.raises(ValueError):
            CandidateSet(())

    def test_from_config_variants(self):
        """Shared, per-channel and explicit pair specs are accepted."""
        assert len(CandidateSet.from_config({"grid": [0.0, 1.0]})) == 4
        assert len(CandidateSet.from_config({"grid": {"lambda1": [0.1], "lambda2": [0.0, 0.5]}})) == 2
        assert len(CandidateSet.from_config({"pairs": [[0.1, 0.0]]})) == 1

    @pytest.mark.parametrize("spec", [{}, {"grid": [2.0]}, {"pairs": [[0.1]]}, {"grid": {"lambda1": [0.1]}}])
    def test_from_config_invalid(self, spec):
        """Malformed candidate specs raise ConfigError."""
        with pytest.raises(ConfigError):
            CandidateSet.from_config(spec)


class TestSelection:
    """Tests for select_best and optimize_rates with stubbed analyses."""

    def test_minimum_objective(self):
        """The feasible pair with the smallest objective wins."""
        evaluations = [
            PairAnalysis(RatePair(0.1, 0.0), "feasible", tau=0.011),
            PairAnalysis(RatePair(0.5, 0.0), "feasible", tau=0.005),
            PairAnalysis(RatePair(0.0, 0.0), "unbounded"),
        ]
        chosen, value = select_best(evaluations)
        assert chosen.rates == RatePair(0.1, 0.0)
        assert value == pytest.approx(schedule_objective(0.011, RatePair(0.1, 0.0)))

    def test_tie_prefers_smaller_first_rate(self):
        """Equal objectives prefer the smaller λ₁."""
        evaluations = [
            PairAnalysis(RatePair(0.1, 0.0), "feasible", tau=1.0),
            PairAnalysis(RatePair(0.0, 0.1), "feasible", tau=1.0),
        ]
        assert select_best(evaluations)[0].rates == RatePair(0.0, 0.1)

    def test_tie_prefers_smaller_sum(self):
        """Equal objectives prefer the smaller rate sum."""
        # same objective, different rate sums
        tau_low = 1.0 + rate_penalty(0.2) - rate_penalty(0.1)
        evaluations = [
            PairAnalysis(RatePair(0.2, 0.2), "feasible", tau=1.0),
            PairAnalysis(RatePair(0.1, 0.2), "feasible", tau=tau_low),
        ]
        assert select_best(evaluations)[0].rates == RatePair(0.1, 0.2)

    def test_nothing_admissible(self):
        """Without a feasible pair there is no choice."""
        assert select_best([PairAnalysis(RatePair(0.0, 0.0), "infeasible")]) is None

    def test_optimize_rates_stubbed(self, benchmark_model, benchmark_A):
        """optimize_rates keeps every evaluation and reports the periods."""
        taus = {(0.1, 0.0): 0.011, (0.5, 0.5): 0.001}
        candidates = CandidateSet.from_grid([0.0, 0.1, 0.5], [0.0, 0.5])
        with patch("src.scheduler.analyze_pair", side_effect=_fake_analyzer(taus)):
            schedule = optimize_rates(benchmark_A, benchmark_model, candidates)
        assert schedule.chosen == RatePair(0.1, 0.0)
        assert schedule.period1 == 10
        assert schedule.period2 is NEVER
        assert len(schedule.evaluations) == 6

    def test_no_feasible_rate(self, benchmark_model, benchmark_A):
        """All-infeasible grids raise with the per-pair statuses."""
        candidates = CandidateSet.from_grid([0.0], [0.0, 0.1])
        with patch("src.scheduler.analyze_pair", side_effect=_fake_analyzer({})):
            with pytest.raises(NoFeasibleRateError) as excinfo:
                optimize_rates(benchmark_A, benchmark_model, candidates)
        assert excinfo.value.statuses == [(0.0, 0.0, "infeasible"), (0.0, 0.1, "infeasible")]

    def test_solver_failure_without_admissible_pair(self, benchmark_model, benchmark_A):
        """A solver failure with nothing admissible is raised as such."""
        candidates = CandidateSet.from_grid([0.0], [0.0, 0.1])
        with patch("src.scheduler.analyze_pair", side_effect=_fake_analyzer({}, failures=((0.0, 0.1),))):
            with pytest.raises(SolverFailureError):
                optimize_rates(benchmark_A, benchmark_model, candidates)

    def test_parallel_evaluation_keeps_order(self, benchmark_model, benchmark_A):
        """Worker threads return evaluations in candidate order."""
        candidates = CandidateSet.from_grid([0.0, 0.1, 0.5, 1.0], [0.0, 0.5, 1.0])
        taus = {p.as_tuple(): 0.01 for p in candidates}
        with patch("src.scheduler.analyze_pair", side_effect=_fake_analyzer(taus)):
            evaluations = evaluate_candidates(benchmark_A, benchmark_model, candidates, workers=4)
        assert [e.rates for e in evaluations] == list(candidates)

    def test_schedule_to_dict_drops_matrices(self):
        """Serialized schedules omit V and map NEVER to null."""
        evaluation = PairAnalysis(RatePair(0.1, 0.0), "feasible", tau=0.01, V=np.eye(2))
        schedule = Schedule(RatePair(0.1, 0.0), 10, NEVER, 1.0, 0.01, [evaluation])
        data = schedule.to_dict()
        assert data["period2"] is None
        assert data["candidates"][0]["V"] is None
        assert data["candidates"][0]["tau"] == 0.01

    def test_schedule_from_rates(self):
        """A fixed-rate schedule has periods but no objective."""
        schedule = Schedule.from_rates(RatePair(0.5, 0.1))
        assert (schedule.period1, schedule.period2) == (2, 10)
        assert math.isnan(schedule.objective_value)

    @pytest.mark.slow
    def test_linear_benchmark_choice(self, benchmark_model, benchmark_A):
        """The full 0..1 grid on the benchmark selects (0.1, 0)."""
        schedule = optimize_rates(benchmark_A, benchmark_model, CandidateSet.linear_default(), workers=4)
        assert schedule.chosen == RatePair(0.1, 0.0)
        assert 0.0090 <= schedule.tau <= 0.0135

    @pytest.mark.slow
    def test_shipped_kinematic_choice(self):
        """The shipped 5-DOF envelope with the five-value grid selects (0.1, 0.1)."""
        config = load_model_config(CONFIG_DIR / "kinematic5dof.json")
        candidates = CandidateSet.from_config(config.candidates)
        assert len(candidates) == 25
        schedule = optimize_rates(config.polytope(), config.model, candidates, workers=4)
        assert schedule.chosen == RatePair(0.1, 0.1)
        assert (schedule.period1, schedule.period2) == (10, 10)


class TestIterativeStep:
    """Tests for the relinearizing scheduler."""

    candidates = CandidateSet.from_grid([0.0, 0.1], [0.0, 0.1])
    taus = {(0.1, 0.0): 0.01}

    def test_constant_jacobian_recomputes_once(self, benchmark_model):
        """A constant Jacobian is linearized only at k = 0."""
        state = IterativeState()
        reads = []
        recomputed = []
        with patch("src.scheduler.analyze_pair", side_effect=_fake_analyzer(self.taus)):
            for k in range(25):
                read1, read2, state = iterative_step(state, k, np.zeros(2), benchmark_model, self.candidates)
                reads.append((read1, read2))
                recomputed.append(state.recomputed)
        assert recomputed == [True] + [False] * 24
        assert [k for k, (r1, _) in enumerate(reads) if r1] == [0, 10, 20]
        assert not any(r2 for _, r2 in reads)

    def test_drift_triggers_recompute_after_read(self):
        """Drift past δ recomputes only after a read since the last one."""
        model = _drifting_model()
        with patch("src.scheduler.analyze_pair", side_effect=_fake_analyzer(self.taus)):
            _, _, state = iterative_step(IterativeState(delta=0.1), 0, np.zeros(2), model, self.candidates)
            assert state.k1 == 0
            _, _, state = iterative_step(state, 1, np.array([0.2, 0.0]), model, self.candidates)
            assert state.recomputed
            assert state.k_lin == 1
            # no read since the last recomputation
            _, _, state = iterative_step(state, 2, np.array([0.5, 0.0]), model, self.candidates)
            assert not state.recomputed

    def test_small_drift_ignored(self):
        """Drift below δ keeps the schedule."""
        model = _drifting_model()
        with patch("src.scheduler.analyze_pair", side_effect=_fake_analyzer(self.taus)):
            _, _, state = iterative_step(IterativeState(delta=0.1), 0, np.zeros(2), model, self.candidates)
            _, _, state = iterative_step(state, 1, np.array([0.05, 0.0]), model, self.candidates)
        assert not state.recomputed
        assert state.k_lin == 0

    def test_infinite_delta_keeps_static_schedule(self):
        """δ = ∞ never relinearizes, so reads follow the schedule chosen at k = 0."""
        model = _drifting_model()
        taus = {(0.1, 0.0): 0.01, (0.1, 0.1): 0.005}
        state = IterativeState(delta=math.inf)
        reads = []
        with patch("src.scheduler.analyze_pair", side_effect=_fake_analyzer(taus)):
            static = optimize_rates(model.jacobian(np.zeros(2)), model, self.candidates)
            for k in range(40):
                read1, read2, state = iterative_step(state, k, np.array([0.1 * k, 0.0]), model, self.candidates)
                reads.append((read1, read2))
                assert state.recomputed == (k == 0)
        assert state.schedule.chosen == static.chosen
        expected = [
            (
                static.period1 is not NEVER and k % static.period1 == 0,
                static.period2 is not NEVER and k % static.period2 == 0,
            )
            for k in range(40)
        ]
        assert reads == expected

    def test_invalid_arguments(self, benchmark_model):
        """δ must be positive and steps non-negative."""
        with pytest.raises(ValueError):
            IterativeState(delta=0.0)
        with pytest.raises(ValueError):
            iterative_step(IterativeState(), -1, np.zeros(2), benchmark_model, self.candidates)


class TestIterativeScheduler:
    """Tests for the history-keeping wrapper."""

    def test_history_and_periods_csv(self, benchmark_model, tmp_path):
        """The wrapper records periods per step and writes them as CSV."""
        scheduler = IterativeScheduler(benchmark_model, CandidateSet.from_grid([0.0, 0.1], [0.0, 0.1]))
        with patch("src.scheduler.analyze_pair", side_effect=_fake_analyzer({(0.1, 0.0): 0.01})):
            for k in range(3):
                scheduler.step(k, np.zeros(2))
        assert scheduler.recomputations == 1
        assert scheduler.mean_periods() == (10.0, None)

        path = scheduler.write_periods_csv(tmp_path / "periods.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "k,period1,period2,recomputed"
        assert lines[1] == "0,10,,1"
        assert lines[2] == "1,10,,0"
