#!/usr/bin/env python3
"""twochan CLI - two-channel Kalman filter analysis and scheduling."""

import functools
import logging
import sys
from pathlib import Path
from typing import Any, Optional

import click
import cvxpy as cp
import numpy as np

from src import __version__, sdp
from src.cache import CacheManager
from src.config import SUPPORTED_SOLVERS, Config
from src.errors import (
    ConfigError,
    DimensionError,
    LogFormatError,
    NoFeasibleRateError,
    PolytopeError,
    SimulationError,
    SolverFailureError,
    TwoChannelError,
)
from src.formatter import ReportFormatter
from src.manifest import RunManifest
from src.model_core import ModelConfig, load_model_config
from src.scheduler import CandidateSet, Schedule, optimize_rates, parse_values
from src.sim import (
    Iterative,
    Scheduled,
    SimConfig,
    Stochastic,
    grid_sweep,
    replay as replay_log,
    run,
    write_measurement_log,
    write_result_csv,
    write_summary_json,
    write_sweep_csv,
    write_sweep_grid_csv,
)
from src.stability import (
    LINEARIZATIONS,
    AnalysisSettings,
    RatePair,
    analyze_pair,
    critical_lambda,
    jacobian_list,
    pair_programs,
)
from src.utils import fmt6, save_json_file

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_INFEASIBLE = 2
EXIT_USAGE = 64
EXIT_NOINPUT = 66


class ExitCodeGroup(click.Group):
    """Group that reports usage errors with exit code 64."""

    def main(self, *args, **kwargs):
        kwargs.pop("standalone_mode", None)
        try:
            rv = super().main(*args, standalone_mode=False, **kwargs)
        except click.UsageError as exc:
            exc.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_SOLVER)
        except click.ClickException as exc:
            exc.show()
            sys.exit(exc.exit_code)
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


def _fail(message: str, code: int) -> None:
    click.echo(click.style(f"Error: {message}", fg="red"), err=True)
    sys.exit(code)


def handle_errors(fn):
    """Map library errors onto exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FileNotFoundError as exc:
            _fail(f"input not found: {exc.filename or exc}", EXIT_NOINPUT)
        except NoFeasibleRateError as exc:
            click.echo(ReportFormatter().format_excluded_pairs(exc.statuses), err=True)
            _fail("no candidate rate pair is certified bounded", EXIT_INFEASIBLE)
        except (SolverFailureError, SimulationError) as exc:
            _fail(str(exc), EXIT_SOLVER)
        except (ConfigError, LogFormatError, PolytopeError, DimensionError) as exc:
            _fail(str(exc), EXIT_USAGE)
        except TwoChannelError as exc:
            _fail(str(exc), EXIT_SOLVER)

    return wrapper


def _load_model(path: str) -> ModelConfig:
    if not Path(path).exists():
        _fail(f"model config not found: {path}", EXIT_NOINPUT)
    return load_model_config(Path(path))


def _settings(config: Config, solver, tol, omit_open_loop, linearization) -> AnalysisSettings:
    return AnalysisSettings(
        tol=tol if tol is not None else config.sdp_tol,
        solver=(solver or config.solver).upper(),
        omit_open_loop=omit_open_loop,
        linearization=linearization,
    )


def _cache(config: Config, no_cache: bool) -> Optional[CacheManager]:
    return None if no_cache else CacheManager(config.cache_dir, config.cache_ttl)


def _default_mode(model_config: ModelConfig) -> str:
    return "linear" if model_config.model.parametrization.is_constant else "polytopic"


def _sim_defaults(model_config: ModelConfig) -> dict[str, Any]:
    sim = model_config.simulation
    P0 = np.diag(sim["P0_diag"]) if "P0_diag" in sim else None
    return {
        "x0": None if "x0" not in sim else np.asarray(sim["x0"], dtype=float),
        "x0_hat": None if "x0_hat" not in sim else np.asarray(sim["x0_hat"], dtype=float),
        "P0": P0,
    }


def _jacobians(model_config: ModelConfig, mode: str):
    """Polytope vertices, or the Jacobian at the initial state for the linear program."""
    if mode == "polytopic":
        return model_config.polytope()
    x0 = _sim_defaults(model_config)["x0"]
    return model_config.model.jacobian(np.zeros(model_config.model.n_x) if x0 is None else x0)


def _candidates(model_config: ModelConfig, grid: Optional[str]) -> CandidateSet:
    if grid:
        try:
            values = parse_values(grid)
        except ValueError as exc:
            raise click.BadParameter(str(exc), param_hint="--grid") from exc
        return CandidateSet.from_grid(values, values)
    if model_config.candidates:
        return CandidateSet.from_config(model_config.candidates)
    if model_config.model_type == "kinematic5dof":
        return CandidateSet.kinematic_default()
    return CandidateSet.linear_default()


def _out_dir(config: Config, out: Optional[str], command: str) -> Path:
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        return path
    return config.ensure_output_dir(command)


def _jsonable(value: Any) -> Any:
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


def _manifest(ctx: click.Context, resolved: dict[str, Any], seeds: list[int]) -> RunManifest:
    params = {key: _jsonable(value) for key, value in ctx.params.items()}
    params.update({key: _jsonable(value) for key, value in resolved.items() if key in ctx.params})
    return RunManifest(command=ctx.command.name, params=params, version=__version__, seeds=seeds)


def formulation_options(fn):
    """Solver and formulation switches shared by analysis commands."""
    fn = click.option("--no-cache", is_flag=True, help="Disable the analysis cache")(fn)
    fn = click.option(
        "--linearization",
        type=click.Choice(LINEARIZATIONS),
        default="reference",
        show_default=True,
        help="Polytopic trace-bound formulation",
    )(fn)
    fn = click.option(
        "--omit-open-loop", is_flag=True, help="Omit the open-loop block from the boundedness LMI"
    )(fn)
    fn = click.option("--tol", type=float, default=None, help="SDP tolerance (default TWOCHAN_SDP_TOL)")(fn)
    fn = click.option(
        "--solver",
        type=click.Choice(SUPPORTED_SOLVERS, case_sensitive=False),
        default=None,
        help="Conic solver (default TWOCHAN_SOLVER)",
    )(fn)
    fn = click.option(
        "--analysis",
        "analysis_mode",
        type=click.Choice(["linear", "polytopic"]),
        default=None,
        help="Linear program at one Jacobian or robust program over the polytope",
    )(fn)
    fn = click.option("--config", "config_path", required=True, help="Model config JSON file")(fn)
    return fn


@click.group(cls=ExitCodeGroup)
@click.version_option(version=__version__, prog_name="twochan")
@click.option("--debug", is_flag=True, help="Enable debug logging")
@click.pass_context
def cli(ctx, debug):
    """twochan - boundedness analysis and rate scheduling for two-channel Kalman filters.

    Checks whether intermittent measurements on two channels keep the error
    covariance bounded, computes trace bounds, picks read rates and simulates
    the resulting filter.
    """
    ctx.ensure_object(dict)
    config = Config.from_env()
    errors = config.validate()
    if errors:
        for error in errors:
            click.echo(click.style(f"Error: {error}", fg="red"), err=True)
        sys.exit(EXIT_USAGE)
    config.debug = config.debug or debug
    logging.basicConfig(
        level=logging.DEBUG if config.debug else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    ctx.obj["config"] = config


@cli.command()
@formulation_options
@click.option("--lambda1", type=click.FloatRange(0, 1), default=None, help="Arrival rate of channel 1")
@click.option("--lambda2", type=click.FloatRange(0, 1), default=None, help="Arrival rate of channel 2")
@click.option("--bisect", type=click.Choice(["1", "2"]), default=None, help="Channel whose critical rate to find")
@click.option("--fixed", type=click.FloatRange(0, 1), default=None, help="Rate of the other channel when bisecting")
@click.option("--bisect-tol", type=float, default=1e-3, show_default=True, help="Bisection tolerance")
@click.option(
    "--dump-sdp", "dump_dir", type=click.Path(file_okay=False), default=None,
    help="Write the assembled psi.sdp and gamma.sdp programs here",
)
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Write analysis.json and analysis.md here")
@click.pass_context
@handle_errors
def analyze(
    ctx, config_path, analysis_mode, solver, tol, omit_open_loop, linearization, no_cache,
    lambda1, lambda2, bisect, fixed, bisect_tol, out, dump_dir,
):
    """Check boundedness and compute the trace bound at one rate pair."""
    config = ctx.obj["config"]
    model_config = _load_model(config_path)
    mode = analysis_mode or _default_mode(model_config)
    settings = _settings(config, solver, tol, omit_open_loop, linearization)
    A = _jacobians(model_config, mode)
    vertices = jacobian_list(A)
    formatter = ReportFormatter()

    if bisect is None and (lambda1 is None or lambda2 is None):
        raise click.UsageError("give --lambda1 and --lambda2, or --bisect with --fixed")
    if bisect is not None and fixed is None:
        raise click.UsageError("--bisect requires --fixed")
    if not bisect_tol > 0:
        raise click.BadParameter("must be positive", param_hint="--bisect-tol")
    if dump_dir and (lambda1 is None or lambda2 is None):
        raise click.UsageError("--dump-sdp requires --lambda1 and --lambda2")

    report: dict[str, Any] = {
        "model": model_config.model.name,
        "mode": mode,
        "vertices": len(vertices),
        "settings": settings.to_dict(),
        "lambda1": lambda1,
        "lambda2": lambda2,
        "status": "not_evaluated",
        "margin": None,
        "tau": None,
        "bound_status": None,
        "critical_lambda": None,
        "message": "",
    }
    exit_code = EXIT_OK

    if bisect is not None:
        free = int(bisect)
        fixed_channel = 3 - free
        value = critical_lambda(vertices, model_config.model, fixed_channel, fixed, bisect_tol, settings)
        report.update(
            critical_lambda=value,
            free_channel=free,
            fixed_channel=fixed_channel,
            fixed_value=fixed,
            bisect_tol=bisect_tol,
        )
        if value > 1.0:
            report["message"] = "not bounded even when the free channel always arrives"
            exit_code = EXIT_INFEASIBLE

    if lambda1 is not None and lambda2 is not None:
        rates = RatePair(lambda1, lambda2)
        if dump_dir:
            for name, problem in pair_programs(vertices, model_config.model, rates, settings).items():
                path = sdp.dump(problem, Path(dump_dir) / f"{name}.sdp")
                click.echo(f"SDP written to: {path}")
        analysis = analyze_pair(vertices, model_config.model, rates, settings, _cache(config, no_cache))
        report.update(status=analysis.status, margin=analysis.margin, tau=analysis.tau, message=analysis.message)
        if analysis.status == "solver_failure":
            click.echo(formatter.format_analysis_console(report))
            _fail(analysis.message, EXIT_SOLVER)
        report["bound_status"] = analysis.bound_status
        if analysis.status != "feasible":
            exit_code = EXIT_INFEASIBLE

    click.echo(formatter.format_analysis_console(report))
    if report["bound_status"] not in (None, "feasible"):
        click.echo(f"Trace bound: {report['bound_status'].upper()}")

    if out:
        out_dir = _out_dir(config, out, "analyze")
        manifest = _manifest(ctx, {"solver": settings.solver, "tol": settings.tol, "analysis_mode": mode}, [])
        manifest.add_output(save_json_file(report, out_dir / "analysis.json"))
        manifest.add_output(formatter.save_report(formatter.format_analysis_report(report), out_dir / "analysis.md"))
        manifest.write(out_dir)
        click.echo(f"Report saved to: {out_dir}")
    return exit_code


@cli.command()
@formulation_options
@click.option("--grid", default=None, help="Rates per channel: 'a,b,c' or 'start:stop:step'")
@click.option("--seeds", default="0,1,2,3,4", show_default=True, help="Comma-separated simulation seeds")
@click.option("--duration", type=float, default=None, help="Simulated seconds per run")
@click.option("--workers", type=int, default=None, help="Parallel cells (default TWOCHAN_WORKERS)")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory")
@click.pass_context
@handle_errors
def sweep(
    ctx, config_path, analysis_mode, solver, tol, omit_open_loop, linearization, no_cache,
    grid, seeds, duration, workers, out,
):
    """Trace bound versus simulated trace over a grid of rate pairs."""
    config = ctx.obj["config"]
    model_config = _load_model(config_path)
    mode = analysis_mode or _default_mode(model_config)
    settings = _settings(config, solver, tol, omit_open_loop, linearization)
    candidates = _candidates(model_config, grid)
    try:
        seed_list = [int(s) for s in seeds.split(",") if s.strip()]
    except ValueError as exc:
        raise click.BadParameter("seeds must be integers", param_hint="--seeds") from exc
    if not seed_list:
        raise click.BadParameter("at least one seed is required", param_hint="--seeds")
    duration = duration or float(model_config.simulation.get("duration", 600.0))
    workers = workers or config.workers

    click.echo(f"Sweeping {len(candidates)} rate pairs with {len(seed_list)} seeds each...")
    rows = grid_sweep(
        model_config.model,
        _jacobians(model_config, mode),
        candidates,
        duration,
        seed_list,
        settings,
        _cache(config, no_cache),
        workers,
        _sim_defaults(model_config)["x0"],
    )

    formatter = ReportFormatter()
    click.echo(formatter.format_sweep_console(rows))

    out_dir = _out_dir(config, out, "sweep")
    manifest = _manifest(
        ctx,
        {"solver": settings.solver, "tol": settings.tol, "analysis_mode": mode, "duration": duration, "workers": workers},
        seed_list,
    )
    manifest.add_output(write_sweep_csv(rows, out_dir / "sweep.csv"))
    manifest.add_output(write_sweep_grid_csv(rows, out_dir / "sweep_grid.csv"))
    manifest.add_output(formatter.save_report(formatter.render_sweep_svg(rows), out_dir / "sweep.svg"))
    manifest.write(out_dir)
    click.echo(f"Results saved to: {out_dir}")
    return EXIT_OK


def _write_sim_outputs(manifest: RunManifest, formatter: ReportFormatter, result, out_dir: Path, with_log: bool) -> None:
    manifest.add_output(write_result_csv(result, out_dir / "result.csv"))
    manifest.add_output(write_summary_json(result, out_dir / "summary.json"))
    if with_log:
        manifest.add_output(write_measurement_log(result, out_dir / "measurements.csv"))


@cli.command()
@formulation_options
@click.option(
    "--mode", "schedule_mode", type=click.Choice(["static", "iterative"]), default="static", show_default=True,
    help="Fixed periods from one optimization, or online recomputation",
)
@click.option("--grid", default=None, help="Candidate rates per channel: 'a,b,c' or 'start:stop:step'")
@click.option("--delta", type=float, default=None, help="Recomputation threshold on the Jacobian change")
@click.option("--duration", type=float, default=None, help="Simulated seconds")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True, help="Random seed")
@click.option("--workers", type=int, default=None, help="Parallel candidate evaluations")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory")
@click.pass_context
@handle_errors
def schedule(
    ctx, config_path, analysis_mode, solver, tol, omit_open_loop, linearization, no_cache,
    schedule_mode, grid, delta, duration, seed, workers, out,
):
    """Choose read rates and simulate the scheduled filter."""
    config = ctx.obj["config"]
    model_config = _load_model(config_path)
    mode = analysis_mode or _default_mode(model_config)
    settings = _settings(config, solver, tol, omit_open_loop, linearization)
    candidates = _candidates(model_config, grid)
    delta = delta if delta is not None else model_config.delta
    if not delta > 0:
        raise click.BadParameter("must be positive", param_hint="--delta")
    duration = duration or float(model_config.simulation.get("duration", 600.0))
    workers = workers or config.workers
    cache = _cache(config, no_cache)
    formatter = ReportFormatter()
    defaults = _sim_defaults(model_config)

    if schedule_mode == "static":
        click.echo(f"Evaluating {len(candidates)} candidate rate pairs ({mode})...")
        chosen = optimize_rates(_jacobians(model_config, mode), model_config.model, candidates, settings, cache, workers)
        click.echo(formatter.format_schedule_console(chosen))
        sim_mode = Scheduled(chosen)
        schedule_data = chosen.to_dict() | {"schedule": "static", "analysis": mode}
    else:
        sim_mode = Iterative(candidates, delta)
        chosen = None

    sim_config = SimConfig(
        model_config.model,
        sim_mode,
        duration=duration,
        seed=seed,
        settings=settings,
        cache=cache,
        workers=workers,
        **defaults,
    )
    click.echo(f"Simulating {sim_config.steps} steps...")
    result = run(sim_config)
    summary = result.summary()
    click.echo(formatter.format_sim_console(summary))

    out_dir = _out_dir(config, out, "schedule")
    manifest = _manifest(
        ctx,
        {
            "solver": settings.solver,
            "tol": settings.tol,
            "analysis_mode": mode,
            "delta": delta,
            "duration": duration,
            "workers": workers,
        },
        [seed],
    )
    if result.scheduler is not None:
        initial = result.scheduler.history[0] if result.scheduler.history else None
        schedule_data = {
            "schedule": "iterative",
            "delta": delta,
            "recomputations": result.scheduler.recomputations,
            "initial_period1": None if initial is None else initial.period1,
            "initial_period2": None if initial is None else initial.period2,
            "mean_period1": summary.get("mean_period1"),
            "mean_period2": summary.get("mean_period2"),
        }
        manifest.add_output(result.scheduler.write_periods_csv(out_dir / "periods.csv"))
    manifest.add_output(save_json_file(schedule_data, out_dir / "schedule.json"))
    _write_sim_outputs(manifest, formatter, result, out_dir, with_log=False)
    manifest.add_output(formatter.save_report(formatter.render_trace_svg(result), out_dir / "trace.svg"))
    manifest.write(out_dir)
    click.echo(f"Results saved to: {out_dir}")
    return EXIT_OK


@cli.command()
@click.option("--config", "config_path", required=True, help="Model config JSON file")
@click.option(
    "--mode", "sim_mode", type=click.Choice(["stochastic", "scheduled"]), default="stochastic", show_default=True,
    help="Bernoulli arrivals or fixed read periods derived from the rates",
)
@click.option("--lambda1", type=click.FloatRange(0, 1), required=True, help="Arrival rate of channel 1")
@click.option("--lambda2", type=click.FloatRange(0, 1), required=True, help="Arrival rate of channel 2")
@click.option("--duration", type=float, default=None, help="Simulated seconds")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True, help="Random seed")
@click.option("--noise-scale", type=click.FloatRange(min=0), default=1.0, show_default=True, help="Truth noise multiplier")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory")
@click.pass_context
@handle_errors
def simulate(ctx, config_path, sim_mode, lambda1, lambda2, duration, seed, noise_scale, out):
    """Simulate the filter at fixed rates and export the measurement log."""
    config = ctx.obj["config"]
    model_config = _load_model(config_path)
    rates = RatePair(lambda1, lambda2)
    mode = Stochastic(rates) if sim_mode == "stochastic" else Scheduled(Schedule.from_rates(rates))
    duration = duration or float(model_config.simulation.get("duration", 600.0))

    sim_config = SimConfig(
        model_config.model, mode, duration=duration, seed=seed, noise_scale=noise_scale,
        **_sim_defaults(model_config),
    )
    result = run(sim_config)
    formatter = ReportFormatter()
    click.echo(formatter.format_sim_console(result.summary()))

    out_dir = _out_dir(config, out, "simulate")
    manifest = _manifest(ctx, {"duration": duration}, [seed])
    _write_sim_outputs(manifest, formatter, result, out_dir, with_log=True)
    manifest.write(out_dir)
    click.echo(f"Results saved to: {out_dir}")
    return EXIT_OK


@cli.command()
@click.option("--config", "config_path", required=True, help="Model config JSON file")
@click.option("--log", "log_path", required=True, help="Measurement log CSV (k,channel,y...)")
@click.option("--steps", type=click.IntRange(min=0), default=None, help="Steps to run (default: last k + 1)")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory")
@click.pass_context
@handle_errors
def replay(ctx, config_path, log_path, steps, out):
    """Drive the filter with a recorded measurement log."""
    config = ctx.obj["config"]
    model_config = _load_model(config_path)
    if not Path(log_path).exists():
        _fail(f"measurement log not found: {log_path}", EXIT_NOINPUT)
    defaults = _sim_defaults(model_config)
    result = replay_log(model_config.model, Path(log_path), steps, defaults["x0_hat"], defaults["P0"])

    formatter = ReportFormatter()
    click.echo(formatter.format_sim_console(result.summary()))
    out_dir = _out_dir(config, out, "replay")
    manifest = _manifest(ctx, {}, [])
    _write_sim_outputs(manifest, formatter, result, out_dir, with_log=False)
    manifest.write(out_dir)
    click.echo(f"Results saved to: {out_dir}")
    return EXIT_OK


@cli.command()
@click.argument("manifest_path")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory for the rerun")
@click.pass_context
@handle_errors
def rerun(ctx, manifest_path, out):
    """Re-execute the command recorded in a run manifest."""
    if not Path(manifest_path).exists():
        _fail(f"manifest not found: {manifest_path}", EXIT_NOINPUT)
    manifest = RunManifest.load(Path(manifest_path))
    command = cli.get_command(ctx, manifest.command)
    if command is None or manifest.command == "rerun":
        raise ConfigError(f"manifest names an unknown command '{manifest.command}'")
    params = dict(manifest.params)
    if out is not None:
        params["out"] = out
    click.echo(f"Re-running '{manifest.command}' (recorded with version {manifest.version or 'unknown'})...")
    return ctx.invoke(command, **params)


@cli.command()
@click.pass_context
def check(ctx):
    """Check configuration and the available conic solvers."""
    config = ctx.obj["config"]

    click.echo("Checking configuration...")
    errors = config.validate()
    if errors:
        for error in errors:
            click.echo(click.style(f"  [FAIL] {error}", fg="red"))
    else:
        click.echo(click.style("  [OK] Configuration valid", fg="green"))
    click.echo(f"       Output directory: {config.output_dir}")
    click.echo(f"       SDP tolerance: {fmt6(config.sdp_tol)}")
    click.echo(f"       Workers: {config.workers}")

    click.echo("Checking conic solvers...")
    installed = set(cp.installed_solvers())
    for name in SUPPORTED_SOLVERS:
        marker = " (selected)" if name == config.solver else ""
        if name in installed:
            click.echo(click.style(f"  [OK] {name}{marker}", fg="green"))
        else:
            click.echo(click.style(f"  [FAIL] {name} not installed{marker}", fg="red"))
    return EXIT_OK if config.solver in installed and not errors else EXIT_SOLVER


@cli.command()
@click.option("--clear", is_flag=True, help="Clear all cache entries")
@click.option("--cleanup", is_flag=True, help="Remove expired entries only")
@click.pass_context
def cache(ctx, clear, cleanup):
    """Manage the analysis cache."""
    config = ctx.obj["config"]
    cache_manager = CacheManager(config.cache_dir, config.cache_ttl)

    if clear:
        count = cache_manager.clear()
        click.echo(f"Cleared {count} cache entries.")
    elif cleanup:
        count = cache_manager.cleanup_expired()
        click.echo(f"Removed {count} expired entries.")
    else:
        stats = cache_manager.get_stats()
        click.echo("Cache Statistics:")
        click.echo(f"  Location: {stats['cache_dir']}")
        click.echo(f"  Total entries: {stats['total_entries']}")
        click.echo(f"  Valid entries: {stats['valid_entries']}")
        click.echo(f"  Expired entries: {stats['expired_entries']}")
        for kind, count in sorted(stats["by_kind"].items()):
            click.echo(f"    {kind}: {count}")
        click.echo(f"  Version: {stats['version']}")
        click.echo(f"  Total size: {stats['total_size_bytes']} bytes")
    return EXIT_OK


def main():
    cli()


if __name__ == "__main__":
    main()
