"""Output formatting for analyses, schedules, simulations and sweeps."""

import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from jinja2 import Environment, FileSystemLoader, select_autoescape

from .scheduler import NEVER, Schedule
from .sim import SimResult, SweepRow
from .utils import atomic_write_text, fmt6

PLOT_WIDTH = 640
PLOT_HEIGHT = 360
PLOT_MARGIN = 50
MAX_POLYLINE_POINTS = 2000


def _period_label(period: Optional[int]) -> str:
    return "never" if period is NEVER else str(period)


def _heat_color(fraction: float) -> str:
    """Blue (low) to red (high)."""
    fraction = min(max(fraction, 0.0), 1.0)
    red = int(round(40 + 215 * fraction))
    blue = int(round(255 - 215 * fraction))
    return f"rgb({red},80,{blue})"


class ReportFormatter:
    """Format results into console text, markdown reports and SVG plots."""

    def __init__(self, template_dir: Optional[Path] = None):
        """Initialize formatter.

        Args:
            template_dir: Directory containing Jinja2 templates
        """
        if template_dir is None:
            template_dir = Path(__file__).parent.parent / "templates"

        self.template_dir = template_dir
        self.env = Environment(
            loader=FileSystemLoader(str(template_dir)),
            autoescape=select_autoescape(["html", "xml", "svg.jinja2"]),
        )
        self.env.filters["fmt6"] = fmt6
        self.env.filters["period"] = _period_label

    # --- console ---------------------------------------------------------------

    def format_analysis_console(self, report: dict) -> str:
        """Console summary of an ``analyze`` report."""
        lines = [
            f"Model: {report['model']} ({report['mode']}, {report['vertices']} vertex matrices)",
            f"Rates: lambda1={fmt6(report['lambda1'])} lambda2={fmt6(report['lambda2'])}",
            f"Status: {report['status'].upper()}",
        ]
        if report.get("margin") is not None:
            lines.append(f"Certificate margin: {fmt6(report['margin'])}")
        if report.get("tau") is not None:
            lines.append(f"Trace bound tau: {fmt6(report['tau'])}")
        if report.get("critical_lambda") is not None:
            lines.append(
                f"Critical lambda{report['free_channel']} "
                f"(lambda{report['fixed_channel']}={fmt6(report['fixed_value'])}): "
                f"{fmt6(report['critical_lambda'])}"
            )
        if report.get("message"):
            lines.append(f"Note: {report['message']}")
        return "\n".join(lines)

    def format_schedule_console(self, schedule: Schedule) -> str:
        lines = [
            f"Chosen rates: ({fmt6(schedule.chosen.lambda1)}, {fmt6(schedule.chosen.lambda2)})",
            f"Periods: channel 1 {_period_label(schedule.period1)}, channel 2 {_period_label(schedule.period2)}",
            f"Trace bound tau: {fmt6(schedule.tau)}",
            f"Objective: {fmt6(schedule.objective_value)}",
        ]
        admissible = sum(1 for e in schedule.evaluations if e.admissible)
        if schedule.evaluations:
            lines.append(f"Admissible candidates: {admissible}/{len(schedule.evaluations)}")
        return "\n".join(lines)

    def format_excluded_pairs(self, statuses: Sequence[tuple[float, float, str]]) -> str:
        lines = ["lambda1   lambda2   status"]
        for l1, l2, status in statuses:
            lines.append(f"{fmt6(l1):<9} {fmt6(l2):<9} {status}")
        return "\n".join(lines)

    def format_sim_console(self, summary: dict) -> str:
        lines = [
            f"Steps: {summary['steps']}",
            f"Steady-state trace: {fmt6(summary['steady_trace'])}",
            f"Reads: channel 1 {summary['reads1']}, channel 2 {summary['reads2']}",
        ]
        if summary.get("tau") is not None:
            lines.append(f"Trace bound tau: {fmt6(summary['tau'])}")
        if summary.get("rmse") is not None:
            lines.append("RMSE: " + " ".join(fmt6(v) for v in summary["rmse"]))
        for key in ("nis1", "nis2"):
            if summary.get(key) is not None:
                lines.append(f"Mean NIS channel {key[-1]}: {fmt6(summary[key])}")
        if summary.get("recomputations") is not None:
            lines.append(
                f"Recomputations: {summary['recomputations']} "
                f"(mean periods {fmt6(summary['mean_period1'])}, {fmt6(summary['mean_period2'])})"
            )
        return "\n".join(lines)

    def format_sweep_console(self, rows: Sequence[SweepRow]) -> str:
        lines = [f"{'lambda1':<9} {'lambda2':<9} {'tau':<14} {'sim trace':<12}"]
        for row in rows:
            bound = fmt6(row.tau) if row.status == "feasible" else row.status.upper()
            lines.append(
                f"{fmt6(row.rates.lambda1):<9} {fmt6(row.rates.lambda2):<9} {bound:<14} {fmt6(row.sim_trace):<12}"
            )
        return "\n".join(lines)

    # --- markdown ----------------------------------------------------------------

    def format_analysis_report(self, report: dict) -> str:
        """Markdown report for ``analyze --out``."""
        template = self.env.get_template("analysis.md.jinja2")
        return template.render(report=report)

    # --- SVG -------------------------------------------------------------------------

    def render_sweep_svg(self, rows: Sequence[SweepRow]) -> str:
        """Heat map of log10 τ over the (λ₁, λ₂) grid; cells without a bound are grey."""
        axis1 = sorted({r.rates.lambda1 for r in rows})
        axis2 = sorted({r.rates.lambda2 for r in rows})
        taus = [math.log10(r.tau) for r in rows if r.status == "feasible" and r.tau and r.tau > 0]
        lo, hi = (min(taus), max(taus)) if taus else (0.0, 1.0)
        span = hi - lo if hi > lo else 1.0

        cell_w = (PLOT_WIDTH - 2 * PLOT_MARGIN) / max(len(axis2), 1)
        cell_h = (PLOT_HEIGHT - 2 * PLOT_MARGIN) / max(len(axis1), 1)
        cells = []
        for r in rows:
            i = axis1.index(r.rates.lambda1)
            j = axis2.index(r.rates.lambda2)
            if r.status == "feasible" and r.tau and r.tau > 0:
                color = _heat_color((math.log10(r.tau) - lo) / span)
                label = fmt6(r.tau)
            else:
                color, label = "rgb(200,200,200)", r.status
            cells.append({
                "x": PLOT_MARGIN + j * cell_w,
                # λ₁ grows upwards
                "y": PLOT_HEIGHT - PLOT_MARGIN - (i + 1) * cell_h,
                "w": cell_w,
                "h": cell_h,
                "color": color,
                "title": f"lambda1={fmt6(r.rates.lambda1)} lambda2={fmt6(r.rates.lambda2)}: {label}",
            })

        template = self.env.get_template("heatmap.svg.jinja2")
        return template.render(
            width=PLOT_WIDTH,
            height=PLOT_HEIGHT,
            margin=PLOT_MARGIN,
            cells=cells,
            xticks=[{"x": PLOT_MARGIN + (j + 0.5) * cell_w, "label": fmt6(v)} for j, v in enumerate(axis2)],
            yticks=[{"y": PLOT_HEIGHT - PLOT_MARGIN - (i + 0.5) * cell_h, "label": fmt6(v)} for i, v in enumerate(axis1)],
            title=f"log10 trace bound (range {fmt6(lo)} to {fmt6(hi)})",
        )

    def _polyline(self, values: np.ndarray, vmax: float) -> str:
        n = len(values)
        if n == 0:
            return ""
        stride = max(1, math.ceil(n / MAX_POLYLINE_POINTS))
        width = PLOT_WIDTH - 2 * PLOT_MARGIN
        height = PLOT_HEIGHT - 2 * PLOT_MARGIN
        points = []
        for k in range(0, n, stride):
            x = PLOT_MARGIN + width * k / max(n - 1, 1)
            y = PLOT_HEIGHT - PLOT_MARGIN - height * min(float(values[k]) / vmax, 1.0)
            points.append(f"{x:.2f},{y:.2f}")
        return " ".join(points)

    def render_trace_svg(self, result: SimResult) -> str:
        """Line plot of the covariance trace with the analytical bound when known."""
        finite = result.trace[np.isfinite(result.trace)]
        vmax = float(finite.max()) if finite.size else 1.0
        if result.tau is not None and math.isfinite(result.tau):
            vmax = max(vmax, result.tau)
        vmax = vmax * 1.05 if vmax > 0 else 1.0

        series = [{"points": self._polyline(result.trace, vmax), "color": "steelblue", "label": "trace P"}]
        if result.scheduler is not None and result.scheduler.history:
            periods = [(r.period1 or 0, r.period2 or 0) for r in result.scheduler.history]
            pmax = max(max(p) for p in periods) or 1
            for idx, color in ((0, "darkorange"), (1, "seagreen")):
                values = np.array([p[idx] for p in periods], dtype=float) * vmax / (pmax * 1.05)
                series.append({
                    "points": self._polyline(values, vmax),
                    "color": color,
                    "label": f"period {idx + 1} (max {pmax})",
                })

        tau_y = None
        if result.tau is not None and math.isfinite(result.tau):
            tau_y = PLOT_HEIGHT - PLOT_MARGIN - (PLOT_HEIGHT - 2 * PLOT_MARGIN) * result.tau / vmax

        template = self.env.get_template("trace.svg.jinja2")
        return template.render(
            width=PLOT_WIDTH,
            height=PLOT_HEIGHT,
            margin=PLOT_MARGIN,
            series=series,
            tau_y=tau_y,
            tau_label=fmt6(result.tau),
            ymax_label=fmt6(vmax),
            steps=len(result),
        )

    def save_report(self, content: str, output_path: Path) -> Path:
        """Save report content to file.

        Args:
            content: Report content
            output_path: Output file path

        Returns:
            Path to saved file
        """
        return atomic_write_text(Path(output_path), content)
