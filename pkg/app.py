"""
Subharmonic Oscillation Analyzer - Command Line Application

Main entry point of the ``subharm`` command. Parses a JSON converter
description, runs one analysis and writes plot-ready CSV or JSON.

Exit status: 0 on success, 1 when an example reproduction fails its checks,
2 for configuration errors, 3 for analysis errors.
"""

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd

from analysis import closed_forms
from analysis.converter_models import build_model, inputs, ramp_consistency, validate_model
from analysis.example_runner import ExampleRunner
from analysis.harmonic_balance import hb_plot, loop_g, m_plot, vs_star_hb
from analysis.run_config import RunConfig, SweepAxis, load_run_config
from analysis.sampled_data import (
    analyze_stability,
    approx_boundary_2nd,
    approx_boundary_highfs,
    boundary_intersection,
    critical_vs_approx,
    critical_vs_exact,
    critical_vs_min,
    deadbeat_condition,
    highfs_ramp_requirement,
    s_plot,
    s_plot_parameter,
)
from analysis.simulator import bisect_critical, detect_period, simulate, trajectory_frame
from analysis.steady_state import default_steady_rule, solve_duty, steady_line
from utils.errors import ConfigError, DutySaturationError, SubharmonicAnalysisError
from utils.output_writer import ArtifactWriter
from utils.settings import LOG_LEVELS, Settings, load_settings

logger = logging.getLogger('SubharmApp')

COMMANDS = (
    "steady", "stability", "boundary", "splot", "hbplot", "mplot",
    "closed-form", "simulate", "find-critical", "example",
)
DEFAULT_DUTY_AXIS = "D:0.05:0.95:181"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_ANALYSIS = 3


def _parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="subharm",
        description="Subharmonic oscillation analysis of PWM DC-DC converters.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("target", nargs="?", help="equation tag (closed-form), parameter (find-critical) "
                                                  "or example number (example)")
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--axis", help="sweep name:min:max:points")
    parser.add_argument("--format", dest="fmt", choices=("csv", "json"))
    parser.add_argument("--out", help="output file (stdout when omitted)")
    parser.add_argument("--jobs", type=int, help="concurrent sweep workers")
    parser.add_argument("--method", choices=("eigenvalue", "simulation"), default="eigenvalue",
                        help="classification used by find-critical")
    parser.add_argument("--rc", type=float, help="capacitor ESR override")
    parser.add_argument("--duty", type=float, help="duty ratio for closed-form")
    parser.add_argument("--cycles", type=int, help="clock periods to simulate")
    parser.add_argument("--period-tol", type=float, help="relative tolerance of period detection")
    parser.add_argument("--verbose", action="store_true", help="log at INFO level")
    return parser.parse_args(argv)


class SubharmApp:
    """Dispatches one command against a validated run configuration."""

    def __init__(self, args: argparse.Namespace, settings: Settings):
        self.args = args
        self.settings = settings
        self.jobs = args.jobs if args.jobs is not None else settings.jobs
        if self.jobs < 1:
            raise ConfigError("must be >= 1", "--jobs")
        self.config: Optional[RunConfig] = None
        if args.config:
            self.config = self._apply_overrides(load_run_config(args.config, settings))
        self.writer = ArtifactWriter(self._format(), args.out)

    def _format(self) -> str:
        if self.args.fmt:
            return self.args.fmt
        return self.config.fmt if self.config is not None else "csv"

    def _apply_overrides(self, config: RunConfig) -> RunConfig:
        if self.args.rc is not None:
            if self.args.rc < 0:
                raise ConfigError("must be >= 0", "--rc")
            config = config.with_parameter("Rc", self.args.rc)
        return config

    def _require_config(self) -> RunConfig:
        if self.config is None:
            raise ConfigError(f"command {self.args.command!r} needs a configuration", "--config")
        return self.config

    def _axis(self, default: Optional[str] = None) -> SweepAxis:
        if self.args.axis:
            axis = SweepAxis.parse(self.args.axis, "--axis")
        elif self.config is not None and self.config.axis is not None:
            axis = self.config.axis
        elif default is not None:
            axis = SweepAxis.parse(default)
        else:
            raise ConfigError("a sweep axis is required", "--axis")
        if axis.name == "D" and not (0.0 < axis.lo and axis.hi < 1.0):
            raise ConfigError("duty sweep must lie inside (0, 1)", "--axis")
        return axis

    def _map(self, fn: Callable, values: Sequence) -> list:
        """Evaluate fn over values, concurrently up to --jobs, in input order."""
        if self.jobs == 1:
            return [fn(v) for v in values]
        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            return list(pool.map(fn, values))

    def _model(self, config: Optional[RunConfig] = None):
        config = config or self._require_config()
        m = build_model(config.power_stage, config.compensator)
        findings = validate_model(m)
        if findings:
            raise ConfigError("; ".join(findings), "model")
        for finding in ramp_consistency(config.power_stage, config.compensator):
            logger.warning(f"{finding}; the model uses ma")
        return m, inputs(config.power_stage.vs, config.power_stage.vr)

    def _steady_vs(self, config: RunConfig, m) -> Callable[[float], float]:
        rule = default_steady_rule(config.scheme)
        return lambda D: steady_line(m, config.power_stage, config.compensator, D, rule)

    def run(self) -> int:
        handler = {
            "steady": self.steady,
            "stability": self.stability,
            "boundary": self.boundary,
            "splot": self.splot,
            "hbplot": self.hbplot,
            "mplot": self.mplot,
            "closed-form": self.closed_form,
            "simulate": self.simulate,
            "find-critical": self.find_critical,
            "example": self.example,
        }[self.args.command]
        return handler()

    # commands

    def steady(self) -> int:
        m, u = self._model()
        orbit = solve_duty(m, u)
        self.writer.write(document={"command": "steady", "scheme": m.scheme.value, "orbit": orbit.to_dict()})
        return EXIT_OK

    def stability(self) -> int:
        m, u = self._model()
        orbit, report = analyze_stability(m, u)
        self.writer.write(document={
            "command": "stability",
            "scheme": m.scheme.value,
            "orbit": orbit.to_dict(),
            "stability": report.to_dict(),
            "slope_conditions": {
                "approx_residual_eq23": approx_boundary_2nd(m, orbit),
                "approx_residual_eq24": approx_boundary_highfs(orbit),
                "ramp_slope_highfs": highfs_ramp_requirement(orbit.y_slope_pre, orbit.y_slope_post),
                "deadbeat_margin": deadbeat_condition(orbit),
            },
        })
        return EXIT_OK

    def boundary(self) -> int:
        config = self._require_config()
        m, _ = self._model()
        axis = self._axis(DEFAULT_DUTY_AXIS)
        if axis.name != "D":
            raise ConfigError("boundary sweeps the duty ratio D", "--axis")
        rule = default_steady_rule(config.scheme)
        vr = config.power_stage.vr
        exact_tag = "eq13" if m.is_buck else "eq19"

        def row(D: float) -> dict:
            exact = critical_vs_exact(m, D * m.T, vr).value
            approx = critical_vs_approx(m, D * m.T).value if m.is_buck else math.nan
            return {
                "D": D,
                f"vs_star_exact_{exact_tag}": exact,
                "vs_star_approx_eq16": approx,
                f"steady_line_{rule}": steady_line(m, config.power_stage, config.compensator, D, rule),
            }

        frame = pd.DataFrame(self._map(row, axis.values))
        points = boundary_intersection(m, vr, self._steady_vs(config, m), (axis.lo, axis.hi))
        document = {
            "command": "boundary",
            "scheme": config.scheme.value,
            "intersections": [{"D": D, "vs": vs} for D, vs in points],
        }
        if m.is_buck:
            document["vs_star_min"] = critical_vs_min(m, vr).to_dict()
        self.writer.write(frame, document)
        return EXIT_OK

    def splot(self) -> int:
        config = self._require_config()
        m, u = self._model()
        axis = self._axis(DEFAULT_DUTY_AXIS)
        if axis.name == "D":
            curve = s_plot(m, u, axis.values, self._map)
        else:
            def builder(value: float):
                return self._model(config.with_parameter(axis.name, value))

            curve = s_plot_parameter(builder, axis.values, axis.name, self._map)
        self.writer.write(curve.to_frame("S_eq20"), {
            "command": "splot",
            "threshold_crossings": curve.threshold_crossings(),
        })
        return EXIT_OK

    def hbplot(self) -> int:
        config = self._require_config()
        m, _ = self._model()
        axis = self._axis(DEFAULT_DUTY_AXIS)
        ps = config.power_stage
        g = loop_g(ps, config.compensator)
        curve = hb_plot(g, m.Vh, self._steady_vs(config, m), axis.values, ps.omega_s, config.hb, self._map)
        frame = curve.to_frame("H_eq82")
        frame["vs_star_eq57"] = self._map(
            lambda D: vs_star_hb(g, D, m.Vh, ps.omega_s, config.hb).value, axis.values
        )
        self.writer.write(frame, {"command": "hbplot", "threshold_crossings": curve.threshold_crossings()})
        return EXIT_OK

    def mplot(self) -> int:
        config = self._require_config()
        m, _ = self._model()
        axis = self._axis(DEFAULT_DUTY_AXIS)
        steady = self._steady_vs(config, m)
        exact = m_plot(m, steady, axis.values, mapper=self._map)
        approx = m_plot(m, steady, axis.values, approximate=True, mapper=self._map)
        frame = exact.to_frame("M_eq85")
        frame["M_eq86"] = approx.values
        self.writer.write(frame, {"command": "mplot", "threshold_crossings": exact.threshold_crossings()})
        return EXIT_OK

    def closed_form(self) -> int:
        config = self._require_config()
        if not self.args.target:
            raise ConfigError("an equation tag such as eq28 is required", "target")
        D = self.args.duty if self.args.duty is not None else config.duty
        if D is None:
            raise ConfigError("a duty ratio is required (--duty or config 'duty')", "--duty")
        if not 0.0 < D < 1.0:
            raise ConfigError("must lie in (0, 1)", "--duty")
        result = closed_forms.evaluate(self.args.target, config.power_stage, config.compensator, D, self.settings)
        if result.validity_note.startswith("outside regime"):
            logger.warning(f"{result.equation_id} evaluated {result.validity_note}")
        self.writer.write(document={"command": "closed-form", "D": D, "result": result.to_dict()})
        return EXIT_OK

    def simulate(self) -> int:
        config = self._require_config()
        m, u = self._model()
        cycles = self.args.cycles if self.args.cycles is not None else config.cycles
        if cycles < 1:
            raise ConfigError("must be >= 1", "--cycles")
        if config.x_init is not None:
            x_init = np.asarray(config.x_init)
        else:
            try:
                x_init = solve_duty(m, u).x0_0
            except DutySaturationError:
                x_init = np.zeros(m.N)
        traj = simulate(m, u, x_init, cycles, dense=True)
        tol = self.args.period_tol if self.args.period_tol is not None else config.period_tol
        document = {
            "command": "simulate",
            "cycles": cycles,
            "saturated_cycles": traj.saturated_cycles,
            "extra_crossings": traj.extra_crossings,
        }
        try:
            document["verdict"] = detect_period(traj, tol).to_dict()
        except SubharmonicAnalysisError as e:
            logger.warning(f"Period detection skipped: {e}")
        self.writer.write(trajectory_frame(traj), document)
        return EXIT_OK

    def find_critical(self) -> int:
        config = self._require_config()
        name = self.args.target
        if not name:
            raise ConfigError("a parameter name such as kp is required", "target")
        axis = self._axis()
        if axis.name != name:
            raise ConfigError(f"axis sweeps {axis.name!r} but the target is {name!r}", "--axis")

        def builder(value: float):
            return self._model(config.with_parameter(name, value))

        value = bisect_critical(builder, (axis.lo, axis.hi), classify_by=self.args.method, cycles=config.cycles)
        self.writer.write(document={"command": "find-critical", "parameter": name, "value": value,
                                    "method": self.args.method})
        return EXIT_OK

    def example(self) -> int:
        runner = ExampleRunner(self.settings)
        if self.args.target == "all":
            reports = runner.run_all()
            frame = pd.concat([r.to_frame() for r in reports], ignore_index=True)
            self.writer.write(frame, {"command": "example", "reports": [r.to_dict() for r in reports]})
            return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED
        try:
            number = int(self.args.target)
        except (TypeError, ValueError) as e:
            raise ConfigError("an example number 1..11 or 'all' is required", "target") from e
        report = runner.run(number, self.args.rc)
        self.writer.write(report.to_frame(), report.to_dict())
        return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    args = _parse_args(argv)
    try:
        settings = load_settings()
    except ValueError as e:
        print(f"error[config]: {e}", file=sys.stderr)
        return EXIT_CONFIG
    level = "INFO" if args.verbose else settings.log_level
    logging.basicConfig(level=getattr(logging, level if level in LOG_LEVELS else "WARNING"),
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    try:
        return SubharmApp(args, settings).run()
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"error[{e.equation_id}]: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SubharmonicAnalysisError as e:
        logger.error(f"Analysis error: {e}")
        print(f"error[{e.equation_id}]: {e}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    raise SystemExit(main())
