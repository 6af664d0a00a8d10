"""
Figure Data Generator

This script regenerates the datasets behind the design-example figures:
boundary curves against the steady-state line, unstable windows of the
compensator poles, S, HB and M plots, and the phi(D) and psi(theta) curves.

Every dataset is a CSV file under SUBHARM_OUTPUT_DIR (default ./figure_data).
"""

import logging
import os
from typing import Callable, Dict

import numpy as np
import pandas as pd

from analysis import closed_forms
from analysis.converter_models import build_model, inputs
from analysis.example_runner import ExampleRunner
from analysis.harmonic_balance import hb_plot, loop_g, m_plot, vs_star_hb
from analysis.sampled_data import critical_vs_approx, critical_vs_exact, s_plot, s_plot_parameter
from analysis.steady_state import steady_line
from utils.output_writer import ArtifactWriter
from utils.settings import load_settings

logger = logging.getLogger('FigureDataGenerator')

DUTY_GRID = np.linspace(0.05, 0.95, 181)
WINDOW_POINTS = 61


def write_frame(frame: pd.DataFrame, output_path: str, name: str) -> str:
    path = os.path.join(output_path, f"{name}.csv")
    ArtifactWriter("csv", path).write(frame)
    return path


def pvmc_boundary_data(runner: ExampleRunner) -> Dict[str, pd.DataFrame]:
    """Exact and approximate critical voltage of the PVMC design for both ESR values."""
    frames = {}
    for label, rc in (("no_esr", 0.0), ("esr", runner.presets.EX1_RC_ESR)):
        ps, cp = runner.pvmc_design(rc)
        m = build_model(ps, cp)
        frames[f"pvmc_boundary_{label}"] = pd.DataFrame({
            "D": DUTY_GRID,
            "vs_star_exact_eq13": [critical_vs_exact(m, D * m.T, ps.vr).value for D in DUTY_GRID],
            "vs_star_approx_eq16": [critical_vs_approx(m, D * m.T).value for D in DUTY_GRID],
            "steady_line_eq31": [steady_line(m, ps, cp, D, "eq31") for D in DUTY_GRID],
        })
    return frames


def type3_boundary_data(runner: ExampleRunner) -> Dict[str, pd.DataFrame]:
    frames = {}
    for label, kappa_z in (("kappa_half", runner.presets.EX4_KAPPA_Z), ("kappa_one", runner.presets.EX9_KAPPA_Z)):
        ps, cp = runner.type3_design(kappa_z)
        m = build_model(ps, cp)
        frames[f"type3_boundary_{label}"] = pd.DataFrame({
            "D": DUTY_GRID,
            "vs_star_exact_eq13": [critical_vs_exact(m, D * m.T, ps.vr).value for D in DUTY_GRID],
            "steady_line_regulated": [steady_line(m, ps, cp, D, "regulated") for D in DUTY_GRID],
        })
    return frames


def window_data(runner: ExampleRunner) -> Dict[str, pd.DataFrame]:
    """S at the operating duty across the ACMC and type III pole sweeps."""
    presets = runner.presets
    builders: Dict[str, tuple] = {
        "acmc_wp_window": (lambda r: _operating(*runner.acmc_design(r)), presets.EX3_WP_RANGE, "wp_over_ws"),
        "type3_p1_window": (
            lambda r: _operating(*runner.type3_design(presets.EX4_KAPPA_Z, presets.EX5_VS, r)),
            presets.EX5_P1_RANGE,
            "p1_over_ws",
        ),
    }
    frames = {}
    for name, (builder, (lo, hi), axis) in builders.items():
        curve = s_plot_parameter(builder, np.linspace(lo, hi, WINDOW_POINTS), axis)
        frames[name] = curve.to_frame("S_eq20")
    return frames


def stable_range_data(runner: ExampleRunner) -> Dict[str, pd.DataFrame]:
    """S, HB and M plots of the PVMC design with ESR."""
    ps, cp = runner.pvmc_design(runner.presets.EX1_RC_ESR)
    m, u = _operating(ps, cp)
    steady: Callable[[float], float] = lambda D: steady_line(m, ps, cp, D, "eq31")
    lo, hi = runner.presets.EX10_DUTY_RANGE
    grid = np.linspace(lo, hi, 149)

    frame = s_plot(m, u, grid).to_frame("S_eq20")
    frame["H_eq82"] = hb_plot(loop_g(ps, cp), ps.Vh, steady, grid, ps.omega_s, runner.hb_settings).values.real
    frame["M_eq85"] = m_plot(m, steady, grid).values
    frame["M_eq86"] = m_plot(m, steady, grid, approximate=True).values
    return {"pvmc_stable_range": frame}


def harmonic_balance_data(runner: ExampleRunner) -> Dict[str, pd.DataFrame]:
    """Critical voltage by harmonic balance against its truncations, both loads."""
    frames = {}
    for label, load in (("R22", None), ("R10", runner.presets.EX7_LOAD)):
        ps, cp = runner.large_signal_design(load)
        g = loop_g(ps, cp)
        frames[f"pvmc_hb_{label}"] = pd.DataFrame({
            "D": DUTY_GRID,
            "vs_star_eq57": [vs_star_hb(g, D, ps.Vh, ps.omega_s, runner.hb_settings).value for D in DUTY_GRID],
            "vs_star_eq64": [closed_forms.pvmc_vs_star(ps, cp.kp, D, "eq64").value for D in DUTY_GRID],
            "vs_star_eq65": [closed_forms.pvmc_vs_star(ps, cp.kp, D, "eq65").value for D in DUTY_GRID],
            "steady_line_eq31": [steady_line(None, ps, cp, D, "eq31") for D in DUTY_GRID],
        })
    return frames


def shape_function_data(runner: ExampleRunner) -> Dict[str, pd.DataFrame]:
    grid = np.linspace(0.0, 1.0, 101)
    phi = pd.DataFrame({
        "D": grid,
        "phi_exact": [closed_forms.phi_exact(D, runner.settings.phi_harmonics) for D in grid],
        "phi_approx_eq78": [closed_forms.phi_approx(D) for D in grid],
    })
    theta = np.linspace(0.05, 1.0, 96)
    psi = pd.DataFrame({"theta": theta, "psi": [closed_forms.psi(t) for t in theta]})
    return {"phi": phi, "psi": psi}


def _operating(ps, cp):
    return build_model(ps, cp), inputs(ps.vs, ps.vr)


GENERATORS = (
    pvmc_boundary_data,
    type3_boundary_data,
    window_data,
    stable_range_data,
    harmonic_balance_data,
    shape_function_data,
)


def main():
    """Main function to generate and save all figure datasets."""
    settings = load_settings()
    logging.basicConfig(level=getattr(logging, settings.log_level),
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    output_path = settings.output_dir
    print("Starting figure data generation...")

    runner = ExampleRunner(settings)
    for generator in GENERATORS:
        for name, frame in generator(runner).items():
            path = write_frame(frame, output_path, name)
            print(f"Generated {name} ({len(frame)} rows)")
            logger.info(f"Wrote {path}")

    print(f"All data written to {output_path}")
    print("Figure data generation complete!")


if __name__ == "__main__":
    main()
