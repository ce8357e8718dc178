import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from backend.app.classical import classical_series, drift_series
from backend.app.config import DEFAULT_NU, DEFAULT_TEMPERATURE, DEFAULT_T_MIN
from backend.app.correlations import correlation_arrays
from backend.app.diffusion import coefficient_series, t_min_sensitivity
from backend.app.enums import CoefficientSource, PresetKind
from backend.app.exceptions import ConfigError, QBMError
from backend.app.oup_sim import DriftDiffusion, simulate_ensemble, variance_ode
from backend.app.params import ModelParams
from backend.app.susceptibility import drift_frequency_array, find_chi_q_zeros, susceptibility_arrays
from backend.app.utils import write_csv

logger = logging.getLogger(__name__)

Table = Tuple[Dict[str, object], List[float], List[str]]

# Samples per unit time for the classical coefficients behind a Monte Carlo run
COEFF_SAMPLES_PER_UNIT = 50


# --- Column tables shared by the CLI and the HTTP routes ---
def correlation_table(params: ModelParams, times: np.ndarray) -> Table:
    columns: Dict[str, object] = {"t": times}
    for order, suffix in ((0, ""), (1, "d"), (2, "d2")):
        s, a = correlation_arrays(times, params, order)
        columns[f"{suffix}S"] = s
        columns[f"{suffix}A"] = a
    return columns, [], []


def susceptibility_table(params: ModelParams, times: np.ndarray) -> Table:
    chi_q, chi_v, dchi_q, dchi_v = susceptibility_arrays(times, params.gamma)
    poles = find_chi_q_zeros(params, float(times[-1]))
    omega = drift_frequency_array(times, params.gamma)
    for i, t in enumerate(times):
        if poles.contains(float(t)):
            omega[i] = np.nan
    columns = {"t": times, "chi_q": chi_q, "chi_v": chi_v, "dchi_q": dchi_q, "dchi_v": dchi_v, "omega_drift": omega}
    return columns, list(poles.times), []


def diffusion_table(params: ModelParams, times: np.ndarray, sensitivity: bool = True) -> Table:
    series = coefficient_series(params, times)
    columns: Dict[str, object] = dict(series.columns())
    columns["flags"] = series.flag_strings()
    comments: List[str] = []
    if sensitivity:
        try:
            report = t_min_sensitivity(params)
            comments += [f"{key}={value:.17e}" for key, value in report.items()]
            logger.info(f"t_min sensitivity for gamma={params.gamma}: {report['t_min_relative_change']:.3e}")
        except QBMError as exc:
            logger.warning(f"t_min sensitivity unavailable: {exc}")
    return columns, list(series.poles), comments


def classical_table(params: ModelParams, times: np.ndarray) -> Table:
    coeffs = classical_series(params, times)
    return coeffs.columns(), list(coeffs.poles), []


def simulate_table(
    params: ModelParams,
    source: CoefficientSource,
    n_paths: int,
    dt: float,
    t_max: float,
    seed: int,
    n_points: int = 200,
) -> Table:
    """Monte Carlo variance next to the variance ODE and the reference sigma."""
    if source is CoefficientSource.CLASSICAL:
        n_coeff = max(n_points, int(COEFF_SAMPLES_PER_UNIT * t_max) + 1)
        grid = np.linspace(0.0, t_max, n_coeff)
        coeffs = drift_series(params, grid)
        coeffs = DriftDiffusion(coeffs.times, coeffs.omega, coeffs.diffusion, coeffs.pole_windows, "cubic")
        reference_times, reference = grid, classical_series(params, grid).sigma_clas
    else:
        grid = np.linspace(params.t_min, t_max, n_points)
        series = coefficient_series(params, grid)
        coeffs = DriftDiffusion(series.times, series.omega_drift, series.dq_total, tuple(series.pole_windows))
        reference_times, reference = grid, series.sigma_total

    stats = simulate_ensemble(coeffs, n_paths, dt, t_max, seed)
    sigma0 = float(np.interp(stats.times[0], reference_times, reference))
    ode = variance_ode(coeffs, stats.times, sigma0)
    columns = {
        "t": stats.times,
        "mc_variance": stats.variance,
        "mc_stderr": stats.std_error,
        "ode_variance": ode,
        "reference_sigma": np.interp(stats.times, reference_times, reference),
    }
    comments = [f"n_paths={stats.n_paths}", f"seed={stats.seed}", f"dt={dt}", f"source={source}"]
    poles = [0.5 * (lo + hi) for lo, hi in coeffs.pole_windows]
    return columns, poles, comments


# --- Figure presets ---
@dataclass(frozen=True)
class FigureRun:
    gamma: float
    temperature: float
    t_max: float
    n_points: int = 500

    @property
    def label(self) -> str:
        return f"gamma{self.gamma:g}"


@dataclass(frozen=True)
class Preset:
    name: str
    kind: PresetKind
    runs: Tuple[FigureRun, ...]
    description: str = ""
    nu: float = DEFAULT_NU


_QUANTUM_RUNS = tuple(FigureRun(g, DEFAULT_TEMPERATURE, 10.0) for g in (1.0, 2.0, 4.0))
_EQUIPARTITION_GAMMAS = (200.0, 250.0, 318.0, 400.0)
# t_max = 50 gamma of the largest gamma, so every curve reaches equipartition
_EQUIPARTITION_RUNS = tuple(FigureRun(g, 25.2, 50.0 * max(_EQUIPARTITION_GAMMAS)) for g in _EQUIPARTITION_GAMMAS)
_SMALL_GAMMA_RUNS = tuple(FigureRun(g, 2.0, 10.0) for g in (0.5, 1.0, 2.0, 4.0))

PRESETS: Dict[str, Preset] = {
    p.name: p
    for p in (
        Preset("quantum-correlation", PresetKind.CORRELATION, _QUANTUM_RUNS, "Re/Im of <q(t) q0>, T=0.053, nu=1e7"),
        Preset("quantum-sigma", PresetKind.SIGMA, _QUANTUM_RUNS, "sigma_Q(t) by component"),
        Preset("quantum-diffusion", PresetKind.DIFFUSION, _QUANTUM_RUNS, "D_Q(t) with Omega(t) inset"),
        Preset("classical-sigma", PresetKind.CLASSICAL_SIGMA, _EQUIPARTITION_RUNS, "classical sigma approaching equipartition"),
        Preset("classical-sigma-small-gamma", PresetKind.CLASSICAL_SIGMA, _SMALL_GAMMA_RUNS, "classical sigma, periodic and overdamped"),
        Preset("classical-diffusion", PresetKind.CLASSICAL_DIFFUSION, _EQUIPARTITION_RUNS + _SMALL_GAMMA_RUNS, "classical D_clas"),
    )
}

# Figure ids accepted wherever a preset name is
PRESET_ALIASES: Dict[str, str] = {
    "fig1": "quantum-correlation",
    "fig2": "quantum-sigma",
    "fig3": "quantum-diffusion",
    "fig4": "classical-sigma",
    "fig4-inset": "classical-sigma-small-gamma",
    "fig5": "classical-diffusion",
}


def preset_names() -> List[str]:
    return sorted(PRESETS) + sorted(PRESET_ALIASES)


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[PRESET_ALIASES.get(name, name)]
    except KeyError:
        raise ConfigError(f"Unknown preset '{name}'. Available: {', '.join(preset_names())}") from None


def run_preset(
    name: str,
    output_dir: str,
    n_points: Optional[int] = None,
    t_min: float = DEFAULT_T_MIN,
) -> List[str]:
    """Compute every run of a preset and write one CSV per run; returns the written paths."""
    preset = get_preset(name)
    paths: List[str] = []
    logger.info(f"Running preset {name}: {preset.description} ({len(preset.runs)} runs)")
    for run in preset.runs:
        params = ModelParams(
            gamma=run.gamma,
            temperature=run.temperature,
            nu=preset.nu,
            quad={"t_min": t_min},
        )
        times = np.linspace(t_min, run.t_max, n_points or run.n_points)
        base = os.path.join(output_dir, f"{preset.name}_{run.label}")

        if preset.kind is PresetKind.CORRELATION:
            columns, poles, _ = correlation_table(params, times)
            paths.append(write_csv(f"{base}.csv", {k: columns[k] for k in ("t", "S", "A")}, poles))
        elif preset.kind in (PresetKind.SIGMA, PresetKind.DIFFUSION):
            columns, poles, comments = diffusion_table(params, times, sensitivity=preset.kind is PresetKind.DIFFUSION)
            if preset.kind is PresetKind.SIGMA:
                keep = ("t", "sigma_re", "sigma_im", "sigma_total")
                paths.append(write_csv(f"{base}.csv", {k: columns[k] for k in keep}, poles, comments))
            else:
                keep = ("t", "d1_total", "dq_total", "flags")
                paths.append(write_csv(f"{base}.csv", {k: columns[k] for k in keep}, poles, comments))
                paths.append(write_csv(f"{base}_omega.csv", {k: columns[k] for k in ("t", "omega_drift")}, poles))
        else:
            columns, poles, _ = classical_table(params, times)
            column = "sigma_clas" if preset.kind is PresetKind.CLASSICAL_SIGMA else "d_clas"
            paths.append(write_csv(f"{base}.csv", {k: columns[k] for k in ("t", column, "flags")}, poles))
    return paths
