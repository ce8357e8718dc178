import logging
import os
import sys
from typing import Callable, Dict, List, Optional, Sequence

import click
import numpy as np
from pydantic import ValidationError

from backend.app import config
from backend.app.enums import CoefficientSource, PointFlag
from backend.app.exceptions import ConfigError, QBMError
from backend.app.noise_corr import phi_phi_values
from backend.app.plot_script import emit_plot_script
from backend.app.presets import (
    classical_table,
    correlation_table,
    diffusion_table,
    preset_names,
    run_preset,
    simulate_table,
    susceptibility_table,
)
from backend.app.schemas import RunConfig
from backend.app.utils import load_run_config, make_grid, write_csv

logger = logging.getLogger(__name__)

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')


def _model_options(f: Callable) -> Callable:
    options = [
        click.option("--gamma", type=float, default=None, help="Scaled friction gamma / omega_0."),
        click.option("--temperature", type=float, default=None, help="Scaled temperature k_B T / (M omega_0^2)."),
        click.option("--nu", type=float, default=None, help="First Matsubara frequency in units of omega_0."),
        click.option("--t-min", "t_min", type=float, default=None, help="Lower time cutoff."),
        click.option("--t-max", "t_max", type=float, default=None),
        click.option("--points", "n_points", type=int, default=None, help="Number of grid points."),
        click.option("--output", "output", type=click.Path(dir_okay=False), default=None, help="CSV file to write."),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _run_config(ctx: click.Context, **overrides) -> RunConfig:
    return load_run_config(ctx.obj.get("config_path"), overrides)


def _output_path(cfg: RunConfig, name: str) -> str:
    return cfg.output_path or os.path.join(config.OUTPUT_DIR, f"{name}.csv")


def _emit(cfg: RunConfig, name: str, table) -> str:
    columns, poles, comments = table
    path = write_csv(_output_path(cfg, name), columns, poles, comments)
    click.echo(path)
    return path


def _point_flags(clamped: bool, truncated: bool) -> str:
    flags = [PointFlag.CLAMPED] * bool(clamped) + [PointFlag.TRUNCATED] * bool(truncated)
    return "|".join(str(f) for f in flags)


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=config.CONFIG_PATH,
    help="key=value run config (defaults to $QBM_CONFIG).",
)
@click.pass_context
def main(ctx: click.Context, config_path: Optional[str]):
    """Fokker-Planck coefficients of a quantum Brownian oscillator in an Ohmic bath."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@main.command()
@_model_options
@click.pass_context
def correlation(ctx, **overrides):
    """<q(t) q0> and its first two derivatives: t, S, A, dS, dA, d2S, d2A."""
    cfg = _run_config(ctx, **overrides)
    _emit(cfg, "correlation", correlation_table(cfg.model, make_grid(cfg.grid)))


@main.command()
@_model_options
@click.pass_context
def susceptibility(ctx, **overrides):
    """chi_q, chi_v, their derivatives and Omega(t), with chi_q zeros as pole lines."""
    cfg = _run_config(ctx, **overrides)
    _emit(cfg, "susceptibility", susceptibility_table(cfg.model, make_grid(cfg.grid)))


@main.command()
@_model_options
@click.pass_context
def diffusion(ctx, **overrides):
    """Omega, sigma_Q by component, D1 and D_Q on the grid."""
    cfg = _run_config(ctx, **overrides)
    columns, poles, comments = diffusion_table(cfg.model, make_grid(cfg.grid))
    keep = ("t", "omega_drift", "sigma_re", "sigma_im", "sigma_total", "d1_total", "dq_total", "flags")
    _emit(cfg, "diffusion", ({k: columns[k] for k in keep}, poles, comments))


@main.command()
@_model_options
@click.pass_context
def classical(ctx, **overrides):
    """White-noise limit: t, d_clas, sigma_clas."""
    cfg = _run_config(ctx, **overrides)
    _emit(cfg, "classical", classical_table(cfg.model, make_grid(cfg.grid)))


@main.command()
@_model_options
@click.option("--paths", "n_paths", type=int, default=None, help="Number of Monte Carlo paths.")
@click.option("--dt", type=float, default=None, help="Euler-Maruyama step.")
@click.option("--seed", type=int, default=None)
@click.option(
    "--source",
    type=click.Choice([s.value for s in CoefficientSource]),
    default=CoefficientSource.CLASSICAL.value,
    show_default=True,
)
@click.pass_context
def simulate(ctx, source: str, **overrides):
    """Ornstein-Uhlenbeck ensemble variance against the variance ODE."""
    cfg = _run_config(ctx, **overrides)
    table = simulate_table(
        cfg.model,
        CoefficientSource(source),
        n_paths=cfg.n_paths,
        dt=cfg.dt,
        t_max=cfg.grid.t_max,
        seed=cfg.seed,
        n_points=cfg.grid.n_points,
    )
    _emit(cfg, "simulate", table)


@main.command()
@click.argument("name", type=click.Choice(preset_names()))
@click.option("--output-dir", type=click.Path(file_okay=False), default=None)
@click.option("--points", "n_points", type=int, default=None, help="Override the preset grid size.")
@click.option("--t-min", "t_min", type=float, default=config.DEFAULT_T_MIN, show_default=True)
def preset(name: str, output_dir: Optional[str], n_points: Optional[int], t_min: float):
    """Run a figure preset, one CSV per parameter set."""
    for path in run_preset(name, output_dir or config.OUTPUT_DIR, n_points=n_points, t_min=t_min):
        click.echo(path)


@main.command("plot-script")
@click.argument("style")
@click.argument("csv_paths", nargs=-1)
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="Write the script here instead of stdout.")
def plot_script(style: str, csv_paths: Sequence[str], output: Optional[str]):
    """gnuplot commands for CSVs of a preset (STYLE is a preset name or table kind)."""
    text = emit_plot_script(list(csv_paths), style)
    if output:
        with open(output, "w") as fh:
            fh.write(text)
        click.echo(output)
    else:
        click.echo(text, nl=False)


@main.command("debug-phi", hidden=True)
@_model_options
@click.option("--at", "t_fixed", type=float, required=True, help="Fixed first time argument.")
@click.pass_context
def debug_phi(ctx, t_fixed: float, **overrides):
    """<phi_v(t) phi_v(s)> for fixed t over s in [t_min, t]."""
    cfg = _run_config(ctx, **overrides)
    s = np.linspace(cfg.model.t_min, t_fixed, cfg.grid.n_points)
    noise = phi_phi_values(t_fixed, s, cfg.model)
    columns: Dict[str, object] = {
        "t": np.full(s.shape, t_fixed),
        "s": s,
        "re": noise.value.real,
        "im": noise.value.imag,
        "flags": [_point_flags(c, tr) for c, tr in zip(noise.clamped, noise.truncated)],
    }
    if noise.clamped.any():
        logger.warning(f"{int(noise.clamped.sum())} points had |t - s| clamped to t_min")
    _emit(cfg, "debug_phi", (columns, [], []))


def run(argv: Optional[List[str]] = None) -> int:
    """Entry point returning an exit code: 0 ok, 2 usage/config error, 3 numeric failure."""
    try:
        rv = main.main(args=argv, prog_name="qbm", standalone_mode=False)
    except click.exceptions.UsageError as exc:
        exc.show()
        return 2
    except click.exceptions.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        return 1
    except ValidationError as exc:
        logger.error(f"Invalid parameters: {exc}")
        return ConfigError.exit_code
    except QBMError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return exc.exit_code
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(run())
