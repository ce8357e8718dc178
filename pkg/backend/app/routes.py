import logging
import math
from typing import Callable, List, Optional

import numpy as np
from fastapi import APIRouter, Depends, HTTPException, status
from pydantic import ValidationError

from backend.app.exceptions import ConfigError, ConvergenceError, DivergenceError, DomainError, PoleError, QBMError, SimulationError
from backend.app.params import classify_regime
from backend.app.presets import (
    Table,
    classical_table,
    correlation_table,
    diffusion_table,
    simulate_table,
    susceptibility_table,
)
from backend.app.dependencies import get_run_config
from backend.app.schemas import GridSpec, ModelParams, ParamsIn, RegimeOut, RunConfig, SeriesOut, SimulateIn
from backend.app.susceptibility import find_chi_q_zeros
from backend.app.utils import make_grid

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api", tags=["Coefficients"])

_MODEL_FIELDS = {"gamma", "temperature", "nu", "omega_d"}
_GRID_FIELDS = {"t_max", "n_points"}


def _resolve(body: ParamsIn, cfg: RunConfig):
    """Request fields over run-config defaults; returns (ModelParams, GridSpec)."""
    data = cfg.model.model_dump()
    updates = body.model_dump(include=_MODEL_FIELDS, exclude_none=True)
    if "nu" in updates and "omega_d" not in updates:
        # let the Drude cutoff follow the requested nu
        data.pop("omega_d")
    data.update(updates)
    grid = {**cfg.grid.model_dump(), **body.model_dump(include=_GRID_FIELDS, exclude_none=True)}
    try:
        return ModelParams(**data), GridSpec(**grid)
    except ValidationError as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))


def _compute(fn: Callable[..., Table], *args, **kwargs) -> Table:
    try:
        return fn(*args, **kwargs)
    except (DomainError, PoleError, SimulationError, DivergenceError, ConfigError) as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
    except ConvergenceError as e:
        logger.error(f"Numerics did not converge: {e}")
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail=f"Numerics did not converge: {e}"
        )
    except QBMError as e:
        raise HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail=str(e))


def _finite_or_none(values) -> List[Optional[float]]:
    return [float(v) if math.isfinite(v) else None for v in np.asarray(values, dtype=float)]


def _series_out(table: Table) -> SeriesOut:
    columns, poles, _ = table
    flags: List[str] = []
    out = {}
    for name, values in columns.items():
        if name == "flags":
            flags = list(values)
        else:
            out[name] = _finite_or_none(values)
    return SeriesOut(columns=out, poles=[float(p) for p in poles], flags=flags)


@router.post("/regime", response_model=RegimeOut)
def regime_endpoint(body: ParamsIn, cfg: RunConfig = Depends(get_run_config)):
    model, grid = _resolve(body, cfg)
    regime = classify_regime(model.gamma)
    poles = find_chi_q_zeros(model, grid.t_max)
    return RegimeOut(
        kind=str(regime.kind),
        omega_re=regime.omega.real,
        omega_im=regime.omega.imag,
        omega_tilde=regime.omega_tilde,
        poles=list(poles.times),
    )


@router.post("/susceptibility", response_model=SeriesOut)
def susceptibility_endpoint(body: ParamsIn, cfg: RunConfig = Depends(get_run_config)):
    model, grid = _resolve(body, cfg)
    return _series_out(_compute(susceptibility_table, model, make_grid(grid)))


@router.post("/correlation", response_model=SeriesOut)
def correlation_endpoint(body: ParamsIn, cfg: RunConfig = Depends(get_run_config)):
    model, grid = _resolve(body, cfg)
    return _series_out(_compute(correlation_table, model, make_grid(grid)))


@router.post("/classical", response_model=SeriesOut)
def classical_endpoint(body: ParamsIn, cfg: RunConfig = Depends(get_run_config)):
    model, grid = _resolve(body, cfg)
    return _series_out(_compute(classical_table, model, make_grid(grid)))


@router.post("/diffusion", response_model=SeriesOut)
def diffusion_endpoint(body: ParamsIn, cfg: RunConfig = Depends(get_run_config)):
    model, grid = _resolve(body, cfg)
    logger.info(f"Diffusion request: gamma={model.gamma}, {grid.n_points} points to t={grid.t_max}")
    return _series_out(_compute(diffusion_table, model, make_grid(grid), sensitivity=False))


@router.post("/simulate", response_model=SeriesOut)
def simulate_endpoint(body: SimulateIn, cfg: RunConfig = Depends(get_run_config)):
    model, grid = _resolve(body, cfg)
    seed = body.seed if body.seed is not None else cfg.seed
    logger.info(f"Simulation request: {body.n_paths} paths, dt={body.dt}, source={body.source}, seed={seed}")
    table = _compute(
        simulate_table,
        model,
        body.source,
        n_paths=body.n_paths,
        dt=body.dt,
        t_max=grid.t_max,
        seed=seed,
        n_points=grid.n_points,
    )
    return _series_out(table)
