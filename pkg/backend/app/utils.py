import logging
import os
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from dotenv import dotenv_values
from pydantic import ValidationError

from backend.app.config import CSV_FLOAT_FORMAT
from backend.app.enums import GridSpacing
from backend.app.exceptions import ConfigError
from backend.app.schemas import GridSpec, RunConfig

logger = logging.getLogger(__name__)

POLE_PREFIX = "# pole t="


def make_grid(spec: GridSpec) -> np.ndarray:
    if spec.spacing is GridSpacing.LOG:
        return np.geomspace(spec.t_min, spec.t_max, spec.n_points)
    return np.linspace(spec.t_min, spec.t_max, spec.n_points)


# --- CSV I/O ---
def write_csv(
    path: str,
    columns: Mapping[str, Sequence],
    poles: Iterable[float] = (),
    comments: Iterable[str] = (),
) -> str:
    """
    Write a column table as CSV: pole and comment lines first (prefixed '#'),
    then a header row and full-precision scientific values.
    """
    df = pd.DataFrame({name: list(values) if not isinstance(values, np.ndarray) else values
                       for name, values in columns.items()})
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for pole in poles:
            fh.write(f"{POLE_PREFIX}{pole:.17e}\n")
        for line in comments:
            fh.write(f"# {line}\n")
        df.to_csv(fh, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {len(df)} rows to {path}")
    return path


def read_csv(path: str) -> Tuple[pd.DataFrame, List[float]]:
    """Read a table written by write_csv; returns (frame, pole times)."""
    if not os.path.exists(path):
        raise ConfigError(f"CSV file not found: {path}")
    poles = []
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith(POLE_PREFIX):
                poles.append(float(line[len(POLE_PREFIX):]))
    df = pd.read_csv(path, comment="#", float_precision="round_trip")
    return df, poles


# --- Run config ---
def load_run_config(path: Optional[str] = None, overrides: Optional[Mapping[str, object]] = None) -> RunConfig:
    """
    Flat key=value file (parsed with dotenv_values) plus overrides, validated
    into a RunConfig. Overrides with a None value are ignored.
    """
    values: Dict[str, Optional[str]] = {}
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"Config file not found: {path}")
        values.update(dotenv_values(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = str(value)
    try:
        cfg = RunConfig.from_flat(values)
    except (ValidationError, ValueError) as exc:
        raise ConfigError(f"Invalid run config: {exc}") from exc
    logger.debug(f"Run config: {cfg}")
    return cfg
