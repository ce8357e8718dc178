from typing import Dict, List, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from backend.app import config
from backend.app.enums import CoefficientSource, GridSpacing

# --- Numeric controls ---
class SeriesControl(BaseModel):
    """Truncation controls for the Matsubara sums."""
    model_config = ConfigDict(frozen=True)

    n_max: int = config.DEFAULT_N_MAX
    rel_tol: float = config.DEFAULT_SERIES_REL_TOL

    @field_validator("n_max")
    @classmethod
    def check_n_max(cls, v: int) -> int:
        if v < 10:
            raise ValueError("n_max must be at least 10")
        return v

    @field_validator("rel_tol")
    @classmethod
    def check_rel_tol(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("rel_tol must lie in (0, 1)")
        return v

class QuadControl(BaseModel):
    model_config = ConfigDict(frozen=True)

    abs_tol: float = Field(default=config.DEFAULT_QUAD_ABS_TOL, gt=0)
    rel_tol: float = Field(default=config.DEFAULT_QUAD_REL_TOL, gt=0)
    max_depth: int = Field(default=config.DEFAULT_QUAD_MAX_DEPTH, ge=1)
    t_min: float = Field(default=config.DEFAULT_T_MIN, gt=0)

# --- Model parameters ---
class ClassicalParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma: float = Field(gt=0)
    temperature: float = Field(gt=0)

class ModelParams(BaseModel):
    """
    Scaled bath/particle parameters (omega_0 = M = 1) plus numeric controls.
    omega_d defaults to DRUDE_FACTOR * nu when omitted.
    """
    model_config = ConfigDict(frozen=True)

    gamma: float = Field(default=config.DEFAULT_GAMMA, gt=0)
    temperature: float = Field(default=config.DEFAULT_TEMPERATURE, gt=0)
    nu: float = Field(default=config.DEFAULT_NU, gt=0)
    omega_d: float = Field(gt=0)
    series: SeriesControl = SeriesControl()
    quad: QuadControl = QuadControl()

    @model_validator(mode="before")
    @classmethod
    def default_drude_cutoff(cls, data):
        if isinstance(data, dict) and data.get("omega_d") is None:
            nu = float(data.get("nu", config.DEFAULT_NU))
            data = {**data, "omega_d": config.DRUDE_FACTOR * nu}
        return data

    @property
    def t_min(self) -> float:
        return self.quad.t_min

    def classical(self) -> ClassicalParams:
        return ClassicalParams(gamma=self.gamma, temperature=self.temperature)

class GridSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_min: float = Field(default=config.DEFAULT_T_MIN, gt=0)
    t_max: float = config.DEFAULT_T_MAX
    n_points: int = config.DEFAULT_N_POINTS
    spacing: GridSpacing = GridSpacing.LINEAR

    @model_validator(mode="after")
    def check_range(self) -> "GridSpec":
        if not self.t_max > self.t_min:
            raise ValueError("t_max must exceed t_min")
        if self.n_points < 2:
            raise ValueError("n_points must be at least 2")
        return self

# Keys accepted in the flat key=value run config, grouped by destination.
MODEL_KEYS = ("gamma", "temperature", "nu", "omega_d")
SERIES_KEYS = ("n_max",)
QUAD_KEYS = ("abs_tol", "t_min")
GRID_KEYS = ("t_min", "t_max", "n_points", "spacing")
RUN_KEYS = ("seed", "n_paths", "dt", "output", "preset")
CONFIG_KEYS = frozenset(MODEL_KEYS + SERIES_KEYS + QUAD_KEYS + GRID_KEYS + RUN_KEYS + ("rel_tol",))

class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: ModelParams = ModelParams()
    grid: GridSpec = GridSpec()
    output_path: Optional[str] = None
    preset: Optional[str] = None
    seed: int = config.DEFAULT_SEED
    n_paths: int = Field(default=config.DEFAULT_N_PATHS, ge=2)
    dt: float = Field(default=config.DEFAULT_DT, gt=0)

    @classmethod
    def from_flat(cls, values: Mapping[str, Optional[str]]) -> "RunConfig":
        """Build a RunConfig from flat key=value pairs (None values are ignored)."""
        unknown = sorted(k for k in values if k not in CONFIG_KEYS)
        if unknown:
            raise ValueError(f"Unknown config keys: {', '.join(unknown)}")
        flat = {k: v for k, v in values.items() if v is not None and v != ""}

        series = {k: flat[k] for k in SERIES_KEYS if k in flat}
        quad = {k: flat[k] for k in QUAD_KEYS if k in flat}
        if "rel_tol" in flat:
            # one rel_tol drives both the series tail test and the quadrature
            series["rel_tol"] = flat["rel_tol"]
            quad["rel_tol"] = flat["rel_tol"]
        model = {k: flat[k] for k in MODEL_KEYS if k in flat}
        model["series"] = SeriesControl(**series)
        model["quad"] = QuadControl(**quad)
        grid = {k: flat[k] for k in GRID_KEYS if k in flat}

        run = {}
        for key in ("seed", "n_paths", "dt", "preset"):
            if key in flat:
                run[key] = flat[key]
        if "output" in flat:
            run["output_path"] = flat["output"]
        return cls(model=ModelParams(**model), grid=GridSpec(**grid), **run)

# --- HTTP request / response models ---
class ParamsIn(BaseModel):
    """Request body shared by the computation endpoints; omitted fields fall back to the run config."""
    gamma: Optional[float] = Field(default=None, gt=0)
    temperature: Optional[float] = Field(default=None, gt=0)
    nu: Optional[float] = Field(default=None, gt=0)
    omega_d: Optional[float] = Field(default=None, gt=0)
    t_max: Optional[float] = Field(default=None, gt=0)
    n_points: Optional[int] = Field(default=None, ge=2, le=10_000)

class SimulateIn(ParamsIn):
    source: CoefficientSource = CoefficientSource.CLASSICAL
    n_paths: int = Field(default=2000, ge=2)
    dt: float = Field(default=1e-2, gt=0)
    seed: Optional[int] = None

class RegimeOut(BaseModel):
    kind: str
    omega_re: float
    omega_im: float
    omega_tilde: float
    poles: List[float] = []

class SeriesOut(BaseModel):
    """Column-oriented table, same columns as the matching CLI subcommand."""
    columns: Dict[str, List[Optional[float]]]  # non-finite values (pole windows) are null
    poles: List[float] = []
    flags: List[str] = []
