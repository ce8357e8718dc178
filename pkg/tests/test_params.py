import math

import pytest
from pydantic import ValidationError

from backend.app.enums import GridSpacing, RegimeKind
from backend.app.exceptions import ConfigError, DomainError
from backend.app.params import ModelParams, classify_regime, matsubara
from backend.app.schemas import GridSpec, RunConfig
from backend.app.utils import load_run_config, make_grid


@pytest.mark.parametrize(
    "gamma, kind",
    [(0.5, RegimeKind.PERIODIC), (1.0, RegimeKind.PERIODIC), (2.0, RegimeKind.APERIODIC),
     (2.0 + 1e-10, RegimeKind.APERIODIC), (4.0, RegimeKind.OVERDAMPED), (400.0, RegimeKind.OVERDAMPED)],
)
def test_classify_regime_kinds(gamma, kind):
    assert classify_regime(gamma).kind is kind


def test_regime_frequencies():
    periodic = classify_regime(1.0)
    assert periodic.omega_tilde == pytest.approx(math.sqrt(3.0), rel=1e-15)
    assert periodic.omega.real == 0.0

    overdamped = classify_regime(4.0)
    assert overdamped.omega_tilde == pytest.approx(math.sqrt(12.0), rel=1e-15)
    lam1, lam2 = overdamped.lambdas
    assert lam1.real == pytest.approx(2.0 + math.sqrt(3.0), rel=1e-14)
    assert lam2.real == pytest.approx(2.0 - math.sqrt(3.0), rel=1e-14)


def test_small_decay_rate_keeps_precision_for_large_gamma():
    _, lam2 = classify_regime(400.0).lambdas
    # lambda2 ~ 1/gamma + 1/gamma^3
    assert lam2.real == pytest.approx(1.0 / 400.0 + 1.0 / 400.0 ** 3, rel=1e-9)


@pytest.mark.parametrize("gamma", [0.0, -1.0, math.inf, math.nan])
def test_classify_regime_rejects_bad_gamma(gamma):
    with pytest.raises(DomainError):
        classify_regime(gamma)


def test_matsubara_frequency():
    assert matsubara(3, 2.0) == 6.0
    with pytest.raises(DomainError):
        matsubara(0, 1.0)


def test_drude_cutoff_defaults_to_ten_nu():
    assert ModelParams(nu=5.0).omega_d == 50.0
    assert ModelParams(nu=5.0, omega_d=7.0).omega_d == 7.0
    assert ModelParams().t_min == 1e-3


def test_model_params_validation():
    with pytest.raises(ValidationError):
        ModelParams(gamma=-1.0)
    with pytest.raises(ValidationError):
        ModelParams(temperature=0.0)


def test_grid_spec_validation():
    with pytest.raises(ValidationError):
        GridSpec(t_min=1.0, t_max=0.5)
    with pytest.raises(ValidationError):
        GridSpec(n_points=1)


def test_make_grid_spacing():
    linear = make_grid(GridSpec(t_min=1.0, t_max=3.0, n_points=3))
    assert list(linear) == [1.0, 2.0, 3.0]
    log = make_grid(GridSpec(t_min=1e-3, t_max=10.0, n_points=5, spacing=GridSpacing.LOG))
    assert log[0] == pytest.approx(1e-3)
    assert log[2] == pytest.approx(0.1)
    assert log[-1] == pytest.approx(10.0)


def test_run_config_from_flat_routes_keys():
    cfg = RunConfig.from_flat({"gamma": "4", "t_max": "5", "rel_tol": "1e-6", "t_min": "1e-4", "seed": "7"})
    assert cfg.model.gamma == 4.0
    assert cfg.grid.t_max == 5.0
    assert cfg.model.series.rel_tol == 1e-6
    assert cfg.model.quad.rel_tol == 1e-6
    assert cfg.model.t_min == 1e-4
    assert cfg.grid.t_min == 1e-4
    assert cfg.seed == 7


def test_run_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        RunConfig.from_flat({"bogus": "1"})


def test_load_run_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("gamma=4\ntemperature=0.5\n# comment\nn_points=11\n")
    cfg = load_run_config(str(path), {"temperature": 2.0, "t_max": None})
    assert cfg.model.gamma == 4.0
    assert cfg.model.temperature == 2.0
    assert cfg.grid.n_points == 11
    assert cfg.grid.t_max == 10.0


def test_load_run_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(str(tmp_path / "missing.env"))

    unknown = tmp_path / "unknown.env"
    unknown.write_text("frequency=3\n")
    with pytest.raises(ConfigError):
        load_run_config(str(unknown))

    invalid = tmp_path / "invalid.env"
    invalid.write_text("gamma=-2\n")
    with pytest.raises(ConfigError):
        load_run_config(str(invalid))
