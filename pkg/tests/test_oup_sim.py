import math

import numpy as np
import pytest

from backend.app import oup_sim
from backend.app.classical import drift_series, sigma_clas, sigma_clas_array
from backend.app.exceptions import DomainError, PoleError, SimulationError
from backend.app.oup_sim import DriftDiffusion, simulate_ensemble, variance_ode
from backend.app.params import ClassicalParams


@pytest.fixture(name="overdamped_coeffs")
def overdamped_coeffs_fixture():
    params = ClassicalParams(gamma=4.0, temperature=0.053)
    series = drift_series(params, np.linspace(0.0, 10.0, 2001))
    return params, DriftDiffusion(series.times, series.omega, series.diffusion, series.pole_windows, "cubic")


def test_zero_diffusion_keeps_paths_at_origin():
    stats = simulate_ensemble(DriftDiffusion.constant(-1.0, 0.0, 1.0), n_paths=100, dt=0.01, t_max=1.0, seed=1)
    assert np.all(stats.variance == 0.0)
    assert np.all(stats.mean == 0.0)


def test_stationary_variance_of_constant_process():
    stats = simulate_ensemble(DriftDiffusion.constant(-1.0, 2.0, 8.0), n_paths=4000, dt=1e-2, t_max=8.0, seed=1)
    assert stats.times[0] == 0.0
    assert stats.times[-1] == pytest.approx(8.0)
    # D / (2 k) = 1
    assert abs(stats.variance[-1] - 1.0) < 5.0 * stats.std_error[-1]
    assert abs(stats.mean[-1]) < 5.0 * math.sqrt(stats.variance[-1] / stats.n_paths)


def test_ensemble_variance_tracks_classical_sigma(overdamped_coeffs):
    params, coeffs = overdamped_coeffs
    stats = simulate_ensemble(coeffs, n_paths=4000, dt=1e-2, t_max=5.0, seed=7)
    late = stats.times >= 1.0
    reference = sigma_clas_array(stats.times[late], params)
    assert np.all(np.abs(stats.variance[late] - reference) <= 5.0 * stats.std_error[late])


def test_results_do_not_depend_on_worker_count(monkeypatch):
    monkeypatch.setattr(oup_sim, "PATH_BLOCK_SIZE", 64)
    coeffs = DriftDiffusion.constant(-0.5, 1.0, 2.0)
    serial = simulate_ensemble(coeffs, n_paths=1000, dt=0.05, t_max=2.0, seed=3, n_jobs=1)
    threaded = simulate_ensemble(coeffs, n_paths=1000, dt=0.05, t_max=2.0, seed=3, n_jobs=3)
    assert serial.n_paths == 1000
    assert np.array_equal(serial.variance, threaded.variance)
    assert np.array_equal(serial.mean, threaded.mean)


def test_different_seeds_differ():
    coeffs = DriftDiffusion.constant(-0.5, 1.0, 2.0)
    a = simulate_ensemble(coeffs, n_paths=200, dt=0.05, t_max=2.0, seed=1)
    b = simulate_ensemble(coeffs, n_paths=200, dt=0.05, t_max=2.0, seed=2)
    assert not np.array_equal(a.variance, b.variance)


def test_negative_diffusion_is_rejected():
    with pytest.raises(SimulationError):
        simulate_ensemble(DriftDiffusion.constant(-1.0, -0.5, 1.0), n_paths=10, dt=0.1, t_max=1.0, seed=0)


def test_simulation_across_pole_is_rejected():
    series = drift_series(ClassicalParams(gamma=1.0, temperature=1.0), np.linspace(0.0, 5.0, 501))
    with pytest.raises(SimulationError):
        simulate_ensemble(series, n_paths=10, dt=0.01, t_max=5.0, seed=0)


@pytest.mark.parametrize(
    "kwargs",
    [{"n_paths": 1}, {"dt": 0.0}, {"t_max": 3.0}, {"dt": 5.0}],
)
def test_simulation_argument_checks(kwargs):
    args = {"n_paths": 10, "dt": 0.1, "t_max": 1.0, "seed": 0}
    args.update(kwargs)
    with pytest.raises(DomainError):
        simulate_ensemble(DriftDiffusion.constant(-1.0, 1.0, 1.0), **args)


def test_drift_diffusion_validation():
    with pytest.raises(DomainError):
        DriftDiffusion(np.array([0.0]), np.array([1.0]), np.array([1.0]))
    with pytest.raises(DomainError):
        DriftDiffusion(np.array([1.0, 0.0]), np.zeros(2), np.zeros(2))
    with pytest.raises(DomainError):
        DriftDiffusion(np.array([0.0, 1.0]), np.zeros(2), np.zeros(2), interpolation="quadratic")


def test_variance_ode_without_diffusion_decays_exponentially():
    coeffs = DriftDiffusion.constant(-0.5, 0.0, 4.0)
    grid = np.linspace(0.0, 4.0, 9)
    assert np.allclose(variance_ode(coeffs, grid, 2.0), 2.0 * np.exp(-grid), rtol=1e-8, atol=0.0)


def test_variance_ode_reproduces_classical_sigma(overdamped_coeffs):
    params, coeffs = overdamped_coeffs
    grid = np.linspace(0.01, 10.0, 50)
    solution = variance_ode(coeffs, grid, sigma_clas(0.01, params))
    assert np.allclose(solution, sigma_clas_array(grid, params), rtol=1e-6, atol=1e-12)


def test_variance_ode_single_point_and_pole():
    series = drift_series(ClassicalParams(gamma=1.0, temperature=1.0), np.linspace(0.0, 5.0, 501))
    assert list(variance_ode(series, [1.0], 0.25)) == [0.25]
    with pytest.raises(PoleError):
        variance_ode(series, [1.0, 3.0], 0.1)
    before_pole = np.linspace(0.01, 2.3, 50)
    assert np.all(variance_ode(series, before_pole, sigma_clas(0.01, ClassicalParams(gamma=1.0, temperature=1.0))) > 0.0)
