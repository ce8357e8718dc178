import math

import numpy as np
import pytest

from backend.app.exceptions import DomainError, PoleError
from backend.app.numerics import fd_check
from backend.app.params import ClassicalParams
from backend.app.susceptibility import (
    drift_frequency,
    drift_frequency_array,
    eval_susceptibility,
    find_chi_q_zeros,
    mean_trajectory,
    nearest_pole,
    second_derivatives,
    susceptibility_arrays,
)

FIRST_POLE = 4.0 * math.pi / (3.0 * math.sqrt(3.0))   # gamma = 1
POLE_SPACING = 2.0 * math.pi / math.sqrt(3.0)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0, 4.0, 400.0])
def test_initial_values(gamma):
    value = eval_susceptibility(0.0, ClassicalParams(gamma=gamma, temperature=1.0))
    assert value.chi_q == 1.0
    assert value.chi_v == 0.0
    assert value.dchi_q == 0.0
    assert value.dchi_v == 1.0


@pytest.mark.parametrize("gamma", [1.0, 2.0, 4.0])
def test_wronskian(gamma):
    t = np.linspace(0.0, 10.0, 201)
    chi_q, chi_v, dchi_q, dchi_v = susceptibility_arrays(t, gamma)
    wronskian = chi_q * dchi_v - dchi_q * chi_v
    assert np.max(np.abs(wronskian - np.exp(-gamma * t))) < 1e-10


@pytest.mark.parametrize("gamma", [1.0, 2.0, 4.0])
def test_derivatives_match_difference_quotients(gamma):
    def component(i):
        return lambda x: float(susceptibility_arrays(x, gamma)[i])

    assert fd_check(component(0), component(2), 1.3, 1e-3) < 1e-8
    assert fd_check(component(1), component(3), 1.3, 1e-3) < 1e-8


def test_second_derivatives_follow_equation_of_motion():
    t = np.linspace(0.1, 5.0, 20)
    chi_q, chi_v, dchi_q, dchi_v = susceptibility_arrays(t, 1.0)
    ddchi_q, ddchi_v = second_derivatives(chi_v, dchi_v, 1.0)
    assert np.allclose(ddchi_v, -dchi_v - chi_v, atol=1e-14)
    assert np.allclose(ddchi_q, -dchi_v, atol=1e-14)
    assert np.allclose(dchi_q, -chi_v, atol=1e-14)


def test_series_form_is_continuous_at_switch():
    # |omega^2 t^2 / 4| = 1e-3 for gamma = 1
    t_switch = math.sqrt(4e-3 / 3.0)
    below = susceptibility_arrays(t_switch * (1.0 - 1e-9), 1.0)
    above = susceptibility_arrays(t_switch * (1.0 + 1e-9), 1.0)
    for a, b in zip(below, above):
        assert float(a) == pytest.approx(float(b), abs=1e-12)


def test_regimes_agree_across_critical_damping():
    t = np.array([0.5, 2.0, 6.0])
    at_two = susceptibility_arrays(t, 2.0)
    for gamma in (2.0 - 1e-7, 2.0 + 1e-7):
        for a, b in zip(at_two, susceptibility_arrays(t, gamma)):
            assert np.allclose(a, b, rtol=1e-6, atol=1e-9)


def test_large_gamma_long_time_is_finite():
    chi_q, chi_v, _, _ = susceptibility_arrays(2000.0, 400.0)
    assert np.isfinite(chi_q) and chi_q > 0
    assert np.isfinite(chi_v) and chi_v > 0


def test_negative_time_is_rejected():
    with pytest.raises(DomainError):
        susceptibility_arrays(-1.0, 1.0)


def test_mean_trajectory_starts_at_initial_conditions():
    params = ClassicalParams(gamma=1.0, temperature=1.0)
    q, v = mean_trajectory(0.0, 0.7, -0.2, params)
    assert float(q) == pytest.approx(0.7)
    assert float(v) == pytest.approx(-0.2)


def test_drift_frequency_limits():
    assert float(drift_frequency_array(0.0, 1.0)) == 0.0
    assert float(drift_frequency_array(50.0, 4.0)) == pytest.approx(-(2.0 - math.sqrt(3.0)), rel=1e-10)


@pytest.mark.parametrize("gamma", [1.0, 4.0])
def test_drift_frequency_is_log_derivative(gamma):
    chi_q, _, dchi_q, _ = susceptibility_arrays(1.0, gamma)
    assert float(drift_frequency_array(1.0, gamma)) == pytest.approx(float(dchi_q / chi_q), rel=1e-12)


def test_drift_frequency_at_pole_raises():
    params = ClassicalParams(gamma=1.0, temperature=1.0)
    with pytest.raises(PoleError) as excinfo:
        drift_frequency(FIRST_POLE, params)
    assert excinfo.value.pole_time == pytest.approx(FIRST_POLE, abs=1e-12)
    assert math.isfinite(drift_frequency(1.0, params))


def test_nearest_pole():
    pole, distance = nearest_pole(2.4, 1.0)
    assert pole == pytest.approx(FIRST_POLE, abs=1e-12)
    assert distance == pytest.approx(FIRST_POLE - 2.4, abs=1e-12)
    assert math.isinf(nearest_pole(2.4, 4.0)[1])


def test_find_chi_q_zeros_periodic():
    poles = find_chi_q_zeros(ClassicalParams(gamma=1.0, temperature=1.0), 10.0)
    expected = [FIRST_POLE + k * POLE_SPACING for k in range(3)]
    assert len(poles.times) == 3
    assert list(poles.times) == pytest.approx(expected, abs=1e-10)
    assert poles.contains(FIRST_POLE + 1e-7)
    assert not poles.contains(FIRST_POLE + 1e-3)


@pytest.mark.parametrize("gamma", [2.0, 4.0])
def test_no_zeros_without_oscillation(gamma):
    assert find_chi_q_zeros(ClassicalParams(gamma=gamma, temperature=1.0), 50.0).times == ()


def test_find_chi_q_zeros_at_long_times():
    poles = find_chi_q_zeros(ClassicalParams(gamma=1.0, temperature=1.0), 2000.0)
    times = np.array(poles.times)
    assert len(times) == 551
    assert times[0] == pytest.approx(FIRST_POLE, abs=1e-10)
    assert np.allclose(np.diff(times), POLE_SPACING, rtol=1e-12, atol=1e-9)
    assert times[-1] <= 2000.0
    assert nearest_pole(times[-1], 1.0)[1] < 1e-9
