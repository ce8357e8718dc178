import math

import numpy as np
import pytest
from scipy.integrate import simpson

from backend.app import diffusion
from backend.app.classical import d_clas, sigma_clas
from backend.app.config import POLE_GUARD_WIDTH
from backend.app.correlations import MemoTable
from backend.app.diffusion import (
    coefficient_series,
    d1,
    d_q,
    sigma1,
    sigma_q,
    t_min_sensitivity,
)
from backend.app.enums import PointFlag
from backend.app.exceptions import DomainError, PoleError, QBMError
from backend.app.noise_corr import phi_phi_values, phi_q0, two_time_sample
from backend.app.numerics import fd_check
from backend.app.params import ModelParams
from backend.app.susceptibility import drift_frequency, susceptibility_arrays

FIRST_POLE = 4.0 * math.pi / (3.0 * math.sqrt(3.0))   # gamma = 1


def test_d1_at_t_min_is_local_term(overdamped):
    t = overdamped.t_min
    chi_q = float(susceptibility_arrays(t, overdamped.gamma)[0])
    expected = 2.0 * chi_q * phi_q0(t, overdamped).re
    assert d1(t, overdamped).re == pytest.approx(expected, rel=1e-12, abs=1e-300)


def test_sigma_starts_from_thermal_velocity_spread(overdamped):
    t = overdamped.t_min
    assert sigma1(t, overdamped).re == 0.0
    chi_v = float(susceptibility_arrays(t, overdamped.gamma)[1])
    assert sigma_q(t, overdamped).total == pytest.approx(overdamped.temperature * chi_v ** 2, rel=1e-12)


def test_d1_inner_integral_matches_simpson(overdamped):
    t = 2.0
    s = np.linspace(overdamped.t_min, t, 20001)
    values = phi_phi_values(t, s, overdamped).value
    reference = simpson(values.real, x=s)

    chi_q = float(susceptibility_arrays(t, overdamped.gamma)[0])
    inner = 0.5 * d1(t, overdamped).re - chi_q * phi_q0(t, overdamped).re
    assert inner == pytest.approx(reference, rel=1e-6)


def test_sigma_and_diffusion_tend_to_white_noise_results(overdamped):
    t = 2.0
    assert sigma_q(t, overdamped).total == pytest.approx(sigma_clas(t, overdamped), rel=1e-3)
    assert d_q(t, overdamped).total == pytest.approx(d_clas(t, overdamped), rel=1e-3)


def test_sigma_rate_obeys_drift_diffusion_identity(overdamped):
    def sigma(x):
        return sigma_q(x, overdamped).total

    def rate(x):
        return d_q(x, overdamped).total + 2.0 * drift_frequency(x, overdamped) * sigma(x)

    assert fd_check(sigma, rate, 1.5, 1e-2) < 1e-4


def test_d_q_at_pole_raises(periodic):
    with pytest.raises(PoleError):
        d_q(FIRST_POLE, periodic)


def test_times_below_t_min_are_rejected(overdamped):
    with pytest.raises(DomainError):
        d1(overdamped.t_min / 2.0, overdamped)
    with pytest.raises(DomainError):
        sigma_q(0.0, overdamped)


def test_overdamped_series(overdamped):
    times = np.linspace(overdamped.t_min, 3.0, 7)
    series = coefficient_series(overdamped, times, n_jobs=1)

    assert series.poles == ()
    # only the clamp of the innermost D1 nodes may show up
    assert all(set(point) <= {PointFlag.CLAMPED} for point in series.flags)
    assert np.all(series.sigma_total >= 0.0)
    assert np.all(np.diff(series.sigma_total) > 0.0)
    assert np.array_equal(series.sigma_total, series.sigma_re + series.sigma_im)
    assert np.all(series.dq_total > 0.0)
    assert list(series.columns()) == ["t", "omega_drift", "sigma_re", "sigma_im", "sigma_total", "d1_total", "dq_total"]


def test_series_does_not_depend_on_worker_count(overdamped):
    times = np.linspace(overdamped.t_min, 2.0, 5)
    serial = coefficient_series(overdamped, times, n_jobs=1)
    threaded = coefficient_series(overdamped, times, n_jobs=2)
    assert np.array_equal(serial.sigma_total, threaded.sigma_total)
    assert np.array_equal(serial.dq_total, threaded.dq_total)


def test_single_point_series_matches_scalar(overdamped):
    series = coefficient_series(overdamped, [1.0], n_jobs=1)
    assert series.sigma_re[0] == pytest.approx(sigma_q(1.0, overdamped).re, rel=1e-12)
    assert series.dq_re[0] == pytest.approx(d_q(1.0, overdamped).re, rel=1e-12)


def test_periodic_series_flags_poles_and_negative_diffusion(periodic):
    times = np.array([0.5, 1.0, FIRST_POLE, FIRST_POLE + 5e-6, 2.75, 3.0])
    series = coefficient_series(periodic, times, n_jobs=1)

    assert series.poles[0] == pytest.approx(FIRST_POLE, abs=1e-10)
    assert PointFlag.POLE in series.flags[2]
    assert math.isnan(series.omega_drift[2])
    assert math.isnan(series.dq_total[2])
    assert PointFlag.NEAR_POLE in series.flags[3]
    assert "pole" in series.flag_strings()[2].split("|")
    # D_Q turns negative between the first zero of chi_q and the next zero of chi_v
    assert series.dq_total[4] < 0.0
    assert series.dq_total[5] < 0.0
    assert np.all(series.sigma_total >= 0.0)


@pytest.mark.parametrize("times", [[1.0, 0.5], [0.5, 0.5], [1e-4, 1.0], []])
def test_series_grid_validation(overdamped, times):
    with pytest.raises(DomainError):
        coefficient_series(overdamped, times, n_jobs=1)


def test_t_min_sensitivity_report(overdamped):
    report = t_min_sensitivity(overdamped)
    assert set(report) == {"dq_t_min", "dq_t_min_half", "t_min_relative_change"}
    assert all(math.isfinite(v) for v in report.values())
    assert report["dq_t_min"] > 0.0


def test_memo_table_keeps_first_value():
    memo = MemoTable(quantum=1e-12)
    assert memo.get(1.0) is None
    assert memo.put(1.0, 2.0 + 1j) == 2.0 + 1j
    assert memo.put(1.0 + 1e-14, 5.0) == 2.0 + 1j
    assert memo.get(1.0 + 1e-14) == 2.0 + 1j
    assert len(memo) == 1


def test_truncated_series_are_flagged():
    params = ModelParams(gamma=1.0, nu=3.0, series={"n_max": 10})
    series = coefficient_series(params, np.linspace(0.5, 1.0, 3), n_jobs=1)
    assert all(PointFlag.TRUNCATED in point for point in series.flags)
    assert "truncated" in series.flag_strings()[0].split("|")


def test_clamped_lags_are_flagged(overdamped):
    series = coefficient_series(overdamped, [0.002, 0.003, 2.0], n_jobs=1)
    assert PointFlag.CLAMPED in series.flags[0]
    assert two_time_sample(0.5, 0.5, overdamped).clamped


def test_failed_panel_marks_every_later_point(overdamped, monkeypatch):
    times = np.array([0.5, 1.0, 1.5, 2.0])
    real_panel = diffusion._sigma1_panel

    def failing_panel(a, b, params, memo=None):
        if b == 1.0:
            raise QBMError("panel failed")
        return real_panel(a, b, params, memo)

    monkeypatch.setattr(diffusion, "_sigma1_panel", failing_panel)
    series = coefficient_series(overdamped, times, n_jobs=1)

    assert PointFlag.ERROR not in series.flags[0]
    assert math.isfinite(series.sigma_total[0])
    for i in (1, 2, 3):
        assert PointFlag.ERROR in series.flags[i]
        assert math.isnan(series.sigma_total[i])


def test_series_shares_one_correlation_memo(overdamped, monkeypatch):
    tables = []

    class RecordingMemo(MemoTable):
        def __init__(self, *args, **kwargs):
            super().__init__(*args, **kwargs)
            tables.append(self)

    monkeypatch.setattr(diffusion, "MemoTable", RecordingMemo)
    coefficient_series(overdamped, np.linspace(0.5, 1.5, 3), n_jobs=2)
    assert len(tables) == 1
    assert len(tables[0]) > 0


def test_diffusion_spikes_next_to_every_zero_of_chi_q(periodic):
    spacing = 2.0 * math.pi / math.sqrt(3.0)
    zeros = [FIRST_POLE + k * spacing for k in range(3)]
    offset = 5.0 * POLE_GUARD_WIDTH
    times = np.unique(np.concatenate([np.linspace(0.5, 10.0, 20), [z + offset for z in zeros]]))
    series = coefficient_series(periodic, times, n_jobs=2)

    dq = series.dq_total
    assert np.all(np.isfinite(dq))
    median = np.median(np.abs(dq))
    for z in zeros:
        i = int(np.argmin(np.abs(times - (z + offset))))
        assert PointFlag.NEAR_POLE in series.flags[i]
        assert abs(dq[i]) >= 10.0 * median
    assert np.any(dq < 0.0)


@pytest.mark.parametrize("gamma", [2.0, 4.0])
def test_sigma_grows_without_oscillation(make_params, gamma):
    params = make_params(gamma)
    times = np.linspace(params.t_min, 10.0, 21)
    series = coefficient_series(params, times, n_jobs=2)
    assert np.all(series.sigma_total > 0.0)
    assert np.all(np.diff(series.sigma_total) > -1e-8)
