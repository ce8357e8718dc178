import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from backend.app.config import NEAR_POLE_FACTOR, POLE_GUARD_WIDTH, SERIES_Z_CUTOFF
from backend.app.enums import PointFlag, RegimeKind
from backend.app.exceptions import DomainError, PoleError
from backend.app.numerics import bracket_root
from backend.app.params import Regime, classify_regime

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SusceptibilityValue:
    chi_q: float
    chi_v: float
    dchi_q: float
    dchi_v: float


@dataclass(frozen=True)
class PoleList:
    """Zeros of chi_q in (0, t_max]; Omega(t) diverges inside each guard window."""
    times: Tuple[float, ...]
    guard_width: float = POLE_GUARD_WIDTH

    def windows(self) -> List[Tuple[float, float]]:
        return [(p - self.guard_width, p + self.guard_width) for p in self.times]

    def nearest(self, t: float) -> Tuple[float, float]:
        """(pole time, distance) of the closest pole; (nan, inf) when there are none."""
        if not self.times:
            return math.nan, math.inf
        arr = np.asarray(self.times)
        i = int(np.argmin(np.abs(arr - t)))
        return float(arr[i]), float(abs(arr[i] - t))

    def contains(self, t: float) -> bool:
        return self.nearest(t)[1] < self.guard_width

    def flag(self, t: float) -> Optional[PointFlag]:
        """POLE inside a guard window, NEAR_POLE within NEAR_POLE_FACTOR guard widths."""
        distance = self.nearest(t)[1]
        if distance < self.guard_width:
            return PointFlag.POLE
        if distance < NEAR_POLE_FACTOR * self.guard_width:
            return PointFlag.NEAR_POLE
        return None


def _check_time(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(~np.isfinite(arr)):
        raise DomainError("susceptibilities are defined for finite t >= 0")
    return arr


def susceptibility_arrays(t, gamma: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised (chi_q, chi_v, dchi_q, dchi_v) for scaled time t >= 0."""
    regime = classify_regime(gamma)
    t = _check_time(t)
    half = 0.5 * gamma
    decay = np.exp(-half * t)
    z = 0.25 * regime.omega_sq * t * t

    # Taylor forms in z = omega^2 t^2 / 4; exact at critical damping, used near t = 0 everywhere
    c_series = decay * (1.0 + z * (1.0 / 2.0 + z * (1.0 / 24.0 + z / 720.0)))
    v_series = t * decay * (1.0 + z * (1.0 / 6.0 + z * (1.0 / 120.0 + z / 5040.0)))

    if regime.kind is RegimeKind.APERIODIC:
        c, v = c_series, v_series
    else:
        w = regime.omega_tilde
        if regime.kind is RegimeKind.PERIODIC:
            c_closed = decay * np.cos(0.5 * w * t)
            v_closed = (2.0 / w) * decay * np.sin(0.5 * w * t)
        else:
            lam2 = 2.0 / (gamma + w)
            e2 = np.exp(-lam2 * t)
            c_closed = 0.5 * e2 * (1.0 + np.exp(-w * t))
            v_closed = -e2 * np.expm1(-w * t) / w
        small = np.abs(z) < SERIES_Z_CUTOFF
        c = np.where(small, c_series, c_closed)
        v = np.where(small, v_series, v_closed)

    chi_q = c + half * v
    chi_v = v
    return chi_q, chi_v, -v, chi_q - gamma * v


def second_derivatives(chi_v: np.ndarray, dchi_v: np.ndarray, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    """(d2chi_q, d2chi_v) from the homogeneous equation of motion."""
    return -dchi_v, -chi_v - gamma * dchi_v


def eval_susceptibility(t: float, params) -> SusceptibilityValue:
    chi_q, chi_v, dchi_q, dchi_v = susceptibility_arrays(float(t), params.gamma)
    return SusceptibilityValue(float(chi_q), float(chi_v), float(dchi_q), float(dchi_v))


def mean_trajectory(t, q0: float, v0: float, params) -> Tuple[np.ndarray, np.ndarray]:
    """Mean position and velocity from the initial means (q0, v0)."""
    chi_q, chi_v, dchi_q, dchi_v = susceptibility_arrays(t, params.gamma)
    return chi_q * q0 + chi_v * v0, dchi_q * q0 + dchi_v * v0


# --- Drift frequency ---
def drift_frequency_array(t, gamma: float) -> np.ndarray:
    """
    Omega(t) = dchi_q/chi_q for an array of times, with no pole checking.
    Uses forms in which the common exponential factor has cancelled so large t
    neither underflows nor produces 0/0.
    """
    regime = classify_regime(gamma)
    t = _check_time(t)
    half = 0.5 * gamma
    z = 0.25 * regime.omega_sq * t * t
    c_s = 1.0 + z * (1.0 / 2.0 + z * (1.0 / 24.0 + z / 720.0))
    v_s = t * (1.0 + z * (1.0 / 6.0 + z * (1.0 / 120.0 + z / 5040.0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        series = -v_s / (c_s + half * v_s)
        if regime.kind is RegimeKind.APERIODIC:
            return series
        w = regime.omega_tilde
        if regime.kind is RegimeKind.PERIODIC:
            s, c = np.sin(0.5 * w * t), np.cos(0.5 * w * t)
            closed = -2.0 * s / (gamma * s + w * c)
        else:
            th = np.tanh(0.5 * w * t)
            closed = -2.0 * th / (gamma * th + w)
    return np.where(np.abs(z) < SERIES_Z_CUTOFF, series, closed)


def _first_zero_phase(regime: Regime) -> float:
    # chi_q = 0  <=>  tan(w t / 2) = -w / gamma, first branch
    return math.pi - math.atan(regime.omega_tilde / regime.gamma)


def nearest_pole(t: float, gamma: float) -> Tuple[float, float]:
    """Closest zero of chi_q from the closed-form zero condition; (nan, inf) if none."""
    regime = classify_regime(gamma)
    if regime.kind is not RegimeKind.PERIODIC:
        return math.nan, math.inf
    w = regime.omega_tilde
    phase0 = _first_zero_phase(regime)
    k = max(0, round((0.5 * w * t - phase0) / math.pi))
    pole = 2.0 * (phase0 + k * math.pi) / w
    return pole, abs(pole - t)


def drift_frequency(t: float, params, guard_width: float = POLE_GUARD_WIDTH) -> float:
    pole, distance = nearest_pole(float(t), params.gamma)
    if distance < guard_width:
        raise PoleError(pole, float(t))
    return float(drift_frequency_array(float(t), params.gamma))


def find_chi_q_zeros(params, t_max: float, guard_width: float = POLE_GUARD_WIDTH) -> PoleList:
    """
    Zeros of chi_q on (0, t_max]. Consecutive zeros are 2 pi / w apart, starting
    from the first; each is refined with Brent on the oscillating factor
    cos(w t / 2) + (gamma / w) sin(w t / 2), which carries no decaying exponential.
    """
    regime = classify_regime(params.gamma)
    if regime.kind is not RegimeKind.PERIODIC or t_max <= 0:
        return PoleList((), guard_width)

    w, gamma = regime.omega_tilde, params.gamma
    spacing = 2.0 * math.pi / w
    first = 2.0 * _first_zero_phase(regime) / w

    def oscillating(x: float) -> float:
        return math.cos(0.5 * w * x) + (gamma / w) * math.sin(0.5 * w * x)

    zeros = []
    for k in range(int(math.floor((t_max - first) / spacing)) + 1):
        guess = first + k * spacing
        bracket = 0.25 * spacing
        zero = bracket_root(oscillating, guess - bracket, guess + bracket)
        if zero <= t_max:
            zeros.append(zero)
    logger.debug(f"{len(zeros)} chi_q zeros for gamma={gamma} on (0, {t_max}]")
    return PoleList(tuple(zeros), guard_width)
