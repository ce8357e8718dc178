import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple, Union

import numpy as np

from backend.app.enums import PointFlag, RegimeKind
from backend.app.exceptions import DomainError
from backend.app.oup_sim import DriftDiffusion
from backend.app.params import ClassicalParams, ModelParams, classify_regime
from backend.app.susceptibility import drift_frequency_array, find_chi_q_zeros, susceptibility_arrays

logger = logging.getLogger(__name__)

AnyParams = Union[ClassicalParams, ModelParams]

# gamma * t below this uses the Taylor form of 1 - chi_q
_SMALL_GT = 1e-2


@dataclass
class ClassicalCoefficients:
    """White-noise coefficients sampled on a grid."""
    times: np.ndarray
    omega_drift: np.ndarray
    d_clas: np.ndarray
    sigma_clas: np.ndarray
    poles: Tuple[float, ...] = ()
    pole_windows: List[Tuple[float, float]] = field(default_factory=list)
    flags: List[List[PointFlag]] = field(default_factory=list)

    def flag_strings(self) -> List[str]:
        return ["|".join(str(f) for f in point) for point in self.flags]

    def columns(self) -> Dict[str, object]:
        return {"t": self.times, "d_clas": self.d_clas, "sigma_clas": self.sigma_clas, "flags": self.flag_strings()}


def _nonnegative(t, what: str) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise DomainError(f"{what} is defined for t >= 0")
    return arr


def phi_phi_clas_array(t, s, params: AnyParams) -> np.ndarray:
    """
    Classical noise correlation <phi_v(t) phi_v(s)> for white bath noise:

        T [dchi_v(|t - s|) - dchi_v(t) dchi_v(s) - dchi_q(t) dchi_q(s)]

    which equals 2 gamma T int_0^min(t,s) dchi_v(t - x) dchi_v(s - x) dx.
    """
    t = _nonnegative(t, "phi_phi_clas")
    s = _nonnegative(s, "phi_phi_clas")
    t, s = np.broadcast_arrays(t, s)
    _, _, dq_lag, dv_lag = susceptibility_arrays(np.abs(t - s), params.gamma)
    _, _, dq_t, dv_t = susceptibility_arrays(t, params.gamma)
    _, _, dq_s, dv_s = susceptibility_arrays(s, params.gamma)
    return params.temperature * (dv_lag - dv_t * dv_s - dq_t * dq_s)


def phi_phi_clas(t: float, s: float, params: AnyParams) -> float:
    return float(phi_phi_clas_array(float(t), float(s), params))


def d_clas_array(t, params: AnyParams) -> np.ndarray:
    """D_clas = 4T / (gamma + omega coth(omega t / 2)); zero at t = 0, not pole-checked."""
    t = _nonnegative(t, "d_clas")
    # D_clas = -2 T Omega for white noise; Omega is already in cancelled form
    return -2.0 * params.temperature * drift_frequency_array(t, params.gamma)


def d_clas(t: float, params: AnyParams) -> float:
    t = float(t)
    if not t > 0:
        raise DomainError(f"d_clas needs t > 0, got {t}")
    value = float(d_clas_array(t, params))
    if not np.isfinite(value):
        logger.warning(f"d_clas is not finite at t={t} (gamma={params.gamma})")
    return value


def _one_minus_chi_q(t: np.ndarray, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    chi_q = susceptibility_arrays(t, gamma)[0]
    # 1 - chi_q = t^2/2 - g t^3/6 - (1 - g^2) t^4/24 - (g^3 - 2g) t^5/120 + ...
    taylor = t * t * (0.5 + t * (-gamma / 6.0 + t * (-(1.0 - gamma * gamma) / 24.0
                                                     - t * (gamma ** 3 - 2.0 * gamma) / 120.0)))
    small = gamma * t < _SMALL_GT
    small &= t < _SMALL_GT
    return np.where(small, taylor, 1.0 - chi_q), chi_q


def sigma_clas_array(t, params: AnyParams) -> np.ndarray:
    """
    sigma_clas = T [1 - e^{-gamma t}((gamma^2 - 2) cosh(omega t) + gamma omega sinh(omega t) - 2) / omega^2],
    evaluated as T (1 - chi_q)(1 + chi_q) so every regime shares one stable form.
    """
    t = _nonnegative(t, "sigma_clas")
    classify_regime(params.gamma)
    one_minus, chi_q = _one_minus_chi_q(t, params.gamma)
    return params.temperature * one_minus * (1.0 + chi_q)


def sigma_clas(t: float, params: AnyParams) -> float:
    return float(sigma_clas_array(float(t), params))


def sigma_clas_rate(t, params: AnyParams) -> np.ndarray:
    """Analytic time derivative of sigma_clas: 2 T chi_q chi_v."""
    t = _nonnegative(t, "sigma_clas_rate")
    chi_q, chi_v, _, _ = susceptibility_arrays(t, params.gamma)
    return 2.0 * params.temperature * chi_q * chi_v


def classical_series(params: AnyParams, times) -> ClassicalCoefficients:
    """Coefficients on times; values next to a zero of chi_q are kept and flagged."""
    times = np.atleast_1d(_nonnegative(times, "classical_series"))
    regime = classify_regime(params.gamma)
    omega = drift_frequency_array(times, params.gamma)
    poles = find_chi_q_zeros(params, float(times.max()))
    flags: List[List[PointFlag]] = []
    for t in times:
        near = poles.flag(float(t))
        flags.append([near] if near is not None else [])
    coeffs = ClassicalCoefficients(
        times=times,
        omega_drift=omega,
        d_clas=-2.0 * params.temperature * omega,
        sigma_clas=sigma_clas_array(times, params),
        poles=poles.times,
        pole_windows=poles.windows(),
        flags=flags,
    )
    if any(flags):
        logger.info(f"{sum(1 for f in flags if f)} classical points lie next to a zero of chi_q (gamma={params.gamma})")
    if regime.kind is RegimeKind.PERIODIC and np.any(coeffs.d_clas < 0):
        logger.info(f"D_clas is negative on part of the grid for gamma={params.gamma}")
    return coeffs


def drift_series(params: AnyParams, times) -> DriftDiffusion:
    """(Omega, D_clas) sampled on times, as Monte Carlo / variance ODE input."""
    coeffs = classical_series(params, times)
    return DriftDiffusion(
        times=coeffs.times,
        omega=coeffs.omega_drift,
        diffusion=coeffs.d_clas,
        pole_windows=tuple(coeffs.pole_windows),
    )
