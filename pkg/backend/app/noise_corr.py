import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from backend.app.correlations import ComplexSample, MemoTable, derivative_blocks, dispersions
from backend.app.exceptions import DomainError
from backend.app.params import ModelParams
from backend.app.susceptibility import susceptibility_arrays

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TwoTimeSample:
    t: float
    s: float
    value: ComplexSample
    clamped: bool = False
    truncated: bool = False


class NoiseValues(NamedTuple):
    value: np.ndarray
    clamped: np.ndarray      # |t - s| was raised to t_min
    truncated: np.ndarray    # a Matsubara or dispersion sum stopped at n_max


def phi_phi_values(t, s, params: ModelParams, memo: Optional[MemoTable] = None) -> NoiseValues:
    """
    <phi_v(t) phi_v(s)> on broadcast arrays of (t, s), as a complex array, with
    the clamp and truncation masks.

    phi_v(t) = v(t) - dchi_q(t) q0 - dchi_v(t) v0, expanded into nine
    equilibrium correlations; <v(t) v(s)> is taken as <v(t-s) v0>, whose
    imaginary part is odd in t - s.
    """
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    t_min = params.t_min
    if np.any(t < t_min) or np.any(s < t_min):
        raise DomainError(f"phi_phi needs t, s >= t_min={t_min}")

    tau = t - s
    lag = np.abs(tau)
    clamped = lag < t_min
    lag = np.maximum(lag, t_min)
    sign = np.where(tau >= 0, 1.0, -1.0)

    # one evaluation over the lags, the t values and the s values together
    n = t.size
    vq, vv, trunc = derivative_blocks(np.concatenate([lag.ravel(), t.ravel(), s.ravel()]), params, memo)
    shape = t.shape
    vv_lag = (vv[:n].real + 1j * sign.ravel() * vv[:n].imag).reshape(shape)
    vv_t, vv_s = vv[n:2 * n].reshape(shape), vv[2 * n:].reshape(shape)
    vq_t, vq_s = vq[n:2 * n].reshape(shape), vq[2 * n:].reshape(shape)

    _, _, dq_t, dv_t = susceptibility_arrays(t, params.gamma)
    _, _, dq_s, dv_s = susceptibility_arrays(s, params.gamma)
    disp = dispersions(params)
    v0q0 = disp.v0q0.re + 1j * disp.v0q0.im

    value = (
        vv_lag
        - dv_s * vv_t
        - dv_t * vv_s
        - dq_s * vq_t
        - dq_t * vq_s
        + dv_t * dv_s * disp.v0_sq
        + (dv_t * dq_s + dq_t * dv_s) * v0q0
        + dq_t * dq_s * disp.q0_sq
    )
    truncated = (trunc[:n] | trunc[n:2 * n] | trunc[2 * n:]).reshape(shape) | disp.truncated
    return NoiseValues(value, clamped, truncated)


def phi_phi(t: float, s: float, params: ModelParams) -> ComplexSample:
    values = phi_phi_values(float(t), float(s), params)
    if values.clamped.any():
        logger.debug(f"phi_phi({t}, {s}): |t - s| clamped to t_min={params.t_min}")
    v = complex(values.value.ravel()[0])
    return ComplexSample(v.real, v.imag)


def two_time_sample(t: float, s: float, params: ModelParams) -> TwoTimeSample:
    values = phi_phi_values(float(t), float(s), params)
    v = complex(values.value.ravel()[0])
    return TwoTimeSample(
        float(t), float(s), ComplexSample(v.real, v.imag), bool(values.clamped.any()), bool(values.truncated.any())
    )


def phi_q0_parts(t, params: ModelParams, memo: Optional[MemoTable] = None) -> Tuple[np.ndarray, np.ndarray]:
    """<phi_v(t) q0> = <v(t) q0> - dchi_v(t) <v0 q0> - dchi_q(t) <q0^2>, with its truncation mask."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < params.t_min):
        raise DomainError(f"phi_q0 needs t >= t_min={params.t_min}")
    vq, _, trunc = derivative_blocks(t, params, memo)
    _, _, dq, dv = susceptibility_arrays(t, params.gamma)
    disp = dispersions(params)
    v0q0 = disp.v0q0.re + 1j * disp.v0q0.im
    return vq.reshape(t.shape) - dv * v0q0 - dq * disp.q0_sq, trunc.reshape(t.shape) | disp.truncated


def phi_q0_values(t, params: ModelParams) -> np.ndarray:
    return phi_q0_parts(t, params)[0]


def phi_q0(t: float, params: ModelParams) -> ComplexSample:
    v = complex(phi_q0_values(float(t), params)[0])
    return ComplexSample(v.real, v.imag)
