import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from backend.app.config import worker_count
from backend.app.correlations import ComplexSample, MemoTable
from backend.app.enums import PointFlag
from backend.app.exceptions import ConvergenceError, DomainError, QBMError
from backend.app.noise_corr import phi_phi_values, phi_q0_parts
from backend.app.numerics import adaptive_quad
from backend.app.params import ModelParams
from backend.app.susceptibility import drift_frequency, drift_frequency_array, find_chi_q_zeros, susceptibility_arrays

logger = logging.getLogger(__name__)

GRID_CHUNK = 16


@dataclass(frozen=True)
class Components:
    """Real and imaginary channels of a coefficient; total follows the sum rule."""
    re: float
    im: float

    @property
    def total(self) -> float:
        return self.re + self.im


@dataclass
class CoefficientSeries:
    times: np.ndarray
    omega_drift: np.ndarray
    sigma_re: np.ndarray
    sigma_im: np.ndarray
    d1_re: np.ndarray
    d1_im: np.ndarray
    dq_re: np.ndarray
    dq_im: np.ndarray
    poles: Tuple[float, ...] = ()
    pole_windows: List[Tuple[float, float]] = field(default_factory=list)
    flags: List[List[PointFlag]] = field(default_factory=list)

    @property
    def sigma_total(self) -> np.ndarray:
        return self.sigma_re + self.sigma_im

    @property
    def d1_total(self) -> np.ndarray:
        return self.d1_re + self.d1_im

    @property
    def dq_total(self) -> np.ndarray:
        return self.dq_re + self.dq_im

    def flag_strings(self) -> List[str]:
        return ["|".join(str(f) for f in point) for point in self.flags]

    def columns(self) -> Dict[str, np.ndarray]:
        return {
            "t": self.times,
            "omega_drift": self.omega_drift,
            "sigma_re": self.sigma_re,
            "sigma_im": self.sigma_im,
            "sigma_total": self.sigma_total,
            "d1_total": self.d1_total,
            "dq_total": self.dq_total,
        }


# --- D1 and sigma1 ---
@dataclass(frozen=True)
class D1Batch:
    """D1 on a batch of times with per-time clamp/truncation masks."""
    values: np.ndarray
    converged: bool
    est_error: float
    clamped: np.ndarray
    truncated: np.ndarray


def _d1_batch(t: np.ndarray, params: ModelParams, memo: Optional[MemoTable] = None) -> D1Batch:
    """D1 at every t in the batch; the inner integrals share one adaptive subdivision."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    t_min = params.t_min
    span = t - t_min
    chi_q = susceptibility_arrays(t, params.gamma)[0]
    local, truncated = phi_q0_parts(t, params, memo)
    clamped = np.zeros(t.shape, dtype=bool)

    if not np.any(span > 0):
        return D1Batch(2.0 * chi_q * local, True, 0.0, clamped, truncated)

    def integrand(u: np.ndarray) -> np.ndarray:
        nonlocal clamped, truncated
        s = t_min + u[:, None] * span[None, :]
        noise = phi_phi_values(np.broadcast_to(t, s.shape), s, params, memo)
        clamped = clamped | noise.clamped.any(axis=0)
        truncated = truncated | noise.truncated.any(axis=0)
        return noise.value * span[None, :]

    inner = adaptive_quad(integrand, 0.0, 1.0, params.quad)
    values = 2.0 * (np.asarray(inner.value) + chi_q * local)
    return D1Batch(values, inner.converged, inner.est_error, clamped, truncated)


def _check_t(t: float, params: ModelParams) -> float:
    t = float(t)
    if t < params.t_min:
        raise DomainError(f"t={t} is below t_min={params.t_min}")
    return t


def d1(t: float, params: ModelParams) -> ComplexSample:
    """D1(t) = 2 [ int_{t_min}^t <phi_v(t) phi_v(t')> dt' + chi_q(t) <phi_v(t) q0> ]."""
    t = _check_t(t, params)
    batch = _d1_batch(np.array([t]), params, MemoTable())
    if not batch.converged:
        raise ConvergenceError(f"D1 inner quadrature did not converge at t={t}", batch.est_error)
    value = complex(batch.values[0])
    return ComplexSample(value.real, value.imag)


@dataclass(frozen=True)
class Panel:
    """sigma1 increment over one grid panel."""
    value: complex
    converged: bool
    est_error: float
    truncated: bool = False


def _sigma1_panel(a: float, b: float, params: ModelParams, memo: Optional[MemoTable] = None) -> Panel:
    inner_ok, truncated = [True], [False]

    def outer(x: np.ndarray) -> np.ndarray:
        batch = _d1_batch(x, params, memo)
        inner_ok[0] = inner_ok[0] and batch.converged
        truncated[0] = truncated[0] or bool(batch.truncated.any())
        return batch.values

    result = adaptive_quad(outer, a, b, params.quad)
    return Panel(complex(result.value), result.converged and inner_ok[0], result.est_error, truncated[0])


def sigma1(t: float, params: ModelParams) -> ComplexSample:
    """sigma1(t) = int_{t_min}^t D1(t') dt'."""
    t = _check_t(t, params)
    panel = _sigma1_panel(params.t_min, t, params, MemoTable())
    if not panel.converged:
        raise ConvergenceError(f"sigma1 quadrature did not converge at t={t}", panel.est_error)
    return ComplexSample(panel.value.real, panel.value.imag)


def _combine(t: np.ndarray, s1: np.ndarray, d1v: np.ndarray, omega: np.ndarray, params: ModelParams):
    """sigma_Q and D_Q channels from sigma1, D1 and Omega on matching arrays."""
    temp = params.temperature
    _, chi_v, _, dchi_v = susceptibility_arrays(t, params.gamma)
    sigma_re = s1.real + temp * chi_v * chi_v
    # the imaginary channel is a signed integral; it enters the sum rule as a magnitude
    sigma_im = np.abs(s1.imag)
    dq_re = d1v.real + 2.0 * temp * chi_v * dchi_v - 2.0 * omega * sigma_re
    dq_im = np.sign(s1.imag) * d1v.imag - 2.0 * omega * sigma_im
    return sigma_re, sigma_im, dq_re, dq_im


def sigma_q(t: float, params: ModelParams) -> Components:
    """sigma_Q(t) = sigma1(t) + T chi_v(t)^2, per channel."""
    t = _check_t(t, params)
    s1 = sigma1(t, params)
    tt = np.array([t])
    s1c = np.array([complex(s1.re, s1.im)])
    sigma_re, sigma_im, _, _ = _combine(tt, s1c, np.zeros(1, dtype=complex), np.zeros(1), params)
    return Components(float(sigma_re[0]), float(sigma_im[0]))


def d_q(t: float, params: ModelParams) -> Components:
    """D_Q(t) = dsigma_Q/dt - 2 sigma_Q Omega with dsigma_Q/dt = D1 + 2 T chi_v dchi_v."""
    t = _check_t(t, params)
    omega = drift_frequency(t, params)
    s1, dv = sigma1(t, params), d1(t, params)
    _, _, dq_re, dq_im = _combine(
        np.array([t]),
        np.array([complex(s1.re, s1.im)]),
        np.array([complex(dv.re, dv.im)]),
        np.array([omega]),
        params,
    )
    return Components(float(dq_re[0]), float(dq_im[0]))


def t_min_sensitivity(params: ModelParams) -> Dict[str, float]:
    """D_Q at t_min and at t_min/2 (same parameters otherwise)."""
    halved = params.model_copy(update={"quad": params.quad.model_copy(update={"t_min": params.t_min / 2.0})})
    base = d_q(params.t_min, params).total
    half = d_q(halved.t_min, halved).total
    change = abs(base - half) / abs(base) if base != 0 else float("inf")
    return {"dq_t_min": base, "dq_t_min_half": half, "t_min_relative_change": change}


# --- Batch evaluation ---
def _d1_chunk(chunk: np.ndarray, params: ModelParams, memo: MemoTable) -> Tuple[D1Batch, Optional[str]]:
    try:
        return _d1_batch(chunk, params, memo), None
    except QBMError as exc:
        blank = np.zeros(chunk.shape, dtype=bool)
        return D1Batch(np.full(chunk.shape, np.nan + 1j * np.nan), False, np.inf, blank, blank), str(exc)


def _panel_task(a: float, b: float, params: ModelParams, memo: MemoTable) -> Tuple[Panel, Optional[str]]:
    try:
        return _sigma1_panel(a, b, params, memo), None
    except QBMError as exc:
        return Panel(complex(np.nan, np.nan), False, np.inf), str(exc)


def coefficient_series(params: ModelParams, t_grid, n_jobs: Optional[int] = None) -> CoefficientSeries:
    """
    Omega, sigma_Q, D1 and D_Q on an ascending grid (all points >= t_min).

    sigma1 is accumulated over consecutive grid panels; panel integrals and
    grid-point D1 values are computed in fixed chunks on a thread pool that
    shares one memo of the correlation derivatives, so the result does not
    depend on the worker count.

    Flags per point: CLAMPED when the D1 integrand at that time met
    |t - s| < t_min; TRUNCATED when a series behind D1 there, or behind any
    sigma1 panel up to it, stopped at n_max; ERROR from a failed panel
    carries to every later point since sigma1 accumulates.
    """
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise DomainError("t_grid must be a non-empty 1-D sequence")
    if np.any(np.diff(times) <= 0):
        raise DomainError("t_grid must be strictly ascending")
    if times[0] < params.t_min:
        raise DomainError(f"t_grid starts below t_min={params.t_min}")

    n_jobs = n_jobs or worker_count()
    poles = find_chi_q_zeros(params, float(times[-1]))
    flags: List[List[PointFlag]] = [[] for _ in times]
    logger.info(f"Coefficient series: gamma={params.gamma}, {times.size} points, {len(poles.times)} poles, {n_jobs} workers")

    memo = MemoTable()
    chunks = [times[i:i + GRID_CHUNK] for i in range(0, times.size, GRID_CHUNK)]
    edges = np.concatenate([[params.t_min], times])
    with Parallel(n_jobs=n_jobs, prefer="threads") as pool:
        d1_parts = pool(delayed(_d1_chunk)(c, params, memo) for c in chunks)
        panels = pool(delayed(_panel_task)(float(a), float(b), params, memo) for a, b in zip(edges[:-1], edges[1:]))
    logger.debug(f"Correlation memo holds {len(memo)} times")

    d1v = np.concatenate([batch.values for batch, _ in d1_parts])
    clamped = np.concatenate([batch.clamped for batch, _ in d1_parts])
    d1_truncated = np.concatenate([batch.truncated for batch, _ in d1_parts])
    offset = 0
    for (batch, error), chunk in zip(d1_parts, chunks):
        for i in range(offset, offset + chunk.size):
            if error:
                flags[i].append(PointFlag.ERROR)
            elif not batch.converged:
                flags[i].append(PointFlag.NONCONVERGED)
        if error:
            logger.error(f"D1 failed on chunk starting at t={chunk[0]:.6g}: {error}")
        offset += chunk.size

    panel_failed = np.zeros(times.size, dtype=bool)
    for i, (panel, error) in enumerate(panels):
        if error:
            panel_failed[i] = True
            logger.error(f"sigma1 panel ending at t={times[i]:.6g} failed: {error}")
        elif not panel.converged and PointFlag.NONCONVERGED not in flags[i]:
            flags[i].append(PointFlag.NONCONVERGED)
    s1 = np.cumsum([panel.value for panel, _ in panels])
    failed = np.logical_or.accumulate(panel_failed)
    truncated = d1_truncated | np.logical_or.accumulate([panel.truncated for panel, _ in panels])
    if failed.any():
        logger.error(f"sigma_Q and D_Q undefined from t={times[np.argmax(failed)]:.6g} on")

    omega = drift_frequency_array(times, params.gamma)
    sigma_re, sigma_im, dq_re, dq_im = _combine(times, s1, d1v, omega, params)

    for i, t in enumerate(times):
        if failed[i] and PointFlag.ERROR not in flags[i]:
            flags[i].append(PointFlag.ERROR)
        if truncated[i]:
            flags[i].append(PointFlag.TRUNCATED)
        if clamped[i]:
            flags[i].append(PointFlag.CLAMPED)
        near = poles.flag(float(t))
        if near is not None:
            flags[i].append(near)
        if near is PointFlag.POLE:
            omega[i] = dq_re[i] = dq_im[i] = np.nan

    if truncated.any():
        logger.warning(f"{int(truncated.sum())} of {times.size} points rest on series truncated at n_max={params.series.n_max}")
    return CoefficientSeries(
        times=times,
        omega_drift=omega,
        sigma_re=sigma_re,
        sigma_im=sigma_im,
        d1_re=d1v.real.copy(),
        d1_im=d1v.imag.copy(),
        dq_re=dq_re,
        dq_im=dq_im,
        poles=poles.times,
        pole_windows=poles.windows(),
        flags=flags,
    )
