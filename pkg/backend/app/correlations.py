"""
Equilibrium correlations of the scaled quantum oscillator in an Ohmic bath.

The position correlation <q(t) q0> = S(t) + i A(t) is evaluated as

    S(t) = T chi_q(t) + R(t) - Gamma(t)
    A(t) = -(pi T / nu) chi_v(t)

where R collects the quantum part of the cot(pi lambda / nu) residues
(cot x - 1/x, so that the classical T chi_q is exact and R = O(nu^-2)) and
Gamma is the Matsubara-pole residue sum. Derivatives are analytic.
"""
import logging
import math
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np

from backend.app.config import APERIODIC_OMEGA_SQ, MEMO_QUANTUM, RESONANCE_SHIFT, RESONANCE_TOL
from backend.app.enums import MatsubaraKernel, RegimeKind
from backend.app.exceptions import DivergenceError, DomainError
from backend.app.numerics import SeriesResult, cot_remainder, cot_remainder_prime, sum_with_tail
from backend.app.params import ModelParams, classify_regime
from backend.app.susceptibility import susceptibility_arrays

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ComplexSample:
    re: float
    im: float


@dataclass(frozen=True)
class Dispersions:
    q0_sq: float
    v0_sq: float
    v0q0: ComplexSample
    truncated: bool = False


# --- Matsubara sums ---
def _matsubara_tail(t: np.ndarray, params: ModelParams, order: int, kernel: MatsubaraKernel):
    gamma, temp, nu = params.gamma, params.temperature, params.nu
    pref = 2.0 * gamma * temp

    def tail(n: float) -> np.ndarray:
        x = nu * n
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            decay = np.where(t > 0, np.exp(-x * t) / (nu * t), np.inf)
            if kernel is MatsubaraKernel.POSITION:
                if x < 2.0 * max(gamma, 1.0):
                    return np.full(t.shape, np.inf)
                # |term| <= 4 gamma T x^(order-3) exp(-x t) once x >= 2 gamma
                bound = 2.0 * pref * x ** (order - 3) * decay
                if order <= 1:
                    bound = np.minimum(bound, 2.0 * pref * x ** (order - 2) / (nu * (2 - order)))
                return bound
            # |term| <= 2 gamma T x^(order-1) exp(-x t)
            return pref * x ** (order - 1) * decay

    return tail


def matsubara_sum(t, params: ModelParams, order: int, kernel: MatsubaraKernel) -> SeriesResult:
    """
    Vectorised sum over n >= 1 of 2 gamma T (-nu_n)^order nu_n exp(-nu_n t) / den_n.

    POSITION: den_n = (nu_n^2 + 1)^2 - gamma^2 nu_n^2, the Matsubara residues of <q q0>.
    NOISE:    den_n = (nu_n + lambda1)(nu_n + lambda2) = nu_n^2 + gamma nu_n + 1.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    gamma, temp, nu = params.gamma, params.temperature, params.nu
    pref = 2.0 * gamma * temp
    if t.size and float(np.min(t)) * nu > 745.0:
        # exp(-nu t) underflows for every term
        return SeriesResult(np.zeros_like(t), 0, 0.0, False)

    def term(n: np.ndarray) -> np.ndarray:
        x = nu * n
        if kernel is MatsubaraKernel.POSITION:
            den = (x * x - gamma * x + 1.0) * (x * x + gamma * x + 1.0)
        else:
            den = x * x + gamma * x + 1.0
        weight = pref * (-x) ** order * x / den
        return weight[None, :] * np.exp(-t[:, None] * x[None, :])

    result = sum_with_tail(term, _matsubara_tail(t, params, order, kernel), params.series, scale=temp)
    if result.truncated:
        logger.warning(f"Matsubara {kernel.value} sum (order {order}) truncated at n={result.n_used}")
    return result


def _gamma_values(t: np.ndarray, params: ModelParams, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gamma^(order) on t and the mask of times whose sum stopped at n_max."""
    if order == 2 and np.any(t <= 0):
        raise DivergenceError("second derivative of the Matsubara sum diverges at t = 0")
    result = matsubara_sum(t, params, order, MatsubaraKernel.POSITION)
    return np.atleast_1d(result.value), result.row_mask(t.size)


def gamma_sum(t: float, params: ModelParams, order: int = 0) -> float:
    """Gamma(t) and its first two time derivatives."""
    if order not in (0, 1, 2):
        raise DomainError(f"gamma_sum order must be 0, 1 or 2, got {order}")
    if t < 0:
        raise DomainError(f"gamma_sum needs t >= 0, got {t}")
    return float(_gamma_values(np.array([float(t)]), params, order)[0][0])


def resonance_offset(params: ModelParams) -> float:
    """
    Distance of lambda1/nu or lambda2/nu from the nearest positive integer
    (inf outside the overdamped regime). Near zero a Matsubara frequency
    coincides with a decay rate: Gamma and R diverge there with opposite
    signs while S stays finite.
    """
    regime = classify_regime(params.gamma)
    if regime.kind is not RegimeKind.OVERDAMPED:
        return math.inf
    offsets = []
    for lam in regime.lambdas:
        k = round(lam.real / params.nu)
        if k >= 1:
            offsets.append(abs(lam.real / params.nu - k))
    return min(offsets, default=math.inf)


# --- Quantum remainder of the cot residues ---
def _remainder(t: np.ndarray, params: ModelParams, order: int) -> np.ndarray:
    """
    R^(order)(t) = (pi T / nu) [h(lambda2) - h(lambda1)] / (lambda1 - lambda2),
    h(lambda) = (-lambda)^order r(pi lambda / nu) exp(-lambda t), r(x) = cot x - 1/x.
    """
    regime = classify_regime(params.gamma)
    a = math.pi / params.nu
    pref = math.pi * params.temperature / params.nu

    if abs(regime.omega_sq) < APERIODIC_OMEGA_SQ:
        # lambda1 -> lambda2: minus the lambda-derivative of h
        lam = 0.5 * params.gamma
        p = (-lam) ** order
        dp = -order * (-lam) ** (order - 1) if order else 0.0
        r, dr = cot_remainder(a * lam), cot_remainder_prime(a * lam)
        decay = np.exp(-lam * t)
        return -pref * decay * (dp * r + p * a * dr - t * p * r)

    lam1, lam2 = regime.lambdas

    def h(lam: complex) -> np.ndarray:
        return (-lam) ** order * cot_remainder(a * lam) * np.exp(-lam * t)

    value = pref * (h(lam2) - h(lam1)) / (lam1 - lam2)
    return np.real(value)


def _quantum_parts(t: np.ndarray, params: ModelParams, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """R^(order) - Gamma^(order) and the truncation mask."""
    gamma_part, truncated = _gamma_values(t, params, order)
    return _remainder(t, params, order) - gamma_part, truncated


def _resonant_parts(t: np.ndarray, params: ModelParams, order: int) -> Tuple[np.ndarray, np.ndarray]:
    # S is smooth in nu across the resonance; average evaluations at nu (1 -+ RESONANCE_SHIFT)
    logger.debug(f"nu={params.nu} resonates with a decay rate of gamma={params.gamma}; averaging shifted nu")
    low = params.model_copy(update={"nu": params.nu * (1.0 - RESONANCE_SHIFT)})
    high = params.model_copy(update={"nu": params.nu * (1.0 + RESONANCE_SHIFT)})
    (q_low, tr_low), (q_high, tr_high) = _quantum_parts(t, low, order), _quantum_parts(t, high, order)
    return 0.5 * (q_low + q_high), tr_low | tr_high


def correlation_parts(t, params: ModelParams, order: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(d^k S/dt^k, d^k A/dt^k, truncated) for k = order on an array of times."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise DomainError("correlations are evaluated for t >= 0")
    chi_q, chi_v, dchi_q, dchi_v = susceptibility_arrays(t, params.gamma)
    temp = params.temperature
    hbar_half = math.pi * temp / params.nu

    if order == 0:
        classical, a_part = temp * chi_q, chi_v
    elif order == 1:
        classical, a_part = temp * dchi_q, dchi_v
    else:
        classical, a_part = -temp * dchi_v, -chi_v - params.gamma * dchi_v

    if resonance_offset(params) < RESONANCE_TOL:
        quantum, truncated = _resonant_parts(t, params, order)
    else:
        quantum, truncated = _quantum_parts(t, params, order)
    return classical + quantum, -hbar_half * a_part, truncated


def correlation_arrays(t, params: ModelParams, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """(d^k S/dt^k, d^k A/dt^k) for k = order on an array of times."""
    s, a, _ = correlation_parts(t, params, order)
    return s, a


def position_correlation(t: float, params: ModelParams) -> ComplexSample:
    s, a = correlation_arrays(float(t), params, 0)
    return ComplexSample(float(s[0]), float(a[0]))


def velocity_position_correlation(t: float, params: ModelParams) -> ComplexSample:
    """<v(t) q0> = d/dt <q(t) q0>; finite down to t = 0."""
    s, a = correlation_arrays(float(t), params, 1)
    return ComplexSample(float(s[0]), float(a[0]))


def velocity_correlation_arrays(t, params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < params.t_min):
        raise DomainError(f"<v(t) v0> is evaluated for t >= t_min={params.t_min}")
    s2, a2 = correlation_arrays(t, params, 2)
    return -s2, -a2


# --- Memoised derivative blocks ---
class MemoTable:
    """Time-keyed cache: lock-free reads, inserts serialised under a lock (first writer wins)."""

    def __init__(self, quantum: float = MEMO_QUANTUM):
        self.quantum = quantum
        self._data: Dict[int, object] = {}
        self._lock = threading.Lock()

    def key(self, t: float) -> int:
        return int(round(t / self.quantum))

    def get(self, t: float) -> Optional[object]:
        return self._data.get(self.key(t))

    def put(self, t: float, value):
        with self._lock:
            return self._data.setdefault(self.key(t), value)

    def __len__(self) -> int:
        return len(self._data)


def _derivative_blocks(t: np.ndarray, params: ModelParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    s1, a1, tr1 = correlation_parts(t, params, 1)
    s2, a2, tr2 = correlation_parts(t, params, 2)
    return s1 + 1j * a1, -(s2 + 1j * a2), tr1 | tr2


def derivative_blocks(t, params: ModelParams, memo: Optional[MemoTable] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    (<v(t) q0>, <v(t) v0>, truncated) on a flat array of times >= t_min.

    With a memo the blocks are evaluated at the quantised time and cached, so
    every caller sees the same value for a key whichever thread inserted it.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
    if np.any(t < params.t_min):
        raise DomainError(f"<v(t) v0> is evaluated for t >= t_min={params.t_min}")
    if memo is None:
        return _derivative_blocks(t, params)

    keys, inverse = np.unique(np.round(t / memo.quantum).astype(np.int64), return_inverse=True)
    times = np.maximum(keys * memo.quantum, params.t_min)
    entries = [memo.get(x) for x in times]
    missing = [i for i, entry in enumerate(entries) if entry is None]
    if missing:
        vq, vv, truncated = _derivative_blocks(times[missing], params)
        for j, i in enumerate(missing):
            entries[i] = memo.put(float(times[i]), (complex(vq[j]), complex(vv[j]), bool(truncated[j])))

    vq = np.array([e[0] for e in entries], dtype=complex)
    vv = np.array([e[1] for e in entries], dtype=complex)
    truncated = np.array([e[2] for e in entries], dtype=bool)
    return vq[inverse], vv[inverse], truncated[inverse]


def velocity_correlation(t: float, params: ModelParams) -> ComplexSample:
    """<v(t) v0> = -d^2/dt^2 <q(t) q0>, for t >= t_min."""
    re, im = velocity_correlation_arrays(float(t), params)
    return ComplexSample(float(re[0]), float(im[0]))


# --- Dispersions ---
@lru_cache(maxsize=64)
def dispersions(params: ModelParams) -> Dispersions:
    """<q0^2>, <v0^2> (Drude-regularised) and <v0 q0>, each including the n = 0 term T."""
    gamma, temp, nu, wd = params.gamma, params.temperature, params.nu, params.omega_d

    def q_term(n: np.ndarray) -> np.ndarray:
        x = nu * n
        return 2.0 * temp / (1.0 + x * x + gamma * x)

    def q_tail(n: float) -> float:
        return 2.0 * temp / (nu * nu * n)

    def v_term(n: np.ndarray) -> np.ndarray:
        x = nu * n
        return 2.0 * temp * (wd + x + gamma * wd * x) / ((1.0 + x * x) * (wd + x) + gamma * wd * x)

    def v_tail(n: float) -> float:
        return 2.0 * temp * (1.0 / (nu * nu * n) + (gamma / nu) * math.log1p(wd / (nu * n)))

    q_sum = sum_with_tail(q_term, q_tail, params.series, scale=temp)
    v_sum = sum_with_tail(v_term, v_tail, params.series, scale=temp)
    truncated = q_sum.truncated or v_sum.truncated
    if truncated:
        logger.warning(f"Dispersion sums truncated (n_max={params.series.n_max}) for gamma={gamma}, nu={nu}")

    v0q0 = velocity_position_correlation(0.0, params)
    return Dispersions(temp + q_sum.value, temp + v_sum.value, v0q0, truncated)


# --- Noise / initial-position correlation ---
def xi_q0_correlation(t: float, params: ModelParams) -> float:
    """<xi(t) q0> = -2 gamma T sum nu_n exp(-nu_n t) / ((nu_n + lambda1)(nu_n + lambda2))."""
    if not t > 0:
        raise DomainError(f"<xi(t) q0> is evaluated for t > 0, got {t}")
    result = matsubara_sum(np.array([float(t)]), params, 0, MatsubaraKernel.NOISE)
    return -float(np.atleast_1d(result.value)[0])
