import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import brentq

from backend.app.config import (
    COT_SERIES_CUTOFF,
    GAUSS_ORDER,
    SERIES_FIRST_CHUNK,
    SERIES_MAX_CELLS,
    SERIES_MAX_CHUNK,
)
from backend.app.exceptions import DomainError
from backend.app.schemas import QuadControl, SeriesControl

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_ORDER)
_MAX_ACTIVE_PANELS = 1 << 16


@dataclass(frozen=True)
class QuadResult:
    """Result of adaptive_quad; value is a float or an array for vector-valued integrands."""
    value: ArrayLike
    est_error: float
    evaluations: int
    converged: bool


@dataclass(frozen=True)
class SeriesResult:
    value: ArrayLike
    n_used: int
    tail_bound: float
    truncated: bool
    # per-series mask of the rows still above tolerance at n_max; None unless truncated
    truncated_rows: Optional[np.ndarray] = None

    def row_mask(self, size: int) -> np.ndarray:
        if not self.truncated:
            return np.zeros(size, dtype=bool)
        if self.truncated_rows is None:
            return np.ones(size, dtype=bool)
        return np.broadcast_to(self.truncated_rows, (size,)).copy()


# --- Series summation ---
def sum_with_tail(
    term: Callable[[np.ndarray], np.ndarray],
    tail: Callable[[float], ArrayLike],
    control: Optional[SeriesControl] = None,
    scale: float = 0.0,
) -> SeriesResult:
    """
    Sum term(n) for n = 1, 2, ... in chunks of increasing size.

    term receives a float array of indices and returns either shape (k,) or
    (m, k) for m independent series evaluated together (summed over the last
    axis). tail(N) must bound sum_{n>N} |term(n)| (scalar or shape (m,)).
    Stops once every tail bound is below rel_tol * max(|partial|, scale), or
    at n_max, in which case the result is flagged as truncated.
    """
    control = control or SeriesControl()
    partial = None
    n_used = 0
    chunk = SERIES_FIRST_CHUNK
    bound = np.inf
    while n_used < control.n_max:
        size = min(chunk, control.n_max - n_used)
        n = np.arange(n_used + 1, n_used + size + 1, dtype=float)
        values = np.asarray(term(n))
        block = values.sum(axis=-1)
        partial = block if partial is None else partial + block
        n_used += size

        bound = np.asarray(tail(float(n_used)), dtype=float)
        target = control.rel_tol * np.maximum(np.abs(partial), scale)
        if np.all(bound <= target):
            return SeriesResult(_unwrap(partial), n_used, float(np.max(bound)), False)

        rows = values.shape[0] if values.ndim > 1 else 1
        chunk = min(2 * chunk, SERIES_MAX_CHUNK, max(SERIES_FIRST_CHUNK, SERIES_MAX_CELLS // rows))

    logger.warning(f"Series truncated at n_max={control.n_max}; tail bound {float(np.max(bound)):.3e}")
    over = np.atleast_1d(bound > control.rel_tol * np.maximum(np.abs(partial), scale))
    return SeriesResult(_unwrap(partial), n_used, float(np.max(bound)), True, over)


def _unwrap(x):
    x = np.asarray(x)
    return x.item() if x.ndim == 0 else x


# --- Adaptive quadrature ---
def _gauss_panels(f: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
    fx = np.asarray(f(x))
    fx = fx.reshape((lo.size, _NODES.size) + fx.shape[1:])
    est = np.tensordot(_WEIGHTS, fx, axes=([0], [1]))
    return est * half.reshape((lo.size,) + (1,) * (est.ndim - 1))


def _panel_magnitude(x: np.ndarray) -> np.ndarray:
    a = np.abs(x)
    return a if a.ndim == 1 else a.reshape(a.shape[0], -1).max(axis=1)


def adaptive_quad(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    control: Optional[QuadControl] = None,
) -> QuadResult:
    """
    Adaptive Gauss-Legendre quadrature of a vectorised integrand over [a, b].

    Each panel estimate is compared with the sum over its two halves; panels
    whose difference is below their share of max(abs_tol, rel_tol*|I|) are
    accepted, the rest are bisected, up to max_depth levels. f takes a 1-D
    array of abscissae and returns values of shape (k,) or (k, ...), real or
    complex; vector-valued integrands share one subdivision.
    """
    control = control or QuadControl()
    if a > b:
        raise DomainError(f"adaptive_quad needs a <= b, got [{a}, {b}]")
    if a == b:
        return QuadResult(0.0, 0.0, 0, True)

    width = b - a
    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    est = _gauss_panels(f, lo, hi)
    evaluations = _NODES.size
    accepted = np.zeros_like(est[0])
    error = 0.0
    converged = False
    pending_err = np.zeros(1)

    for _ in range(control.max_depth):
        m = lo.size
        mid = 0.5 * (lo + hi)
        halves = _gauss_panels(f, np.concatenate([lo, mid]), np.concatenate([mid, hi]))
        evaluations += 2 * m * _NODES.size
        left, right = halves[:m], halves[m:]
        refined = left + right
        panel_err = _panel_magnitude(refined - est)

        total = accepted + refined.sum(axis=0)
        tol = max(control.abs_tol, control.rel_tol * float(np.max(np.abs(total))))
        ok = panel_err <= tol * (hi - lo) / width

        accepted = accepted + refined[ok].sum(axis=0)
        error += float(panel_err[ok].sum())
        keep = ~ok
        if not keep.any():
            converged = True
            break
        if 2 * int(keep.sum()) > _MAX_ACTIVE_PANELS:
            est, pending_err = refined[keep], panel_err[keep]
            lo = lo[keep]
            break
        lo, hi = np.concatenate([lo[keep], mid[keep]]), np.concatenate([mid[keep], hi[keep]])
        est = np.concatenate([left[keep], right[keep]])
        pending_err = np.concatenate([panel_err[keep], panel_err[keep]]) / 2.0

    if not converged:
        accepted = accepted + est.sum(axis=0)
        error += float(pending_err.sum())
        logger.warning(
            f"adaptive_quad on [{a:.6g}, {b:.6g}] stopped with {lo.size} open panels, "
            f"error estimate {error:.3e}"
        )
    return QuadResult(_unwrap(accepted), error, evaluations, converged)


# --- Special functions near singular arguments ---
def cot_small(x: ArrayLike) -> ArrayLike:
    """cot(x), switching to the Laurent series for |x| < 1e-2 (real or complex x)."""
    return 1.0 / np.asarray(x) + cot_remainder(x)


def cot_remainder(x: ArrayLike) -> ArrayLike:
    """r(x) = cot(x) - 1/x, finite at x = 0."""
    x = np.asarray(x)
    small = np.abs(x) < COT_SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    x2 = x * x
    series = -x * (1.0 / 3.0 + x2 * (1.0 / 45.0 + x2 * (2.0 / 945.0 + x2 / 4725.0)))
    direct = 1.0 / np.tan(safe) - 1.0 / safe
    return _unwrap(np.where(small, series, direct))


def cot_remainder_prime(x: ArrayLike) -> ArrayLike:
    """r'(x) = 1/x^2 - 1/sin^2(x)."""
    x = np.asarray(x)
    small = np.abs(x) < COT_SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    x2 = x * x
    series = -(1.0 / 3.0 + x2 * (1.0 / 15.0 + x2 * (2.0 / 189.0 + x2 / 675.0)))
    direct = 1.0 / (safe * safe) - 1.0 / np.sin(safe) ** 2
    return _unwrap(np.where(small, series, direct))


# --- Roots and derivative checks ---
def bracket_root(f: Callable[[float], float], lo: float, hi: float, xtol: float = 1e-15) -> float:
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise DomainError(f"No sign change on [{lo}, {hi}]: f={flo:.3e}, {fhi:.3e}")
    return float(brentq(f, lo, hi, xtol=xtol, rtol=4.0 * np.finfo(float).eps, maxiter=500))


def fd_check(
    f: Callable[[float], float],
    df: Callable[[float], float],
    t: float,
    h: float,
    order: int = 1,
) -> float:
    """
    Relative error between df(t) and a Richardson-extrapolated centered
    difference of f (first derivative for order=1, second for order=2).
    Falls back to the absolute error when df(t) is zero.
    """
    if order == 1:
        def diff(step):
            return (f(t + step) - f(t - step)) / (2.0 * step)
    elif order == 2:
        f0 = f(t)

        def diff(step):
            return (f(t + step) - 2.0 * f0 + f(t - step)) / (step * step)
    else:
        raise DomainError(f"fd_check supports order 1 or 2, got {order}")

    estimate = (4.0 * diff(h / 2.0) - diff(h)) / 3.0
    exact = df(t)
    scale = abs(exact)
    return abs(estimate - exact) / scale if scale > 0 else abs(estimate - exact)
