"""
Ornstein-Uhlenbeck ensemble for the configuration-space Fokker-Planck equation

    dq = Omega(t) q dt + sqrt(D(t)) dW,    q(t0) = 0,

and the moment equation d sigma/dt = D(t) + 2 Omega(t) sigma that the
ensemble variance obeys. Coefficients are supplied as sampled series.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from backend.app.config import PATH_BLOCK_SIZE, worker_count
from backend.app.exceptions import ConvergenceError, DomainError, PoleError, SimulationError

logger = logging.getLogger(__name__)

ODE_RTOL = 1e-10
ODE_ATOL = 1e-14
DEFAULT_RECORDS = 100

Window = Tuple[float, float]


@dataclass(frozen=True, eq=False)
class DriftDiffusion:
    """Sampled (Omega, D) coefficients; interpolation is "linear" or "cubic"."""
    times: np.ndarray
    omega: np.ndarray
    diffusion: np.ndarray
    pole_windows: Tuple[Window, ...] = ()
    interpolation: str = "linear"
    _splines: Optional[Tuple[CubicSpline, CubicSpline]] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        omega = np.asarray(self.omega, dtype=float)
        diffusion = np.asarray(self.diffusion, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise DomainError("coefficient series need at least two samples")
        if omega.shape != times.shape or diffusion.shape != times.shape:
            raise DomainError("times, omega and diffusion must have the same length")
        if np.any(np.diff(times) <= 0):
            raise DomainError("coefficient times must be strictly ascending")
        if self.interpolation not in ("linear", "cubic"):
            raise DomainError(f"unknown interpolation '{self.interpolation}'")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "diffusion", diffusion)
        if self.interpolation == "cubic":
            object.__setattr__(self, "_splines", (CubicSpline(times, omega), CubicSpline(times, diffusion)))

    @classmethod
    def constant(cls, omega: float, diffusion: float, t_max: float, t0: float = 0.0) -> "DriftDiffusion":
        times = np.array([t0, t_max])
        return cls(times, np.full(2, float(omega)), np.full(2, float(diffusion)))

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def omega_at(self, t):
        if self._splines is not None:
            return self._splines[0](t)
        return np.interp(t, self.times, self.omega)

    def diffusion_at(self, t):
        if self._splines is not None:
            return self._splines[1](t)
        return np.interp(t, self.times, self.diffusion)

    def window_between(self, a: float, b: float) -> Optional[Window]:
        """First pole window intersecting [a, b], if any."""
        for lo, hi in self.pole_windows:
            if hi >= a and lo <= b:
                return lo, hi
        return None


@dataclass
class EnsembleStats:
    times: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    std_error: np.ndarray
    n_paths: int
    seed: int


@dataclass
class _BlockMoments:
    count: int
    mean: np.ndarray
    m2: np.ndarray


def _merge(a: _BlockMoments, b: _BlockMoments) -> _BlockMoments:
    # pairwise update of (count, mean, sum of squared deviations)
    n = a.count + b.count
    delta = b.mean - a.mean
    mean = a.mean + delta * (b.count / n)
    m2 = a.m2 + b.m2 + delta * delta * (a.count * b.count / n)
    return _BlockMoments(n, mean, m2)


def _reduce_pairwise(parts: List[_BlockMoments]) -> _BlockMoments:
    while len(parts) > 1:
        merged = [_merge(parts[i], parts[i + 1]) for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


def _run_block(
    size: int,
    seed_seq: np.random.SeedSequence,
    drift: np.ndarray,
    noise: np.ndarray,
    record_steps: np.ndarray,
) -> _BlockMoments:
    rng = np.random.Generator(np.random.Philox(seed_seq))
    q = np.zeros(size)
    n_records = record_steps.size
    mean = np.zeros(n_records)
    m2 = np.zeros(n_records)
    slot = 0
    for step in range(drift.size + 1):
        if slot < n_records and record_steps[slot] == step:
            mu = q.mean()
            mean[slot] = mu
            m2[slot] = float(np.sum((q - mu) ** 2))
            slot += 1
        if step == drift.size:
            break
        q = q + drift[step] * q + noise[step] * rng.standard_normal(size)
    return _BlockMoments(size, mean, m2)


def simulate_ensemble(
    coeffs: DriftDiffusion,
    n_paths: int,
    dt: float,
    t_max: float,
    seed: int,
    record_every: Optional[int] = None,
    n_jobs: Optional[int] = None,
) -> EnsembleStats:
    """
    Euler-Maruyama ensemble started at q = 0 at the first coefficient time.

    Paths run in fixed blocks of PATH_BLOCK_SIZE, each with a Philox stream
    spawned from SeedSequence(seed), and block moments are merged in a fixed
    pairwise order: results are bitwise identical for any worker count.
    """
    if n_paths < 2:
        raise DomainError(f"n_paths must be at least 2, got {n_paths}")
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    t0 = coeffs.t_start
    if not t_max > t0:
        raise DomainError(f"t_max={t_max} must exceed the first coefficient time {t0}")
    if t_max > coeffs.t_end * (1.0 + 1e-12):
        raise DomainError(f"t_max={t_max} is beyond the coefficient series (ends at {coeffs.t_end})")

    window = coeffs.window_between(t0, t_max)
    if window is not None:
        raise SimulationError(f"Simulation window [{t0}, {t_max}] crosses the pole window {window}")

    n_steps = int(math.floor((t_max - t0) / dt + 1e-9))
    if n_steps < 1:
        raise DomainError(f"dt={dt} exceeds the simulated window [{t0}, {t_max}]")
    step_times = t0 + dt * np.arange(n_steps)
    omega = np.asarray(coeffs.omega_at(step_times), dtype=float)
    diffusion = np.asarray(coeffs.diffusion_at(step_times), dtype=float)
    bad = np.flatnonzero(~(diffusion >= 0))
    if bad.size:
        t_bad = step_times[bad[0]]
        raise SimulationError(
            f"D(t) = {diffusion[bad[0]]:.6g} < 0 at t={t_bad:.6g}; sqrt(D) is undefined. "
            f"Restrict the window or use variance_ode."
        )

    record_every = record_every or max(1, n_steps // DEFAULT_RECORDS)
    record_steps = np.arange(0, n_steps + 1, record_every)
    if record_steps[-1] != n_steps:
        record_steps = np.append(record_steps, n_steps)
    times = t0 + dt * record_steps

    sizes = [min(PATH_BLOCK_SIZE, n_paths - start) for start in range(0, n_paths, PATH_BLOCK_SIZE)]
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    drift = omega * dt
    noise = np.sqrt(diffusion * dt)
    n_jobs = n_jobs or worker_count()
    logger.info(f"Simulating {n_paths} paths in {len(sizes)} blocks, {n_steps} steps of dt={dt}, {n_jobs} workers")

    parts = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_run_block)(size, child, drift, noise, record_steps) for size, child in zip(sizes, children)
    )
    total = _reduce_pairwise(list(parts))
    variance = total.m2 / (total.count - 1)
    return EnsembleStats(
        times=times,
        mean=total.mean,
        variance=variance,
        std_error=variance * math.sqrt(2.0 / (total.count - 1)),
        n_paths=total.count,
        seed=seed,
    )


def variance_ode(coeffs: DriftDiffusion, t_grid: Sequence[float], sigma0: float) -> np.ndarray:
    """Integrate d sigma/dt = D(t) + 2 Omega(t) sigma from sigma(t_grid[0]) = sigma0."""
    grid = np.asarray(t_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("t_grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("t_grid must be strictly ascending")
    tol = 1e-12 * max(1.0, abs(coeffs.t_end))
    if grid[0] < coeffs.t_start - tol or grid[-1] > coeffs.t_end + tol:
        raise DomainError(f"t_grid must lie within [{coeffs.t_start}, {coeffs.t_end}]")
    if grid.size == 1:
        return np.array([float(sigma0)])

    window = coeffs.window_between(float(grid[0]), float(grid[-1]))
    if window is not None:
        raise PoleError(0.5 * (window[0] + window[1]), float(grid[-1]))

    def rhs(t, y):
        return coeffs.diffusion_at(t) + 2.0 * coeffs.omega_at(t) * y

    sol = solve_ivp(
        rhs,
        (float(grid[0]), float(grid[-1])),
        [float(sigma0)],
        method="RK45",
        t_eval=grid,
        rtol=ODE_RTOL,
        atol=ODE_ATOL,
    )
    if not sol.success:
        raise ConvergenceError(f"variance ODE failed: {sol.message}")
    return sol.y[0]
