import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

from backend.app.config import EPS_REGIME
from backend.app.enums import RegimeKind
from backend.app.exceptions import DomainError
from backend.app.schemas import ClassicalParams, ModelParams, QuadControl, SeriesControl

logger = logging.getLogger(__name__)

__all__ = [
    "ClassicalParams", "ModelParams", "QuadControl", "SeriesControl",
    "Regime", "classify_regime", "matsubara",
]

@dataclass(frozen=True)
class Regime:
    """Dynamical regime of the scaled oscillator, omega = sqrt(gamma^2 - 4)."""
    kind: RegimeKind
    gamma: float
    omega: complex
    omega_tilde: float

    @property
    def omega_sq(self) -> float:
        return (self.gamma - 2.0) * (self.gamma + 2.0)

    @property
    def lambdas(self) -> Tuple[complex, complex]:
        """
        Decay rates (lambda1, lambda2) = ((gamma + omega)/2, (gamma - omega)/2).
        lambda2 is formed as 2/(gamma + omega) so it keeps full precision for large gamma.
        """
        s = self.gamma + self.omega
        return s / 2.0, 2.0 / s

@lru_cache(maxsize=256)
def classify_regime(gamma: float) -> Regime:
    if not gamma > 0 or math.isinf(gamma):
        raise DomainError(f"gamma must be positive and finite, got {gamma}")
    omega_sq = (gamma - 2.0) * (gamma + 2.0)
    if abs(gamma - 2.0) <= EPS_REGIME:
        return Regime(RegimeKind.APERIODIC, gamma, complex(0.0, 0.0), 0.0)
    if gamma < 2.0:
        w = math.sqrt(-omega_sq)
        return Regime(RegimeKind.PERIODIC, gamma, complex(0.0, w), w)
    w = math.sqrt(omega_sq)
    return Regime(RegimeKind.OVERDAMPED, gamma, complex(w, 0.0), w)

def matsubara(n: int, nu: float) -> float:
    """n-th Matsubara frequency nu_n = n * nu (n >= 1)."""
    if n < 1:
        raise DomainError(f"Matsubara index must be >= 1, got {n}")
    return n * nu

