from typing import Optional

class QBMError(Exception):
    """Base class for every error raised by the library."""
    exit_code = 1

class DomainError(QBMError, ValueError):
    """Argument outside the domain of an operation (negative time, gamma <= 0, ...)."""
    exit_code = 2

class ConfigError(QBMError, ValueError):
    exit_code = 2

class PoleError(QBMError):
    """Evaluation requested inside the guard window of a zero of chi_q."""
    exit_code = 3

    def __init__(self, pole_time: float, t: Optional[float] = None):
        self.pole_time = pole_time
        self.t = t
        where = f" (requested t={t:.12g})" if t is not None else ""
        super().__init__(f"Omega(t) has a pole at t={pole_time:.12g}{where}")

class DivergenceError(QBMError):
    """A term-wise Matsubara sum that does not converge at the requested time."""
    exit_code = 3

class ConvergenceError(QBMError):
    """Quadrature or series stopped before reaching its tolerance."""
    exit_code = 3

    def __init__(self, message: str, achieved: float = float("nan")):
        self.achieved = achieved
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")

class SimulationError(QBMError):
    exit_code = 2
