from backend.app.exceptions import ConfigError, ConvergenceError, DivergenceError, DomainError, PoleError, QBMError, SimulationError
from backend.app.params import ClassicalParams, ModelParams
