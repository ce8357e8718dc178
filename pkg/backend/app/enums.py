from enum import Enum

class RegimeKind(str, Enum):
    PERIODIC = "periodic"       # gamma < 2, omega imaginary
    APERIODIC = "aperiodic"     # gamma == 2 within EPS_REGIME
    OVERDAMPED = "overdamped"   # gamma > 2, omega real

    def __str__(self):
        return self.value

class PointFlag(str, Enum):
    TRUNCATED = "truncated"         # a Matsubara sum hit n_max before its tolerance
    CLAMPED = "clamped"             # |t - s| < t_min was clamped to t_min
    POLE = "pole"                   # inside a guard window; no value reported
    NEAR_POLE = "near_pole"
    NONCONVERGED = "nonconverged"   # quadrature stopped at max_depth
    ERROR = "error"

    def __str__(self):
        return self.value

class CoefficientSource(str, Enum):
    CLASSICAL = "classical"
    QUANTUM = "quantum"

    def __str__(self):
        return self.value

class GridSpacing(str, Enum):
    LINEAR = "linear"
    LOG = "log"

    def __str__(self):
        return self.value

class MatsubaraKernel(str, Enum):
    POSITION = "position"   # four-factor denominator of the position correlation
    NOISE = "noise"         # two-factor denominator of the noise/position correlation

    def __str__(self):
        return self.value

class PresetKind(str, Enum):
    CORRELATION = "correlation"
    SIGMA = "sigma"
    DIFFUSION = "diffusion"
    CLASSICAL_SIGMA = "classical_sigma"
    CLASSICAL_DIFFUSION = "classical_diffusion"

    def __str__(self):
        return self.value
