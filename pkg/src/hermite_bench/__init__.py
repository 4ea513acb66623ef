"""Direct-summation N-body Hermite kernel with binary64 and emulated
double-single backends, plus power-trace energy metrics."""

from .core import (
    ParticleSystem,
    Precision,
    SimConfig,
    angular_momentum,
    make_plummer,
    make_two_body,
    total_energy,
)
from .exfloat import TwoFloat
from .kernel import DerivSet, FlopModel, arithmetic_intensity, evaluate, flop_count
from .hermite import step

__version__ = "0.1.0"
