"""PAC sufficiency bounds, decoders and Monte Carlo checks for non-adaptive group testing."""

from .core import (
    Bernoulli,
    BoundResult,
    DimensionMismatch,
    ErrorBudget,
    ErrorKind,
    GroundTruth,
    InvalidParameter,
    NonConvergence,
    Outcomes,
    PacTarget,
    PoolingMatrix,
    RowWeight,
    Unsatisfiable,
    validate_instance,
)
from .designs import RngStream, optimal_row_weight, sample_bernoulli, sample_row_weight

__version__ = "0.1.0"
