"""Frame discretization toolkit.

Finite frame systems and cell models of continuous frames, certified
Weaver-type partitions, Lyapunov-type subset selection, and sampling of
continuous frames into discrete ones.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .continuous_frame import (
    CellSubset,
    ContinuousFrameModel,
    GridSupOracle,
    LipschitzOracle,
    ZeroOracle,
    approximate_by_countable,
    approximation_deviation,
    equivalent_discrete,
    partial_frame_operator,
)
from .errors import (
    AdmissibilityError,
    AtomicityError,
    DiscretizationTooCoarseError,
    DomainError,
    FrameError,
    HypothesisError,
    InvalidInputError,
    InvalidRangeError,
    InvalidWeightError,
    IrreducibleCellError,
    NotAFrameError,
    NotBesselError,
    RefinementLimitError,
    SearchBudgetError,
    SearchFailure,
    ShapeError,
)
from .frame_model import (
    FrameBoundsReport,
    FrameSystem,
    canonical_parseval,
    frame_bounds,
    frame_operator,
    weighted_frame_operator,
)
from .lyapunov import (
    continuous_lyapunov,
    convexity_witness,
    exhaustive_subset_oracle,
    subset_for_scalar,
    subset_for_weights,
)
from .operator_core import (
    eigenvalues,
    extreme_eigenvalues,
    operator_norm,
    power,
    spectral_decompose,
    spectral_projection,
)
from .partition_engine import (
    PartitionCertificate,
    PartitionSpec,
    bisect_frame,
    compute_sou_schedule,
    partition_general,
    partition_to_uniform,
    search_weaver_partition,
    two_sided_certificate,
    universal_constant,
    verify_partition_certificate,
)
from .sampler import discretize_continuous, sample_scalable_finite, sample_scalable_general
