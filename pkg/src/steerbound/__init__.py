"""Loss-tolerant steering bounds for two-qubit Werner states.

The package computes how strongly a lossy measurement record must correlate
before no local-hidden-state model can explain it, for a fixed budget of
measurement axes and a fixed apparent efficiency. It provides the regular
and geodesic axis sets, deterministic and mixed cheating strategies, the
linear programs behind the symmetric bounds, a direct search over arbitrary
weighted arrangements, and a Monte-Carlo simulator for honest and cheating
parties.
"""

from .geometry import (
    DuplicateDirectionWarning,
    GeometryError,
    InfeasibleParameters,
    MeasurementSet,
    canonical_axis,
    canonicalize,
    fingerprint,
    from_parameters,
    geodesic_union,
    parameter_count,
    platonic_set,
    to_parameters,
    with_group_weights,
)
from .lp import LpError, LpResult, lp_solve
from .strategies import (
    DeterministicStrategy,
    GroupedStrategyTable,
    StrategyTable,
    SupportPattern,
    best_by_count,
    best_signs,
    enumerate_supports,
    grouped_supports,
    strategy_value,
    support_values,
)
from .bounds import (
    BoundConsistencyError,
    BoundCurve,
    MixedStrategy,
    asymmetric_mixture,
    bound_curve,
    check_floor,
    grouped_symmetric_mixture,
    postselect,
    symmetric_mixture,
    symmetric_value,
    unviolable,
)
from .optimize import (
    OptimizationResult,
    OptimizerConfig,
    augmented_parameters,
    infinite_limit_floor,
    optimize_full,
    optimize_group_weights,
    sweep,
)
from .simulate import (
    ExperimentRecord,
    Verdict,
    WernerModel,
    run_cheating,
    run_honest,
    verdict,
)

__version__ = "0.1.0"
