"""sanovlab: discretized large deviations for empirical measures.

Compact exhaustions and nested tagged partitions of metric spaces, exact
relative entropies of discretized measures, bounded-Lipschitz distances by
linear programming, and finite-n checks of Sanov-type rates.
"""
from .bl_metric import bl_distance, coupling_bound, in_ball, projection_coupling
from .entropy import (
    entropy_inequality_check,
    entropy_ladder,
    martingale_trace,
    relative_entropy,
    relative_entropy_integral,
    relative_entropy_variational,
)
from .exceptions import (
    ArgumentError,
    DomainError,
    InfeasibleLiftError,
    InfiniteEntropyError,
    OptimizerError,
    PartitionConsistencyError,
    ResourceError,
    SanovLabError,
    UnsupportedMeasureError,
)
from .measure import (
    EmpiricalMeasure,
    Exponential,
    FiniteMeasure,
    Gaussian,
    Mixture,
    Uniform,
    discretize,
    discretize_empirical,
    lift,
    measure_from_spec,
    sample_empirical,
)
from .metric_space import (
    CloudSpace,
    FiniteSpace,
    IntervalSpace,
    build_exhaustion,
    space_from_spec,
)
from .partition import build_sequence, partition_from_json, refine_check
from .sanov_harness import (
    ball_inf_entropy,
    exp_equivalence_check,
    mc_rate,
    proposition_chain_check,
    supinf_ladder,
    types_log_probability,
    types_probability,
)

__version__ = "0.1.0"

__all__ = [n for n in dir() if not n.startswith("_")]
