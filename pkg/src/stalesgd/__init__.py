"""Stale-gradient SGD simulator with stability probes and bound calculators."""

from .acceptance import CriterionResult, format_line, run_all
from .engine import (
    IterateBuffer,
    SamplePath,
    ShardAssignment,
    TrainingRun,
    TrainResult,
    assign_shards,
    draw_sample_path,
    gaussian_init,
    step,
    train,
)
from .model import (
    ConstantLoss,
    DataPoint,
    Dataset,
    LeastSquares,
    Logistic,
    LossModel,
    NeighborPair,
    SyntheticSpec,
    TinyMLP,
    estimate_lipschitz,
    estimate_smoothness,
    generate_synthetic,
    gradient,
    load_dataset,
    loss,
    make_neighbor,
    raw_gradient,
    sample_from,
    save_dataset,
)
from .schedule import (
    DelaySchedule,
    LearningRateSchedule,
    ValidationReport,
    load_delay_schedule,
    make_fixed_per_worker,
    make_worst_case_growth,
    save_delay_schedule,
    validate,
)
from .seeding import derive_seed, make_rng
from .stability import (
    CouplingConfig,
    GeneralizationProxy,
    RecursionReport,
    SandwichReport,
    StabilityEstimate,
    StabilityTrace,
    check_recursion_pathwise,
    check_recursion_relaxed,
    generalization_proxy,
    lipschitz_sandwich_check,
    load_trace_columns,
    normalized_distance,
    save_trace,
    stability_estimate,
    twin_run,
)
from .theory import (
    BoundInputs,
    RecursionSequence,
    Theorem2Consistency,
    Theorem2Result,
    integer_t0_minimum,
    pre_minimization_curve,
    prop1_theoretical_trace,
    rate_sequence,
    recursion_rollforward,
    telescoped_bound,
    theorem1_bound,
    theorem2_bound,
    theorem2_consistency,
)

__version__ = "0.1.0"
