"""Data-driven almost-invariant sets for black-box discrete-time systems."""
from .dynamics import (
    ConstraintBox,
    ExternalSystem,
    SimulationError,
    Trajectory,
    example_system,
    external_system,
    lure_nonlinearity,
    simulate,
    step,
)
from .horizon import HorizonReport, Phase1Config, estimate_horizon, t_bar, theta_sequence
from .identify import (
    LabeledReference,
    NearestNeighborIndex,
    Phase2Config,
    Phase2Result,
    SetClassifier,
    classify,
    h_value,
    identify_set,
    label_points,
    nn_distance,
    solve_delta_star,
)
from .sampling import (
    SampleSet,
    hoeffding_sample_size,
    phase1_sample_size,
    phase1_sample_size_conservative,
    sample_block,
    sample_uniform,
    scenario_confidence,
    scenario_sample_size,
)

__version__ = "0.1.0"
