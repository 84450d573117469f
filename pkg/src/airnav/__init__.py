"""Joint attitude, air-velocity and altitude estimation from IMU, Pitot,
barometer and magnetometer measurements: a Riccati-gain nonlinear observer,
a uniform-observability toolkit, and a reproducible simulation harness."""

from .config import InitSpec, SimConfig, default_config, load_config
from .dynamics import (
    BodyInputs,
    ErrorState,
    NavState,
    TrajectoryKind,
    TrajectorySpec,
    error_state,
    propagate_truth,
    truth_inputs,
    truth_state,
)
from .harness import (
    MonteCarloSummary,
    RunMetrics,
    init_estimates,
    run_montecarlo,
    run_single,
)
from .observability import (
    GramianReport,
    TransitionBlocks,
    gramian,
    observability_verdict,
    pe_margins,
    phi_blocks,
)
from .observer import (
    AirDataObserver,
    Innovation,
    ObserverState,
    OutputStack,
    RiccatiWeights,
    cre_rhs,
    innovation_from_gain,
    observer_step_state,
    observer_tick,
    output_matrix,
    residual,
    riccati_predict,
    riccati_update,
    state_matrix_ct,
    state_matrix_dt,
)
from .sensors import (
    MagReference,
    NoiseSpec,
    ProbeSet,
    RateSpec,
    SensorEvent,
    SensorKind,
    make_schedule,
    sample_baro,
    sample_imu,
    sample_mag,
    sample_pitot,
)

__version__ = "0.1.0"

__all__ = [
    "AirDataObserver",
    "BodyInputs",
    "ErrorState",
    "GramianReport",
    "InitSpec",
    "Innovation",
    "MagReference",
    "MonteCarloSummary",
    "NavState",
    "NoiseSpec",
    "ObserverState",
    "OutputStack",
    "ProbeSet",
    "RateSpec",
    "RiccatiWeights",
    "RunMetrics",
    "SensorEvent",
    "SensorKind",
    "SimConfig",
    "TrajectoryKind",
    "TrajectorySpec",
    "TransitionBlocks",
    "cre_rhs",
    "default_config",
    "error_state",
    "gramian",
    "init_estimates",
    "innovation_from_gain",
    "load_config",
    "make_schedule",
    "observability_verdict",
    "observer_step_state",
    "observer_tick",
    "output_matrix",
    "pe_margins",
    "phi_blocks",
    "propagate_truth",
    "residual",
    "riccati_predict",
    "riccati_update",
    "run_montecarlo",
    "run_single",
    "sample_baro",
    "sample_imu",
    "sample_mag",
    "sample_pitot",
    "state_matrix_ct",
    "state_matrix_dt",
    "truth_inputs",
    "truth_state",
]
