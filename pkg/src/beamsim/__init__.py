"""Matrix-free robust adaptive beamforming: maximum-entropy spectrum,
implicit covariance reconstruction and conjugate-gradient weights."""

from .arrays import (
    AccumulatedPhaseMismatch,
    ArrayGeometry,
    FixedSteeringVector,
    IncoherentScatteringMismatch,
    NoMismatch,
    ScatterSet,
    SnapshotBatch,
    SourceSpec,
    effective_desired_sv,
    generate_snapshots,
    steering_matrix,
    steering_vector,
)
from .baselines import (
    TruthModel,
    dense_from_spectrum,
    dense_scm,
    mvdr_weights,
    optimal_weights,
    output_sinr,
    smi_weights,
    solve_dense,
)
from .beamformer import (
    AngularSector,
    BeamformerResult,
    SpectrumSamples,
    gradient,
    meps_npic_cg,
    npic_matvec,
    reconstruct_sv,
    sample_spectrum,
    solve_beamformer,
)
from .errors import (
    BeamsimError,
    ConvergenceError,
    DegenerateInputError,
    IndefiniteOperatorError,
    SingularMatrixError,
)
from .harness import (
    ScenarioConfig,
    SinrRecord,
    emit_csv,
    load_config,
    run_single,
    summarize,
    sweep_snapshots,
    sweep_snr,
)
from .meps import (
    ImplicitSampleCovariance,
    MepsSolution,
    meps_power,
    meps_power_grid,
    scm_matvec,
    solve_v,
    step_size_xi,
)

__version__ = "0.1.0"
