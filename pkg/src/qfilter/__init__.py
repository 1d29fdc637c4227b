"""Monte Carlo quantum filtering with one-bit measurement records.

Simulates continuously monitored one- and two-qubit systems: a truth-side
stochastic master equation generates analog measurement records, which can
be sign-quantized to one bit per step; an innovation-driven filter SME
reconstructs the state from either record, optionally under feedback
control.  Ensemble statistics (purity, fidelity, classical correlations,
quantum discord) are reduced deterministically for reproducible output.
"""

from .engine import (
    RecordMode,
    RecordSample,
    StepConfig,
    TrajectoryState,
    advance_trajectory,
    generate_record,
    innovation,
    is_unstable,
    make_trajectory_state,
    quantize_one_bit,
    renormalize,
    sme_step,
)
from .ensemble import (
    EnsembleConfig,
    EnsembleData,
    EnsembleStats,
    HittingTimes,
    derive_stream,
    gaussian_increment,
    hitting_time_stats,
    run_ensemble,
    simulate_ensemble,
)
from .errors import (
    ConfigError,
    EnsembleFailure,
    NegativityError,
    NonHermitianError,
    NotUnitaryError,
    QFilterError,
    RecordFormatError,
)
from .feedback import FeedbackPolicy, PolicyKind, apply_control, bloch_vector, control_unitary
from .linalg import hermitian_eig, kron, matrix_sqrt_psd, partial_trace
from .metrics import (
    ProjectorPair,
    classical_correlations,
    fidelity,
    projector_pair,
    purity,
    quantum_discord,
    von_neumann_entropy,
)
from .model import (
    MeasurementChannel,
    SystemModel,
    TwoQubitMode,
    build_single_qubit,
    build_two_qubit,
    maximally_mixed,
    random_pure_state,
    validate_density_matrix,
)
from .obr import read_obr_file, write_obr_file
from .presets import PRESETS, preset_config

__version__ = "0.1.0"
