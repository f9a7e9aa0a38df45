"""Simulation of singlet-triplet qubit transfer through chains of quantum dots."""

from .analysis import (
    FreeEvolutionConfig,
    FreeEvolutionTrace,
    Scheme,
    SweepSpec,
    SweepTable,
    average_fidelity,
    fidelity,
    free_evolution_study,
    sweep,
)
from .chain import ChainResult, ChainSpec, n_dot_transfer
from .errors import (
    ConfigError,
    DotChainError,
    NonConvergenceError,
    ParameterError,
    SingularDenominatorError,
    TransferFailedError,
)
from .evolution import (
    DetuningSchedule,
    LogicalState,
    QubitState,
    ScheduleSegment,
    SegmentKind,
    propagate_constant,
    propagate_schedule,
)
from .hamiltonian import (
    DetuningVector,
    DeviceParams,
    HamiltonianBlocks,
    build_hamiltonian,
    leading_order_coupling_error,
    sw_effective_couplings,
)
from .protocols import (
    AdiabaticConfig,
    PulseGatedConfig,
    TransferResult,
    adiabatic_schedule,
    build_schedule,
    calibrate_gate_duration,
    calibrate_wait_time,
    pulse_gated_schedule,
    run_transfer,
)

__version__ = "0.1.0"
