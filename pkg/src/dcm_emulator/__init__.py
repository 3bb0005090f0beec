"""Fixed-step emulator of a chopper-fed DC machine under cascaded PI control."""

from .control import (
    CURRENT_GAINS,
    SPEED_GAINS,
    CascadeController,
    LoopTiming,
    PiGains,
    PiState,
    current_controller_tick,
    pi_step,
    speed_controller_tick,
)
from .diagnosis import DetectionReport, ResidualSeries, compare_traces, limit_speed_output
from .engine import (
    FaultWindow,
    SimClock,
    Task,
    TaskSchedule,
    Trace,
    TraceRecord,
    fault_gate,
    recorder_decimate,
    run_closed_loop,
    run_open_loop,
)
from .errors import (
    AlignmentError,
    ConfigError,
    DeterminismError,
    DomainError,
    EmulatorError,
    InstabilityError,
    NoSteadyStateError,
    NumericOverflowError,
)
from .motor import (
    DEFAULT_PARAMETERS,
    REFERENCE_COEFFICIENTS,
    MachineParameters,
    PlantCoefficients,
    PlantState,
    chopper_voltage,
    continuous_derivatives,
    derive_coefficients_euler,
    derive_coefficients_rk2,
    discrete_step,
    sign,
    steady_state,
)
from .pwm import PwmConfig, PwmGenerator, SwitchPair, decode_chopper, pwm_sample

__version__ = "0.1.0"
