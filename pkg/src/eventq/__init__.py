"""Differentiable spike-event delay queues and their benchmark harness."""

from .dual import DualScalar, dual_add, dual_exp_decay, dual_mul
from .errors import (
    CapabilityError,
    CausalityError,
    ConfigurationError,
    EventQError,
    GrazingCrossingError,
    NonSmoothDirectionError,
)
from .events import (
    AggregatedPulse,
    EventQueue,
    QueueCapabilities,
    QueueKind,
    SpikeEvent,
    ZERO_PULSE,
    pulse_of,
    unit_event,
)
from .jumps import (
    SynapseJumpSpec,
    ThresholdCrossing,
    apply_jump,
    apply_jump_pulse,
    compose_delay,
    delivery_step,
    detect_crossing,
    heaviside,
    superspike_grad,
)
from .neuro import (
    ContinuousDelayLine,
    DoubleExpSynapse,
    FirstOrderSynapse,
    LIFNeuron,
    lif_firing_period,
)
from .network import (
    NetworkParams,
    NetworkState,
    PoissonDrive,
    PrimalRSNN,
    SeedDirection,
    build_rsnn,
    forward_gradient,
    grad_fd_oracle,
    network_step,
    simulate,
)
from .queues import kind_capabilities, make_queue
from .verify import dense_oracle_equivalence

__all__ = [
    "AggregatedPulse",
    "CapabilityError",
    "CausalityError",
    "ConfigurationError",
    "ContinuousDelayLine",
    "DoubleExpSynapse",
    "DualScalar",
    "EventQError",
    "EventQueue",
    "FirstOrderSynapse",
    "GrazingCrossingError",
    "LIFNeuron",
    "NetworkParams",
    "NetworkState",
    "NonSmoothDirectionError",
    "PoissonDrive",
    "PrimalRSNN",
    "QueueCapabilities",
    "QueueKind",
    "SeedDirection",
    "SpikeEvent",
    "SynapseJumpSpec",
    "ThresholdCrossing",
    "ZERO_PULSE",
    "apply_jump",
    "apply_jump_pulse",
    "build_rsnn",
    "compose_delay",
    "delivery_step",
    "dense_oracle_equivalence",
    "detect_crossing",
    "dual_add",
    "dual_exp_decay",
    "dual_mul",
    "forward_gradient",
    "grad_fd_oracle",
    "heaviside",
    "kind_capabilities",
    "lif_firing_period",
    "make_queue",
    "network_step",
    "pulse_of",
    "simulate",
    "superspike_grad",
    "unit_event",
]
