"""Event/pulse data model and the interface all delay queues satisfy.

A queue lives on a fixed step grid.  ``now`` is the index of the next
undelivered step; ``pop_due()`` must be called exactly once per timestep,
in increasing step order, and the caller enqueues the events it produced
*after* popping that step.  Under that protocol an event created while
processing step ``s`` satisfies ``deliver_step >= s + 1`` (at least one
step of latency), which at enqueue time reads ``deliver_step >= now``.
"""

from __future__ import annotations

from enum import Enum
from typing import NamedTuple, Optional

from .dual import DualScalar
from .errors import CausalityError


class SpikeEvent(NamedTuple):
    """A spike to be delivered at a fixed future timestep.

    ``weight`` is the jump magnitude applied to the receiving state
    (unweighted spikes use weight (1, 0)); ``time_tangent`` is the
    derivative of the delivery time w.r.t. the seeded parameter, in time
    units per parameter unit.
    """

    deliver_step: int
    weight: DualScalar
    time_tangent: float = 0.0


def unit_event(deliver_step: int) -> SpikeEvent:
    return SpikeEvent(deliver_step, DualScalar(1.0, 0.0), 0.0)


class AggregatedPulse(NamedTuple):
    """All same-step deliveries merged into one (linear time invariance).

    ``weight`` sums the member weights; ``weighted_time_tangent`` sums
    weight.primal * time_tangent over the members, which is exactly the
    quantity the post-synaptic jump rule consumes.
    """

    weight: DualScalar
    weighted_time_tangent: float

    def merge(self, other: "AggregatedPulse") -> "AggregatedPulse":
        return AggregatedPulse(
            self.weight + other.weight,
            self.weighted_time_tangent + other.weighted_time_tangent,
        )

    def is_zero(self) -> bool:
        return (
            self.weight.primal == 0.0
            and self.weight.tangent == 0.0
            and self.weighted_time_tangent == 0.0
        )


ZERO_PULSE = AggregatedPulse(DualScalar(0.0, 0.0), 0.0)


def pulse_of(event: SpikeEvent) -> AggregatedPulse:
    w = event.weight
    return AggregatedPulse(w, w.primal * event.time_tangent)


class QueueKind(str, Enum):
    """Stable lowercase identifiers, used verbatim in the CLI and CSV."""

    DONOTHING = "donothing"
    RING = "ring"
    LOSSYRING = "lossyring"
    FIFORING = "fiforing"
    SINGLESPIKEHOLD = "singlespikehold"
    SINGLESPIKEDROP = "singlespikedrop"
    SORTEDARRAY = "sortedarray"
    BITARRAY32 = "bitarray32"
    BINARYHEAP = "binaryheap"
    DENSEORACLE = "denseoracle"
    # Registered for completeness; construction is rejected (its value is
    # GPU-group parallelism, meaningless in a serial build).
    BGPQ = "bgpq"


class QueueCapabilities(NamedTuple):
    """Feature flags, fixed per kind/configuration at construction."""

    supports_gradients: bool
    supports_heterogeneous_delay: bool
    supports_multi_spike_per_step: bool
    lossy: bool
    capacity: Optional[int]  # None = unbounded


class EventQueue:
    """Base class: per-kind storage lives in subclasses.

    Subclasses implement ``enqueue``, ``_pop_raw`` and ``occupancy``.
    ``_pop_raw`` returns the merged (weight, weight_tangent,
    weighted_time_tangent) floats for the current step, or None when
    nothing is due; ``pop_due`` is the boxed public form.
    """

    __slots__ = ("kind", "capabilities", "now")

    kind: QueueKind
    capabilities: QueueCapabilities
    now: int

    def enqueue(self, ev: SpikeEvent) -> bool:
        """Store (or merge) the event; False means the kind's drop policy
        rejected it.  Delivery earlier than ``now`` is a caller bug."""
        raise NotImplementedError

    def _pop_raw(self):
        raise NotImplementedError

    def pop_due(self) -> AggregatedPulse:
        """Merged pulse for the current step (zero pulse if none is due).

        Advances ``now`` by one; call exactly once per timestep.
        """
        raw = self._pop_raw()
        if raw is None:
            return ZERO_PULSE
        return AggregatedPulse(DualScalar(raw[0], raw[1]), raw[2])

    def occupancy(self) -> int:
        """Number of undelivered stored events (occupied slots for Ring)."""
        raise NotImplementedError

    def _check_causality(self, deliver_step: int) -> None:
        if deliver_step < self.now:
            raise CausalityError(
                f"{self.kind.value}: event for step {deliver_step} enqueued at "
                f"step {self.now}; delivery must lag creation by >= 1 step"
            )
