"""The concrete delay-queue kinds plus the lossless dense reference.

All kinds share the fixed-capacity discipline: storage is sized at
construction and never grows, so drop behaviour is real, not simulated.
Dense-array kinds (Ring, LossyRing, SortedArray, BitArray32) do work
proportional to their fixed buffer, mirroring the shape-static execution
model this family of structures comes from; pointer/tree kinds (FIFORing,
BinaryHeap, SingleSpike) shortcut on occupancy.
"""

from __future__ import annotations

from typing import Optional, Union

from .errors import CapabilityError, ConfigurationError
from .events import (
    EventQueue,
    QueueCapabilities,
    QueueKind,
    SpikeEvent,
)

_INF_KEY = 2**62  # sentinel deliver_step for empty fixed-array slots


class DoNothingQueue(EventQueue):
    """Accepts nothing, delivers nothing; the queue-independent baseline."""

    __slots__ = ()

    def __init__(self):
        self.kind = QueueKind.DONOTHING
        self.capabilities = QueueCapabilities(
            supports_gradients=True,
            supports_heterogeneous_delay=True,
            supports_multi_spike_per_step=True,
            lossy=True,
            capacity=0,
        )
        self.now = 0

    def enqueue(self, ev: SpikeEvent) -> bool:
        if ev.deliver_step < self.now:
            self._check_causality(ev.deliver_step)
        return False

    def _pop_raw(self):
        self.now += 1
        return None

    def occupancy(self) -> int:
        return 0


class RingQueue(EventQueue):
    """Circular buffer of per-step merge slots, sized to the maximum delay.

    Incoming spikes land at slot (deliver_step mod capacity) and are
    LTI-merged on collision with same-step spikes.  Delays beyond the
    buffer are a capability error here; ``LossyRingQueue`` aliases them
    instead.
    """

    __slots__ = ("capacity", "_w", "_dw", "_wtt", "_occ", "_count")

    def __init__(self, capacity: int, max_delay_steps: int):
        if capacity < 1:
            raise ConfigurationError(f"ring capacity must be >= 1, got {capacity}")
        if max_delay_steps > capacity:
            raise ConfigurationError(
                f"ring capacity {capacity} cannot cover max delay "
                f"{max_delay_steps}; a smaller buffer aliases (use lossyring)"
            )
        self.kind = QueueKind.RING
        self.capabilities = QueueCapabilities(
            supports_gradients=True,
            supports_heterogeneous_delay=True,
            supports_multi_spike_per_step=True,
            lossy=False,
            capacity=capacity,
        )
        self.now = 0
        self.capacity = capacity
        self._w = [0.0] * capacity
        self._dw = [0.0] * capacity
        self._wtt = [0.0] * capacity
        self._occ = [False] * capacity
        self._count = 0

    def enqueue(self, ev: SpikeEvent) -> bool:
        step = ev.deliver_step
        if step < self.now:
            self._check_causality(step)
        if step - self.now >= self.capacity:
            raise CapabilityError(
                f"ring: delay of {step - self.now + 1} steps exceeds buffer "
                f"capacity {self.capacity}"
            )
        idx = step % self.capacity
        if not self._occ[idx]:
            self._occ[idx] = True
            self._count += 1
        w = ev.weight
        self._w[idx] += w.primal
        self._dw[idx] += w.tangent
        self._wtt[idx] += w.primal * ev.time_tangent
        return True

    def _pop_raw(self):
        idx = self.now % self.capacity
        self.now += 1
        if self._occ[idx]:
            out = (self._w[idx], self._dw[idx], self._wtt[idx])
            self._w[idx] = 0.0
            self._dw[idx] = 0.0
            self._wtt[idx] = 0.0
            self._occ[idx] = False
            self._count -= 1
            return out
        return None

    def occupancy(self) -> int:
        return self._count


class LossyRingQueue(EventQueue):
    """Ring with a buffer smaller than the worst-case delay.

    A delay beyond the buffer wraps: the spike lands in a wrong, earlier
    bin (delay modulo capacity).  Aliased and merged arrivals are counted
    so drop-rate measurements can report aliasing as loss.
    """

    __slots__ = ("capacity", "_w", "_dw", "_wtt", "_occ", "_count",
                 "aliased", "merged")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError(
                f"lossyring capacity must be >= 1, got {capacity}"
            )
        self.kind = QueueKind.LOSSYRING
        self.capabilities = QueueCapabilities(
            supports_gradients=True,
            supports_heterogeneous_delay=True,
            supports_multi_spike_per_step=True,
            lossy=True,
            capacity=capacity,
        )
        self.now = 0
        self.capacity = capacity
        self._w = [0.0] * capacity
        self._dw = [0.0] * capacity
        self._wtt = [0.0] * capacity
        self._occ = [False] * capacity
        self._count = 0
        self.aliased = 0  # arrivals whose delay wrapped past the buffer
        self.merged = 0   # arrivals LTI-merged into an occupied slot

    def enqueue(self, ev: SpikeEvent) -> bool:
        step = ev.deliver_step
        if step < self.now:
            self._check_causality(step)
        if step - self.now >= self.capacity:
            self.aliased += 1
        idx = step % self.capacity
        if self._occ[idx]:
            self.merged += 1
        else:
            self._occ[idx] = True
            self._count += 1
        w = ev.weight
        self._w[idx] += w.primal
        self._dw[idx] += w.tangent
        self._wtt[idx] += w.primal * ev.time_tangent
        return True

    _pop_raw = RingQueue._pop_raw

    def occupancy(self) -> int:
        return self._count


class FIFORingQueue(EventQueue):
    """Circular buffer of whole events, first-in first-out.

    No sorting happens at insert, so delivery order is arrival order:
    usable only when delays are homogeneous.  An out-of-order insert is
    rejected as a capability error, and a full buffer drops the incoming
    spike.
    """

    __slots__ = ("capacity", "_keys", "_events", "_head", "_count", "_tail_key")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError(
                f"fiforing capacity must be >= 1, got {capacity}"
            )
        self.kind = QueueKind.FIFORING
        self.capabilities = QueueCapabilities(
            supports_gradients=True,
            supports_heterogeneous_delay=False,
            supports_multi_spike_per_step=True,
            lossy=True,
            capacity=capacity,
        )
        self.now = 0
        self.capacity = capacity
        self._keys = [0] * capacity
        self._events: list = [None] * capacity
        self._head = 0
        self._count = 0
        self._tail_key = -1

    def enqueue(self, ev: SpikeEvent) -> bool:
        step = ev.deliver_step
        if step < self.now:
            self._check_causality(step)
        if step < self._tail_key:
            raise CapabilityError(
                "fiforing supports homogeneous delays only: event for step "
                f"{step} arrived after one for step {self._tail_key}"
            )
        if self._count == self.capacity:
            return False
        idx = (self._head + self._count) % self.capacity
        self._keys[idx] = step
        self._events[idx] = ev
        self._count += 1
        self._tail_key = step
        return True

    def _pop_raw(self):
        now = self.now
        self.now = now + 1
        count = self._count
        if count == 0 or self._keys[self._head] != now:
            return None
        w = dw = wtt = 0.0
        head = self._head
        cap = self.capacity
        keys = self._keys
        events = self._events
        while count and keys[head] == now:
            ev = events[head]
            events[head] = None
            ew = ev.weight
            p = ew.primal
            w += p
            dw += ew.tangent
            wtt += p * ev.time_tangent
            head = (head + 1) % cap
            count -= 1
        self._head = head
        self._count = count
        return (w, dw, wtt)

    def occupancy(self) -> int:
        return self._count


class SingleSpikeQueue(EventQueue):
    """A buffer holding at most one spike.

    ``hold`` keeps the stored spike and drops the newcomer (behaves like
    a FIFORing of capacity one); ``drop`` always replaces the stored
    spike with the newcomer.
    """

    __slots__ = ("hold", "_slot")

    def __init__(self, hold: bool):
        self.kind = QueueKind.SINGLESPIKEHOLD if hold else QueueKind.SINGLESPIKEDROP
        self.capabilities = QueueCapabilities(
            supports_gradients=True,
            supports_heterogeneous_delay=True,
            supports_multi_spike_per_step=False,
            lossy=True,
            capacity=1,
        )
        self.now = 0
        self.hold = hold
        self._slot: Optional[SpikeEvent] = None

    def enqueue(self, ev: SpikeEvent) -> bool:
        if ev.deliver_step < self.now:
            self._check_causality(ev.deliver_step)
        if self._slot is not None and self.hold:
            return False
        self._slot = ev
        return True

    def _pop_raw(self):
        now = self.now
        self.now = now + 1
        ev = self._slot
        if ev is not None and ev.deliver_step == now:
            self._slot = None
            w = ev.weight
            return (w.primal, w.tangent, w.primal * ev.time_tangent)
        return None

    def occupancy(self) -> int:
        return 0 if self._slot is None else 1


class SortedArrayQueue(EventQueue):
    """Fixed array kept sorted by delivery step.

    Inserts append at the end of the occupied region, then a sort pass
    sweeps the whole fixed array (empty slots carry an infinite key), so
    per-insert cost follows capacity, not occupancy.  Delivery pops the
    due prefix and shifts the remaining array down.  Stable for equal
    keys: same-step events keep insertion order.
    """

    __slots__ = ("capacity", "_keys", "_events", "_count")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError(
                f"sortedarray capacity must be >= 1, got {capacity}"
            )
        self.kind = QueueKind.SORTEDARRAY
        self.capabilities = QueueCapabilities(
            supports_gradients=True,
            supports_heterogeneous_delay=True,
            supports_multi_spike_per_step=True,
            lossy=True,
            capacity=capacity,
        )
        self.now = 0
        self.capacity = capacity
        self._keys = [_INF_KEY] * capacity
        self._events: list = [None] * capacity
        self._count = 0

    def enqueue(self, ev: SpikeEvent) -> bool:
        step = ev.deliver_step
        if step < self.now:
            self._check_causality(step)
        count = self._count
        if count == self.capacity:
            return False
        keys = self._keys
        events = self._events
        keys[count] = step
        events[count] = ev
        self._count = count + 1
        # One insertion-sort sweep over the fixed array.  The array was
        # sorted before the append, so this is a linear pass that carries
        # the new element into place and leaves equal keys stable.
        i = 1
        while i < self.capacity:
            k = keys[i]
            if k < keys[i - 1]:
                e = events[i]
                j = i
                while j > 0 and keys[j - 1] > k:
                    keys[j] = keys[j - 1]
                    events[j] = events[j - 1]
                    j -= 1
                keys[j] = k
                events[j] = e
            i += 1
        return True

    def _pop_raw(self):
        now = self.now
        self.now = now + 1
        if self._count == 0 or self._keys[0] != now:
            return None
        keys = self._keys
        events = self._events
        count = self._count
        w = dw = wtt = 0.0
        k = 0
        while k < count and keys[k] == now:
            ev = events[k]
            ew = ev.weight
            p = ew.primal
            w += p
            dw += ew.tangent
            wtt += p * ev.time_tangent
            k += 1
        # Shift the rest of the fixed array down, backfilling sentinels.
        cap = self.capacity
        i = 0
        top = cap - k
        while i < top:
            keys[i] = keys[i + k]
            events[i] = events[i + k]
            i += 1
        while i < cap:
            keys[i] = _INF_KEY
            events[i] = None
            i += 1
        self._count = count - k
        return (w, dw, wtt)

    def occupancy(self) -> int:
        return self._count


class BitArray32Queue(EventQueue):
    """Pending unit spikes packed into one 32-bit integer.

    Bit i set means a unit spike is due in i steps; the integer shifts
    right once per step and the bit falling off is the delivery flag.
    Primal and tangent share a representation here, so gradient payloads
    are unsupported, as are weighted spikes, heterogeneous delays, and a
    second spike on an already-set bit (dropped).
    """

    __slots__ = ("max_delay_steps", "_bits", "_offset")

    def __init__(self, max_delay_steps: int):
        if not 1 <= max_delay_steps <= 32:
            raise ConfigurationError(
                f"bitarray32 fits a 32-step horizon at most, got max delay "
                f"{max_delay_steps}"
            )
        self.kind = QueueKind.BITARRAY32
        self.capabilities = QueueCapabilities(
            supports_gradients=False,
            supports_heterogeneous_delay=False,
            supports_multi_spike_per_step=False,
            lossy=True,
            capacity=max_delay_steps,
        )
        self.now = 0
        self.max_delay_steps = max_delay_steps
        self._bits = 0
        self._offset = -1  # homogeneous delay offset, fixed by first enqueue

    def enqueue(self, ev: SpikeEvent) -> bool:
        step = ev.deliver_step
        if step < self.now:
            self._check_causality(step)
        w = ev.weight
        if w.primal != 1.0 or w.tangent != 0.0 or ev.time_tangent != 0.0:
            raise CapabilityError(
                "bitarray32 stores bare unit spikes: it does not support "
                "gradients or weighted spikes"
            )
        offset = step - self.now
        if offset >= self.max_delay_steps:
            raise CapabilityError(
                f"bitarray32: delay of {offset + 1} steps exceeds the "
                f"{self.max_delay_steps}-step horizon"
            )
        if self._offset < 0:
            self._offset = offset
        elif offset != self._offset:
            raise CapabilityError(
                "bitarray32 supports a single homogeneous delay: got delay "
                f"offset {offset} after {self._offset}"
            )
        bit = 1 << offset
        if self._bits & bit:
            return False  # no second spike per timestep
        self._bits |= bit
        return True

    def _pop_raw(self):
        self.now += 1
        due = self._bits & 1
        self._bits >>= 1
        if due:
            return (1.0, 0.0, 0.0)
        return None

    def occupancy(self) -> int:
        return self._bits.bit_count()

    def pending_bits(self) -> int:
        return self._bits


class BinaryHeapQueue(EventQueue):
    """Classical array-backed binary min-heap on delivery step.

    Sift-up/sift-down run as conditional while loops, so cost follows
    occupancy.  Ties break on an insertion counter, keeping same-step
    merges in arrival order.  A full heap drops the incoming spike.
    """

    __slots__ = ("capacity", "_heap", "_count", "_seq")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError(
                f"binaryheap capacity must be >= 1, got {capacity}"
            )
        self.kind = QueueKind.BINARYHEAP
        self.capabilities = QueueCapabilities(
            supports_gradients=True,
            supports_heterogeneous_delay=True,
            supports_multi_spike_per_step=True,
            lossy=True,
            capacity=capacity,
        )
        self.now = 0
        self.capacity = capacity
        self._heap: list = [None] * capacity
        self._count = 0
        self._seq = 0

    def enqueue(self, ev: SpikeEvent) -> bool:
        step = ev.deliver_step
        if step < self.now:
            self._check_causality(step)
        if self._count == self.capacity:
            return False
        heap = self._heap
        item = (step, self._seq, ev)
        self._seq += 1
        i = self._count
        self._count = i + 1
        # sift up
        while i > 0:
            parent = (i - 1) >> 1
            if heap[parent] <= item:
                break
            heap[i] = heap[parent]
            i = parent
        heap[i] = item
        return True

    def _pop_min(self):
        heap = self._heap
        top = heap[0]
        last = self._count - 1
        self._count = last
        item = heap[last]
        heap[last] = None
        if last == 0:
            return top
        # sift down
        i = 0
        half = last >> 1
        while i < half:
            child = 2 * i + 1
            right = child + 1
            if right < last and heap[right] < heap[child]:
                child = right
            if item <= heap[child]:
                break
            heap[i] = heap[child]
            i = child
        heap[i] = item
        return top

    def _pop_raw(self):
        now = self.now
        self.now = now + 1
        if self._count == 0 or self._heap[0][0] != now:
            return None
        w = dw = wtt = 0.0
        while self._count and self._heap[0][0] == now:
            _, _, ev = self._pop_min()
            ew = ev.weight
            p = ew.primal
            w += p
            dw += ew.tangent
            wtt += p * ev.time_tangent
        return (w, dw, wtt)

    def occupancy(self) -> int:
        return self._count


class DenseOracleQueue(EventQueue):
    """Unbounded per-step merge slots: the lossless ground truth.

    Never drops, never aliases; stores every event under its delivery
    step and merges in insertion order at pop.  Used to adjudicate every
    other kind.
    """

    __slots__ = ("_slots", "_pending")

    def __init__(self):
        self.kind = QueueKind.DENSEORACLE
        self.capabilities = QueueCapabilities(
            supports_gradients=True,
            supports_heterogeneous_delay=True,
            supports_multi_spike_per_step=True,
            lossy=False,
            capacity=None,
        )
        self.now = 0
        self._slots: dict = {}
        self._pending = 0

    def enqueue(self, ev: SpikeEvent) -> bool:
        step = ev.deliver_step
        if step < self.now:
            self._check_causality(step)
        slot = self._slots.get(step)
        if slot is None:
            self._slots[step] = [ev]
        else:
            slot.append(ev)
        self._pending += 1
        return True

    def _pop_raw(self):
        now = self.now
        self.now = now + 1
        evs = self._slots.pop(now, None)
        if evs is None:
            return None
        self._pending -= len(evs)
        w = dw = wtt = 0.0
        for ev in evs:
            ew = ev.weight
            p = ew.primal
            w += p
            dw += ew.tangent
            wtt += p * ev.time_tangent
        return (w, dw, wtt)

    def occupancy(self) -> int:
        return self._pending


def coerce_kind(kind: Union[QueueKind, str]) -> QueueKind:
    try:
        return QueueKind(kind)
    except ValueError:
        raise ConfigurationError(f"unknown queue kind {kind!r}") from None


def make_queue(
    kind: Union[QueueKind, str],
    capacity: Optional[int] = None,
    max_delay_steps: Optional[int] = None,
) -> EventQueue:
    """Build an empty queue at step 0 with capabilities fixed by kind.

    ``capacity`` is the storage size (slots or events, per kind);
    ``max_delay_steps`` is the delay horizon the queue must cover.  For
    Ring one may be derived from the other (the buffer is the horizon);
    unsupported combinations raise ``ConfigurationError`` naming the
    violated capability.
    """
    kind = coerce_kind(kind)

    if kind is QueueKind.BGPQ:
        raise ConfigurationError(
            "bgpq is registered but unsupported: its value is GPU group "
            "parallelism, which a serial build cannot express"
        )
    if kind is QueueKind.DONOTHING:
        return DoNothingQueue()
    if kind is QueueKind.DENSEORACLE:
        return DenseOracleQueue()

    if kind is QueueKind.RING:
        cap = capacity if capacity is not None else max_delay_steps
        if cap is None:
            raise ConfigurationError("ring needs a capacity or a max delay")
        maxd = max_delay_steps if max_delay_steps is not None else cap
        return RingQueue(cap, maxd)
    if kind is QueueKind.LOSSYRING:
        if capacity is None:
            raise ConfigurationError("lossyring needs a capacity")
        return LossyRingQueue(capacity)
    if kind is QueueKind.BITARRAY32:
        maxd = max_delay_steps if max_delay_steps is not None else capacity
        if maxd is None:
            maxd = 32
        return BitArray32Queue(maxd)
    if kind in (QueueKind.SINGLESPIKEHOLD, QueueKind.SINGLESPIKEDROP):
        if capacity is not None and capacity != 1:
            raise ConfigurationError(
                f"{kind.value} holds exactly one spike; capacity {capacity} "
                "is not configurable"
            )
        return SingleSpikeQueue(hold=kind is QueueKind.SINGLESPIKEHOLD)

    if capacity is None:
        raise ConfigurationError(f"{kind.value} needs a capacity")
    if kind is QueueKind.FIFORING:
        return FIFORingQueue(capacity)
    if kind is QueueKind.SORTEDARRAY:
        return SortedArrayQueue(capacity)
    if kind is QueueKind.BINARYHEAP:
        return BinaryHeapQueue(capacity)
    raise ConfigurationError(f"unknown queue kind {kind!r}")  # pragma: no cover


def kind_capabilities(kind: Union[QueueKind, str]) -> QueueCapabilities:
    """Capability flags for a kind (a pure function of construction args;
    the capacity field reflects a minimal probe instance)."""
    kind = coerce_kind(kind)
    if kind is QueueKind.BGPQ:
        raise ConfigurationError(
            "bgpq is registered but unsupported: its value is GPU group "
            "parallelism, which a serial build cannot express"
        )
    probe = make_queue(kind, capacity=1, max_delay_steps=1)
    return probe.capabilities
