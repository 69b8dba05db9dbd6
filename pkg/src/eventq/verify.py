"""Randomized equivalence checking of queue kinds against the dense oracle.

The driver follows the package-wide stepping protocol: for each step s,
pop first, then enqueue the events created during s.  Two paths exist:

* ``dense_oracle_equivalence`` drives the kind under test next to a live
  ``DenseOracleQueue`` through the public API; good for moderate traces.
* ``run_packed_equivalence`` replays a pre-generated packed trace against
  a vectorized per-step reference (numpy bincount, which accumulates in
  event order and therefore reproduces insertion-order merging bitwise).
  This is what the large randomized acceptance sweep uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .dual import DualScalar
from .errors import CapabilityError
from .events import EventQueue, QueueKind, SpikeEvent
from .queues import DenseOracleQueue, make_queue

REL_TOL = 1e-12


def _component_close(a: float, b: float) -> bool:
    if a == b:
        return True
    return abs(a - b) <= REL_TOL * max(abs(a), abs(b))


def _pulses_close(a: Tuple[float, float, float], b: Tuple[float, float, float]) -> bool:
    return (
        _component_close(a[0], b[0])
        and _component_close(a[1], b[1])
        and _component_close(a[2], b[2])
    )


_ZERO3 = (0.0, 0.0, 0.0)


@dataclass
class EquivalenceReport:
    """Outcome of one trace replay: Equal, or the first differing step."""

    kind: str
    events: int
    steps: int
    equal: bool
    divergence: Optional[Tuple[int, Tuple[float, float, float], Tuple[float, float, float]]]
    enqueued: int = 0
    accepted: int = 0

    def __str__(self) -> str:
        if self.equal:
            return f"{self.kind}: Equal over {self.steps} steps ({self.events} events)"
        step, exp, got = self.divergence
        return (
            f"{self.kind}: diverged at step {step}: expected {exp}, got {got}"
        )


Trace = Sequence[Tuple[int, SpikeEvent]]


def validate_trace(trace: Trace, queue: EventQueue) -> None:
    """Reject traces that would hit a capability *error* mid-comparison.

    Drop-policy behaviour (capacity overflow, aliasing, drop-all) is not
    rejected: for lossy kinds the resulting divergence is the finding.
    """
    caps = queue.capabilities
    last_deliver = -1
    homogeneous_delay = None
    for step, ev in trace:
        delay = ev.deliver_step - step
        if delay < 1:
            raise CapabilityError(
                f"trace enqueues an acausal event at step {step} "
                f"(deliver_step {ev.deliver_step})"
            )
        if not caps.supports_gradients and (
            ev.weight.primal != 1.0
            or ev.weight.tangent != 0.0
            or ev.time_tangent != 0.0
        ):
            raise CapabilityError(
                f"{queue.kind.value} does not support gradient payloads"
            )
        if not caps.supports_heterogeneous_delay:
            if homogeneous_delay is None:
                homogeneous_delay = delay
            elif delay != homogeneous_delay:
                raise CapabilityError(
                    f"{queue.kind.value} requires homogeneous delays; trace "
                    f"mixes {homogeneous_delay} and {delay}"
                )
            if ev.deliver_step < last_deliver:
                raise CapabilityError(
                    f"{queue.kind.value} requires in-order delivery steps"
                )
        if queue.kind is QueueKind.RING and caps.capacity is not None:
            if delay > caps.capacity:
                raise CapabilityError(
                    f"ring trace uses delay {delay} beyond capacity "
                    f"{caps.capacity}"
                )
        if queue.kind is QueueKind.BITARRAY32 and delay > queue.max_delay_steps:
            raise CapabilityError(
                f"bitarray32 trace uses delay {delay} beyond its horizon"
            )
        last_deliver = max(last_deliver, ev.deliver_step)


def dense_oracle_equivalence(
    trace: Trace,
    kind: Union[QueueKind, str],
    capacity: Optional[int] = None,
    max_delay_steps: Optional[int] = None,
) -> EquivalenceReport:
    """Replay ``trace`` through the kind under test and the dense oracle.

    ``trace`` is a list of (enqueue_step, event) pairs; steps must be
    non-decreasing.  Returns Equal or the first differing (step,
    expected, got) pulse.
    """
    queue = make_queue(kind, capacity, max_delay_steps)
    validate_trace(trace, queue)
    oracle = DenseOracleQueue()

    horizon = 0
    for _, ev in trace:
        horizon = max(horizon, ev.deliver_step)

    enqueued = accepted = 0
    i = 0
    n = len(trace)
    divergence = None
    total_steps = horizon + 2
    for s in range(total_steps):
        got = queue._pop_raw() or _ZERO3
        exp = oracle._pop_raw() or _ZERO3
        if got != exp and not _pulses_close(got, exp):
            divergence = (s, exp, got)
            break
        while i < n and trace[i][0] == s:
            ev = trace[i][1]
            enqueued += 1
            if queue.enqueue(ev):
                accepted += 1
            oracle.enqueue(ev)
            i += 1
    return EquivalenceReport(
        kind=queue.kind.value,
        events=enqueued,
        steps=total_steps,
        equal=divergence is None,
        divergence=divergence,
        enqueued=enqueued,
        accepted=accepted,
    )


# -- packed traces: fixed events-per-step layout for fast bulk replay ------


@dataclass
class PackedTrace:
    """A trace with exactly ``per_step`` events on every step, plus the
    precomputed per-step reference pulse (insertion-order sums)."""

    name: str
    per_step: int
    steps: int
    events_by_step: list            # list of tuples of SpikeEvent
    ref_w: list
    ref_dw: list
    ref_wtt: list
    ref_occ: list
    horizon: int

    @property
    def n_events(self) -> int:
        return self.per_step * self.steps


def _pack_reference(deliver, w, dw, wtt, steps, max_delay):
    horizon = steps + max_delay + 2
    ref_w = np.bincount(deliver, weights=w, minlength=horizon)
    ref_dw = np.bincount(deliver, weights=dw, minlength=horizon)
    ref_wtt = np.bincount(deliver, weights=wtt, minlength=horizon)
    occ = np.zeros(horizon, dtype=bool)
    occ[deliver] = True
    return ref_w.tolist(), ref_dw.tolist(), ref_wtt.tolist(), occ.tolist(), horizon


def make_packed_trace(
    name: str,
    n_events: int,
    per_step: int,
    delay_lo: int,
    delay_hi: int,
    seed: int,
    *,
    unit: bool = False,
    with_tangents: bool = True,
) -> PackedTrace:
    """Random packed trace: ``per_step`` events per step, delays uniform in
    [delay_lo, delay_hi] (measured from the creation step), weights drawn
    from a small pool of dual scalars to keep event construction cheap."""
    steps = n_events // per_step
    rng = np.random.default_rng(seed)
    delays = rng.integers(delay_lo, delay_hi + 1, size=steps * per_step)
    deliver = np.repeat(np.arange(steps), per_step) + delays

    if unit:
        w = np.ones(steps * per_step)
        dw = np.zeros(steps * per_step)
        tt = np.zeros(steps * per_step)
        unit_weight = DualScalar(1.0, 0.0)
        zero = 0.0
        events = list(map(SpikeEvent, deliver.tolist(),
                          [unit_weight] * (steps * per_step),
                          [zero] * (steps * per_step)))
    else:
        pool_n = 64
        pw = rng.normal(1.0, 0.25, size=pool_n)
        pt = rng.normal(0.0, 0.5, size=pool_n) if with_tangents else np.zeros(pool_n)
        ptt = rng.normal(0.0, 1.0, size=pool_n) if with_tangents else np.zeros(pool_n)
        wsel = rng.integers(0, pool_n, size=steps * per_step)
        tsel = rng.integers(0, pool_n, size=steps * per_step)
        w = pw[wsel]
        dw = pt[wsel]
        tt = ptt[tsel]
        pool = [DualScalar(a, b) for a, b in zip(pw.tolist(), pt.tolist())]
        ptt_l = ptt.tolist()
        events = list(map(
            SpikeEvent,
            deliver.tolist(),
            map(pool.__getitem__, wsel.tolist()),
            map(ptt_l.__getitem__, tsel.tolist()),
        ))

    ref_w, ref_dw, ref_wtt, ref_occ, horizon = _pack_reference(
        deliver, w, dw, w * tt, steps, delay_hi
    )
    grouped = list(zip(*[iter(events)] * per_step)) if per_step > 1 else [
        (e,) for e in events
    ]
    return PackedTrace(
        name=name,
        per_step=per_step,
        steps=steps,
        events_by_step=grouped,
        ref_w=ref_w,
        ref_dw=ref_dw,
        ref_wtt=ref_wtt,
        ref_occ=ref_occ,
        horizon=horizon,
    )


def run_packed_equivalence(queue: EventQueue, trace: PackedTrace) -> EquivalenceReport:
    """Replay a packed trace; compare each delivered pulse to the reference."""
    ref_w = trace.ref_w
    ref_dw = trace.ref_dw
    ref_wtt = trace.ref_wtt
    ref_occ = trace.ref_occ
    pop = queue._pop_raw
    enq = queue.enqueue
    divergence = None
    s = 0
    for evs in trace.events_by_step:
        got = pop()
        if got is None:
            # an absent pulse only matches a slot that sums to exact zero
            if ref_occ[s]:
                exp = (ref_w[s], ref_dw[s], ref_wtt[s])
                if exp != _ZERO3:
                    divergence = (s, exp, _ZERO3)
                    break
        elif got[0] != ref_w[s] or got[1] != ref_dw[s] or got[2] != ref_wtt[s]:
            exp = (ref_w[s], ref_dw[s], ref_wtt[s])
            if not _pulses_close(got, exp):
                divergence = (s, exp, got)
                break
        for ev in evs:
            enq(ev)
        s += 1
    if divergence is None:
        for s in range(trace.steps, trace.horizon):
            got = pop() or _ZERO3
            exp = (ref_w[s], ref_dw[s], ref_wtt[s])
            if got != exp and not _pulses_close(got, exp):
                divergence = (s, exp, got)
                break
    return EquivalenceReport(
        kind=queue.kind.value,
        events=trace.n_events,
        steps=trace.horizon,
        equal=divergence is None,
        divergence=divergence,
        enqueued=trace.n_events,
        accepted=trace.n_events,
    )


def run_pairwise_equivalence(
    qa: EventQueue, qb: EventQueue, trace: PackedTrace
) -> EquivalenceReport:
    """Drive two kinds over the same trace; they must accept and deliver
    identically (used for SingleSpikeHold == FIFORing(1))."""
    pop_a = qa._pop_raw
    pop_b = qb._pop_raw
    enq_a = qa.enqueue
    enq_b = qb.enqueue
    divergence = None
    s = 0
    for evs in trace.events_by_step:
        got_a = pop_a() or _ZERO3
        got_b = pop_b() or _ZERO3
        if got_a != got_b and not _pulses_close(got_a, got_b):
            divergence = (s, got_a, got_b)
            break
        for ev in evs:
            if enq_a(ev) != enq_b(ev):
                divergence = (s, (1.0, 0.0, 0.0), (0.0, 0.0, 0.0))
                break
        if divergence is not None:
            break
        s += 1
    if divergence is None:
        for s in range(trace.steps, trace.horizon):
            got_a = pop_a() or _ZERO3
            got_b = pop_b() or _ZERO3
            if got_a != got_b and not _pulses_close(got_a, got_b):
                divergence = (s, got_a, got_b)
                break
    label = f"{qa.kind.value}=={qb.kind.value}"
    return EquivalenceReport(
        kind=label,
        events=trace.n_events,
        steps=trace.horizon,
        equal=divergence is None,
        divergence=divergence,
    )


# -- the randomized sweep configurations ------------------------------------

# name -> (queue factory args, trace shape).  Trace shapes are chosen so
# the lossless kinds can never overflow: worst-case in-flight is bounded
# by per_step * delay_hi.
SWEEP_CONFIGS = {
    "ring": dict(kind="ring", capacity=64, max_delay=64,
                 per_step=4, delay_lo=1, delay_hi=60, unit=False),
    "sortedarray": dict(kind="sortedarray", capacity=6, max_delay=None,
                        per_step=2, delay_lo=1, delay_hi=2, unit=False),
    "binaryheap": dict(kind="binaryheap", capacity=8, max_delay=None,
                       per_step=2, delay_lo=1, delay_hi=4, unit=False),
    "fiforing": dict(kind="fiforing", capacity=32, max_delay=None,
                     per_step=4, delay_lo=5, delay_hi=5, unit=False),
    "singlespikehold": dict(kind="singlespikehold", capacity=None, max_delay=None,
                            per_step=2, delay_lo=3, delay_hi=3, unit=False),
    "bitarray32": dict(kind="bitarray32", capacity=None, max_delay=31,
                       per_step=1, delay_lo=7, delay_hi=7, unit=True),
}


def equivalence_task(args) -> Tuple[str, int, bool, Optional[tuple]]:
    """One randomized run; picklable so sweeps can fan out over processes."""
    name, n_events, seed = args
    cfg = SWEEP_CONFIGS[name]
    trace = make_packed_trace(
        name,
        n_events,
        cfg["per_step"],
        cfg["delay_lo"],
        cfg["delay_hi"],
        seed,
        unit=cfg["unit"],
    )
    if name == "singlespikehold":
        qa = make_queue("singlespikehold")
        qb = make_queue("fiforing", capacity=1)
        report = run_pairwise_equivalence(qa, qb, trace)
    else:
        queue = make_queue(cfg["kind"], cfg["capacity"], cfg["max_delay"])
        report = run_packed_equivalence(queue, trace)
    return (name, seed, report.equal, report.divergence)
