import random

import pytest

from eventq import CapabilityError, DualScalar, SpikeEvent, make_queue
from eventq.queues import DenseOracleQueue
from eventq.verify import (
    SWEEP_CONFIGS,
    dense_oracle_equivalence,
    equivalence_task,
    make_packed_trace,
    run_packed_equivalence,
    run_pairwise_equivalence,
    validate_trace,
)

from oracles import dense_delay_oracle


def random_trace(rng, n_events, delay_lo, delay_hi, steps, homogeneous=None,
                 unit=False, tangents=True):
    trace = []
    enq_steps = sorted(rng.randrange(steps) for _ in range(n_events))
    for s in enq_steps:
        d = homogeneous or rng.randint(delay_lo, delay_hi)
        if unit:
            evt = SpikeEvent(s + d, DualScalar(1.0, 0.0), 0.0)
        else:
            w = DualScalar(rng.uniform(-2, 2), rng.uniform(-1, 1) if tangents else 0.0)
            evt = SpikeEvent(s + d, w, rng.uniform(-1, 1) if tangents else 0.0)
        trace.append((s, evt))
    return trace


def test_ring_matches_oracle_heterogeneous():
    rng = random.Random(0)
    trace = random_trace(rng, 5000, 1, 60, 4000)
    report = dense_oracle_equivalence(trace, "ring", 64, 64)
    assert report.equal, report


def test_fifo_matches_oracle_homogeneous():
    rng = random.Random(1)
    trace = random_trace(rng, 10_000, 1, 1, 8000, homogeneous=7)
    report = dense_oracle_equivalence(trace, "fiforing", 64)
    assert report.equal, report


@pytest.mark.parametrize("kind,cap", [("sortedarray", 64), ("binaryheap", 64)])
def test_exact_heterogeneous_kinds_match_oracle(kind, cap):
    rng = random.Random(2)
    trace = random_trace(rng, 3000, 1, 12, 3000)
    report = dense_oracle_equivalence(trace, kind, cap)
    assert report.equal, report


def test_bitarray_matches_oracle_unit_homogeneous():
    rng = random.Random(3)
    # at most one event per step for the no-multi-spike kind
    steps = sorted(rng.sample(range(8000), 2000))
    trace = [(s, SpikeEvent(s + 9, DualScalar(1.0, 0.0), 0.0)) for s in steps]
    report = dense_oracle_equivalence(trace, "bitarray32", max_delay_steps=16)
    assert report.equal, report


def test_donothing_diverges_at_first_delivery():
    trace = [(0, SpikeEvent(3, DualScalar(1.0, 0.0), 0.0))]
    report = dense_oracle_equivalence(trace, "donothing")
    assert not report.equal
    assert report.divergence[0] == 3


def test_lossyring_divergence_is_reported():
    rng = random.Random(4)
    trace = random_trace(rng, 500, 1, 30, 400)
    report = dense_oracle_equivalence(trace, "lossyring", 4)
    assert not report.equal
    step, expected, got = report.divergence
    assert expected != got


def test_validate_rejects_heterogeneous_for_fifo():
    trace = [
        (0, SpikeEvent(5, DualScalar(1.0, 0.0), 0.0)),
        (1, SpikeEvent(4, DualScalar(1.0, 0.0), 0.0)),
    ]
    with pytest.raises(CapabilityError, match="homogeneous"):
        dense_oracle_equivalence(trace, "fiforing", 8)


def test_validate_rejects_gradients_for_bitarray():
    trace = [(0, SpikeEvent(3, DualScalar(1.0, 0.5), 0.0))]
    with pytest.raises(CapabilityError, match="gradient"):
        dense_oracle_equivalence(trace, "bitarray32", max_delay_steps=8)


def test_validate_rejects_acausal_trace():
    q = make_queue("ring", 8, 8)
    with pytest.raises(CapabilityError, match="acausal"):
        validate_trace([(5, SpikeEvent(5, DualScalar(1.0, 0.0), 0.0))], q)


# -- packed fast path ---------------------------------------------------------

def test_packed_reference_matches_dense_oracle_kind_bitwise():
    """The vectorized reference must be the DenseOracle kind, bit for bit."""
    trace = make_packed_trace("ring", 20_000, 4, 1, 60, seed=11)
    oracle = DenseOracleQueue()
    s = 0
    for evs in trace.events_by_step:
        raw = oracle._pop_raw()
        got = raw if raw is not None else (0.0, 0.0, 0.0)
        assert got == (trace.ref_w[s], trace.ref_dw[s], trace.ref_wtt[s])
        for e in evs:
            oracle.enqueue(e)
        s += 1
    for s in range(trace.steps, trace.horizon):
        raw = oracle._pop_raw()
        got = raw if raw is not None else (0.0, 0.0, 0.0)
        assert got == (trace.ref_w[s], trace.ref_dw[s], trace.ref_wtt[s])


@pytest.mark.parametrize("name", sorted(SWEEP_CONFIGS))
def test_sweep_configs_pass_at_module_scale(name):
    _, _, equal, divergence = equivalence_task((name, 20_000, 123))
    assert equal, (name, divergence)


def test_packed_equivalence_catches_a_wrong_step():
    """A ring one slot too small aliases, and the checker reports the
    first wrong delivery step."""
    trace = make_packed_trace("ring", 4000, 4, 1, 60, seed=5)
    lossy = make_queue("lossyring", 32)
    report = run_packed_equivalence(lossy, trace)
    assert not report.equal
    assert report.divergence is not None


# -- cross-kind equivalences ----------------------------------------------------

def test_hold_equals_fifo1_on_lossy_traces():
    trace = make_packed_trace("pair", 30_000, 1, 4, 4, seed=9)
    qa = make_queue("singlespikehold")
    qb = make_queue("fiforing", 1)
    report = run_pairwise_equivalence(qa, qb, trace)
    assert report.equal, report


def test_heap_and_sorted_agree_on_identical_traces():
    trace = make_packed_trace("hs", 20_000, 2, 1, 10, seed=21)
    qa = make_queue("binaryheap", 32)
    qb = make_queue("sortedarray", 32)
    report = run_pairwise_equivalence(qa, qb, trace)
    assert report.equal, report


# -- invariants -----------------------------------------------------------------

@pytest.mark.parametrize("kind,cap", [
    ("fiforing", 3), ("sortedarray", 3), ("binaryheap", 3),
    ("singlespikehold", None),
])
def test_accepted_events_are_delivered_faithfully(kind, cap):
    """Loss is the only permitted deviation: replaying only the accepted
    events through the oracle reproduces the lossy kind exactly.  (Drop
    policy evicts accepted events, so it gets the subset check below.)"""
    rng = random.Random(31)
    q = make_queue(kind, cap)
    homogeneous = 6 if kind == "fiforing" else None
    accepted_trace = []
    delivered = []
    for s in range(400):
        raw = q._pop_raw()
        delivered.append(raw if raw is not None else (0.0, 0.0, 0.0))
        if rng.random() < 0.7:
            d = homogeneous or rng.randint(1, 10)
            evt = SpikeEvent(s + d, DualScalar(rng.uniform(0.5, 2.0), 0.0), 0.0)
            if q.enqueue(evt):
                accepted_trace.append((s, evt))
    for s in range(400, 420):
        raw = q._pop_raw()
        delivered.append(raw if raw is not None else (0.0, 0.0, 0.0))

    oracle = DenseOracleQueue()
    i = 0
    for s in range(420):
        raw = oracle._pop_raw()
        expected = raw if raw is not None else (0.0, 0.0, 0.0)
        assert delivered[s] == expected, s
        while i < len(accepted_trace) and accepted_trace[i][0] == s:
            oracle.enqueue(accepted_trace[i][1])
            i += 1


def test_drop_policy_delivers_a_faithful_subset():
    """SingleSpikeDrop may evict an accepted spike, but whatever it
    delivers is one of the accepted events, at exactly its step."""
    rng = random.Random(33)
    q = make_queue("singlespikedrop")
    accepted = set()
    delivered = []
    for s in range(400):
        raw = q._pop_raw()
        if raw is not None:
            delivered.append((s, raw[0]))
        if rng.random() < 0.6:
            d = rng.randint(1, 10)
            w = round(rng.uniform(0.5, 2.0), 6)
            if q.enqueue(SpikeEvent(s + d, DualScalar(w, 0.0), 0.0)):
                accepted.add((s + d, w))
    for s in range(400, 420):
        raw = q._pop_raw()
        if raw is not None:
            delivered.append((s, raw[0]))
    assert delivered  # the scenario actually delivers something
    for step, w in delivered:
        assert (step, w) in accepted


def test_pulse_merge_is_order_independent():
    rng = random.Random(17)
    events = [
        SpikeEvent(5, DualScalar(rng.uniform(-2, 2), rng.uniform(-1, 1)),
                   rng.uniform(-1, 1))
        for _ in range(50)
    ]

    def merged(order):
        q = make_queue("ring", 8, 8)
        for e in order:
            q.enqueue(e)
        for _ in range(5):
            pulse = q.pop_due()
        return q.pop_due()

    base = merged(events)
    for _ in range(5):
        shuffled = events[:]
        rng.shuffle(shuffled)
        other = merged(shuffled)
        assert other.weight.primal == pytest.approx(base.weight.primal, rel=1e-12)
        assert other.weight.tangent == pytest.approx(base.weight.tangent, rel=1e-12)
        assert other.weighted_time_tangent == pytest.approx(
            base.weighted_time_tangent, rel=1e-12
        )


def test_against_independent_dense_delay_oracle():
    """Cross-check the whole stack against the test-local brute-force
    delay oracle (dict of per-step sums)."""
    rng = random.Random(41)
    triples = []
    q = make_queue("ring", 32, 32)
    horizon = 300
    delivered = []
    for s in range(horizon):
        pulse = q.pop_due()
        delivered.append(pulse.weight.primal)
        if s < 250 and rng.random() < 0.8:
            d = rng.randint(1, 30)
            w = rng.uniform(-1, 1)
            q.enqueue(SpikeEvent(s + d, DualScalar(w, 0.0), 0.0))
            triples.append((s, s + d, w))
    expected = dense_delay_oracle(triples, horizon)
    assert delivered == pytest.approx(expected, rel=1e-12, abs=1e-15)
