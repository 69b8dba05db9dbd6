"""Workload generation, wall-clock benchmarking, and result records.

Timing uses the monotonic clock around whole run loops (median of several
reps after warmup); spike/drop counts are deterministic functions of the
seed, so only the wall time varies between reps.  Records carry every
input needed to reproduce a run, and serialize to a fixed CSV/JSON
schema.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import platform
import statistics
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from .dual import DualScalar
from .errors import CapabilityError, ConfigurationError
from .events import QueueKind, SpikeEvent
from .network import (
    NetworkParams,
    PoissonDrive,
    PrimalRSNN,
    SeedDirection,
    build_rsnn,
    simulate,
)
from .queues import coerce_kind, kind_capabilities, make_queue

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "workload", "kind", "capacity", "max_delay", "batch", "lambda", "delay",
    "steps", "reps", "ns_per_step_per_queue", "drop_rate", "spikes_in",
    "spikes_out", "seed", "platform",
]

_UNIT = DualScalar(1.0, 0.0)


def platform_label() -> str:
    """Free-form host tag recorded with every row (never compared)."""
    cpu = ""
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.lower().startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        cpu = platform.processor() or platform.machine()
    label = f"{platform.node()} {cpu}".strip()
    return label.replace(",", ";")


@dataclass(frozen=True)
class PoissonWorkload:
    """Independent Bernoulli(1/lambda) spike streams feeding one queue each.

    ``lambda_steps`` is the mean inter-spike interval in timesteps; at
    most one spike occurs per step per queue.
    """

    lambda_steps: float
    delay_steps: int
    n_queues: int
    t_steps: int
    rng_seed: int

    def __post_init__(self):
        if self.lambda_steps < 1:
            raise ConfigurationError(
                f"lambda must be >= 1 step, got {self.lambda_steps}"
            )
        if self.delay_steps < 1:
            raise ConfigurationError(
                f"delay must be >= 1 step, got {self.delay_steps}"
            )


def gen_poisson(workload: PoissonWorkload) -> List[np.ndarray]:
    """Per-queue arrays of spike steps, deterministic in the seed."""
    p = 1.0 / workload.lambda_steps
    seeds = np.random.SeedSequence(workload.rng_seed).spawn(workload.n_queues)
    out = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        hits = rng.random(workload.t_steps) < p
        out.append(np.nonzero(hits)[0])
    return out


@dataclass
class BenchRecord:
    """One benchmark result row (plus a few non-serialized extras)."""

    workload: str
    kind: str
    capacity: int
    max_delay: int
    batch: int
    lambda_steps: float
    delay_steps: int
    steps: int
    reps: int
    ns_per_step_per_queue: float
    drop_rate: float
    spikes_in: int
    spikes_out: int
    seed: int
    platform: str
    baseline_ns_per_step_per_queue: float = 0.0
    occupancy_mean: float = 0.0
    occupancy_max: int = 0

    def to_row(self) -> dict:
        return {
            "workload": self.workload,
            "kind": self.kind,
            "capacity": self.capacity,
            "max_delay": self.max_delay,
            "batch": self.batch,
            "lambda": self.lambda_steps,
            "delay": self.delay_steps,
            "steps": self.steps,
            "reps": self.reps,
            "ns_per_step_per_queue": self.ns_per_step_per_queue,
            "drop_rate": self.drop_rate,
            "spikes_in": self.spikes_in,
            "spikes_out": self.spikes_out,
            "seed": self.seed,
            "platform": self.platform,
        }


def write_csv(records: Sequence[BenchRecord], out) -> None:
    writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(rec.to_row())


def write_json(records: Sequence[BenchRecord], out) -> None:
    json.dump([rec.to_row() for rec in records], out, indent=2)
    out.write("\n")


def records_to_csv_text(records: Sequence[BenchRecord]) -> str:
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()


def write_voltage_csv(voltages: np.ndarray, out) -> None:
    """Debug dump of a recorded voltage trace, one (step, neuron, value)
    row per sample."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["step", "neuron", "value"])
    for step, row in enumerate(voltages):
        for neuron, value in enumerate(row):
            writer.writerow([step, neuron, repr(float(value))])


def write_raster_csv(raster: Sequence, out) -> None:
    """Debug dump of recorded spikes, one (step, neuron, value) row per
    spike (value is always 1)."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["step", "neuron", "value"])
    for step, neuron in raster:
        writer.writerow([step, neuron, 1])


# -- single-queue Poisson benchmark -----------------------------------------


def _drive_queue(queue, spike_steps, t_steps: int, delay: int):
    """Run one queue through its stream, then drain the in-flight tail;
    returns delivered weight, accepted count, attempted count."""
    pop = queue._pop_raw
    enq = queue.enqueue
    delivered = 0.0
    accepted = 0
    idx = 0
    spikes = spike_steps
    n_spikes = len(spikes)
    for s in range(t_steps):
        raw = pop()
        if raw is not None:
            delivered += raw[0]
        if idx < n_spikes and spikes[idx] == s:
            idx += 1
            if enq(SpikeEvent(s + delay, _UNIT, 0.0)):
                accepted += 1
    for _ in range(delay + 1):
        raw = pop()
        if raw is not None:
            delivered += raw[0]
    return delivered, accepted, n_spikes


def _build_batch(kind, capacity, max_delay, n_queues):
    return [make_queue(kind, capacity, max_delay) for _ in range(n_queues)]


def _aliased_total(queues) -> int:
    return sum(getattr(q, "aliased", 0) for q in queues)


def run_inference_bench(
    kind: Union[QueueKind, str],
    workload: PoissonWorkload,
    capacity: Optional[int] = None,
    max_delay: Optional[int] = None,
    reps: int = 5,
    warmup: int = 2,
    include_baseline: bool = True,
) -> BenchRecord:
    """Median wall time of (pop + enqueue) per step per queue.

    Counts are identical across reps for a fixed seed; the DoNothing
    baseline on the same workload is measured alongside so records carry
    the queue-independent floor.
    """
    if reps < 3:
        raise ConfigurationError(f"reps must be >= 3, got {reps}")
    if warmup < 1:
        raise ConfigurationError(f"warmup must be >= 1, got {warmup}")
    kind = coerce_kind(kind)
    if max_delay is None:
        max_delay = workload.delay_steps
    streams = [arr.tolist() for arr in gen_poisson(workload)]
    times = []
    delivered = accepted = attempted = 0.0
    occ_samples: List[int] = []
    aliased = 0
    for rep in range(warmup + reps):
        queues = _build_batch(kind, capacity, max_delay, workload.n_queues)
        t0 = time.perf_counter_ns()
        totals = [
            _drive_queue(q, st, workload.t_steps, workload.delay_steps)
            for q, st in zip(queues, streams)
        ]
        t1 = time.perf_counter_ns()
        if rep >= warmup:
            times.append(t1 - t0)
        delivered = sum(t[0] for t in totals)
        accepted = sum(t[1] for t in totals)
        attempted = sum(t[2] for t in totals)
        aliased = _aliased_total(queues)
        if rep == 0:
            occ_samples = [q.occupancy() for q in queues]
    dropped = attempted - accepted + aliased
    drop_rate = dropped / attempted if attempted else 0.0

    baseline = 0.0
    if include_baseline and kind is not QueueKind.DONOTHING:
        base = run_inference_bench(
            QueueKind.DONOTHING, workload, reps=reps, warmup=warmup,
            include_baseline=False,
        )
        baseline = base.ns_per_step_per_queue

    per = statistics.median(times) / (workload.t_steps * workload.n_queues)
    actual_cap = queues[0].capabilities.capacity
    return BenchRecord(
        workload="poisson",
        kind=kind.value,
        capacity=capacity if capacity is not None else (actual_cap or 0),
        max_delay=max_delay,
        batch=workload.n_queues,
        lambda_steps=workload.lambda_steps,
        delay_steps=workload.delay_steps,
        steps=workload.t_steps,
        reps=reps,
        ns_per_step_per_queue=per,
        drop_rate=drop_rate,
        spikes_in=int(attempted),
        spikes_out=int(round(delivered)),
        seed=workload.rng_seed,
        platform=platform_label(),
        baseline_ns_per_step_per_queue=baseline,
        occupancy_mean=float(np.mean(occ_samples)) if occ_samples else 0.0,
        occupancy_max=int(max(occ_samples)) if occ_samples else 0,
    )


# -- recurrent network benchmark --------------------------------------------


def default_rsnn_params(
    n: int,
    queue_kind: Union[QueueKind, str],
    rng_seed: int,
    dt: float = 1e-3,
    queue_capacity: Optional[int] = None,
) -> NetworkParams:
    """A stereotyped excitable network: random weights, spread-out delays."""
    rng = np.random.default_rng(rng_seed)
    tau_m = 1.0
    caps = kind_capabilities(queue_kind)
    # delays stay well above dt so finite-difference probes of a few
    # steps never push an edge below the one-step floor
    if caps.supports_heterogeneous_delay and QueueKind(queue_kind) is not QueueKind.BITARRAY32:
        delays = rng.uniform(16 * dt, 30 * dt, size=(n, n))
    else:
        delays = np.full((n, n), 16 * dt)
    weights = rng.normal(0.03, 0.01, size=(n, n))
    np.fill_diagonal(weights, 0.0)
    np.fill_diagonal(delays, dt)
    return NetworkParams(
        n=n,
        weights=weights,
        delays=delays,
        tau_m=tau_m,
        tau_syn=0.5 * tau_m,
        v_th=1.0,
        v_reset=0.0,
        dt=dt,
        queue_kind=queue_kind,
        queue_capacity=queue_capacity,
        v_target=np.full(n, 0.25),
    )


def default_drive(params: NetworkParams, t_steps: int, rng_seed: int) -> PoissonDrive:
    # dense strong pulses: cells charge within a fraction of tau_m and
    # fire irregularly rather than hovering at the threshold
    return PoissonDrive(
        n=params.n,
        mean_interval=16 * params.dt,
        amplitude=12.0,
        pulse_duration=12 * params.dt,
        t_total=t_steps * params.dt,
        rng_seed=rng_seed,
    )


def run_rsnn_bench(
    params: NetworkParams,
    mode: str,
    t_steps: int = 1000,
    reps: int = 5,
    warmup: int = 2,
    rng_seed: int = 0,
) -> BenchRecord:
    """Time the recurrent network, plain or with one tangent seeded.

    ``mode`` is "inference" or "forward_ad"; forward AD requires a
    gradient-capable queue kind and carries the tangent end to end.
    """
    if mode not in ("inference", "forward_ad"):
        raise ConfigurationError(f"mode must be inference|forward_ad, got {mode}")
    kind = coerce_kind(params.queue_kind)
    caps = kind_capabilities(kind)
    if mode == "forward_ad" and not caps.supports_gradients:
        raise CapabilityError(
            f"{kind.value} does not support gradients; forward_ad unavailable"
        )
    drive = default_drive(params, t_steps, rng_seed)
    times = []
    dropped = enqueued = 0
    for rep in range(warmup + reps):
        drive_fn = drive.materialize(t_steps, params.dt)
        if mode == "inference":
            # tangent-free twin: inference carries no gradient state
            net = PrimalRSNN(params)
            t0 = time.perf_counter_ns()
            net.run(t_steps, drive_fn)
            t1 = time.perf_counter_ns()
            dropped, enqueued = net.drop_count, net.enqueued_count
        else:
            state = build_rsnn(params, seed=SeedDirection("weight", 0, 1))
            t0 = time.perf_counter_ns()
            last = simulate(state, t_steps, drive_fn)
            t1 = time.perf_counter_ns()
            dropped, enqueued = last.drop_count, last.enqueued_count
        if rep >= warmup:
            times.append(t1 - t0)
    per = statistics.median(times) / (t_steps * params.n)
    drop_rate = dropped / enqueued if enqueued else 0.0
    return BenchRecord(
        workload=f"rsnn_{mode}",
        kind=kind.value,
        capacity=params.queue_capacity or 0,
        max_delay=int(np.ceil(params.delays.max() / params.dt)),
        batch=params.n,
        lambda_steps=0.0,
        delay_steps=int(np.ceil(params.delays.max() / params.dt)),
        steps=t_steps,
        reps=reps,
        ns_per_step_per_queue=per,
        drop_rate=drop_rate,
        spikes_in=enqueued,
        spikes_out=enqueued - dropped,
        seed=rng_seed,
        platform=platform_label(),
    )


# -- drop rates --------------------------------------------------------------


def measure_drop_rate(
    kind: Union[QueueKind, str],
    lambda_steps: float,
    delay_steps: int,
    t_steps: int,
    rng_seed: int,
    capacity: Optional[int] = None,
    max_delay: Optional[int] = None,
) -> BenchRecord:
    """Exact dropped/enqueued fraction over one seeded Poisson stream.

    LossyRing aliasing counts as loss.  No wall time is measured, so the
    row is byte-reproducible from the seed (the time field stays 0).
    """
    workload = PoissonWorkload(lambda_steps, delay_steps, 1, t_steps, rng_seed)
    if max_delay is None:
        max_delay = delay_steps
    stream = gen_poisson(workload)[0].tolist()
    queue = make_queue(kind, capacity, max_delay)
    delivered, accepted, attempted = _drive_queue(
        queue, stream, t_steps, delay_steps
    )
    aliased = getattr(queue, "aliased", 0)
    dropped = attempted - accepted + aliased
    rate = dropped / attempted if attempted else 0.0
    if attempted < 1000:
        log.warning(
            "drop-rate estimate from only %d spikes; low confidence", attempted
        )
    return BenchRecord(
        workload="droprate",
        kind=coerce_kind(kind).value,
        capacity=capacity if capacity is not None else (queue.capabilities.capacity or 0),
        max_delay=max_delay,
        batch=1,
        lambda_steps=lambda_steps,
        delay_steps=delay_steps,
        steps=t_steps,
        reps=1,
        ns_per_step_per_queue=0.0,
        drop_rate=rate,
        spikes_in=int(attempted),
        spikes_out=int(round(delivered)),
        seed=rng_seed,
        platform=platform_label(),
    )


# -- sweeps ------------------------------------------------------------------


def sweep(
    axis: str,
    grid: Sequence[float],
    kind: Union[QueueKind, str],
    base: PoissonWorkload,
    capacity: Optional[int] = None,
    reps: int = 5,
    warmup: int = 2,
) -> List[BenchRecord]:
    """One record per grid point along batch, capacity, or pressure.

    Pressure (delay/lambda) is swept by scaling the delay at fixed
    lambda, the same convention the drop-rate figures use.
    """
    if not grid:
        raise ConfigurationError("sweep grid is empty")
    if list(grid) != sorted(grid):
        raise ConfigurationError("sweep grid must be ascending")
    records = []
    for point in grid:
        if axis == "batch":
            wl = PoissonWorkload(
                base.lambda_steps, base.delay_steps, int(point),
                base.t_steps, base.rng_seed,
            )
            rec = run_inference_bench(kind, wl, capacity=capacity,
                                      reps=reps, warmup=warmup)
        elif axis == "capacity":
            rec = run_inference_bench(kind, base, capacity=int(point),
                                      max_delay=base.delay_steps,
                                      reps=reps, warmup=warmup)
        elif axis == "pressure":
            delay = max(1, round(point * base.lambda_steps))
            wl = PoissonWorkload(
                base.lambda_steps, delay, base.n_queues,
                base.t_steps, base.rng_seed,
            )
            rec = run_inference_bench(kind, wl, capacity=capacity,
                                      reps=reps, warmup=warmup)
        else:
            raise ConfigurationError(
                f"sweep axis must be batch|capacity|pressure, got {axis!r}"
            )
        rec.workload = f"sweep_{axis}"
        records.append(rec)
    return records
