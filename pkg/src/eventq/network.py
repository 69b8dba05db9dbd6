"""All-to-all recurrent LIF network routed through selectable delay queues.

One simulation step: pop every queue, jump-and-decay every synapse, move
every membrane, then fan each emitted crossing out to the other neurons
as delayed, weighted events.  Seeding one scalar parameter (a weight, a
delay, or a drive amplitude) with tangent 1 turns a run into a forward-
mode directional derivative of the final-state loss; a central finite
difference over the same discrete system is the matching oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dual import DualScalar, dual_mul
from .errors import (
    ConfigurationError,
    GrazingCrossingError,
    NonSmoothDirectionError,
)
from .events import AggregatedPulse, QueueKind, SpikeEvent, ZERO_PULSE
from .jumps import compose_delay, delivery_step
from .neuro import FirstOrderSynapse, LIFNeuron
from .queues import kind_capabilities, make_queue

_ZERO = DualScalar(0.0, 0.0)

# kinds wired one queue per edge: they either hold a single spike or
# cannot carry per-spike weights, so post-neuron merging happens at pop
_PER_EDGE_KINDS = frozenset(
    {QueueKind.SINGLESPIKEHOLD, QueueKind.SINGLESPIKEDROP, QueueKind.BITARRAY32}
)


@dataclass(frozen=True)
class SeedDirection:
    """Which single scalar carries tangent 1 for a forward-mode run."""

    param: str  # "weight" | "delay" | "drive"
    i: int
    j: int = -1

    def __post_init__(self):
        if self.param not in ("weight", "delay", "drive"):
            raise ConfigurationError(
                f"seed direction must be weight/delay/drive, got {self.param!r}"
            )
        if self.param in ("weight", "delay") and self.j < 0:
            raise ConfigurationError(f"{self.param} seed needs an (i, j) edge")


@dataclass
class NetworkParams:
    """Static description of the network; matrices are (n, n) with the
    diagonal unused (no self loops)."""

    n: int
    weights: np.ndarray
    delays: np.ndarray          # time units; every off-diagonal entry >= dt
    tau_m: float
    tau_syn: float
    v_th: float
    v_reset: float
    dt: float
    queue_kind: Union[QueueKind, str] = QueueKind.RING
    queue_capacity: Optional[int] = None    # None: sized for losslessness
    refractory_steps: int = 0
    v_target: Optional[np.ndarray] = None
    # Deliver each spike as its exact-decay equivalent at the grid
    # point: the synaptic current receives the weight scaled by
    # exp(-(grid time - t_post)/tau_syn) and the membrane receives the
    # matching two-exponential bump, routed through a second queue that
    # carries the membrane-timescale correction.  Sampled states then
    # sit exactly on the continuous trajectory, so the loss is smooth in
    # weights and delays and finite differences see the same landscape
    # the tangents describe.  Turn off to mimic plain step-aligned
    # delivery, e.g. when comparing against payload-free queue kinds.
    exact_delivery: bool = True

    def perturbed(self, direction: SeedDirection, delta: float) -> "NetworkParams":
        """Copy with one scalar parameter shifted (weight/delay only;
        drive amplitudes live on the drive generator)."""
        if direction.param == "weight":
            w = self.weights.copy()
            w[direction.i, direction.j] += delta
            return replace(self, weights=w)
        if direction.param == "delay":
            d = self.delays.copy()
            d[direction.i, direction.j] += delta
            return replace(self, delays=d)
        raise ConfigurationError("drive directions perturb the drive, not params")


class PoissonDrive:
    """Deterministic seeded Poisson current pulses, defined in physical
    time so the same seed describes the same drive at every dt."""

    def __init__(
        self,
        n: int,
        mean_interval: float,
        amplitude: float,
        pulse_duration: float,
        t_total: float,
        rng_seed: int,
    ):
        self.n = n
        self.amplitude = amplitude
        rng = np.random.default_rng(rng_seed)
        self.pulses: List[List[Tuple[float, float]]] = []
        for _ in range(n):
            starts = []
            t = rng.exponential(mean_interval)
            while t < t_total:
                starts.append(t)
                t += pulse_duration + rng.exponential(mean_interval)
            self.pulses.append([(s, s + pulse_duration) for s in starts])

    def materialize(
        self,
        t_steps: int,
        dt: float,
        seeded_neuron: Optional[int] = None,
        amp_delta: Optional[Tuple[int, float]] = None,
    ) -> Callable[[int], Sequence[DualScalar]]:
        """Sample the pulse trains onto a step grid.

        ``seeded_neuron`` puts tangent 1 on that neuron's amplitude;
        ``amp_delta=(i, delta)`` shifts neuron i's amplitude (for finite
        differences).
        """
        active = np.zeros((t_steps, self.n), dtype=bool)
        for i, intervals in enumerate(self.pulses):
            for s, e in intervals:
                lo = min(t_steps, max(0, math.ceil(s / dt)))
                hi = min(t_steps, max(0, math.ceil(e / dt)))
                active[lo:hi, i] = True
        amps = [self.amplitude] * self.n
        if amp_delta is not None:
            amps[amp_delta[0]] += amp_delta[1]
        rows: List[List[DualScalar]] = []
        for m in range(t_steps):
            row = []
            for i in range(self.n):
                if active[m, i]:
                    tangent = 1.0 if seeded_neuron == i else 0.0
                    row.append(DualScalar(amps[i], tangent))
                else:
                    row.append(_ZERO)
            rows.append(row)
        return lambda step: rows[step] if step < t_steps else rows[-1]


class NetworkState:
    """Mutable simulation state: neurons, synapses, queues, counters."""

    def __init__(self, params: NetworkParams, seed: Optional[SeedDirection]):
        self.params = params
        self.seed = seed
        self.step = 0
        self.spike_count = 0
        self.enqueued_count = 0
        self.drop_count = 0
        n = params.n
        self.neurons = [
            LIFNeuron(params.tau_m, params.v_th, params.v_reset,
                      params.refractory_steps)
            for _ in range(n)
        ]
        self.synapses = [FirstOrderSynapse(params.tau_syn) for _ in range(n)]
        self.per_edge = QueueKind(params.queue_kind) in _PER_EDGE_KINDS
        self.queues = None        # per-post list, or per-edge matrix
        self.queues_m = None      # membrane-mode twin queues (exact mode)
        self.w_dual: List[List[DualScalar]] = []
        self.d_dual: List[List[DualScalar]] = []
        self.is_bitarray = QueueKind(params.queue_kind) is QueueKind.BITARRAY32
        self.exact = params.exact_delivery and not self.is_bitarray
        # weight of the membrane eigenmode in v = mode_m + c*(i-mode)
        self.mode_c = (
            params.tau_syn / (params.tau_m - params.tau_syn) if self.exact else 0.0
        )


def _horizon_steps(params: NetworkParams) -> int:
    """Worst-case delivery offset in steps, measured from the loop step
    that emitted the spike: a crossing detected at sample m+1 plus delay
    d lands at most ceil(d/dt) + 1 steps after loop step m."""
    n = params.n
    h = 1
    for i in range(n):
        for j in range(n):
            if i != j:
                h = max(h, math.ceil(params.delays[i, j] / params.dt))
    return h + 1


def build_rsnn(
    params: NetworkParams,
    seed: Optional[SeedDirection] = None,
    rng_seed: int = 0,
) -> NetworkState:
    """Validate the configuration and assemble an initialized network.

    All state starts at rest with zero tangents except the seeded scalar;
    queue capability mismatches (heterogeneous delays into a homogeneous-
    only kind, gradient payloads into bitarray32) fail here, naming the
    offending edge.
    """
    n = params.n
    if n < 2:
        raise ConfigurationError(f"a recurrent network needs n >= 2, got {n}")
    params.weights = np.asarray(params.weights, dtype=float)
    params.delays = np.asarray(params.delays, dtype=float)
    if params.weights.shape != (n, n) or params.delays.shape != (n, n):
        raise ConfigurationError("weights and delays must both be (n, n)")
    kind = QueueKind(params.queue_kind)
    caps = kind_capabilities(kind)
    dt = params.dt

    ref_delay = None
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = params.delays[i, j]
            if d < dt:
                raise ConfigurationError(
                    f"delay on edge ({i},{j}) is {d}, below one step ({dt})"
                )
            if ref_delay is None:
                ref_delay = d
            elif d != ref_delay and not caps.supports_heterogeneous_delay:
                raise ConfigurationError(
                    f"{kind.value} supports homogeneous delays only, but edge "
                    f"({i},{j}) has {d} while another edge has {ref_delay}"
                )
    if kind is QueueKind.BITARRAY32 and ref_delay is not None:
        steps = ref_delay / dt
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigurationError(
                f"bitarray32 needs grid-aligned delays; {ref_delay} is "
                f"{steps} steps"
            )
    if params.exact_delivery and kind is not QueueKind.BITARRAY32:
        if abs(params.tau_m - params.tau_syn) < 1e-3 * params.tau_m:
            raise ConfigurationError(
                "exact delivery splits the membrane/synapse eigenmodes and "
                f"needs tau_m != tau_syn; got {params.tau_m} and "
                f"{params.tau_syn} (set exact_delivery=False)"
            )

    if seed is not None:
        if seed.param == "drive":
            if not 0 <= seed.i < n:
                raise ConfigurationError(f"drive seed neuron {seed.i} out of range")
        else:
            if not (0 <= seed.i < n and 0 <= seed.j < n) or seed.i == seed.j:
                raise ConfigurationError(
                    f"seed edge ({seed.i},{seed.j}) is not a valid off-diagonal edge"
                )
        if seed.param == "delay" and not caps.supports_gradients:
            raise ConfigurationError(
                f"{kind.value} does not support gradients; cannot seed a delay"
            )

    state = NetworkState(params, seed)
    horizon = _horizon_steps(params)

    def dual_matrix(values: np.ndarray, which: str) -> List[List[DualScalar]]:
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                tangent = 0.0
                if (
                    seed is not None
                    and seed.param == which
                    and seed.i == i
                    and seed.j == j
                ):
                    tangent = 1.0
                row.append(DualScalar(float(values[i, j]), tangent))
            out.append(row)
        return out

    state.w_dual = dual_matrix(params.weights, "weight")
    state.d_dual = dual_matrix(params.delays, "delay")

    if state.per_edge:
        if kind is QueueKind.BITARRAY32:
            # a delay of m grid steps delivers at offset m from the
            # post-pop clock, so the bit horizon must be m + 1
            m = math.ceil(float(params.delays[0, 1]) / dt)
            if m + 1 > 32:
                raise ConfigurationError(
                    f"bitarray32 horizon is 32 steps; a {m}-step delay "
                    f"needs {m + 1}"
                )
            state.queues = [
                [make_queue(kind, max_delay_steps=m + 1) if i != j else None
                 for j in range(n)]
                for i in range(n)
            ]
            return state

        def edge_matrix():
            return [
                [make_queue(kind) if i != j else None for j in range(n)]
                for i in range(n)
            ]

        state.queues = edge_matrix()
        if state.exact:
            state.queues_m = edge_matrix()
        return state

    def post_row():
        if kind is QueueKind.RING:
            cap = params.queue_capacity or horizon
            return [make_queue(kind, cap, min(cap, horizon)) for _ in range(n)]
        if kind in (QueueKind.DONOTHING, QueueKind.DENSEORACLE):
            return [make_queue(kind) for _ in range(n)]
        cap = params.queue_capacity or (horizon * (n - 1) + 1)
        return [make_queue(kind, cap) for _ in range(n)]

    state.queues = post_row()
    if state.exact:
        state.queues_m = post_row()
    return state


def network_step(
    state: NetworkState, external_drive: Sequence[DualScalar]
) -> List[Tuple[int, object]]:
    """Advance one step: deliver, integrate, fire, fan out.

    Returns the (neuron, crossing) pairs emitted this step.
    """
    params = state.params
    n = params.n
    dt = params.dt
    if len(external_drive) != n:
        raise ConfigurationError(
            f"drive vector has {len(external_drive)} entries for n={n}"
        )

    def pop_all(queues):
        if not state.per_edge:
            return [q.pop_due() for q in queues]
        pulses = []
        w_dual = state.w_dual
        bitarray = state.is_bitarray
        for j in range(n):
            w = dw = wtt = 0.0
            for i in range(n):
                if i == j:
                    continue
                raw = queues[i][j]._pop_raw()
                if raw is None:
                    continue
                if bitarray:
                    # unit spikes; the edge weight applies at delivery
                    wij = w_dual[i][j]
                    w += wij.primal * raw[0]
                    dw += wij.tangent * raw[0]
                else:
                    w += raw[0]
                    dw += raw[1]
                    wtt += raw[2]
            if w == 0.0 and dw == 0.0 and wtt == 0.0:
                pulses.append(ZERO_PULSE)
            else:
                pulses.append(AggregatedPulse(DualScalar(w, dw), wtt))
        return pulses

    pulses = pop_all(state.queues)
    pulses_m = pop_all(state.queues_m) if state.exact else None

    tau_m = params.tau_m
    tau_syn = params.tau_syn
    c = state.mode_c
    crossings = []
    for j in range(n):
        pulse = pulses[j]
        i_syn = state.synapses[j].step(pulse, dt)
        drive = external_drive[j]
        i_in = DualScalar(i_syn.primal + drive.primal, i_syn.tangent + drive.tangent)
        if state.exact:
            # membrane bump: the two-exponential response of v to the
            # delivered spikes, assembled from the eigenmode sums
            pm = pulses_m[j]
            v_jump = DualScalar(
                c * (pm.weight.primal - pulse.weight.primal),
                c * (pm.weight.tangent + pm.weighted_time_tangent / tau_m
                     - pulse.weight.tangent
                     - pulse.weighted_time_tangent / tau_syn),
            )
            crossing = state.neurons[j].step(i_in, dt, v_jump=v_jump)
        else:
            # plain step-aligned delivery: the membrane slope jumps by
            # w/tau_m at the moving delivery time
            crossing = state.neurons[j].step(
                i_in, dt, delivered_wtt=pulse.weighted_time_tangent
            )
        if crossing is not None:
            crossings.append((j, crossing))

    exact = state.exact
    for i, crossing in crossings:
        state.spike_count += 1
        d_row = state.d_dual[i]
        w_row = state.w_dual[i]
        for j in range(n):
            if j == i:
                continue
            t_post, time_tangent = compose_delay(crossing, d_row[j])
            dstep = delivery_step(t_post, dt, crossing.step)
            queue = state.queues[i][j] if state.per_edge else state.queues[j]
            state.enqueued_count += 1
            if state.is_bitarray:
                ev = SpikeEvent(dstep, DualScalar(1.0, 0.0), 0.0)
                if not queue.enqueue(ev):
                    state.drop_count += 1
                continue
            w = w_row[j]
            if exact:
                phi = dstep * dt - t_post
                ev = SpikeEvent(
                    dstep, w.scale(math.exp(-phi / tau_syn)), time_tangent
                )
                ev_m = SpikeEvent(
                    dstep, w.scale(math.exp(-phi / tau_m)), time_tangent
                )
                twin = state.queues_m[i][j] if state.per_edge else state.queues_m[j]
                twin.enqueue(ev_m)
            else:
                ev = SpikeEvent(dstep, w, time_tangent)
            if not queue.enqueue(ev):
                state.drop_count += 1
    state.step += 1
    return crossings


@dataclass
class SimResult:
    loss: DualScalar
    spike_count: int
    drop_count: int
    enqueued_count: int
    raster: Optional[List[Tuple[int, int]]] = None
    voltages: Optional[np.ndarray] = None


def simulate(
    state: NetworkState,
    t_steps: int,
    drive: Optional[Callable[[int], Sequence[DualScalar]]] = None,
    record: bool = False,
) -> SimResult:
    """Run ``t_steps`` and score the final membrane voltages against the
    target vector: loss = sum_j (v_j(T) - v*_j)^2, accumulated as a dual
    so its tangent is the seeded directional derivative."""
    if t_steps < 1:
        raise ConfigurationError(f"t_steps must be >= 1, got {t_steps}")
    params = state.params
    n = params.n
    zero_drive = [_ZERO] * n
    raster: Optional[List[Tuple[int, int]]] = [] if record else None
    voltages = np.zeros((t_steps, n)) if record else None

    for m in range(t_steps):
        row = drive(m) if drive is not None else zero_drive
        crossings = network_step(state, row)
        if record:
            for j in range(n):
                voltages[m, j] = state.neurons[j].v.primal
            for j, _ in crossings:
                raster.append((m, j))

    target = params.v_target
    loss = DualScalar(0.0, 0.0)
    for j in range(n):
        tj = 0.0 if target is None else float(target[j])
        diff = state.neurons[j].v - DualScalar(tj, 0.0)
        loss = loss + dual_mul(diff, diff)
    return SimResult(
        loss=loss,
        spike_count=state.spike_count,
        drop_count=state.drop_count,
        enqueued_count=state.enqueued_count,
        raster=raster,
        voltages=voltages,
    )


class PrimalRSNN:
    """Tangent-free twin of the dual simulator, for inference timing.

    Mirrors the dual stepping arithmetic expression by expression, so
    its trajectory is bitwise the dual simulator's primal half; it just
    never touches tangents.  The queue objects are the same kinds.
    """

    def __init__(self, params: NetworkParams):
        state = build_rsnn(params)  # validation + queue wiring
        self.params = params
        self.per_edge = state.per_edge
        self.is_bitarray = state.is_bitarray
        self.exact = state.exact
        self.mode_c = state.mode_c
        self.queues = state.queues
        self.queues_m = state.queues_m
        n = params.n
        self.v = [params.v_reset] * n
        self.i_syn = [0.0] * n
        self.refr = [0] * n
        self.w = [[float(params.weights[i, j]) for j in range(n)] for i in range(n)]
        self.d = [[float(params.delays[i, j]) for j in range(n)] for i in range(n)]
        self.step_index = 0
        self.spike_count = 0
        self.enqueued_count = 0
        self.drop_count = 0
        self._k_m = math.exp(-params.dt / params.tau_m)
        self._k_s = math.exp(-params.dt / params.tau_syn)

    def _pop_weight(self, queues, j) -> Tuple[float, float]:
        """(synapse-mode sum, membrane-mode sum) for neuron j."""
        if not self.per_edge:
            raw = queues[j]._pop_raw()
            return (raw[0] if raw else 0.0), 0.0
        total = 0.0
        for i in range(self.params.n):
            if i == j:
                continue
            raw = queues[i][j]._pop_raw()
            if raw is not None:
                if self.is_bitarray:
                    total += self.w[i][j] * raw[0]
                else:
                    total += raw[0]
        return total, 0.0

    def step(self, drive_row: Sequence[float]) -> None:
        params = self.params
        n = params.n
        dt = params.dt
        tau_m = params.tau_m
        k = self._k_m
        crossings = []
        for j in range(n):
            p_s, _ = self._pop_weight(self.queues, j)
            p_m = 0.0
            if self.exact:
                p_m, _ = self._pop_weight(self.queues_m, j)
            i = (self.i_syn[j] + p_s) * self._k_s
            self.i_syn[j] = i
            i_in = i + drive_row[j]
            v = self.v[j]
            if self.exact:
                v = v + self.mode_c * (p_m - p_s)
            v_new = i_in + (v - i_in) * k
            if self.refr[j] > 0:
                self.refr[j] -= 1
            elif v < params.v_th <= v_new:
                v_dot = (i_in - params.v_th) / tau_m
                if v_dot < 1e-9:
                    raise GrazingCrossingError(
                        f"grazing crossing at step {self.step_index + 1}"
                    )
                r = (params.v_th - i_in) / (v - i_in)
                t_spk = self.step_index * dt - tau_m * math.log(r)
                u = (self.step_index + 1) * dt - t_spk
                v_new = i_in + (params.v_reset - i_in) * math.exp(-u / tau_m)
                self.refr[j] = params.refractory_steps
                crossings.append((j, t_spk))
            self.v[j] = v_new
        self.step_index += 1
        tau_syn = params.tau_syn
        for i, t_spk in crossings:
            self.spike_count += 1
            for j in range(n):
                if j == i:
                    continue
                t_post = t_spk + self.d[i][j]
                dstep = delivery_step(t_post, dt, self.step_index)
                queue = self.queues[i][j] if self.per_edge else self.queues[j]
                self.enqueued_count += 1
                if self.is_bitarray:
                    ev = SpikeEvent(dstep, DualScalar(1.0, 0.0), 0.0)
                    if not queue.enqueue(ev):
                        self.drop_count += 1
                    continue
                w = self.w[i][j]
                if self.exact:
                    phi = dstep * dt - t_post
                    ev = SpikeEvent(
                        dstep, DualScalar(w * math.exp(-phi / tau_syn), 0.0), 0.0
                    )
                    twin = (self.queues_m[i][j] if self.per_edge
                            else self.queues_m[j])
                    twin.enqueue(SpikeEvent(
                        dstep, DualScalar(w * math.exp(-phi / tau_m), 0.0), 0.0
                    ))
                else:
                    ev = SpikeEvent(dstep, DualScalar(w, 0.0), 0.0)
                if not queue.enqueue(ev):
                    self.drop_count += 1

    def run(self, t_steps: int, drive: Optional[Callable[[int], Sequence[DualScalar]]]) -> None:
        zero = [0.0] * self.params.n
        for m in range(t_steps):
            if drive is None:
                self.step(zero)
            else:
                self.step([d.primal for d in drive(m)])


def grad_fd_oracle(
    params: NetworkParams,
    direction: SeedDirection,
    epsilon: float,
    t_steps: int,
    drive: Optional[PoissonDrive] = None,
) -> float:
    """Central finite difference of the loss along one parameter direction.

    Runs the same discrete simulation at theta+eps and theta-eps with no
    tangent seeding.  If the two runs disagree on total spike count the
    loss is not differentiable here at this epsilon and the direction is
    reported unusable.
    """
    results = []
    for sign in (+1.0, -1.0):
        delta = sign * epsilon
        if direction.param == "drive":
            p = params
            drive_fn = (
                drive.materialize(t_steps, params.dt, amp_delta=(direction.i, delta))
                if drive is not None
                else None
            )
        else:
            p = params.perturbed(direction, delta)
            drive_fn = (
                drive.materialize(t_steps, params.dt) if drive is not None else None
            )
        st = build_rsnn(p, seed=None)
        try:
            res = simulate(st, t_steps, drive_fn)
        except GrazingCrossingError as exc:
            raise NonSmoothDirectionError(
                f"{direction}: grazing crossing under perturbation {delta}: {exc}"
            ) from exc
        results.append(res)
    plus, minus = results
    if plus.spike_count != minus.spike_count:
        raise NonSmoothDirectionError(
            f"{direction}: spike count changed under +/-{epsilon} "
            f"({plus.spike_count} vs {minus.spike_count})"
        )
    return (plus.loss.primal - minus.loss.primal) / (2.0 * epsilon)


def forward_gradient(
    params: NetworkParams,
    direction: SeedDirection,
    t_steps: int,
    drive: Optional[PoissonDrive] = None,
) -> Tuple[float, SimResult]:
    """Seeded forward-mode run; returns (dloss/dtheta, full result)."""
    seeded_neuron = direction.i if direction.param == "drive" else None
    drive_fn = (
        drive.materialize(t_steps, params.dt, seeded_neuron=seeded_neuron)
        if drive is not None
        else None
    )
    state = build_rsnn(params, seed=direction)
    res = simulate(state, t_steps, drive_fn)
    return res.loss.tangent, res
