"""Synapse and neuron building blocks with exact-decay integration.

States are dual scalars, so every step moves primal and tangent together.
Between events everything relaxes exponentially (the exact solution of
the first-order dynamics, leaving no integrator error in gradient
checks); deliveries land as instantaneous jumps through the rules in
``jumps``.
"""

from __future__ import annotations

import math
from collections import deque
from typing import Optional

from .dual import DualScalar, dual_exp_decay, dual_mul
from .errors import ConfigurationError, GrazingCrossingError
from .events import AggregatedPulse
from .jumps import VDOT_FLOOR, ThresholdCrossing, apply_jump_pulse


class FirstOrderSynapse:
    """Current that jumps on spike arrival and decays with tau_syn."""

    __slots__ = ("i_syn", "tau_syn")

    def __init__(self, tau_syn: float, i_syn: DualScalar = DualScalar(0.0, 0.0)):
        if tau_syn <= 0.0:
            raise ConfigurationError(f"tau_syn must be positive, got {tau_syn}")
        self.tau_syn = tau_syn
        self.i_syn = i_syn

    def step(self, pulse: AggregatedPulse, dt: float) -> DualScalar:
        """Apply the step's merged deliveries, then decay over dt.

        A pulse delivered for step k acts at time k*dt, the sample the
        state currently sits on, and the whole post-jump value relaxes
        across the step.  This ordering keeps the discrete trajectory on
        the closed-form solution when delivery times are grid-aligned.
        """
        i = self.i_syn
        if pulse.weight.primal != 0.0 or pulse.weight.tangent != 0.0 \
                or pulse.weighted_time_tangent != 0.0:
            i = apply_jump_pulse(i, pulse, self.tau_syn)
        i = dual_exp_decay(i, dt, self.tau_syn)
        self.i_syn = i
        return i


class DoubleExpSynapse:
    """Conductance synapse with separate rise/fall states.

    Both states receive every spike and decay with their own constants;
    the synaptic current is (A - B) * (v_post - E_syn).  Equal time
    constants degenerate (the difference vanishes), so construction
    requires a relative gap of at least 1e-3.
    """

    __slots__ = ("a", "b", "tau_a", "tau_b", "e_syn")

    def __init__(self, tau_a: float, tau_b: float, e_syn: float = 0.0):
        if tau_a <= 0.0 or tau_b <= 0.0:
            raise ConfigurationError("synapse time constants must be positive")
        # the 1e-9 slack keeps the documented 1e-3 boundary usable in
        # the face of float subtraction noise
        if abs(tau_a - tau_b) < 1e-3 * tau_b * (1.0 - 1e-9):
            raise ConfigurationError(
                f"tau_a={tau_a} and tau_b={tau_b} are too close; the "
                "two-exponential response degenerates"
            )
        self.tau_a = tau_a
        self.tau_b = tau_b
        self.e_syn = e_syn
        self.a = DualScalar(0.0, 0.0)
        self.b = DualScalar(0.0, 0.0)

    def step(self, pulse: AggregatedPulse, dt: float) -> None:
        a = self.a
        b = self.b
        if not pulse.is_zero():
            a = apply_jump_pulse(a, pulse, self.tau_a)
            b = apply_jump_pulse(b, pulse, self.tau_b)
        self.a = dual_exp_decay(a, dt, self.tau_a)
        self.b = dual_exp_decay(b, dt, self.tau_b)

    def current(self, v_post: DualScalar) -> DualScalar:
        drive = v_post - DualScalar(self.e_syn, 0.0)
        return dual_mul(self.a - self.b, drive)


class LIFNeuron:
    """Leaky integrate-and-fire cell with hard reset and optional refractory.

    Membrane dynamics vdot = (-v + i_in)/tau_m, integrated exactly with
    the input held constant over the step.  On a positive threshold
    crossing the cell emits the crossing (for downstream delivery) and
    resets; the reset is itself a state jump, so the post-reset tangent
    is (vdot_before - vdot_after) * dt_dtheta evaluated at the crossing.
    """

    __slots__ = ("v", "tau_m", "v_th", "v_reset", "refractory_steps",
                 "refractory_remaining", "step_index")

    def __init__(
        self,
        tau_m: float,
        v_th: float,
        v_reset: float = 0.0,
        refractory_steps: int = 0,
    ):
        if tau_m <= 0.0:
            raise ConfigurationError(f"tau_m must be positive, got {tau_m}")
        if v_th <= v_reset:
            raise ConfigurationError(
                f"threshold {v_th} must sit above reset {v_reset}"
            )
        self.tau_m = tau_m
        self.v_th = v_th
        self.v_reset = v_reset
        self.refractory_steps = refractory_steps
        self.refractory_remaining = 0
        self.step_index = 0
        self.v = DualScalar(v_reset, 0.0)

    def step(
        self,
        i_in: DualScalar,
        dt: float,
        delivered_wtt: float = 0.0,
        v_jump: Optional[DualScalar] = None,
    ) -> Optional[ThresholdCrossing]:
        """Advance one step under input ``i_in`` (held constant).

        ``delivered_wtt`` is the weighted time tangent of any spike jump
        the input current received at the start of this step.  The
        membrane is continuous there, but its slope jumps by w/tau_m at
        the moving delivery time, so the voltage tangent picks up the
        indirect correction -wtt/tau_m before the step integrates.

        ``v_jump`` instead applies an explicit delivery bump to the
        membrane (used by exact sub-step delivery, which carries the
        timing sensitivity inside the bump's own tangent).
        """
        self.step_index += 1
        v = self.v
        if v_jump is not None:
            v = v + v_jump
        elif delivered_wtt != 0.0:
            v = DualScalar(v.primal, v.tangent - delivered_wtt / self.tau_m)
        k = math.exp(-dt / self.tau_m)
        v_new = DualScalar(
            i_in.primal + (v.primal - i_in.primal) * k,
            i_in.tangent + (v.tangent - i_in.tangent) * k,
        )
        if self.refractory_remaining > 0:
            self.refractory_remaining -= 1
            self.v = v_new
            return None
        crossing = self._exact_crossing(v, v_new, i_in, dt)
        if crossing is not None:
            # Hard reset pins the trajectory at v_reset at the crossing
            # time, then the cell relaxes toward the input for the rest
            # of the step.  Evaluating that remainder exactly keeps the
            # sampled voltage a smooth function of the crossing time
            # (and of every parameter it depends on); the decay factor
            # carries d/dtheta exp(-u/tau) = exp(-u/tau) * dt/dtheta/tau
            # since u shrinks when the crossing moves later.
            u = self.step_index * dt - crossing.t_spk
            ku = math.exp(-u / self.tau_m)
            k_dual = DualScalar(ku, ku * crossing.dt_dtheta / self.tau_m)
            rest = DualScalar(self.v_reset - i_in.primal, -i_in.tangent)
            decayed = dual_mul(rest, k_dual)
            v_new = DualScalar(
                i_in.primal + decayed.primal, i_in.tangent + decayed.tangent
            )
            self.refractory_remaining = self.refractory_steps
        self.v = v_new
        return crossing

    def _exact_crossing(
        self, v0: DualScalar, v1: DualScalar, i_in: DualScalar, dt: float
    ) -> Optional[ThresholdCrossing]:
        """Threshold crossing by inverting the step's closed form.

        Within the step v(t) = i + (v0 - i) exp(-(t - t0)/tau), so the
        crossing time is t0 + tau ln((v0 - i)/(v_th - i)), exact given
        the constant-input assumption; the generic two-sample linear
        rule would add an O(dt) bias to both the time and its tangent.
        """
        v_th = self.v_th
        if not (v0.primal < v_th <= v1.primal):
            return None
        tau = self.tau_m
        v_dot = (i_in.primal - v_th) / tau
        if v_dot < VDOT_FLOOR:
            raise GrazingCrossingError(
                f"grazing crossing at step {self.step_index}: slope "
                f"{v_dot:.3e} below {VDOT_FLOOR:.0e}"
            )
        num = DualScalar(v_th - i_in.primal, -i_in.tangent)
        den = v0 - i_in
        # dual ratio r = num/den, then t* = t0 - tau ln(r)
        r_p = num.primal / den.primal
        r_t = (num.tangent * den.primal - num.primal * den.tangent) / (
            den.primal * den.primal
        )
        t0 = (self.step_index - 1) * dt
        t_spk = t0 - tau * math.log(r_p)
        dt_dtheta = -tau * r_t / r_p
        return ThresholdCrossing(self.step_index, t_spk, v_dot, dt_dtheta)


class ContinuousDelayLine:
    """Ring buffer that delays a densely sampled signal by d.

    The buffer holds d/dt samples (rounded, at least one), so the primal
    path is a plain delayed read.  When the delay itself carries a
    tangent, delaying y(t) means reading y(t - d), and the read point
    moves with d: the output tangent picks up an extra
    -(dy/dt at the read point) * (dd/dtheta) term, with the slope
    estimated by the backward difference of the two oldest samples.
    """

    __slots__ = ("d", "dt", "length", "_buf")

    def __init__(self, d: DualScalar, dt: float):
        if dt <= 0.0:
            raise ConfigurationError(f"dt must be positive, got {dt}")
        if d.primal < 0.0:
            raise ConfigurationError(f"delay must be non-negative, got {d.primal}")
        self.d = d
        self.dt = dt
        self.length = max(1, round(d.primal / dt))
        zero = DualScalar(0.0, 0.0)
        self._buf = deque([zero] * (self.length + 1), maxlen=self.length + 1)

    def step(self, y_in: DualScalar, dt: Optional[float] = None) -> DualScalar:
        """Push one input sample, return the delayed output sample."""
        if dt is None:
            dt = self.dt
        buf = self._buf
        buf.append(y_in)
        oldest = buf[0]
        slope = (buf[1].primal - oldest.primal) / dt
        return DualScalar(
            oldest.primal,
            oldest.tangent - slope * self.d.tangent,
        )


def lif_firing_period(tau_m: float, v_th: float, i_drive: float) -> float:
    """Closed-form inter-spike interval for constant suprathreshold drive
    from reset at zero: tau_m * ln(i / (i - v_th))."""
    if i_drive <= v_th:
        raise ConfigurationError("drive must exceed threshold for tonic firing")
    return -tau_m * math.log(1.0 - v_th / i_drive)
