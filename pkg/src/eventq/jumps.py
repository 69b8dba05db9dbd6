"""Spike-time tangents and post-synaptic jump rules.

The chain from a presynaptic threshold crossing to a postsynaptic state
update carries three derivative pieces:

1. the crossing time moves when the voltage trajectory moves
   (``detect_crossing``: dt/dtheta = -(dv/dtheta)/vdot at the crossing);
2. a parameter-dependent delay adds its own tangent on top
   (``compose_delay``);
3. the delivered jump shifts the receiving state both directly (weight)
   and through *when* it lands: a jump of w at a moving time t changes
   the post-state derivative by (xdot_before - xdot_after) * dt/dtheta,
   which for first-order decay toward zero is +w/tau (``apply_jump``).

The jump tangent is evaluated from the general before/after form with
the state derivatives taken from the decay dynamics, not from a
hard-coded sign; the single-spike closed form fixes the sign and the
tests hold it there.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional, Tuple

from .dual import DualScalar
from .errors import ConfigurationError, GrazingCrossingError
from .events import AggregatedPulse

# Below this crossing slope (state units per time unit) the spike-time
# derivative 1/vdot is reported as an error instead of a huge number.
VDOT_FLOOR = 1e-9


class ThresholdCrossing(NamedTuple):
    """A positive threshold crossing between two consecutive samples."""

    step: int          # step index of the first sample at/above threshold
    t_spk: float       # crossing time, linearly interpolated
    v_dot: float       # trajectory slope at the crossing
    dt_dtheta: float   # derivative of the crossing time w.r.t. the seed


class SynapseJumpSpec(NamedTuple):
    """How a delivered spike hits a first-order state: jump w, decay tau."""

    tau: float
    w: DualScalar


def detect_crossing(
    v_prev: DualScalar,
    v_curr: DualScalar,
    v_th: float,
    step: int,
    dt: float,
) -> Optional[ThresholdCrossing]:
    """Positive crossing of ``v_th`` between the samples at step-1 and step.

    Returns None unless v_prev < v_th <= v_curr.  The crossing time and
    the voltage tangent at the crossing are linear blends of the two
    samples; the slope estimate is the one-step backward difference.
    A near-zero slope has no defined spike-time derivative and raises.
    """
    if dt <= 0.0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if not (v_prev.primal < v_th <= v_curr.primal):
        return None
    dv = v_curr.primal - v_prev.primal
    v_dot = dv / dt
    if v_dot < VDOT_FLOOR:
        raise GrazingCrossingError(
            f"grazing crossing at step {step}: slope {v_dot:.3e} below "
            f"{VDOT_FLOOR:.0e}, spike-time gradient undefined"
        )
    frac = (v_th - v_prev.primal) / dv
    t_spk = (step - 1) * dt + frac * dt
    dvdtheta = v_prev.tangent + frac * (v_curr.tangent - v_prev.tangent)
    dt_dtheta = -dvdtheta / v_dot
    return ThresholdCrossing(step, t_spk, v_dot, dt_dtheta)


def compose_delay(crossing: ThresholdCrossing, d: DualScalar) -> Tuple[float, float]:
    """Delivery time and its tangent: the delay's own tangent adds on."""
    if d.primal < 0.0:
        raise ConfigurationError(f"delay must be non-negative, got {d.primal}")
    return crossing.t_spk + d.primal, crossing.dt_dtheta + d.tangent


def delivery_step(t_post: float, dt: float, emit_step: int) -> int:
    """Discretize a delivery time onto the step grid.

    ceil(t_post/dt), floored at one step after the emitting step so a
    spike can never act on the step that produced it.
    """
    return max(math.ceil(t_post / dt), emit_step + 1)


def apply_jump(x: DualScalar, spec: SynapseJumpSpec, time_tangent: float) -> DualScalar:
    """One delivered spike on a first-order state.

    Primal: x + w.  Tangent: the weight's own tangent plus the moving-
    delivery-time term (xdot_before - xdot_after) * time_tangent, with
    both slopes taken from xdot = -x/tau around the jump.
    """
    if spec.tau <= 0.0:
        raise ConfigurationError(f"tau must be positive, got {spec.tau}")
    w = spec.w
    x_after = x.primal + w.primal
    xdot_before = -x.primal / spec.tau
    xdot_after = -x_after / spec.tau
    tangent = x.tangent + w.tangent + (xdot_before - xdot_after) * time_tangent
    return DualScalar(x_after, tangent)


def apply_jump_pulse(x: DualScalar, pulse: AggregatedPulse, tau: float) -> DualScalar:
    """A merged pulse on a first-order state; equals summing the per-spike
    jumps (the per-spike time terms are w_i/tau * tt_i, whose sum is the
    pulse's weighted time tangent over tau)."""
    if tau <= 0.0:
        raise ConfigurationError(f"tau must be positive, got {tau}")
    pw = pulse.weight
    return DualScalar(
        x.primal + pw.primal,
        x.tangent + pw.tangent + pulse.weighted_time_tangent / tau,
    )


def heaviside(x: float) -> float:
    """Step nonlinearity used for spike emission: 1 at and above zero."""
    return 1.0 if x >= 0.0 else 0.0


def superspike_grad(x: float) -> float:
    """Smooth stand-in derivative for the step nonlinearity, 1/(|x|+1)^2.

    Provided for comparison against the exact event-based rules; nothing
    in this package trains with it.
    """
    a = abs(x) + 1.0
    return 1.0 / (a * a)
