"""Independent brute-force oracles used to freeze expected values.

Everything here deliberately avoids the package's queue classes: the
hold-queue oracle is an event-level renewal scan, the delay oracle a
per-step dict, so agreement with the real implementations is evidence,
not tautology.
"""

from __future__ import annotations

import math
from typing import Dict, List, Sequence, Tuple

import numpy as np


def mc_hold_drop_rate(
    lambda_steps: float, delay_steps: int, t_steps: int, rng_seed: int
) -> Tuple[float, float, int]:
    """Drop rate of a hold-one-spike buffer under Bernoulli(1/lambda)
    arrivals, scanned arrival-by-arrival.

    A spike occupies the buffer until its delivery step; delivery frees
    the slot before any same-step arrival.  Returns (rate, standard
    error, arrivals).
    """
    rng = np.random.default_rng(rng_seed)
    arrivals = np.nonzero(rng.random(t_steps) < 1.0 / lambda_steps)[0]
    busy_until = -1
    dropped = 0
    for t in arrivals:
        if t >= busy_until:
            busy_until = t + delay_steps
        else:
            dropped += 1
    n = len(arrivals)
    if n == 0:
        return 0.0, 0.0, 0
    rate = dropped / n
    se = math.sqrt(max(rate * (1.0 - rate), 1e-12) / n)
    return rate, se, n


def dense_delay_oracle(
    enqueues: Sequence[Tuple[int, int, float]], horizon: int
) -> List[float]:
    """Per-step delivered weight for (enqueue_step, deliver_step, weight)
    triples under a lossless delay structure."""
    slots: Dict[int, float] = {}
    for _, deliver, w in enqueues:
        slots[deliver] = slots.get(deliver, 0.0) + w
    return [slots.get(s, 0.0) for s in range(horizon)]


def fd_tangent(f, theta: float, eps: float) -> float:
    """Plain central difference, the standard check for any dual-number
    composite."""
    return (f(theta + eps) - f(theta - eps)) / (2.0 * eps)
