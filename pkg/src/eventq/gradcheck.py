"""Forward-mode vs finite-difference agreement over random directions.

The discrete simulator quantizes delivery steps, so its loss surface
carries O(dt)-amplitude ripples around the continuous landscape the
tangents describe.  A useful central difference therefore (a) must not
change the spike count, (b) must straddle several quantization ripples
(delay epsilons scale with dt), and (c) is only trusted when estimates
at two epsilons agree; directions failing (a) or (c) are reported
unusable rather than compared.  The reported estimate averages the two
epsilon levels, halving ripple noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import NonSmoothDirectionError
from .network import (
    NetworkParams,
    PoissonDrive,
    SeedDirection,
    forward_gradient,
    grad_fd_oracle,
)

# two FD estimates must agree to this factor before a direction counts
FD_CONSISTENCY = 0.3
# gradients below this fraction of the largest sampled direction are
# compared on the ensemble scale instead of their own (near-zero) one
ENSEMBLE_FLOOR = 0.02


@dataclass
class DirectionCheck:
    direction: SeedDirection
    jvp: float
    fd: Optional[float]
    rel_err: Optional[float]
    epsilon: float
    status: str  # "ok" | "non-smooth" | "fd-inconsistent"


def sample_directions(
    n: int, count: int, rng: np.random.Generator
) -> List[SeedDirection]:
    """Random off-diagonal weight/delay directions, half and half."""
    dirs = []
    for k in range(count):
        i = int(rng.integers(0, n))
        j = int(rng.integers(0, n - 1))
        if j >= i:
            j += 1
        dirs.append(SeedDirection("weight" if k % 2 == 0 else "delay", i, j))
    return dirs


def direction_epsilon(
    direction: SeedDirection,
    params: NetworkParams,
    weight_epsilon: float = 1e-3,
    delay_epsilon_steps: float = 4.0,
) -> float:
    if direction.param == "delay":
        return delay_epsilon_steps * params.dt
    return weight_epsilon


def check_directions(
    params: NetworkParams,
    t_steps: int,
    directions: List[SeedDirection],
    drive: Optional[PoissonDrive] = None,
    weight_epsilon: float = 1e-3,
    delay_epsilon_steps: float = 4.0,
) -> List[DirectionCheck]:
    """JVP and screened FD for each direction.

    Unusable directions (spike-count change, or FD estimates that
    disagree between epsilon and 2*epsilon) are flagged, not failed.
    """
    out = []
    for d in directions:
        eps = direction_epsilon(d, params, weight_epsilon, delay_epsilon_steps)
        jvp, _ = forward_gradient(params, d, t_steps, drive)
        try:
            fd_a = grad_fd_oracle(params, d, eps, t_steps, drive)
            fd_b = grad_fd_oracle(params, d, 2 * eps, t_steps, drive)
        except NonSmoothDirectionError:
            out.append(DirectionCheck(d, jvp, None, None, eps, "non-smooth"))
            continue
        if abs(fd_a - fd_b) > FD_CONSISTENCY * max(abs(fd_a), abs(fd_b), 1e-4):
            out.append(
                DirectionCheck(d, jvp, None, None, eps, "fd-inconsistent")
            )
            continue
        fd = 0.5 * (fd_a + fd_b)
        out.append(DirectionCheck(d, jvp, fd, None, eps, "ok"))
    _fill_relative_errors(out)
    return out


def _fill_relative_errors(checks: List[DirectionCheck]) -> None:
    """Relative error against the larger of the pair, floored at a small
    fraction of the strongest sampled gradient (a direction a thousandth
    the size of the dominant one is numerically zero at this dt)."""
    usable = [c for c in checks if c.status == "ok"]
    if not usable:
        return
    scale = max(abs(c.jvp) for c in usable)
    floor = ENSEMBLE_FLOOR * scale
    for c in usable:
        c.rel_err = abs(c.jvp - c.fd) / max(abs(c.jvp), abs(c.fd), floor)


def sample_usable_directions(
    params: NetworkParams,
    t_steps: int,
    count: int,
    rng: np.random.Generator,
    drive: Optional[PoissonDrive] = None,
    max_attempts_factor: int = 3,
    **eps_kw,
) -> List[DirectionCheck]:
    """Keep sampling random directions until ``count`` usable ones are
    collected (or the attempt budget runs out)."""
    usable: List[DirectionCheck] = []
    skipped: List[DirectionCheck] = []
    attempts = 0
    want_weight = True
    while len(usable) < count and attempts < max_attempts_factor * count:
        attempts += 1
        i = int(rng.integers(0, params.n))
        j = int(rng.integers(0, params.n - 1))
        if j >= i:
            j += 1
        d = SeedDirection("weight" if want_weight else "delay", i, j)
        want_weight = not want_weight
        checks = check_directions(params, t_steps, [d], drive, **eps_kw)
        if checks[0].status == "ok":
            usable.append(checks[0])
        else:
            skipped.append(checks[0])
    _fill_relative_errors(usable)
    return usable
