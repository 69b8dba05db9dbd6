"""Forward-mode scalars: a value paired with one directional derivative.

Every gradient-carrying quantity in this package is a ``DualScalar``:
``primal`` is the regular value, ``tangent`` is its derivative along a
single seeded parameter direction.  Constants carry tangent 0, the seeded
parameter carries tangent 1, and all arithmetic pushes tangents forward
by the usual linearity/product rules.  Everything is 64-bit; one tangent
per value (multi-directional gradients come from repeated seeded runs).
"""

from __future__ import annotations

import math
from typing import NamedTuple

from .errors import ConfigurationError


class DualScalar(NamedTuple):
    """A primal value and its directional derivative w.r.t. one parameter."""

    primal: float
    tangent: float = 0.0

    def __add__(self, other: "DualScalar") -> "DualScalar":  # type: ignore[override]
        return DualScalar(self.primal + other.primal, self.tangent + other.tangent)

    def __sub__(self, other: "DualScalar") -> "DualScalar":
        return DualScalar(self.primal - other.primal, self.tangent - other.tangent)

    def __neg__(self) -> "DualScalar":
        return DualScalar(-self.primal, -self.tangent)

    def __mul__(self, other: "DualScalar") -> "DualScalar":  # type: ignore[override]
        return DualScalar(
            self.primal * other.primal,
            self.tangent * other.primal + self.primal * other.tangent,
        )

    def scale(self, c: float) -> "DualScalar":
        """Multiply by a plain constant (tangent scales with it)."""
        return DualScalar(c * self.primal, c * self.tangent)

    def is_finite(self) -> bool:
        return math.isfinite(self.primal) and math.isfinite(self.tangent)


ZERO = DualScalar(0.0, 0.0)
ONE = DualScalar(1.0, 0.0)


def constant(value: float) -> DualScalar:
    """A value that does not depend on the seeded parameter."""
    return DualScalar(float(value), 0.0)


def seeded(value: float) -> DualScalar:
    """The seeded parameter itself: tangent exactly 1."""
    return DualScalar(float(value), 1.0)


def dual_add(a: DualScalar, b: DualScalar) -> DualScalar:
    return DualScalar(a.primal + b.primal, a.tangent + b.tangent)


def dual_mul(a: DualScalar, b: DualScalar) -> DualScalar:
    return DualScalar(
        a.primal * b.primal, a.tangent * b.primal + a.primal * b.tangent
    )


def dual_exp_decay(x: DualScalar, dt: float, tau: float) -> DualScalar:
    """Exact relaxation of ``xdot = -x/tau`` over ``dt``.

    Both primal and tangent shrink by the same factor exp(-dt/tau): the
    decay is linear in the state and ``tau`` is a fixed constant, never a
    differentiation target.
    """
    if tau <= 0.0:
        raise ConfigurationError(f"decay time constant must be positive, got {tau}")
    if dt < 0.0:
        raise ConfigurationError(f"elapsed time must be non-negative, got {dt}")
    k = math.exp(-dt / tau)
    return DualScalar(x.primal * k, x.tangent * k)
