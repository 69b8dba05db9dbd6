"""Exception hierarchy shared by all queue and network components."""


class EventQError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(EventQError):
    """A (kind, capacity, max_delay, ...) combination that cannot be built.

    The message always names the violated capability or parameter.
    """


class CapabilityError(EventQError):
    """An operation asked a queue for a feature its kind does not support."""


class CausalityError(EventQError):
    """An event was enqueued for a step that has already been delivered.

    This is a caller bug: events are never silently reordered.
    """


class GrazingCrossingError(EventQError):
    """Threshold crossing with near-zero voltage slope; the spike-time
    derivative is undefined (division by the crossing slope)."""


class NonSmoothDirectionError(EventQError):
    """A finite-difference probe changed the spike count, so the loss is
    not differentiable along this parameter direction at this epsilon."""
