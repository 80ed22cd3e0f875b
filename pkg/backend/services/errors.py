"""Exceptions shared by the service layer and mapped to exit codes / HTTP status by the front ends."""


class NumericalFailure(RuntimeError):
    """A computation could not be completed (non-finite values, step-size underflow, ...)."""


class MonotonicityError(NumericalFailure):
    """The flow integrator could not keep the pseudo-inverse nondecreasing."""


class FlowAborted(NumericalFailure):
    """The L-infinity growth guard stopped a flow run."""

    def __init__(self, message, t=None, max_abs=None):
        super().__init__(message)
        self.t = t
        self.max_abs = max_abs
