"""Error types shared across the package."""


class NumericalError(RuntimeError):
    """A computation failed for numerical reasons.

    Raised when a discretized system is effectively singular, when a
    configuration is degenerate (an absorbing probability indistinguishable
    from 1), when an iteration fails to converge, or when a simulation hits
    its step cap too often for the estimate to be trusted.  Distinct from
    ``ValueError``, which flags invalid arguments before any computation.
    """
