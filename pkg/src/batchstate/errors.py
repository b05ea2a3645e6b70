"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """Inputs whose shapes are individually valid but mutually inconsistent."""


class NotObservableOrIllConditioned(RuntimeError):
    """The normal system could not be factored.

    Raised when the symmetric block factorization of the normal system
    breaks down, which happens exactly when the model pair is unobservable
    or so close to unobservable that the factorization is numerically
    meaningless.  ``block_index`` is the (0-based) time block where the
    pivot failed.
    """

    def __init__(self, block_index, message=None):
        self.block_index = block_index
        if message is None:
            message = (f"symmetric factorization failed at time block "
                       f"{block_index}; the model is unobservable or "
                       "numerically too close to it")
        super().__init__(message)


class DivergenceError(RuntimeError):
    """A simulated trajectory left the bounded region it should live in."""


class FitDivergedError(RuntimeError):
    """The iterative fit diverged; carries a step-size diagnostic."""
