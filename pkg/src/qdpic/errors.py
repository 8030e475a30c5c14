"""Exception hierarchy shared across the package."""


class InvalidInputError(ValueError):
    """Argument violates a documented precondition."""


class SizeGuardError(InvalidInputError):
    """Input is too large for an exponential-cost routine."""


class InvalidConfigError(InvalidInputError):
    """Mesh or experiment configuration is malformed."""


class FitError(RuntimeError):
    """A fit failed to converge or its design is degenerate.

    ``diagnostics`` carries whatever the optimizer reported so callers can
    log it without re-running.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ReconstructionError(FitError):
    """Maximum-likelihood tomography did not converge; ``best`` holds the best iterate."""

    def __init__(self, message, best=None, diagnostics=None):
        super().__init__(message, diagnostics)
        self.best = best


class DegeneratePostselectionError(RuntimeError):
    """The post-selected subspace has zero probability."""


class UndefinedNormalizationError(RuntimeError):
    """Side-peak coincidences are all zero, so g2 cannot be normalized."""
