"""Exception types shared across the package."""


class QFilterError(Exception):
    """Base class for all qfilter errors."""


class ConfigError(QFilterError):
    """Invalid model or run configuration."""


class NonHermitianError(QFilterError):
    """Input matrix violates a Hermiticity precondition."""


class NegativityError(QFilterError):
    """Matrix has an eigenvalue below the negativity tolerance.

    For density matrices this usually means the filter has diverged
    (state estimate left the physical cone).
    """


class NotUnitaryError(QFilterError):
    """Control matrix fails the unitarity check."""


class RecordFormatError(QFilterError):
    """Malformed or truncated one-bit record file."""


class EnsembleFailure(QFilterError):
    """Every trajectory in an ensemble hit the instability flag."""

    def __init__(self, n_unstable, n_total):
        super().__init__(
            f"all trajectories unstable ({n_unstable}/{n_total}); "
            "reduce the time step (raise steps-per-cycle)"
        )
        self.n_unstable = n_unstable
        self.n_total = n_total
