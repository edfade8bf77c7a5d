"""Exception types shared across the package.

Plain ``ValueError`` is used for ordinary argument validation; the classes
here mark conditions that callers may want to catch separately (a grid
wavefunction too small to divide by, a refused matrix allocation, an
integrator that could not reach its tolerance).
"""

__all__ = [
    "DegenerateInputError",
    "ResourceLimitError",
    "IntegrationFailure",
]


class DegenerateInputError(ValueError):
    """Input data is degenerate in a way that makes the construction ill posed
    (for example a momentum-grid wavefunction below the division floor at
    points where the shifted numerator is not negligible)."""


class ResourceLimitError(RuntimeError):
    """A requested dense allocation exceeds the configured size cap."""


class IntegrationFailure(RuntimeError):
    """Adaptive integration could not proceed; carries the last good state.

    Attributes
    ----------
    t_last : float
        Time of the last accepted step.
    last_state : numpy.ndarray
        Density matrix at ``t_last``.
    """

    def __init__(self, message, t_last=None, last_state=None):
        super().__init__(message)
        self.t_last = t_last
        self.last_state = last_state
