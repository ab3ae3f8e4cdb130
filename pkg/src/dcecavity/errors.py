"""Exception types raised by the simulator."""


class DCEError(Exception):
    """Base class for all simulator errors."""


class ConfigError(DCEError, ValueError):
    """Invalid system or run configuration."""


class NormDriftExceeded(DCEError):
    """Total probability drifted further from unity than allowed."""

    def __init__(self, drift, time=None):
        self.drift = drift
        self.time = time
        where = "" if time is None else f" at t={time:.6g}"
        super().__init__(f"norm drift {drift:.3e}{where}")


class TruncationOverflow(DCEError):
    """Occupation near the Fock cutoff is too large; raise K_max."""

    def __init__(self, tail, fock_cutoff, time=None):
        self.tail = tail
        self.fock_cutoff = fock_cutoff
        self.time = time
        where = "" if time is None else f" at t={time:.6g}"
        super().__init__(
            f"tail occupation {tail:.3e} above threshold with K_max={fock_cutoff}{where}"
        )


class NonFiniteAmplitude(DCEError):
    """An amplitude became NaN or infinite during integration."""


class ZeroCoupling(DCEError, ValueError):
    """A vanishing off-diagonal coupling invalidates the null-vector analysis."""


class ConvergenceError(DCEError):
    """Iterative eigensolver did not converge within its iteration cap."""
