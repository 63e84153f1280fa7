"""Exception and warning types shared across the package."""


class ResourceLimitError(RuntimeError):
    """A requested computation exceeds a configured size cap."""


class DegenerateInstanceError(ValueError):
    """An operation received an identically zero Hamiltonian."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""


class ReducibleChainWarning(UserWarning):
    """A transition matrix has more than one unit-modulus eigenvalue."""
