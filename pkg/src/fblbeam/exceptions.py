class InfeasibleError(ValueError):
    """Requested SINR targets cannot be met (or need more power than allowed).

    ``required_power`` carries the minimal total power when it is known.
    """

    def __init__(self, message, required_power=None):
        super().__init__(message)
        self.required_power = required_power


class DegenerateChannelError(ValueError):
    """Channel matrix is rank deficient for the requested operation."""


class ConfigError(ValueError):
    """Invalid experiment or system configuration."""
