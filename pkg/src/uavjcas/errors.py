"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Invalid or infeasible configuration."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of a model function."""


class ProtocolError(RuntimeError):
    """Environment API misuse, e.g. stepping a finished episode."""


class TrainingError(RuntimeError):
    """Non-finite loss or diverged update."""
