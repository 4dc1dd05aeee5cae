class ConfigurationError(ValueError):
    """Invalid experiment, trace or model configuration."""


class FitError(ValueError):
    """Training series too short for the requested forecaster."""


class ProtocolError(RuntimeError):
    """An operation was called out of order (e.g. forecast before fit)."""


class MeasurementError(ValueError):
    """A cold-start observation was rejected (non-finite or non-positive)."""


class AccountingError(RuntimeError):
    """Replica bookkeeping in the simulator no longer balances."""
