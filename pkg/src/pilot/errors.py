"""Exception types raised by the public API."""


class PilotError(ValueError):
    """Base class for all errors raised by this package."""


class IngestError(PilotError):
    """Raised when a data table cannot be ingested (missing values, bad target, ...)."""


class PredictError(PilotError):
    """Raised when prediction inputs do not match the trained model."""


class SchemaError(PilotError):
    """Raised when a model file is malformed or has an unsupported version."""
