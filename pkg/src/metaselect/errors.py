class MetaselectError(ValueError):
    """Base class for input and contract violations raised by metaselect."""


class DataError(MetaselectError):
    """Malformed or unusable dataset contents."""


class SchemaError(MetaselectError):
    """Column layout does not match what a fitted object expects."""


class RegistryError(MetaselectError):
    """Invalid taxonomy registry or rule tree."""
