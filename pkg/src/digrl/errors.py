"""Exception types shared across the package."""


class DigRLError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DigRLError):
    """Invalid terrain spec, sim config, or hyperparameter value."""


class SamplingError(DigRLError):
    """Initial-contact sampling outside the grid extent."""


class StateError(DigRLError):
    """Operation applied to a state that cannot accept it (e.g. stepping a halted bucket)."""


class NumericError(DigRLError):
    """NaN/Inf encountered in commands, losses, or gradients."""


class DatasetFormatError(DigRLError):
    """Dataset or checkpoint file failed to parse or validate."""
