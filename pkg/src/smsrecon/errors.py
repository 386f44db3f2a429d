"""Exception hierarchy shared across the toolkit.

The CLI maps these onto its exit codes: ConfigError -> 2,
DataFormatError / plain I/O failures -> 3, NumericalError -> 4.
"""


class SmsReconError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SmsReconError):
    """Invalid or inconsistent configuration values."""


class DataFormatError(SmsReconError):
    """Malformed .smsc / .smsw file or violated header invariant."""


class NumericalError(SmsReconError):
    """Non-finite state or diverged solve; carries diagnostic context."""


class CalibrationError(SmsReconError):
    """Kernel calibration failed (underdetermined or singular system)."""
