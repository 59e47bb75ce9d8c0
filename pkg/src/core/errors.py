"""
Errors - Exception hierarchy shared by the channel model modules
"""

from typing import List, Optional


class ChannelModelError(Exception):
    """Base class for every failure raised by this package"""
    pass


class InvalidConditionError(ChannelModelError):
    """Link condition or link state not usable for the requested operation"""
    pass


class DimensionMismatchError(ChannelModelError):
    """Array shapes do not match the network or codec layout"""
    pass


class ScalerNotFittedError(ChannelModelError):
    """Min-max scaler used before being fitted"""
    pass


class EmptyDatasetError(ChannelModelError):
    """No records (or no eligible records) to work with"""
    pass


class ModelNotTrainedError(ChannelModelError):
    """Generative model is missing a fitted component"""
    pass


class ModelFormatError(ChannelModelError):
    """Model or parameter file is malformed or has an unsupported version"""
    pass


class ConfigError(ChannelModelError):
    """Run configuration could not be loaded or validated"""
    pass


class DatasetFormatError(ChannelModelError):
    """Dataset file does not follow the pinned CSV schema"""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")
        self.row = row
        self.column = column


class RecordValidationError(ChannelModelError):
    """One or more link records violate the domain invariants"""

    def __init__(self, message: str, findings: List[str]):
        super().__init__(message)
        self.findings = findings
