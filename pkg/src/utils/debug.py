"""Debug configuration utility"""
from config import settings

_debug_override = None


def is_debug() -> bool:
    """Check if debug mode (post-generation validation) is enabled"""
    if _debug_override is not None:
        return _debug_override
    return settings.debug


def set_debug(enabled) -> None:
    """Force debug mode on/off for this process (None restores the setting)"""
    global _debug_override
    _debug_override = enabled
