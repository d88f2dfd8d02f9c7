"""
Version information for fencewire.

This module provides version metadata for the application.
Import version information from here rather than hardcoding it elsewhere.
"""

__version__ = "0.1.0"
__license__ = "MIT"
__description__ = "Cloud-channel mediated proximity fence and speed supervisor for a robot arm"


def get_version_string() -> str:
    """
    Get formatted version string for display.

    Returns:
        Formatted version string (e.g., "fencewire v0.1.0")
    """
    return f"fencewire v{__version__}"
