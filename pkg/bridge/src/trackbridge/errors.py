"""Exporter error types."""


class BridgeError(Exception):
    """Base class for exporter failures."""


class ManifestError(BridgeError):
    """Export manifest missing or malformed."""


class ModelLoadFailure(BridgeError):
    """Requested model identifier is unknown or its backend is unavailable."""


class VideoDecodeFailure(BridgeError):
    """Video path cannot be opened or yields no frames in range."""
