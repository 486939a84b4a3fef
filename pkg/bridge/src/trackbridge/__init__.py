"""Offline exporter bridging real video into the tracking interchange format."""

from .errors import BridgeError, ManifestError, ModelLoadFailure, VideoDecodeFailure
from .export import export_proposals, export_tracks
from .manifest import ExportManifest

__version__ = "0.1.0"

__all__ = [
    "BridgeError",
    "ExportManifest",
    "ManifestError",
    "ModelLoadFailure",
    "VideoDecodeFailure",
    "export_proposals",
    "export_tracks",
]
