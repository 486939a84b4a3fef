"""Two-pass exporters: run the models over a clip, dump interchange records.

The bridge never selects anything; it captures what the segmenter and the
point tracker produce so the tracking pipeline can replay real-world data
offline and reproducibly.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

from . import records
from .errors import ManifestError, VideoDecodeFailure
from .manifest import ExportManifest
from .segmenter import get_segmenter
from .tracker import farthest_point_sample, get_tracker
from .video import load_frames


def _prompt_mask(manifest: ExportManifest, frame: np.ndarray) -> np.ndarray:
    if manifest.prompt_mask is not None:
        img = cv2.imread(str(manifest.prompt_mask), cv2.IMREAD_GRAYSCALE)
        if img is None:
            raise ManifestError(f"cannot read prompt mask {manifest.prompt_mask}")
        if img.shape != frame.shape[:2]:
            raise ManifestError(
                f"prompt mask {img.shape} does not match frames {frame.shape[:2]}"
            )
        return img > 127
    cx, cy, w, h = manifest.prompt_box
    mask = np.zeros(frame.shape[:2], dtype=bool)
    x0 = max(int(round(cx - w / 2)), 0)
    y0 = max(int(round(cy - h / 2)), 0)
    x1 = min(int(round(cx + w / 2)), frame.shape[1])
    y1 = min(int(round(cy + h / 2)), frame.shape[0])
    mask[y0:y1, x0:x1] = True
    if not mask.any():
        raise ManifestError("prompt box selects no pixels")
    return mask


def _load(manifest: ExportManifest):
    frames = load_frames(manifest.video, manifest.frame_start, manifest.frame_end)
    if not frames:
        raise VideoDecodeFailure(f"{manifest.video}: empty frame range")
    prompt = _prompt_mask(manifest, frames[0])
    return frames, prompt


def _run_segmenter(manifest: ExportManifest, frames, prompt):
    segmenter = get_segmenter(manifest.segmenter)
    segmenter.initialize(frames[0], prompt)
    per_frame = []
    for frame in frames:
        per_frame.append(segmenter.propose(frame))
    return per_frame


def export_proposals(manifest: ExportManifest, out: Path | None = None) -> Path:
    """Per-frame three-proposal records plus the prompt record."""
    frames, prompt = _load(manifest)
    proposals = _run_segmenter(manifest, frames, prompt)
    out_path = Path(out) if out is not None else manifest.out
    if out_path is None:
        raise ManifestError("no output path (manifest `out` or --out)")

    stream = [records.meta_record("sequence")]
    stream.append(records.prompt_record(manifest.frame_start, prompt))
    for offset, frame_proposals in enumerate(proposals):
        frame = manifest.frame_start + offset
        stream.append(records.frame_record(frame))
        for slot, (mask, s_iou, objectness) in enumerate(frame_proposals):
            stream.append(
                records.proposal_record(frame, slot, mask, s_iou, objectness)
            )
    records.write_records(out_path, stream)
    return out_path


def export_tracks(manifest: ExportManifest, out: Path | None = None) -> Path:
    """Backward track bundles for points sampled on each frame's proposals."""
    frames, prompt = _load(manifest)
    proposals = _run_segmenter(manifest, frames, prompt)
    tracker = get_tracker(manifest.tracker)
    out_path = Path(out) if out is not None else manifest.out
    if out_path is None:
        raise ManifestError("no output path (manifest `out` or --out)")

    frame_map = {
        manifest.frame_start + offset: frame for offset, frame in enumerate(frames)
    }
    stream = [records.meta_record("tracks")]
    for offset in range(1, len(frames)):
        origin = manifest.frame_start + offset
        window_lo = max(origin - manifest.track_window, manifest.frame_start)
        targets = list(range(origin - 1, window_lo - 1, -1))
        for slot, (mask, _, _) in enumerate(proposals[offset]):
            points = farthest_point_sample(mask, manifest.track_points)
            xy, vis = tracker.track_backward(frame_map, origin, points, targets)
            stream.append(records.tracks_record(origin, slot, targets, xy, vis))
    records.write_records(out_path, stream)
    return out_path
