"""Frame access for real video: an image directory or any OpenCV-decodable file."""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

from .errors import VideoDecodeFailure

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}


def load_frames(path: Path, start: int, end: int) -> list[np.ndarray]:
    """Frames [start, end] inclusive as BGR uint8 arrays."""
    if path.is_dir():
        files = sorted(
            p for p in path.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES
        )
        if end >= len(files):
            raise VideoDecodeFailure(
                f"{path} holds {len(files)} frames, range ends at {end}"
            )
        frames = []
        for p in files[start : end + 1]:
            img = cv2.imread(str(p), cv2.IMREAD_COLOR)
            if img is None:
                raise VideoDecodeFailure(f"cannot decode {p}")
            frames.append(img)
        return frames

    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise VideoDecodeFailure(f"cannot open {path}")
    frames = []
    index = 0
    try:
        while index <= end:
            ok, img = cap.read()
            if not ok:
                break
            if index >= start:
                frames.append(img)
            index += 1
    finally:
        cap.release()
    if len(frames) != end - start + 1:
        raise VideoDecodeFailure(
            f"{path} yielded {len(frames)} frames for range {start}..{end}"
        )
    return frames
