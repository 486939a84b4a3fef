"""Pyramidal Lucas-Kanade backward point tracking with visibility flags.

Points are spread over a proposal mask with the same deterministic
farthest-point rule the tracker uses (centroid-nearest seed, greedy
max-min, row-major tie-breaks), then chained backward frame by frame.
A point stays visible while LK reports success, the forward-backward
re-track lands within a pixel, and the position stays inside the frame.
"""

from __future__ import annotations

import numpy as np

from .errors import ModelLoadFailure

FB_ERROR_LIMIT = 1.0  # px


def farthest_point_sample(mask: np.ndarray, n: int) -> np.ndarray:
    """(k, 2) float array of (x, y); k = min(n, foreground)."""
    ys, xs = np.nonzero(mask)
    coords = np.stack([xs, ys], axis=1).astype(np.float64)
    if coords.shape[0] == 0 or n < 1:
        return np.zeros((0, 2))
    count = min(n, coords.shape[0])
    centroid = coords.mean(axis=0)
    seed = int(np.argmin(((coords - centroid) ** 2).sum(axis=1)))
    chosen = [seed]
    min_d2 = ((coords - coords[seed]) ** 2).sum(axis=1)
    for _ in range(1, count):
        nxt = int(np.argmax(min_d2))
        chosen.append(nxt)
        min_d2 = np.minimum(min_d2, ((coords - coords[nxt]) ** 2).sum(axis=1))
    return coords[chosen]


class PyramidalLKTracker:
    """Backward tracks between consecutive grayscale frames."""

    model_id = "lk-pyr-v1"

    def __init__(self):
        try:
            import cv2
        except ImportError as exc:  # pragma: no cover - cv2 is a hard dep
            raise ModelLoadFailure(f"opencv backend unavailable: {exc}") from exc
        self._cv2 = cv2
        self._params = dict(
            winSize=(15, 15),
            maxLevel=2,
            criteria=(cv2.TERM_CRITERIA_EPS | cv2.TERM_CRITERIA_COUNT, 20, 0.01),
        )

    def _gray(self, frame: np.ndarray) -> np.ndarray:
        return self._cv2.cvtColor(frame, self._cv2.COLOR_BGR2GRAY)

    def track_backward(
        self, frames: dict[int, np.ndarray], origin: int, points: np.ndarray,
        targets: list[int],
    ) -> tuple[np.ndarray, np.ndarray]:
        """(xy, visible) over `targets` (descending from origin-1).

        xy is (N, K, 2), visible (N, K); columns follow `targets`.
        """
        cv2 = self._cv2
        n, k = points.shape[0], len(targets)
        xy = np.zeros((n, k, 2))
        vis = np.zeros((n, k), dtype=bool)
        if n == 0 or k == 0:
            return xy, vis
        height, width = frames[origin].shape[:2]
        current = points.astype(np.float32).reshape(-1, 1, 2)
        alive = np.ones(n, dtype=bool)
        frame_index = origin
        for j, target in enumerate(targets):
            while frame_index > target:
                img_a = self._gray(frames[frame_index])
                img_b = self._gray(frames[frame_index - 1])
                back, status, _ = cv2.calcOpticalFlowPyrLK(
                    img_a, img_b, current, None, **self._params
                )
                fwd, status2, _ = cv2.calcOpticalFlowPyrLK(
                    img_b, img_a, back, None, **self._params
                )
                fb_err = np.linalg.norm(
                    (fwd - current).reshape(-1, 2), axis=1
                )
                ok = (
                    (status.reshape(-1) == 1)
                    & (status2.reshape(-1) == 1)
                    & (fb_err < FB_ERROR_LIMIT)
                )
                pos = back.reshape(-1, 2)
                inside = (
                    (pos[:, 0] >= 0) & (pos[:, 0] <= width - 1)
                    & (pos[:, 1] >= 0) & (pos[:, 1] <= height - 1)
                )
                alive &= ok & inside
                current = back
                frame_index -= 1
            xy[:, j] = current.reshape(-1, 2)
            vis[:, j] = alive
        return xy, vis


_TRACKERS = {PyramidalLKTracker.model_id: PyramidalLKTracker}


def get_tracker(model_id: str) -> PyramidalLKTracker:
    if model_id not in _TRACKERS:
        raise ModelLoadFailure(f"unknown tracker model {model_id!r}")
    return _TRACKERS[model_id]()
