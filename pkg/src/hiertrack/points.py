"""Fine motion estimation: point sampling, backward tracks, RBF soft masks.

The expensive half of the hierarchy. Points are spread over a proposal mask
with farthest point sampling, propagated backward through a pluggable track
source, and turned into a soft mask per historical frame whose Dice against
that frame's stored prediction yields the temporal-consistency score.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyMask
from .geometry import BinaryMask, SoftMask, dice_dense, mask_to_bbox

SIGMA_FLOOR = 2.0


@dataclass(frozen=True, eq=False)
class PointSet:
    """(N, 2) float array of (x, y) pixel coordinates on one frame."""

    points: np.ndarray
    frame_index: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class TrackBundle:
    """Backward trajectories: xy is (N, K, 2), visible is (N, K).

    Column j corresponds to frames[j]; frames are the historical frame
    indices that were requested, most recent first.
    """

    origin_frame: int
    frames: tuple[int, ...]
    xy: np.ndarray
    visible: np.ndarray

    def __post_init__(self):
        xy = np.asarray(self.xy, dtype=np.float64)
        vis = np.asarray(self.visible, dtype=bool)
        k = len(self.frames)
        if xy.shape != (vis.shape[0], k, 2) or vis.shape[1] != k:
            raise ValueError("bundle arrays must be (N, K, 2) and (N, K)")
        object.__setattr__(self, "xy", xy)
        object.__setattr__(self, "visible", vis)
        object.__setattr__(self, "frames", tuple(int(f) for f in self.frames))


class TrackSource(ABC):
    """Supplier of backward point tracks for one sequence."""

    max_frames: int = 64
    deterministic: bool = True

    @abstractmethod
    def propagate(
        self,
        origin_frame: int,
        points: PointSet,
        frames: Sequence[int],
        slot: int | None = None,
    ) -> TrackBundle:
        """Track points from origin_frame back to each requested frame.

        slot identifies which proposal the points were sampled on; replay
        sources use it to look up pre-computed bundles.
        """


def farthest_point_sample(m: BinaryMask, n: int, frame_index: int = 0) -> PointSet:
    """Deterministic FPS over the foreground pixels.

    Seeds at the pixel nearest the mask centroid, then greedily adds the
    pixel maximizing the minimum distance to the selected set. All ties
    break to the smallest row-major index. Returns min(n, area) points.
    """
    if m.is_empty:
        raise EmptyMask("cannot sample points on an empty mask")
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    ys, xs = np.nonzero(m.to_dense())  # row-major order
    coords = np.stack([xs, ys], axis=1).astype(np.float64)
    count = min(n, coords.shape[0])

    centroid = coords.mean(axis=0)
    d2_centroid = ((coords - centroid) ** 2).sum(axis=1)
    seed = int(np.argmin(d2_centroid))  # argmin returns the first minimum

    chosen = [seed]
    min_d2 = ((coords - coords[seed]) ** 2).sum(axis=1)
    for _ in range(1, count):
        nxt = int(np.argmax(min_d2))
        chosen.append(nxt)
        d2 = ((coords - coords[nxt]) ** 2).sum(axis=1)
        min_d2 = np.minimum(min_d2, d2)
    return PointSet(points=coords[chosen], frame_index=frame_index)


def rbf_reconstruct(
    points: np.ndarray | Sequence[Sequence[float]],
    width: int,
    height: int,
    sigma: float,
) -> SoftMask:
    """Sum of Gaussian kernels centred on the points, clamped to [0, 1].

    The isotropic kernel factorizes over x and y, so the grid is a single
    (height, N) @ (N, width) product. An empty point list gives all zeros.
    """
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        return SoftMask(width=width, height=height, values=np.zeros((height, width)))
    inv = 1.0 / (2.0 * sigma * sigma)
    ex = np.exp(-((np.arange(width)[None, :] - pts[:, 0:1]) ** 2) * inv)
    ey = np.exp(-((np.arange(height)[None, :] - pts[:, 1:2]) ** 2) * inv)
    acc = ey.T @ ex
    return SoftMask(width=width, height=height, values=np.clip(acc, 0.0, 1.0))


def rbf_sigma(proposal: BinaryMask, sigma_scale: float) -> float:
    """Kernel bandwidth: sigma_scale x proposal box diagonal, floored at 2 px."""
    return max(SIGMA_FLOOR, sigma_scale * mask_to_bbox(proposal).diagonal)


def fine_score(
    proposal: BinaryMask,
    source: TrackSource,
    history: Sequence[tuple[int, BinaryMask]],
    cfg,
    origin_frame: int,
    slot: int | None = None,
) -> float:
    """Temporal-consistency score of one proposal against stored predictions.

    Samples cfg.n_points FPS points on the proposal, propagates them back
    to the history frames, reconstructs a soft mask from the visible points
    per frame, binarizes it at cfg.rbf_level and takes the Dice against the
    stored mask. Returns the mean over frames with at least one visible
    point, or 0.0 when no frame has any.

    Raises EmptyMask for an empty proposal and propagates TrackSourceFailure
    from the source (the caller downgrades to coarse-only scoring).
    """
    if proposal.is_empty:
        raise EmptyMask("cannot fine-score an empty proposal")
    pts = farthest_point_sample(proposal, cfg.n_points, frame_index=origin_frame)
    frames = [frame for frame, _ in history]
    bundle = source.propagate(origin_frame, pts, frames, slot=slot)
    sigma = rbf_sigma(proposal, cfg.sigma_scale)

    scores = []
    for j, (_, stored_mask) in enumerate(history):
        vis = bundle.visible[:, j]
        if not vis.any():
            continue
        soft = rbf_reconstruct(
            bundle.xy[vis, j], proposal.width, proposal.height, sigma
        )
        scores.append(dice_dense(soft.binarize(cfg.rbf_level), stored_mask.to_dense()))
    if not scores:
        return 0.0
    return float(np.mean(scores))
