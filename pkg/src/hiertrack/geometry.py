"""Pixel-grid masks, boxes and the geometric scores built on them.

Masks are canonically stored as row-major run-length encodings so they are
cheap to ship through the interchange format; dense views are decoded lazily
and cached. Boxes use a continuous (cx, cy, w, h) convention where a pixel
at integer coordinate (x, y) occupies the unit square centred on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyContour, EmptyMask


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: centre (cx, cy), extent (w, h) in pixels."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"BBox.{name} must be finite, got {v!r}")
        if self.w < 0 or self.h < 0:
            raise ValueError(f"BBox extent must be >= 0, got w={self.w}, h={self.h}")

    def corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2) with x1 <= x2 and y1 <= y2."""
        return (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def diagonal(self) -> float:
        return math.hypot(self.w, self.h)


def iou_box(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0.0 when the union is empty."""
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0.0 or ih <= 0.0:
        inter = 0.0
    else:
        inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


@dataclass(frozen=True)
class BinaryMask:
    """Run-length encoded binary mask over a width x height pixel grid.

    Runs are (start, length) pairs over row-major pixel indices, sorted,
    non-overlapping and maximally merged. decode -> encode is the identity.
    """

    width: int
    height: int
    runs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("mask dimensions must be positive")
        limit = self.width * self.height
        prev_end = -1  # runs must be separated by at least one background pixel
        for start, length in self.runs:
            if length <= 0:
                raise ValueError(f"run length must be positive, got {length}")
            if start <= prev_end:
                raise ValueError("runs must be sorted and non-adjacent")
            if start + length > limit:
                raise ValueError("run exceeds the pixel grid")
            prev_end = start + length
        object.__setattr__(self, "_dense", None)

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "BinaryMask":
        """Encode an (height, width) boolean array."""
        dense = np.asarray(dense, dtype=bool)
        if dense.ndim != 2:
            raise ValueError("dense mask must be 2-D")
        h, w = dense.shape
        flat = np.flatnonzero(dense.ravel())
        if flat.size == 0:
            return cls(width=w, height=h, runs=())
        breaks = np.flatnonzero(np.diff(flat) > 1)
        starts = np.concatenate(([flat[0]], flat[breaks + 1]))
        ends = np.concatenate((flat[breaks], [flat[-1]]))
        runs = tuple((int(s), int(e - s + 1)) for s, e in zip(starts, ends))
        mask = cls(width=w, height=h, runs=runs)
        # bbox is nearly free here; cache it for the scoring hot path
        cols = flat % w
        object.__setattr__(
            mask,
            "_bbox",
            _extent_box(int(cols.min()), int(cols.max()),
                        int(flat[0] // w), int(flat[-1] // w)),
        )
        return mask

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(width=width, height=height, runs=())

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(width=width, height=height, runs=((0, width * height),))

    @property
    def area(self) -> int:
        return sum(length for _, length in self.runs)

    @property
    def is_empty(self) -> bool:
        return not self.runs

    def to_dense(self) -> np.ndarray:
        """Decoded (height, width) boolean grid. Read-only cached view."""
        cached = self.__dict__.get("_dense")
        if cached is None:
            flat = np.zeros(self.width * self.height, dtype=bool)
            for start, length in self.runs:
                flat[start : start + length] = True
            cached = flat.reshape(self.height, self.width)
            cached.flags.writeable = False
            object.__setattr__(self, "_dense", cached)
        return cached


def intersection_area(a: BinaryMask, b: BinaryMask) -> int:
    """|A intersect B| via a two-pointer sweep over the runs, O(runs)."""
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatch(
            f"mask grids differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    total = 0
    i = j = 0
    ra, rb = a.runs, b.runs
    while i < len(ra) and j < len(rb):
        a0, al = ra[i]
        b0, bl = rb[j]
        a1, b1 = a0 + al, b0 + bl
        overlap = min(a1, b1) - max(a0, b0)
        if overlap > 0:
            total += overlap
        if a1 <= b1:
            i += 1
        else:
            j += 1
    return total


def dice(a: BinaryMask, b: BinaryMask) -> float:
    """Dice coefficient 2|A&B| / (|A| + |B|); 1.0 when both masks are empty."""
    inter = intersection_area(a, b)  # also checks dimensions
    denom = a.area + b.area
    if denom == 0:
        return 1.0
    return 2.0 * inter / denom


def iou_mask(a: BinaryMask, b: BinaryMask) -> float:
    """Pixel IoU; 1.0 when both empty (agreement on absence)."""
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    if union == 0:
        return 1.0
    return inter / union


def dice_dense(a: np.ndarray, b: np.ndarray) -> float:
    """Dice on two boolean arrays, same empty/empty convention as dice()."""
    if a.shape != b.shape:
        raise DimensionMismatch(f"array shapes differ: {a.shape} vs {b.shape}")
    inter = int(np.count_nonzero(a & b))
    denom = int(np.count_nonzero(a)) + int(np.count_nonzero(b))
    if denom == 0:
        return 1.0
    return 2.0 * inter / denom


def _extent_box(xmin: int, xmax: int, ymin: int, ymax: int) -> BBox:
    return BBox(
        cx=(xmin + xmax) / 2.0,
        cy=(ymin + ymax) / 2.0,
        w=float(xmax - xmin + 1),
        h=float(ymax - ymin + 1),
    )


def mask_to_bbox(m: BinaryMask) -> BBox:
    """Tight box around the foreground pixels. Raises EmptyMask when empty."""
    if m.is_empty:
        raise EmptyMask("cannot box an empty mask")
    cached = m.__dict__.get("_bbox")
    if cached is not None:
        return cached
    w = m.width
    xmin, xmax = w - 1, 0
    ymin, ymax = m.height - 1, 0
    for start, length in m.runs:
        end = start + length - 1
        r0, r1 = start // w, end // w
        ymin = min(ymin, r0)
        ymax = max(ymax, r1)
        if r0 == r1:
            xmin = min(xmin, start % w)
            xmax = max(xmax, end % w)
        else:
            # run wraps at least one row boundary, so it touches both edges
            xmin = 0
            xmax = w - 1
    box = _extent_box(xmin, xmax, ymin, ymax)
    object.__setattr__(m, "_bbox", box)
    return box


@dataclass(frozen=True, eq=False)
class Contour:
    """Inner 4-connectivity boundary: (N, 2) int array of (x, y) points.

    Points are ordered row-major (by y, then x). The image border counts as
    outside the mask, so a foreground pixel on the border is boundary.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64)
        if pts.size == 0:
            pts = pts.reshape(0, 2)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("contour points must be an (N, 2) array")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


def contour(m: BinaryMask) -> Contour:
    """Foreground pixels with a 4-neighbour outside the mask (border = outside)."""
    if m.is_empty:
        raise EmptyMask("cannot extract the contour of an empty mask")
    dense = m.to_dense()
    padded = np.zeros((m.height + 2, m.width + 2), dtype=bool)
    padded[1:-1, 1:-1] = dense
    interior = (
        padded[1:-1, :-2]
        & padded[1:-1, 2:]
        & padded[:-2, 1:-1]
        & padded[2:, 1:-1]
    )
    boundary = dense & ~interior
    ys, xs = np.nonzero(boundary)
    return Contour(points=np.stack([xs, ys], axis=1))


def directed_hausdorff(from_c: Contour, to_c: Contour) -> float:
    """max over from_c of the min Euclidean distance to to_c, exactly.

    Argument order follows the separation test: from_c is the alternative
    mask's contour (sup side), to_c the selected mask's contour (inf side).
    """
    if len(from_c) == 0 or len(to_c) == 0:
        raise EmptyContour("directed Hausdorff needs non-empty contours")
    src = from_c.points.astype(np.float64)
    dst = to_c.points.astype(np.float64)
    worst = 0.0
    # chunked to bound the pairwise distance matrix at ~2M entries
    chunk = max(1, 2_000_000 // max(1, dst.shape[0]))
    for lo in range(0, src.shape[0], chunk):
        block = src[lo : lo + chunk]
        d2 = (block[:, None, :] - dst[None, :, :]) ** 2
        nearest = d2.sum(axis=2).min(axis=1)
        worst = max(worst, float(nearest.max()))
    return math.sqrt(worst)


@dataclass(frozen=True, eq=False)
class SoftMask:
    """Dense grid of values in [0, 1], row-major (height, width)."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.height, self.width):
            raise ValueError(
                f"values shape {vals.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValueError("soft mask values must lie in [0, 1]")
        object.__setattr__(self, "values", vals)

    def binarize(self, level: float) -> np.ndarray:
        """Boolean grid of values >= level."""
        return self.values >= level
