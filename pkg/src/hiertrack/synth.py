"""Deterministic synthetic tracking world.

Stands in for the segmenter + point-tracker stack: renders scripted scenes
with ground truth, emits three noisy mask proposals per frame whose quality
responds to the conditioning set handed in by the tracker, and provides an
oracle track source that follows the target's true motion.

Everything is a pure function of (scene, seed): random draws come from
per-frame counter-based generators, and each frame draws a fixed number of
values regardless of branching, so runs with different memory/toggle
settings consume identical noise streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .config import parse_kv_file, parse_kv_text
from .errors import InvalidScene, TrackSourceFailure
from .geometry import BBox, BinaryMask, iou_mask, mask_to_bbox
from .memory import MemoryEntry
from .points import PointSet, TrackBundle, TrackSource
from .selector import Proposal

_STREAM_PROPOSALS = 0
_STREAM_TRACKS = 1

APPEARANCE_BANDWIDTH = 0.2


def _rng(*keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


@dataclass(frozen=True)
class Segment:
    """One piece of a trajectory; the last segment extends past its duration.

    kinds and params:
      cv    vx, vy                          constant velocity
      arc   radius, omega, theta0           circular arc, rad/frame
      sine  vx, vy, amp, period, phase      drift + transverse oscillation
    """

    kind: str
    duration: int
    params: tuple[float, ...]

    def position(self, p0: tuple[float, float], tl: float) -> tuple[float, float]:
        x0, y0 = p0
        if self.kind == "cv":
            vx, vy = self.params
            return x0 + vx * tl, y0 + vy * tl
        if self.kind == "arc":
            radius, omega, theta0 = self.params
            cx = x0 - radius * math.cos(theta0)
            cy = y0 - radius * math.sin(theta0)
            th = theta0 + omega * tl
            return cx + radius * math.cos(th), cy + radius * math.sin(th)
        if self.kind == "sine":
            vx, vy, amp, period, phase = self.params
            speed = math.hypot(vx, vy)
            if speed > 0:
                nx, ny = -vy / speed, vx / speed
            else:
                nx, ny = 0.0, 1.0
            sway = amp * (
                math.sin(2.0 * math.pi * tl / period + phase) - math.sin(phase)
            )
            return x0 + vx * tl + sway * nx, y0 + vy * tl + sway * ny
        raise InvalidScene(f"unknown segment kind {self.kind!r}")


@dataclass(frozen=True)
class ObjectSpec:
    obj_id: str
    role: str  # target | distractor | occluder
    shape: str  # rectangle | ellipse
    size: float
    start: tuple[float, float]
    segments: tuple[Segment, ...]
    appearance: float = 0.5
    drift: float = 0.0

    def center_at(self, t: int) -> tuple[float, float]:
        pos = self.start
        remaining = float(t)
        for i, seg in enumerate(self.segments):
            last = i == len(self.segments) - 1
            if remaining <= seg.duration or last:
                return seg.position(pos, remaining)
            pos = seg.position(pos, float(seg.duration))
            remaining -= seg.duration
        return pos

    def appearance_at(self, t: int) -> float:
        """Ping-pong drift: the code walks [0, 1] back and forth, so long
        sequences revisit earlier appearances."""
        p = (self.appearance + self.drift * t) % 2.0
        return p if p <= 1.0 else 2.0 - p


@dataclass(frozen=True)
class SceneEvent:
    kind: str  # occlusion | disappearance
    start: int
    end: int  # inclusive


@dataclass(frozen=True)
class Scene:
    name: str
    width: int
    height: int
    frame_count: int
    objects: tuple[ObjectSpec, ...]
    events: tuple[SceneEvent, ...] = ()
    seed: int = 0
    s_iou_noise: float = 0.1
    shift_std: float = 2.5
    morph_max: int = 2
    hole_max: float = 0.0

    def __post_init__(self):
        if self.frame_count < 1:
            raise InvalidScene(f"frame_count must be >= 1, got {self.frame_count}")
        if self.width < 8 or self.height < 8:
            raise InvalidScene("frame must be at least 8x8 pixels")
        if not 0.0 <= self.s_iou_noise <= 0.1:
            # the quality-score noise bound is a world invariant
            raise InvalidScene(f"s_iou_noise must lie in [0, 0.1], got {self.s_iou_noise}")
        targets = [o for o in self.objects if o.role == "target"]
        if len(targets) != 1:
            raise InvalidScene(f"scene needs exactly one target, got {len(targets)}")

    @property
    def target(self) -> ObjectSpec:
        return next(o for o in self.objects if o.role == "target")

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


@dataclass(frozen=True)
class FrameTruth:
    """Ground truth for one frame."""

    frame_index: int
    visible: bool
    target_mask: BinaryMask  # empty when the target is not visible
    target_box: BBox | None
    target_center: tuple[float, float]  # scripted centre, defined even occluded
    appearance: float
    distractors: tuple[tuple[tuple[float, float], BinaryMask], ...]


def _rasterize(
    shape: str, size: float, center: tuple[float, float], width: int, height: int
) -> np.ndarray:
    cx, cy = center
    xs = np.arange(width, dtype=np.float64)[None, :]
    ys = np.arange(height, dtype=np.float64)[:, None]
    half = (size - 1.0) / 2.0
    if shape == "rectangle":
        return (np.abs(xs - cx) <= half + 1e-9) & (np.abs(ys - cy) <= half + 1e-9)
    if shape == "ellipse":
        r = max(half, 0.5)
        return ((xs - cx) / r) ** 2 + ((ys - cy) / r) ** 2 <= 1.0 + 1e-9
    raise InvalidScene(f"unknown shape {shape!r}")


def _hidden(scene: Scene, t: int) -> bool:
    return any(e.start <= t <= e.end for e in scene.events)


def generate_sequence(scene: Scene) -> list[FrameTruth]:
    """Rasterize ground truth for every frame of the scene."""
    truths = []
    target = scene.target
    distractor_specs = [o for o in scene.objects if o.role == "distractor"]
    for t in range(scene.frame_count):
        center = target.center_at(t)
        if _hidden(scene, t):
            mask = BinaryMask.empty(scene.width, scene.height)
        else:
            dense = _rasterize(target.shape, target.size, center,
                               scene.width, scene.height)
            mask = BinaryMask.from_dense(dense)
        visible = not mask.is_empty
        box = mask_to_bbox(mask) if visible else None
        distractors = []
        for spec in distractor_specs:
            d_center = spec.center_at(t)
            d_dense = _rasterize(spec.shape, spec.size, d_center,
                                 scene.width, scene.height)
            d_mask = BinaryMask.from_dense(d_dense)
            if not d_mask.is_empty:
                distractors.append((d_center, d_mask))
        truths.append(
            FrameTruth(
                frame_index=t,
                visible=visible,
                target_mask=mask,
                target_box=box,
                target_center=center,
                appearance=target.appearance_at(t),
                distractors=tuple(distractors),
            )
        )
    return truths


def memory_affinity(
    conditioning: Sequence[MemoryEntry],
    frame_code: float,
    truths: Sequence[FrameTruth],
) -> float:
    """How well the conditioning set covers the frame's appearance.

    Each entry contributes exp(-|code delta| / bandwidth) weighted by how
    faithful its stored mask was to the target at its own frame; entries
    with empty or off-target masks carry no appearance evidence. The max
    over entries is taken, so adding entries never lowers affinity.
    """
    best = 0.0
    for entry in conditioning:
        truth = truths[entry.frame_index]
        if entry.mask.is_empty or truth.target_mask.is_empty:
            continue
        quality = iou_mask(entry.mask, truth.target_mask)
        closeness = math.exp(-abs(frame_code - truth.appearance)
                             / APPEARANCE_BANDWIDTH)
        best = max(best, closeness * quality)
    return best


def _smoothstep(x: float, lo: float, hi: float) -> float:
    t = min(max((x - lo) / (hi - lo), 0.0), 1.0)
    return t * t * (3.0 - 2.0 * t)


def _shift_dense(dense: np.ndarray, dx: int, dy: int) -> np.ndarray:
    out = np.zeros_like(dense)
    h, w = dense.shape
    src_x = slice(max(0, -dx), min(w, w - dx))
    src_y = slice(max(0, -dy), min(h, h - dy))
    dst_x = slice(max(0, dx), min(w, w + dx))
    dst_y = slice(max(0, dy), min(h, h + dy))
    out[dst_y, dst_x] = dense[src_y, src_x]
    return out


def _side_cut(dense: np.ndarray, side: int, frac: float) -> np.ndarray:
    """Drop a fraction of the mask's bbox extent from one side."""
    ys, xs = np.nonzero(dense)
    out = dense.copy()
    x0, x1 = xs.min(), xs.max()
    y0, y1 = ys.min(), ys.max()
    if side == 0:
        out[:, : x0 + int(round((x1 - x0 + 1) * frac))] = False
    elif side == 1:
        out[:, x1 + 1 - int(round((x1 - x0 + 1) * frac)) :] = False
    elif side == 2:
        out[: y0 + int(round((y1 - y0 + 1) * frac)), :] = False
    else:
        out[y1 + 1 - int(round((y1 - y0 + 1) * frac)) :, :] = False
    return out


def synth_proposals(
    scene: Scene,
    frame_index: int,
    conditioning: Sequence[MemoryEntry],
    seed: int,
    truths: Sequence[FrameTruth] | None = None,
) -> tuple[Proposal, Proposal, Proposal]:
    """Three proposals for one frame, conditioned on the memory state.

    Slot 0: the true target mask, boundary-morphed and shifted with noise
            scaled by (1 - memory affinity); empty while the target is
            hidden.
    Slot 1: the nearest distractor's mask (empty without distractors).
    Slot 2: a granularity variant of slot 0 (union smear or half cut).

    Each self-predicted quality score is the proposal's true IoU against
    the target mask plus bounded uniform noise (doubled for the distractor
    while the target is hidden).
    """
    if truths is None:
        truths = generate_sequence(scene)
    truth = truths[frame_index]
    rng = _rng(seed, frame_index, _STREAM_PROPOSALS)
    # fixed draw schedule; branches below must not consume from rng
    shift_raw = rng.normal(size=2)
    morph_u = rng.uniform()
    morph_sign = rng.uniform()
    coin_union = rng.uniform()
    cut_side_u = rng.uniform()
    cut_frac_u = rng.uniform()
    union_sign = rng.uniform(size=2)
    score_noise = rng.uniform(-1.0, 1.0, size=6)
    hole_grid = rng.uniform(size=(scene.height, scene.width))

    affinity = memory_affinity(conditioning, truth.appearance, truths)
    scale = 1.0 - affinity
    w, h = scene.width, scene.height
    empty = BinaryMask.empty(w, h)

    # slot 0: perturbed true mask. Three degradation channels, all scaled
    # by (1 - affinity): boundary dilation/erosion, translation noise, and
    # interior dropout. The dropout ramps in only above moderate scales
    # (smoothstep) and wipes mask quality while barely moving the bounding
    # box, which is how a segmenter degrades when its memory goes stale.
    if truth.visible:
        dense = np.asarray(truth.target_mask.to_dense())
        morph_n = int(round((0.5 + 0.5 * morph_u) * scene.morph_max * scale))
        if morph_n > 0:
            if morph_sign < 0.5:
                morphed = ndimage.binary_dilation(dense, iterations=morph_n)
            else:
                morphed = ndimage.binary_erosion(dense, iterations=morph_n)
            if morphed.any():
                dense = morphed
        hole_frac = scene.hole_max * _smoothstep(scale, 0.3, 0.75)
        if hole_frac > 0.0:
            riddled = dense & (hole_grid >= hole_frac)
            if riddled.any():
                dense = riddled
        dx, dy = (int(round(v * scene.shift_std * scale)) for v in shift_raw)
        dense = _shift_dense(dense, dx, dy)
        mask_a = BinaryMask.from_dense(dense)
    else:
        mask_a = empty

    # slot 1: nearest distractor
    if truth.distractors:
        tx, ty = truth.target_center
        _, mask_b = min(
            truth.distractors,
            key=lambda item: math.hypot(item[0][0] - tx, item[0][1] - ty),
        )
    else:
        mask_b = empty

    # slot 2: granularity variant of slot 0
    if mask_a.is_empty:
        mask_c = empty
    else:
        dense_a = np.asarray(mask_a.to_dense())
        box = mask_to_bbox(mask_a)
        if coin_union < 0.5:
            frac = 0.25 + 0.25 * cut_frac_u
            cut = _side_cut(dense_a, int(cut_side_u * 4.0) % 4, frac)
            mask_c = BinaryMask.from_dense(cut) if cut.any() else mask_a
        else:
            dx = int(math.copysign(max(2, round(box.w * 0.3)), union_sign[0] - 0.5))
            dy = int(math.copysign(max(1, round(box.h * 0.15)), union_sign[1] - 0.5))
            mask_c = BinaryMask.from_dense(dense_a | _shift_dense(dense_a, dx, dy))

    amp = scene.s_iou_noise
    amp_b = amp * (2.0 if not truth.visible else 1.0)
    proposals = []
    for i, (mask, noise_amp) in enumerate(
        [(mask_a, amp), (mask_b, amp_b), (mask_c, amp)]
    ):
        true_iou = iou_mask(mask, truth.target_mask)
        s_iou = min(max(true_iou + float(score_noise[i]) * noise_amp, 0.0), 1.0)
        objectness = min(
            max(0.2 + 0.8 * true_iou + float(score_noise[3 + i]) * amp, 0.0), 1.0
        )
        proposals.append(Proposal(mask=mask, s_iou=s_iou, objectness=objectness))
    return tuple(proposals)


class SynthProposalSource:
    """Per-sequence proposal stream backed by synth_proposals."""

    def __init__(self, scene: Scene, truths: Sequence[FrameTruth] | None = None,
                 seed: int | None = None):
        self.scene = scene
        self.truths = list(truths) if truths is not None else generate_sequence(scene)
        self.seed = scene.seed if seed is None else seed

    def proposals(self, frame_index: int,
                  conditioning: Sequence[MemoryEntry]) -> tuple[Proposal, ...]:
        return synth_proposals(
            self.scene, frame_index, conditioning, self.seed, truths=self.truths
        )


class OracleTrackSource(TrackSource):
    """Backward point propagation by the target's true rigid motion.

    Points that do not start on the target mask at the origin frame are
    marked invisible everywhere; visible points are translated by the true
    centre delta plus Gaussian jitter and marked invisible on frames where
    the target is hidden or the mapped point falls off the target mask.
    """

    max_frames = 64
    deterministic = True

    def __init__(self, scene: Scene, truths: Sequence[FrameTruth] | None = None,
                 track_noise: float = 0.5, seed: int | None = None):
        self.scene = scene
        self.truths = list(truths) if truths is not None else generate_sequence(scene)
        self.track_noise = track_noise
        self.seed = scene.seed if seed is None else seed

    def propagate(
        self,
        origin_frame: int,
        points: PointSet,
        frames: Sequence[int],
        slot: int | None = None,
    ) -> TrackBundle:
        if len(frames) > self.max_frames:
            raise TrackSourceFailure(
                f"window of {len(frames)} frames exceeds capability "
                f"{self.max_frames}"
            )
        if not 0 <= origin_frame < len(self.truths):
            raise TrackSourceFailure(f"origin frame {origin_frame} out of range")
        origin = self.truths[origin_frame]
        pts = points.points
        n, k = pts.shape[0], len(frames)
        rng = _rng(self.seed, origin_frame, _STREAM_TRACKS, slot or 0)
        jitter = rng.normal(0.0, self.track_noise, size=(n, k, 2))

        origin_dense = origin.target_mask.to_dense()
        on_target = np.zeros(n, dtype=bool)
        for i, (x, y) in enumerate(pts):
            xi, yi = int(round(x)), int(round(y))
            if 0 <= xi < self.scene.width and 0 <= yi < self.scene.height:
                on_target[i] = bool(origin_dense[yi, xi])

        xy = np.zeros((n, k, 2))
        vis = np.zeros((n, k), dtype=bool)
        ox, oy = origin.target_center
        for j, f in enumerate(frames):
            truth = self.truths[f]
            fx, fy = truth.target_center
            mapped = pts + np.array([fx - ox, fy - oy]) + jitter[:, j]
            xy[:, j] = mapped
            if not truth.visible:
                continue
            dense = truth.target_mask.to_dense()
            for i, (x, y) in enumerate(mapped):
                if not on_target[i]:
                    continue
                xi, yi = int(round(x)), int(round(y))
                if 0 <= xi < self.scene.width and 0 <= yi < self.scene.height:
                    vis[i, j] = bool(dense[yi, xi])
        return TrackBundle(origin_frame=origin_frame, frames=tuple(frames),
                           xy=xy, visible=vis)


# --- scene description files -------------------------------------------------

_SCENE_DIR = Path(__file__).parent / "scenes"

SCENE_LIBRARY = (
    "benign_linear",
    "fast_sinusoid",
    "occlusion_reappear",
    "distractor_swap",
    "drift_longterm",
    "clutter_small",
)


def _parse_segments(text: str) -> tuple[Segment, ...]:
    segments = []
    for part in text.split("|"):
        part = part.strip()
        if not part:
            continue
        bits = part.split(":")
        if len(bits) != 3:
            raise InvalidScene(f"segment must be kind:duration:params, got {part!r}")
        kind, duration, params = bits
        segments.append(
            Segment(
                kind=kind.strip(),
                duration=int(duration),
                params=tuple(float(v) for v in params.split(",")),
            )
        )
    if not segments:
        raise InvalidScene("object path has no segments")
    return tuple(segments)


def _parse_windows(text: str) -> list[tuple[int, int]]:
    windows = []
    for part in text.split("|"):
        a, b = (int(v) for v in part.split(","))
        windows.append((a, b))
    return windows


def scene_from_mapping(kv: dict[str, str]) -> Scene:
    try:
        objects: dict[str, dict[str, str]] = {}
        events: list[SceneEvent] = []
        scene_kv: dict[str, str] = {}
        for key, value in kv.items():
            parts = key.split(".")
            if parts[0] == "scene" and len(parts) == 2:
                scene_kv[parts[1]] = value
            elif parts[0] == "object" and len(parts) == 3:
                objects.setdefault(parts[1], {})[parts[2]] = value
            elif parts[0] == "event" and len(parts) == 2:
                for start, end in _parse_windows(value):
                    events.append(SceneEvent(kind=parts[1], start=start, end=end))
            else:
                raise InvalidScene(f"unknown scene key {key!r}")

        specs = []
        for obj_id, fields_ in objects.items():
            start = tuple(float(v) for v in fields_["start"].split(","))
            specs.append(
                ObjectSpec(
                    obj_id=obj_id,
                    role=fields_.get("role", "distractor"),
                    shape=fields_.get("shape", "rectangle"),
                    size=float(fields_["size"]),
                    start=(start[0], start[1]),
                    segments=_parse_segments(fields_["path"]),
                    appearance=float(fields_.get("appearance", 0.5)),
                    drift=float(fields_.get("drift", 0.0)),
                )
            )
        return Scene(
            name=scene_kv.get("name", "unnamed"),
            width=int(scene_kv["width"]),
            height=int(scene_kv["height"]),
            frame_count=int(scene_kv["frames"]),
            objects=tuple(specs),
            events=tuple(events),
            seed=int(scene_kv.get("seed", 0)),
            s_iou_noise=float(scene_kv.get("s_iou_noise", 0.1)),
            shift_std=float(scene_kv.get("shift_std", 2.5)),
            morph_max=int(scene_kv.get("morph_max", 2)),
            hole_max=float(scene_kv.get("hole_max", 0.0)),
        )
    except (KeyError, ValueError) as exc:
        raise InvalidScene(f"bad scene description: {exc}") from exc


def scene_to_mapping(scene: Scene) -> dict[str, str]:
    """Flatten a scene back into the key=value grammar (round-trips)."""
    kv = {
        "scene.name": scene.name,
        "scene.width": str(scene.width),
        "scene.height": str(scene.height),
        "scene.frames": str(scene.frame_count),
        "scene.seed": str(scene.seed),
        "scene.s_iou_noise": repr(scene.s_iou_noise),
        "scene.shift_std": repr(scene.shift_std),
        "scene.morph_max": str(scene.morph_max),
        "scene.hole_max": repr(scene.hole_max),
    }
    for obj in scene.objects:
        base = f"object.{obj.obj_id}"
        kv[f"{base}.role"] = obj.role
        kv[f"{base}.shape"] = obj.shape
        kv[f"{base}.size"] = repr(obj.size)
        kv[f"{base}.start"] = f"{obj.start[0]!r},{obj.start[1]!r}"
        kv[f"{base}.appearance"] = repr(obj.appearance)
        kv[f"{base}.drift"] = repr(obj.drift)
        kv[f"{base}.path"] = " | ".join(
            f"{s.kind}:{s.duration}:{','.join(repr(p) for p in s.params)}"
            for s in obj.segments
        )
    windows: dict[str, list[str]] = {}
    for event in scene.events:
        windows.setdefault(event.kind, []).append(f"{event.start},{event.end}")
    for kind, parts in windows.items():
        kv[f"event.{kind}"] = " | ".join(parts)
    return kv


def load_scene(name_or_path: str | Path) -> Scene:
    """Load a library scene by name, or any scene file by path."""
    name = str(name_or_path)
    if name in SCENE_LIBRARY:
        path = _SCENE_DIR / f"{name}.cfg"
    else:
        path = Path(name_or_path)
    if not path.exists():
        raise InvalidScene(f"no such scene: {name_or_path}")
    return scene_from_mapping(parse_kv_file(path))


def scene_from_text(text: str) -> Scene:
    return scene_from_mapping(parse_kv_text(text))
