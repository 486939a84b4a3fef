"""Sequence-level orchestration: wiring selector, memory and sources.

Runs are serial within a sequence; distinct sequences share nothing and
may run concurrently. Two input modes exist: live (a synthetic scene
generates proposals each frame, coupled to the current conditioning set)
and replay (proposals and optionally tracks come from an interchange dump).
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .config import Config
from .errors import MissingPrompt, TrackSourceFailure
from .geometry import BinaryMask, iou_box, mask_to_bbox
from .kalman import kf_init
from .memory import MemoryBank, MemoryEntry, admit, conditioning_set
from .metrics import SequenceResult
from .points import PointSet, TrackBundle, TrackSource
from .selector import FrameDecision, Proposal, step
from .synth import (
    FrameTruth,
    OracleTrackSource,
    Scene,
    SynthProposalSource,
    generate_sequence,
)


@dataclass(frozen=True)
class Toggles:
    """Ablation switches mirroring the component study rows.

    kf off forces the coarse weight to zero and skips the filter; pt off
    forces the fine weight to zero and disables escalation; sm off keeps
    only the most recent frame in the short bank, unconditionally; lm off
    keeps the long bank empty.
    """

    kf: bool = True
    pt: bool = True
    sm: bool = True
    lm: bool = True

    @classmethod
    def all_off(cls) -> "Toggles":
        return cls(kf=False, pt=False, sm=False, lm=False)

    def label(self) -> str:
        bits = [name.upper() for name in ("kf", "pt", "sm", "lm")
                if getattr(self, name)]
        return "+".join(bits) if bits else "none"


@dataclass
class RunResult:
    """Everything one tracked sequence produced.

    latencies cover the full frame step (proposal acquisition, selection,
    admission); step_latencies cover the selection call alone, which is
    what escalation/overhead claims are measured on.
    """

    scene_name: str
    decisions: list[FrameDecision]
    chosen_masks: list[BinaryMask]
    sequence: SequenceResult | None
    latencies: np.ndarray
    step_latencies: np.ndarray
    memory_trace: list[tuple[int, int, int]]  # (frame, |short|, |long|)
    toggles: Toggles
    final_bank: MemoryBank | None = None

    @property
    def fine_used_fraction(self) -> float:
        if not self.decisions:
            return 0.0
        return sum(d.fine_used for d in self.decisions) / len(self.decisions)

    @property
    def fine_failed_count(self) -> int:
        return sum(d.fine_failed for d in self.decisions)

    def latency_stats(self) -> dict[str, float]:
        if self.latencies.size == 0:
            return {"mean_ms": 0.0, "p95_ms": 0.0}
        return {
            "mean_ms": float(self.latencies.mean() * 1e3),
            "p95_ms": float(np.percentile(self.latencies, 95) * 1e3),
        }


def effective_config(cfg: Config, toggles: Toggles) -> Config:
    updates = {}
    if not toggles.kf:
        updates["alpha"] = 0.0
    if not toggles.pt:
        updates["beta"] = 0.0
    return cfg.replace(**updates) if updates else cfg


class _Tracker:
    """Per-sequence state machine shared by the live and replay loops."""

    def __init__(self, cfg: Config, toggles: Toggles, prompt_frame: int,
                 prompt_mask: BinaryMask):
        if prompt_mask.is_empty:
            raise MissingPrompt("prompt frame has an empty target mask")
        self.cfg = effective_config(cfg, toggles)
        self.toggles = toggles
        prompt_entry = MemoryEntry(
            frame_index=prompt_frame, mask=prompt_mask, s_conf=1.0, s_iou=1.0
        )
        self.bank = MemoryBank.create(prompt_entry)
        self.recent: MemoryEntry | None = None  # sm-off conditioning entry
        self.last_box = mask_to_bbox(prompt_mask)
        self.kf = kf_init(self.last_box, self.cfg.kf) if toggles.kf else None
        self.history: deque[tuple[int, BinaryMask]] = deque(
            [(prompt_frame, prompt_mask)], maxlen=self.cfg.pt_frames
        )

    def conditioning(self) -> list[MemoryEntry]:
        if self.toggles.sm:
            return conditioning_set(self.bank)
        entries = [self.bank.prompt]
        if self.toggles.lm:
            entries.extend(sorted(self.bank.long, key=lambda e: e.frame_index))
        if self.recent is not None and self.recent.frame_index != \
                self.bank.prompt.frame_index:
            entries.append(self.recent)
        return entries

    def advance(
        self,
        frame_index: int,
        proposals: Sequence[Proposal],
        track_source: TrackSource | None,
    ) -> FrameDecision:
        decision, self.kf = step(
            frame_index,
            proposals,
            self.kf,
            track_source if self.toggles.pt else None,
            list(self.history),
            self.cfg,
            fallback_box=self.last_box,
            noise=self.cfg.kf,
        )
        chosen_mask = proposals[decision.chosen].mask
        alternatives = [
            p.mask for i, p in enumerate(proposals) if i != decision.chosen
        ]
        if self.toggles.sm or self.toggles.lm:
            self.bank = admit(
                self.bank,
                decision,
                chosen_mask,
                alternatives,
                self.cfg,
                allow_short=self.toggles.sm,
                allow_long=self.toggles.lm,
            )
        b = decision.chosen_breakdown
        self.recent = MemoryEntry(
            frame_index=frame_index, mask=chosen_mask,
            s_conf=b.s_conf, s_iou=b.s_iou,
        )
        if decision.visible:
            self.history.append((frame_index, chosen_mask))
            self.last_box = decision.chosen_bbox
        return decision


def run_scene(scene: Scene, cfg: Config, toggles: Toggles = Toggles()) -> RunResult:
    """Track one synthetic scene end to end (live, memory-coupled mode).

    A nonzero cfg.seed replaces the scene's own seed for the world's noise
    streams (proposal perturbations and track jitter).
    """
    truths = generate_sequence(scene)
    if not truths[0].visible:
        raise MissingPrompt(f"scene {scene.name!r} target hidden on frame 0")
    seed = cfg.seed if cfg.seed != 0 else scene.seed
    tracker = _Tracker(cfg, toggles, 0, truths[0].target_mask)
    source = SynthProposalSource(scene, truths, seed=seed)
    track_source = (
        OracleTrackSource(scene, truths, cfg.track_noise, seed=seed)
        if toggles.pt else None
    )

    decisions: list[FrameDecision] = []
    chosen_masks: list[BinaryMask] = []
    latencies = np.zeros(max(scene.frame_count - 1, 0))
    step_latencies = np.zeros_like(latencies)
    memory_trace = []
    for t in range(1, scene.frame_count):
        t0 = time.perf_counter()
        conditioning = tracker.conditioning()
        proposals = source.proposals(t, conditioning)
        t1 = time.perf_counter()
        decision = tracker.advance(t, proposals, track_source)
        t2 = time.perf_counter()
        latencies[t - 1] = t2 - t0
        step_latencies[t - 1] = t2 - t1
        decisions.append(decision)
        chosen_masks.append(proposals[decision.chosen].mask)
        memory_trace.append((t, len(tracker.bank.short), len(tracker.bank.long)))

    sequence = _to_sequence_result(decisions, truths)
    return RunResult(
        scene_name=scene.name,
        decisions=decisions,
        chosen_masks=chosen_masks,
        sequence=sequence,
        latencies=latencies,
        step_latencies=step_latencies,
        memory_trace=memory_trace,
        toggles=toggles,
        final_bank=tracker.bank,
    )


def _to_sequence_result(
    decisions: Sequence[FrameDecision], truths: Sequence[FrameTruth]
) -> SequenceResult:
    pred_boxes, pred_vis, conf, gt_boxes, gt_vis = [], [], [], [], []
    for d in decisions:
        truth = truths[d.frame_index]
        pred_boxes.append(d.chosen_bbox)
        pred_vis.append(d.visible)
        conf.append(d.chosen_breakdown.s_conf)
        gt_boxes.append(truth.target_box)
        gt_vis.append(truth.visible)
    return SequenceResult(
        pred_boxes=tuple(pred_boxes),
        pred_visible=tuple(pred_vis),
        confidence=tuple(conf),
        gt_boxes=tuple(gt_boxes),
        gt_visible=tuple(gt_vis),
    )


def post_event_ious(result: RunResult, truths: Sequence[FrameTruth],
                    start_frame: int) -> np.ndarray:
    """Per-frame overlap on ground-truth-visible frames from start_frame on."""
    vals = []
    for d, m in zip(result.decisions, result.chosen_masks):
        truth = truths[d.frame_index]
        if d.frame_index < start_frame or not truth.visible:
            continue
        if d.visible:
            vals.append(iou_box(d.chosen_bbox, truth.target_box))
        else:
            vals.append(0.0)
    return np.asarray(vals)


class ReplayProposalSource:
    """Proposal stream read from an interchange dump; ignores conditioning."""

    def __init__(self, per_frame: Mapping[int, Sequence[Proposal]]):
        self.per_frame = dict(per_frame)

    def proposals(self, frame_index: int, conditioning) -> tuple[Proposal, ...]:
        if frame_index not in self.per_frame:
            raise MissingPrompt(f"dump has no proposals for frame {frame_index}")
        return tuple(self.per_frame[frame_index])

    def frames(self) -> list[int]:
        return sorted(self.per_frame)


class ReplayTrackSource(TrackSource):
    """Pre-computed bundles keyed by (origin frame, proposal slot)."""

    max_frames = 1024
    deterministic = True

    def __init__(self, bundles: Mapping[tuple[int, int], TrackBundle]):
        self.bundles = dict(bundles)

    def propagate(
        self,
        origin_frame: int,
        points: PointSet,
        frames: Sequence[int],
        slot: int | None = None,
    ) -> TrackBundle:
        bundle = self.bundles.get((origin_frame, slot if slot is not None else 0))
        if bundle is None:
            raise TrackSourceFailure(
                f"no stored tracks for frame {origin_frame}, slot {slot}"
            )
        wanted = tuple(frames)
        if bundle.frames == wanted:
            return bundle
        index = {f: j for j, f in enumerate(bundle.frames)}
        missing = [f for f in wanted if f not in index]
        if missing:
            raise TrackSourceFailure(
                f"stored tracks for frame {origin_frame} lack frames {missing}"
            )
        cols = [index[f] for f in wanted]
        return TrackBundle(
            origin_frame=origin_frame,
            frames=wanted,
            xy=bundle.xy[:, cols],
            visible=bundle.visible[:, cols],
        )


def run_replay(
    prompt_frame: int,
    prompt_mask: BinaryMask,
    source: ReplayProposalSource,
    cfg: Config,
    toggles: Toggles = Toggles(),
    track_source: TrackSource | None = None,
) -> RunResult:
    """Track a replayed proposal stream (no ground truth, no simulator)."""
    tracker = _Tracker(cfg, toggles, prompt_frame, prompt_mask)
    frames = [f for f in source.frames() if f != prompt_frame]
    decisions: list[FrameDecision] = []
    chosen_masks: list[BinaryMask] = []
    latencies = np.zeros(len(frames))
    step_latencies = np.zeros_like(latencies)
    memory_trace = []
    for i, t in enumerate(frames):
        t0 = time.perf_counter()
        conditioning = tracker.conditioning()
        proposals = source.proposals(t, conditioning)
        t1 = time.perf_counter()
        decision = tracker.advance(t, proposals, track_source)
        t2 = time.perf_counter()
        latencies[i] = t2 - t0
        step_latencies[i] = t2 - t1
        decisions.append(decision)
        chosen_masks.append(proposals[decision.chosen].mask)
        memory_trace.append((t, len(tracker.bank.short), len(tracker.bank.long)))
    return RunResult(
        scene_name="replay",
        decisions=decisions,
        chosen_masks=chosen_masks,
        sequence=None,
        latencies=latencies,
        step_latencies=step_latencies,
        memory_trace=memory_trace,
        toggles=toggles,
        final_bank=tracker.bank,
    )
