"""One-pass tracking metrics: success AUC, precision variants, Pr/Re/F.

Per-frame overlap rules for long-term sequences:
  - ground truth hidden: agreeing on absence scores IoU 1, predicting a
    visible target scores 0;
  - ground truth visible: box IoU of the output box, or 0 when the tracker
    declared the target absent.
Precision variants are computed over ground-truth-visible frames only, and
a declared-absent prediction fails the frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptySequence, LengthMismatch
from .geometry import BBox, iou_box


@dataclass(frozen=True)
class SequenceResult:
    """Aligned per-frame tracker output and ground truth for one sequence."""

    pred_boxes: tuple[BBox, ...]
    pred_visible: tuple[bool, ...]
    confidence: tuple[float, ...]
    gt_boxes: tuple[BBox | None, ...]
    gt_visible: tuple[bool, ...]

    def __post_init__(self):
        n = len(self.pred_boxes)
        for name in ("pred_visible", "confidence", "gt_boxes", "gt_visible"):
            if len(getattr(self, name)) != n:
                raise LengthMismatch(f"{name} length differs from pred_boxes")
        for c in self.confidence:
            if not 0.0 <= c <= 1.0:
                raise ValueError(f"confidence must lie in [0, 1], got {c}")
        for visible, box in zip(self.gt_visible, self.gt_boxes):
            if visible and box is None:
                raise ValueError("visible ground-truth frame without a box")

    def __len__(self) -> int:
        return len(self.pred_boxes)


def frame_ious(r: SequenceResult) -> np.ndarray:
    """Per-frame overlap, following the long-term absence rules above."""
    out = np.zeros(len(r))
    for i in range(len(r)):
        if not r.gt_visible[i]:
            out[i] = 1.0 if not r.pred_visible[i] else 0.0
        elif r.pred_visible[i]:
            out[i] = iou_box(r.pred_boxes[i], r.gt_boxes[i])
    return out


def success_auc(results: SequenceResult) -> float:
    """Mean success rate over 101 overlap thresholds, as a percentage.

    success(theta) is the fraction of frames with IoU strictly above theta,
    sampled at theta = 0.00, 0.01, ..., 1.00; the curve starts at 1 (every
    frame has overlap >= 0, so the theta = 0 sample always passes).
    """
    if len(results) == 0:
        raise EmptySequence("success_auc needs at least one frame")
    ious = frame_ious(results)
    thresholds = np.linspace(0.0, 1.0, 101)
    success = (ious[None, :] > thresholds[:, None]).mean(axis=1)
    success[0] = 1.0
    return float(success.mean() * 100.0)


def _center_errors(results: SequenceResult):
    """(dx, dy, gt_box) per ground-truth-visible frame; inf when declared absent."""
    for i in range(len(results)):
        if not results.gt_visible[i]:
            continue
        gt = results.gt_boxes[i]
        if results.pred_visible[i]:
            pred = results.pred_boxes[i]
            yield pred.cx - gt.cx, pred.cy - gt.cy, gt
        else:
            yield math.inf, math.inf, gt


def precision(results: SequenceResult, threshold_px: float = 20.0) -> float:
    """Fraction of visible-GT frames with centre error <= threshold, x100."""
    if len(results) == 0:
        raise EmptySequence("precision needs at least one frame")
    hits = total = 0
    for dx, dy, _ in _center_errors(results):
        total += 1
        if math.hypot(dx, dy) <= threshold_px:
            hits += 1
    if total == 0:
        return 0.0
    return 100.0 * hits / total


def norm_precision(results: SequenceResult, threshold: float = 0.2) -> float:
    """Centre error normalized per-axis by the GT box size, pass at <= 0.2.

    Frames with degenerate ground truth (zero width or height) are skipped.
    """
    if len(results) == 0:
        raise EmptySequence("norm_precision needs at least one frame")
    hits = total = 0
    for dx, dy, gt in _center_errors(results):
        if gt.w == 0.0 or gt.h == 0.0:
            continue
        total += 1
        if math.hypot(dx / gt.w, dy / gt.h) <= threshold:
            hits += 1
    if total == 0:
        return 0.0
    return 100.0 * hits / total


def f_score(results: SequenceResult) -> tuple[float, float, float]:
    """(Pr, Re, F) at the confidence threshold maximizing F.

    The threshold sweeps every observed confidence value of frames with a
    declared-visible prediction. At threshold t a prediction counts when it
    is declared visible with confidence >= t; Pr averages overlap over
    those frames, Re averages overlap over GT-visible frames with missing
    predictions counting zero.
    """
    if len(results) == 0:
        raise EmptySequence("f_score needs at least one frame")
    overlap = np.zeros(len(results))
    for i in range(len(results)):
        if results.gt_visible[i] and results.pred_visible[i]:
            overlap[i] = iou_box(results.pred_boxes[i], results.gt_boxes[i])
    observed = sorted(
        {results.confidence[i] for i in range(len(results)) if results.pred_visible[i]}
    )
    n_gt = sum(results.gt_visible)
    best: tuple[float, float, float] | None = None
    for t in observed:
        present = [
            i
            for i in range(len(results))
            if results.pred_visible[i] and results.confidence[i] >= t
        ]
        if present:
            pr = float(np.mean([overlap[i] for i in present]))
        else:
            pr = 0.0
        if n_gt:
            re = float(
                sum(overlap[i] for i in present if results.gt_visible[i]) / n_gt
            )
        else:
            re = 0.0
        f = 2.0 * pr * re / (pr + re) if pr + re > 0 else 0.0
        if best is None or f > best[2]:
            best = (pr, re, f)
    return best if best is not None else (0.0, 0.0, 0.0)


def summarize(results: SequenceResult) -> dict[str, float]:
    pr, re, f = f_score(results)
    return {
        "auc": success_auc(results),
        "precision": precision(results),
        "norm_precision": norm_precision(results),
        "pr": pr,
        "re": re,
        "f": f,
    }


def mean_metrics(per_sequence: Sequence[dict[str, float]]) -> dict[str, float]:
    """Average each metric over sequences."""
    if not per_sequence:
        raise EmptySequence("no sequences to average")
    keys = per_sequence[0].keys()
    return {k: float(np.mean([m[k] for m in per_sequence])) for k in keys}


def ablation_report(scenes, cfg, toggle_rows, workers: int = 1) -> list[dict]:
    """Run the pipeline per toggle combination over all scenes.

    Returns one row per combination with the metric means, the mean
    fine-escalation fraction and per-frame latency stats (the latter are
    wall clock and belong in human-facing output, not deterministic dumps).

    Sequences share no state, so with workers > 1 the individual runs are
    spread over a thread pool (one sequence per worker); results are
    reassembled in a fixed order, keeping the report deterministic.
    """
    from .pipeline import run_scene  # deferred: pipeline builds on metrics

    jobs = [(toggles, scene) for toggles in toggle_rows for scene in scenes]
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            run_list = list(pool.map(lambda job: run_scene(job[1], cfg, job[0]),
                                     jobs))
    else:
        run_list = [run_scene(scene, cfg, toggles) for toggles, scene in jobs]

    rows = []
    for i, toggles in enumerate(toggle_rows):
        runs = run_list[i * len(scenes) : (i + 1) * len(scenes)]
        mean = mean_metrics([summarize(r.sequence) for r in runs])
        rows.append(
            {
                "toggles": toggles,
                "metrics": mean,
                "fine_used_fraction": float(
                    np.mean([r.fine_used_fraction for r in runs])
                ),
                "latency_ms": float(
                    np.mean([r.latency_stats()["mean_ms"] for r in runs])
                ),
                "latency_p95_ms": float(
                    np.mean([r.latency_stats()["p95_ms"] for r in runs])
                ),
            }
        )
    return rows
