"""Per-frame proposal selection with hierarchical escalation.

Every frame starts on the cheap path: the Kalman prediction box scores each
proposal and is blended with the model's own mask confidence. Only when the
best blended confidence drops below tau does the expensive point-track path
run and re-score the frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import (
    EmptyMask,
    NoProposals,
    TrackSourceFailure,
    WeightViolation,
)
from .geometry import BBox, BinaryMask, iou_box, mask_to_bbox
from .kalman import KalmanNoise, KalmanState, kf_predict, kf_update
from .points import TrackSource, fine_score


@dataclass(frozen=True)
class Proposal:
    """One candidate mask with the model's self-predicted quality scores."""

    mask: BinaryMask
    s_iou: float
    objectness: float


@dataclass(frozen=True)
class ScoreBreakdown:
    """All score components recorded for one proposal on one frame."""

    s_iou: float
    s_coarse: float
    s_conf: float
    s_fine: float | None = None
    fine_used: bool = False


@dataclass(frozen=True)
class FrameDecision:
    """Audit record of one frame's selection.

    has_motion records whether a prediction box existed; without one the
    coarse components are vacuously zero and downstream motion gates must
    not read them as evidence.
    """

    frame_index: int
    chosen: int
    breakdowns: tuple[ScoreBreakdown, ...]
    chosen_bbox: BBox
    visible: bool
    kf_updated: bool
    fine_used: bool
    fine_failed: bool = False
    has_motion: bool = True

    @property
    def chosen_breakdown(self) -> ScoreBreakdown:
        return self.breakdowns[self.chosen]


def _clamp01(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def _coarse_component(predicted: BBox | None, p: Proposal) -> float:
    if predicted is None or p.mask.is_empty:
        return 0.0
    return iou_box(predicted, mask_to_bbox(p.mask))


def score_coarse(
    proposals: Sequence[Proposal], predicted_box: BBox | None, alpha: float
) -> list[ScoreBreakdown]:
    """Blend of coarse motion and mask confidence per proposal.

    Empty-mask proposals score zero coarse motion. predicted_box may be
    None (motion disabled), which also zeroes the coarse component.
    """
    if not proposals:
        raise NoProposals("score_coarse needs at least one proposal")
    if not 0.0 <= alpha <= 1.0:
        raise WeightViolation(f"alpha must lie in [0, 1], got {alpha}")
    out = []
    for p in proposals:
        s_coarse = _coarse_component(predicted_box, p)
        s_conf = _clamp01(alpha * s_coarse + (1.0 - alpha) * p.s_iou)
        out.append(ScoreBreakdown(s_iou=p.s_iou, s_coarse=s_coarse, s_conf=s_conf))
    return out


def needs_fine(breakdowns: Sequence[ScoreBreakdown], tau: float) -> bool:
    """True iff the best blended confidence is strictly below tau."""
    return max(b.s_conf for b in breakdowns) < tau


def score_fine(
    proposals: Sequence[Proposal],
    predicted_box: BBox | None,
    fine_scores: Sequence[float],
    alpha: float,
    beta: float,
) -> list[ScoreBreakdown]:
    """Re-score with the fine temporal-consistency term added to the blend."""
    if not proposals:
        raise NoProposals("score_fine needs at least one proposal")
    if alpha < 0 or beta < 0 or alpha + beta > 1.0:
        raise WeightViolation(
            f"need alpha, beta >= 0 and alpha+beta <= 1, got {alpha}, {beta}"
        )
    if len(fine_scores) != len(proposals):
        raise ValueError("fine_scores must align with proposals")
    out = []
    for p, s_fine in zip(proposals, fine_scores):
        s_coarse = _coarse_component(predicted_box, p)
        s_conf = _clamp01(
            alpha * s_coarse + beta * s_fine + (1.0 - alpha - beta) * p.s_iou
        )
        out.append(
            ScoreBreakdown(
                s_iou=p.s_iou,
                s_coarse=s_coarse,
                s_conf=s_conf,
                s_fine=s_fine,
                fine_used=True,
            )
        )
    return out


def _argmax_conf(breakdowns: Sequence[ScoreBreakdown]) -> int:
    best = 0
    for i in range(1, len(breakdowns)):
        if breakdowns[i].s_conf > breakdowns[best].s_conf:
            best = i
    return best


def step(
    frame_index: int,
    proposals: Sequence[Proposal],
    kf: KalmanState | None,
    track_source: TrackSource | None,
    history: Sequence[tuple[int, BinaryMask]],
    cfg,
    fallback_box: BBox,
    noise: KalmanNoise | None = None,
) -> tuple[FrameDecision, KalmanState | None]:
    """Run one frame: predict, score, optionally escalate, select, update.

    kf=None disables the motion prior entirely (coarse component zero, no
    update); track_source=None disables escalation. A TrackSourceFailure
    during escalation downgrades the frame to coarse-only scoring and is
    recorded on the decision. fallback_box fills chosen_bbox when the
    selected mask is empty and no prediction box exists.
    """
    if not proposals:
        raise NoProposals(f"frame {frame_index} has no proposals")
    noise = noise or (cfg.kf if hasattr(cfg, "kf") else KalmanNoise())

    predicted_box: BBox | None = None
    if kf is not None:
        kf, predicted_box = kf_predict(kf, noise)

    breakdowns = score_coarse(proposals, predicted_box, cfg.alpha)
    fine_used = False
    fine_failed = False
    if track_source is not None and needs_fine(breakdowns, cfg.tau):
        try:
            fine_scores = []
            for i, p in enumerate(proposals):
                if p.mask.is_empty:
                    fine_scores.append(0.0)
                    continue
                try:
                    fine_scores.append(
                        fine_score(p.mask, track_source, history, cfg,
                                   frame_index, slot=i)
                    )
                except EmptyMask:
                    fine_scores.append(0.0)
            breakdowns = score_fine(
                proposals, predicted_box, fine_scores, cfg.alpha, cfg.beta
            )
            fine_used = True
        except TrackSourceFailure:
            fine_failed = True

    chosen = _argmax_conf(breakdowns)
    chosen_mask = proposals[chosen].mask
    s_best = breakdowns[chosen].s_conf
    if chosen_mask.is_empty:
        chosen_bbox = predicted_box if predicted_box is not None else fallback_box
        visible = False
    else:
        chosen_bbox = mask_to_bbox(chosen_mask)
        visible = bool(s_best >= cfg.visibility_floor)

    kf_updated = False
    if kf is not None and visible and s_best >= cfg.kf_update_floor:
        kf = kf_update(kf, chosen_bbox, noise)
        kf_updated = True

    decision = FrameDecision(
        frame_index=frame_index,
        chosen=chosen,
        breakdowns=tuple(breakdowns),
        chosen_bbox=chosen_bbox,
        visible=visible,
        kf_updated=kf_updated,
        fine_used=fine_used,
        fine_failed=fine_failed,
        has_motion=predicted_box is not None,
    )
    return decision, kf
