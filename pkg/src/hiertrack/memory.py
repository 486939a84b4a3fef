"""Long/short split memory with motion-aware and distractor-aware admission.

Short-term entries are recent high-confidence frames kept in FIFO order;
long-term entries are the subset whose alternative proposals sat far away
(directed Hausdorff between contours), i.e. frames that resolved a real
ambiguity. The conditioning set is what a proposal source consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .geometry import BinaryMask, contour, directed_hausdorff
from .selector import FrameDecision


@dataclass(frozen=True)
class MemoryEntry:
    frame_index: int
    mask: BinaryMask
    s_conf: float
    s_iou: float
    distinctive: bool = False
    separation: float = 0.0  # max directed Hausdorff / image diagonal


@dataclass(frozen=True)
class MemoryBank:
    """Prompt entry (permanent) + short FIFO + long distinctive set.

    sm_seen / lm_seen count qualifying frames for the interval gates.
    """

    prompt: MemoryEntry
    short: tuple[MemoryEntry, ...] = ()
    long: tuple[MemoryEntry, ...] = ()
    sm_seen: int = 0
    lm_seen: int = 0

    @classmethod
    def create(cls, prompt: MemoryEntry) -> "MemoryBank":
        return cls(prompt=prompt)


def is_high_confidence(decision: FrameDecision, cfg) -> bool:
    """Visible frame whose chosen proposal passes both confidence gates.

    The motion gate only applies when the frame actually carried a motion
    estimate; with the filter disabled it is vacuous.
    """
    b = decision.chosen_breakdown
    if not decision.visible or b.s_iou < cfg.theta_iou:
        return False
    return not decision.has_motion or b.s_coarse >= cfg.theta_motion


def is_distinctive(
    chosen_mask: BinaryMask,
    alternative_masks: Sequence[BinaryMask],
    image_diag: float,
    theta_dist: float,
) -> tuple[bool, float]:
    """Separation of the chosen mask from the alternative proposals.

    separation = max over non-empty alternatives of the directed Hausdorff
    distance from the alternative's contour to the chosen contour, divided
    by the image diagonal. Empty alternatives are skipped; with none left
    the frame is not distinctive.
    """
    if chosen_mask.is_empty:
        return False, 0.0
    alts = [a for a in alternative_masks if not a.is_empty]
    if not alts:
        return False, 0.0
    chosen_contour = contour(chosen_mask)
    separation = max(
        directed_hausdorff(contour(a), chosen_contour) for a in alts
    ) / image_diag
    return separation >= theta_dist, separation


def admit(
    bank: MemoryBank,
    decision: FrameDecision,
    chosen_mask: BinaryMask,
    alternatives: Sequence[BinaryMask],
    cfg,
    allow_short: bool = True,
    allow_long: bool = True,
) -> MemoryBank:
    """Admission step for one finalized frame decision.

    High-confidence frames enter the short FIFO on every k_sm-th qualifying
    frame (oldest evicted past capacity). Distinctive ones additionally
    enter the long bank on every k_lm-th distinctive frame; a full long
    bank evicts its smallest-separation entry.
    """
    if not is_high_confidence(decision, cfg):
        return bank
    b = decision.chosen_breakdown
    image_diag = math.hypot(chosen_mask.width, chosen_mask.height)
    distinctive, separation = is_distinctive(
        chosen_mask, alternatives, image_diag, cfg.theta_dist
    )
    entry = MemoryEntry(
        frame_index=decision.frame_index,
        mask=chosen_mask,
        s_conf=b.s_conf,
        s_iou=b.s_iou,
        distinctive=distinctive,
        separation=separation,
    )

    short = bank.short
    sm_seen = bank.sm_seen
    if allow_short:
        if sm_seen % cfg.k_sm == 0:
            short = (short + (entry,))[-cfg.n_sm :]
        sm_seen += 1

    long_ = bank.long
    lm_seen = bank.lm_seen
    if allow_long and distinctive:
        if lm_seen % cfg.k_lm == 0:
            long_ = long_ + (entry,)
            if len(long_) > cfg.n_lm:
                weakest = min(
                    range(len(long_)),
                    key=lambda i: (long_[i].separation, long_[i].frame_index),
                )
                long_ = long_[:weakest] + long_[weakest + 1 :]
        lm_seen += 1

    return replace(bank, short=short, long=long_, sm_seen=sm_seen, lm_seen=lm_seen)


def conditioning_set(bank: MemoryBank) -> list[MemoryEntry]:
    """Prompt first, then long then short by ascending frame, deduplicated.

    A frame present in both banks appears once, via its long entry.
    """
    out = [bank.prompt]
    seen = {bank.prompt.frame_index}
    for entry in sorted(bank.long, key=lambda e: e.frame_index):
        if entry.frame_index not in seen:
            out.append(entry)
            seen.add(entry.frame_index)
    for entry in sorted(bank.short, key=lambda e: e.frame_index):
        if entry.frame_index not in seen:
            out.append(entry)
            seen.add(entry.frame_index)
    return out
