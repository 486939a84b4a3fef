"""Segmenter-agnostic tracking decision layer.

Hierarchical motion estimation (Kalman box prior plus selective point-track
refinement) chooses among per-frame mask proposals, and a long/short memory
bank with motion-aware and distractor-aware admission maintains the
conditioning set a segmenter consumes.
"""

from .config import Config
from .geometry import (
    BBox,
    BinaryMask,
    Contour,
    SoftMask,
    contour,
    dice,
    directed_hausdorff,
    iou_box,
    iou_mask,
    mask_to_bbox,
)
from .kalman import KalmanNoise, KalmanState, coarse_score, kf_init, kf_predict, kf_update
from .memory import (
    MemoryBank,
    MemoryEntry,
    admit,
    conditioning_set,
    is_distinctive,
    is_high_confidence,
)
from .metrics import (
    SequenceResult,
    f_score,
    norm_precision,
    precision,
    success_auc,
)
from .pipeline import RunResult, Toggles, run_replay, run_scene
from .points import (
    PointSet,
    TrackBundle,
    TrackSource,
    farthest_point_sample,
    fine_score,
    rbf_reconstruct,
)
from .selector import (
    FrameDecision,
    Proposal,
    ScoreBreakdown,
    needs_fine,
    score_coarse,
    score_fine,
    step,
)
from .synth import (
    SCENE_LIBRARY,
    OracleTrackSource,
    Scene,
    generate_sequence,
    load_scene,
    synth_proposals,
)

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "BinaryMask",
    "Config",
    "Contour",
    "FrameDecision",
    "KalmanNoise",
    "KalmanState",
    "MemoryBank",
    "MemoryEntry",
    "OracleTrackSource",
    "PointSet",
    "Proposal",
    "RunResult",
    "SCENE_LIBRARY",
    "Scene",
    "ScoreBreakdown",
    "SequenceResult",
    "SoftMask",
    "Toggles",
    "TrackBundle",
    "TrackSource",
    "admit",
    "coarse_score",
    "conditioning_set",
    "contour",
    "dice",
    "directed_hausdorff",
    "f_score",
    "farthest_point_sample",
    "fine_score",
    "generate_sequence",
    "iou_box",
    "iou_mask",
    "is_distinctive",
    "is_high_confidence",
    "kf_init",
    "kf_predict",
    "kf_update",
    "load_scene",
    "mask_to_bbox",
    "needs_fine",
    "norm_precision",
    "precision",
    "rbf_reconstruct",
    "run_replay",
    "run_scene",
    "score_coarse",
    "score_fine",
    "step",
    "success_auc",
    "synth_proposals",
]
