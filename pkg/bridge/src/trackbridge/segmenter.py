"""Prompt-conditioned color-template segmenter.

A deliberately small real model: the prompt region defines a color
template; each frame gets a smoothed per-pixel similarity field (torch),
and three nested thresholds on that field produce the proposal masks at
different granularities. Scores are self-confidence, not ground-truth
quality: mean in-mask similarity damped by how far the mask's area has
wandered from the prompt's.
"""

from __future__ import annotations

import numpy as np

from .errors import ModelLoadFailure

PROPOSAL_LEVELS = (0.75, 0.55, 0.35)
SIGMA_FLOOR = 12.0  # color-space std floor, uint8 scale


class TemplateCorrelationSegmenter:
    """Three threshold-level proposals from a color-similarity field."""

    model_id = "tmpl-ncc-v1"

    def __init__(self):
        try:
            import torch
            import torch.nn.functional as functional
        except ImportError as exc:  # pragma: no cover - torch is a hard dep
            raise ModelLoadFailure(f"torch backend unavailable: {exc}") from exc
        self._torch = torch
        self._functional = functional
        self.mean_color: np.ndarray | None = None
        self.sigma: float | None = None
        self.prompt_area: int = 0
        self.last_center: tuple[float, float] | None = None

    def initialize(self, frame: np.ndarray, prompt_mask: np.ndarray) -> None:
        pixels = frame[prompt_mask].astype(np.float64)
        if pixels.size == 0:
            raise ModelLoadFailure("prompt mask selects no pixels")
        self.mean_color = pixels.mean(axis=0)
        self.sigma = max(float(pixels.std()), SIGMA_FLOOR)
        self.prompt_area = int(prompt_mask.sum())
        ys, xs = np.nonzero(prompt_mask)
        self.last_center = (float(xs.mean()), float(ys.mean()))

    def _similarity(self, frame: np.ndarray) -> np.ndarray:
        torch = self._torch
        img = torch.from_numpy(frame.astype(np.float32))
        template = torch.tensor(self.mean_color, dtype=torch.float32)
        dist2 = ((img - template) ** 2).sum(dim=2)
        sim = torch.exp(-dist2 / (2.0 * self.sigma * self.sigma))
        # 5x5 box smoothing keeps thresholded regions cohesive
        kernel = torch.full((1, 1, 5, 5), 1.0 / 25.0)
        smooth = self._functional.conv2d(
            sim[None, None], kernel, padding=2
        )[0, 0]
        return smooth.numpy()

    def _nearest_component(self, binary: np.ndarray) -> np.ndarray:
        import cv2

        count, labels = cv2.connectedComponents(binary.astype(np.uint8))
        if count <= 1:
            return np.zeros_like(binary)
        cx, cy = self.last_center
        best_label, best_d2 = 0, None
        for label in range(1, count):
            ys, xs = np.nonzero(labels == label)
            d2 = (xs.mean() - cx) ** 2 + (ys.mean() - cy) ** 2
            if best_d2 is None or d2 < best_d2:
                best_label, best_d2 = label, d2
        return labels == best_label

    def propose(self, frame: np.ndarray):
        """[(mask, s_iou, objectness)] for the three granularity levels."""
        if self.mean_color is None:
            raise ModelLoadFailure("segmenter used before initialize()")
        sim = self._similarity(frame)
        peak = float(sim.max())
        proposals = []
        primary_center = None
        for level in PROPOSAL_LEVELS:
            binary = sim >= level * peak if peak > 0 else np.zeros_like(sim, bool)
            mask = self._nearest_component(binary)
            area = int(mask.sum())
            if area == 0:
                proposals.append((mask, 0.0, 0.0))
                continue
            inside = float(sim[mask].mean())
            size_drift = abs(area - self.prompt_area) / (area + self.prompt_area)
            s_iou = max(0.0, min(1.0, inside / peak * (1.0 - size_drift)))
            objectness = max(0.0, min(1.0, inside))
            proposals.append((mask, s_iou, objectness))
            if primary_center is None:
                ys, xs = np.nonzero(mask)
                primary_center = (float(xs.mean()), float(ys.mean()))
        if primary_center is not None:
            self.last_center = primary_center
        return proposals


_SEGMENTERS = {TemplateCorrelationSegmenter.model_id: TemplateCorrelationSegmenter}


def get_segmenter(model_id: str) -> TemplateCorrelationSegmenter:
    if model_id not in _SEGMENTERS:
        raise ModelLoadFailure(f"unknown segmenter model {model_id!r}")
    return _SEGMENTERS[model_id]()
