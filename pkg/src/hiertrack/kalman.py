"""Constant-velocity Kalman filter over the target bounding box.

State vector: [cx, cy, w, h, vcx, vcy, vw, vh] (pixels, pixels/frame).
The filter supplies the coarse prediction box; its IoU against each
proposal box is the coarse motion confidence.

The transition, measurement and noise matrices are all block-diagonal per
coordinate, so the 8-dimensional filter decomposes exactly into four
independent (position, velocity) filters. States created by kf_init never
develop cross-coordinate covariance, and the recursion runs on plain
scalars: the whole coarse path has to stay negligible next to a proposal
source's frame step. The full mean vector and 8x8 covariance matrix are
materialized lazily for inspection; covariance handed in from outside is
read through the same per-coordinate view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotInitialized
from .geometry import BBox, iou_box

STATE_DIM = 8
MEAS_DIM = 4
MIN_BOX_SIZE = 1.0


@dataclass(frozen=True)
class KalmanNoise:
    """Noise priors; velocity process noise uses half the position/size std.

    Defaults are calibrated on the synthetic world: measurement noise well
    above the per-frame box jitter and a tight process model, so the
    prediction smooths over degraded measurements instead of chasing them.
    """

    q_pos: float = 0.25
    q_size: float = 0.15
    r: float = 4.0
    p0_pos: float = 2.0
    p0_vel: float = 3.0

    def q_pairs(self) -> tuple[tuple[float, float], ...]:
        """(position var, velocity var) per coordinate [cx, cy, w, h]."""
        cached = self.__dict__.get("_q_pairs")
        if cached is None:
            qp2, qv2 = self.q_pos**2, (0.5 * self.q_pos) ** 2
            sp2, sv2 = self.q_size**2, (0.5 * self.q_size) ** 2
            cached = ((qp2, qv2), (qp2, qv2), (sp2, sv2), (sp2, sv2))
            object.__setattr__(self, "_q_pairs", cached)
        return cached

    def q_matrix(self) -> np.ndarray:
        out = np.zeros((STATE_DIM, STATE_DIM))
        for i, (qp, qv) in enumerate(self.q_pairs()):
            out[i, i] = qp
            out[i + 4, i + 4] = qv
        return out

    def r_matrix(self) -> np.ndarray:
        return np.eye(MEAS_DIM) * self.r**2

    def p0_matrix(self) -> np.ndarray:
        stds = np.array([self.p0_pos] * 4 + [self.p0_vel] * 4)
        return np.diag(stds**2)


class KalmanState:
    """Filter state value; operations return new states.

    mean is the 8-vector, covariance the 8x8 symmetric PSD matrix. Both are
    views over packed per-coordinate scalars, built on demand.
    """

    __slots__ = ("_mean", "_pairs", "initialized", "_mean_arr", "_cov_arr")

    def __init__(self, mean, covariance, initialized: bool = True):
        mean = np.asarray(mean, dtype=np.float64)
        cov = np.asarray(covariance, dtype=np.float64)
        if mean.shape != (STATE_DIM,) or cov.shape != (STATE_DIM, STATE_DIM):
            raise ValueError("Kalman state must be an 8-vector with 8x8 covariance")
        self._mean = tuple(mean.tolist())
        self._pairs = tuple(
            (float(cov[i, i]), float(cov[i, i + 4]), float(cov[i + 4, i + 4]))
            for i in range(MEAS_DIM)
        )
        self.initialized = initialized
        self._mean_arr = mean.copy()
        self._cov_arr = cov.copy()

    @classmethod
    def _from_packed(cls, mean: tuple, pairs: tuple) -> "KalmanState":
        state = object.__new__(cls)
        state._mean = mean
        state._pairs = pairs
        state.initialized = True
        state._mean_arr = None
        state._cov_arr = None
        return state

    @property
    def mean(self) -> np.ndarray:
        if self._mean_arr is None:
            self._mean_arr = np.array(self._mean)
        return self._mean_arr

    @property
    def covariance(self) -> np.ndarray:
        if self._cov_arr is None:
            cov = np.zeros((STATE_DIM, STATE_DIM))
            for i, (a, b, c) in enumerate(self._pairs):
                j = i + 4
                cov[i, i] = a
                cov[i, j] = cov[j, i] = b
                cov[j, j] = c
            self._cov_arr = cov
        return self._cov_arr

    def box(self) -> BBox:
        m = self._mean
        return BBox(cx=m[0], cy=m[1], w=m[2], h=m[3])

    def __repr__(self) -> str:
        return (f"KalmanState(mean={list(self._mean)!r}, "
                f"initialized={self.initialized})")


def kf_init(b: BBox, noise: KalmanNoise = KalmanNoise()) -> KalmanState:
    """Start the filter on the prompt box with zero velocity."""
    mean = (b.cx, b.cy, max(b.w, MIN_BOX_SIZE), max(b.h, MIN_BOX_SIZE),
            0.0, 0.0, 0.0, 0.0)
    pp, pv = noise.p0_pos**2, noise.p0_vel**2
    pairs = ((pp, 0.0, pv),) * MEAS_DIM
    return KalmanState._from_packed(mean, pairs)


def kf_predict(
    s: KalmanState, noise: KalmanNoise = KalmanNoise()
) -> tuple[KalmanState, BBox]:
    """One-frame constant-velocity prediction; returns (state, predicted box)."""
    if not s.initialized:
        raise NotInitialized("kf_predict before kf_init")
    m = s._mean
    mean = (
        m[0] + m[4],
        m[1] + m[5],
        max(m[2] + m[6], MIN_BOX_SIZE),
        max(m[3] + m[7], MIN_BOX_SIZE),
        m[4], m[5], m[6], m[7],
    )
    pairs = tuple(
        (a + 2.0 * b + c + qp, b + c, c + qv)
        for (a, b, c), (qp, qv) in zip(s._pairs, noise.q_pairs())
    )
    state = KalmanState._from_packed(mean, pairs)
    return state, state.box()


def kf_update(
    s: KalmanState, b: BBox, noise: KalmanNoise = KalmanNoise()
) -> KalmanState:
    """Correct the state with the box of the finally selected mask."""
    if not s.initialized:
        raise NotInitialized("kf_update before kf_init")
    z = (b.cx, b.cy, b.w, b.h)
    r2 = noise.r * noise.r
    m = s._mean
    mean = list(m)
    pairs = []
    for i, (a, pb, c) in enumerate(s._pairs):
        gain_den = a + r2
        k1 = a / gain_den
        k2 = pb / gain_den
        innovation = z[i] - m[i]
        mean[i] += k1 * innovation
        mean[i + 4] += k2 * innovation
        pairs.append(((1.0 - k1) * a, (1.0 - k1) * pb, c - k2 * pb))
    mean[2] = max(mean[2], MIN_BOX_SIZE)
    mean[3] = max(mean[3], MIN_BOX_SIZE)
    return KalmanState._from_packed(tuple(mean), tuple(pairs))


def coarse_score(predicted: BBox, proposal_box: BBox) -> float:
    """Coarse motion confidence: IoU of the prediction and a proposal box."""
    return iou_box(predicted, proposal_box)
