import numpy as np
import pytest

from hiertrack.errors import NotInitialized
from hiertrack.geometry import BBox
from hiertrack.kalman import (
    MIN_BOX_SIZE,
    KalmanNoise,
    KalmanState,
    coarse_score,
    kf_init,
    kf_predict,
    kf_update,
)


class DenseKalman:
    """Independent textbook implementation: explicit 8x8 matrix algebra."""

    def __init__(self, box: BBox, noise: KalmanNoise):
        self.noise = noise
        self.F = np.eye(8)
        self.F[:4, 4:] = np.eye(4)
        self.H = np.eye(4, 8)
        self.Q = noise.q_matrix()
        self.R = noise.r_matrix()
        self.x = np.zeros(8)
        self.x[:4] = [box.cx, box.cy, max(box.w, MIN_BOX_SIZE),
                      max(box.h, MIN_BOX_SIZE)]
        self.P = noise.p0_matrix()

    def _clamp(self):
        self.x[2] = max(self.x[2], MIN_BOX_SIZE)
        self.x[3] = max(self.x[3], MIN_BOX_SIZE)

    def predict(self):
        self.x = self.F @ self.x
        self._clamp()
        self.P = self.F @ self.P @ self.F.T + self.Q

    def update(self, box: BBox):
        z = np.array([box.cx, box.cy, box.w, box.h])
        S = self.H @ self.P @ self.H.T + self.R
        K = self.P @ self.H.T @ np.linalg.inv(S)
        self.x = self.x + K @ (z - self.H @ self.x)
        self._clamp()
        self.P = (np.eye(8) - K @ self.H) @ self.P


def test_init_zero_velocity():
    s = kf_init(BBox(10, 20, 4, 6))
    assert s.mean.tolist() == [10, 20, 4, 6, 0, 0, 0, 0]
    assert s.initialized


def test_init_covariance_priors():
    noise = KalmanNoise(p0_pos=2.0, p0_vel=7.0)
    s = kf_init(BBox(1, 1, 2, 2), noise)
    assert np.array_equal(s.covariance, np.diag([4.0] * 4 + [49.0] * 4))


def test_init_clamps_degenerate_box():
    s = kf_init(BBox(5, 5, 0, 3))
    assert s.mean[2] == MIN_BOX_SIZE


def test_predict_constant_velocity_step():
    s = KalmanState(mean=np.array([0, 0, 2, 2, 1, 0, 0, 0.0]),
                    covariance=np.eye(8))
    _, box = kf_predict(s)
    assert (box.cx, box.cy, box.w, box.h) == (1.0, 0.0, 2.0, 2.0)


def test_predict_zero_velocity_fixed_point():
    s = kf_init(BBox(7, 8, 3, 4))
    _, box = kf_predict(s)
    assert (box.cx, box.cy, box.w, box.h) == (7.0, 8.0, 3.0, 4.0)


def test_predict_requires_init():
    s = KalmanState(mean=np.zeros(8), covariance=np.eye(8), initialized=False)
    with pytest.raises(NotInitialized):
        kf_predict(s)
    with pytest.raises(NotInitialized):
        kf_update(s, BBox(0, 0, 1, 1))


def test_update_zero_innovation_keeps_mean():
    s = kf_init(BBox(10, 10, 5, 5))
    s, box = kf_predict(s)
    s2 = kf_update(s, box)
    assert np.allclose(s2.mean, s.mean, atol=1e-9)


def test_update_perfect_measurement_limit():
    noise = KalmanNoise(r=1e-9)
    s = kf_init(BBox(10, 10, 5, 5), noise)
    s, _ = kf_predict(s, noise)
    s = kf_update(s, BBox(14.0, 11.0, 6.0, 5.5), noise)
    assert np.allclose(s.mean[:4], [14.0, 11.0, 6.0, 5.5], atol=1e-6)


def test_update_does_not_increase_covariance_trace():
    rng = np.random.default_rng(0)
    s = kf_init(BBox(10, 10, 5, 5))
    for _ in range(20):
        s, box = kf_predict(s)
        predicted_trace = np.trace(s.covariance)
        s = kf_update(s, BBox(box.cx + rng.normal(), box.cy + rng.normal(),
                              max(1.0, box.w + rng.normal()),
                              max(1.0, box.h + rng.normal())))
        assert np.trace(s.covariance) <= predicted_trace + 1e-12


def test_matches_dense_oracle_on_random_sequences():
    rng = np.random.default_rng(1)
    for _ in range(100):
        noise = KalmanNoise(
            q_pos=rng.uniform(0.1, 2.0),
            q_size=rng.uniform(0.05, 1.0),
            r=rng.uniform(0.2, 4.0),
            p0_pos=rng.uniform(0.5, 4.0),
            p0_vel=rng.uniform(1.0, 12.0),
        )
        start = BBox(*rng.uniform(10, 50, 2), *rng.uniform(4, 20, 2))
        ours = kf_init(start, noise)
        oracle = DenseKalman(start, noise)
        for _ in range(30):
            ours, _ = kf_predict(ours, noise)
            oracle.predict()
            if rng.random() < 0.7:
                z = BBox(*rng.uniform(10, 50, 2), *rng.uniform(4, 20, 2))
                ours = kf_update(ours, z, noise)
                oracle.update(z)
            assert np.allclose(ours.mean, oracle.x, atol=1e-9)
            assert np.allclose(ours.covariance, oracle.P, atol=1e-9)


def test_noiseless_track_converges_within_three_frames():
    # closed-form check: with negligible R the posterior pins to the
    # measurement, so the next prediction continues the exact line
    noise = KalmanNoise(q_pos=0.0, q_size=0.0, r=1e-9)
    truth = lambda t: BBox(10.0 + 3.0 * t, 20.0 - 1.0 * t, 8.0, 6.0)
    s = kf_init(truth(0), noise)
    errors = []
    for t in range(1, 6):
        s, box = kf_predict(s, noise)
        errors.append(np.hypot(box.cx - truth(t).cx, box.cy - truth(t).cy))
        s = kf_update(s, truth(t), noise)
    assert errors[3] < 1e-6 and errors[4] < 1e-6
    assert all(e2 <= e1 + 1e-12 for e1, e2 in zip(errors, errors[1:]))


def test_covariance_symmetric_psd_over_random_sequences():
    rng = np.random.default_rng(2)
    for _ in range(30):
        s = kf_init(BBox(20, 20, 10, 10))
        for _ in range(40):
            s, box = kf_predict(s)
            if rng.random() < 0.5:
                s = kf_update(s, BBox(box.cx + rng.normal(0, 3),
                                      box.cy + rng.normal(0, 3),
                                      max(1.0, box.w + rng.normal(0, 2)),
                                      max(1.0, box.h + rng.normal(0, 2))))
            assert np.allclose(s.covariance, s.covariance.T, atol=1e-9)
            assert np.linalg.eigvalsh(s.covariance).min() >= -1e-9


def test_coarse_score_is_box_iou():
    a = BBox(0, 0, 2, 2)
    assert coarse_score(a, a) == 1.0
    assert coarse_score(a, BBox(10, 10, 2, 2)) == 0.0
    assert coarse_score(BBox(0, 0, 1, 1), BBox(0.5, 0, 1, 1)) == pytest.approx(1 / 3)
