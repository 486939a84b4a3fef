import numpy as np
import pytest

pytest.importorskip("trackbridge", reason="bridge package not installed")
cv2 = pytest.importorskip("cv2", reason="bridge needs OpenCV")


@pytest.fixture(scope="session")
def clip(tmp_path_factory):
    """A real 12-frame clip on disk: bright square drifting over texture.

    Returns (frames_dir, mask_path, target_positions).
    """
    root = tmp_path_factory.mktemp("clip")
    frames_dir = root / "frames"
    frames_dir.mkdir()
    rng = np.random.default_rng(123)
    height, width = 72, 96
    background = (rng.random((height, width, 3)) * 60 + 40).astype(np.uint8)
    positions = []
    for t in range(12):
        img = background.copy()
        x0, y0 = 12 + 3 * t, 20 + t
        img[y0 : y0 + 16, x0 : x0 + 16] = (40, 180, 240)  # constant-color target
        positions.append((x0, y0))
        cv2.imwrite(str(frames_dir / f"{t:04d}.png"), img)

    mask = np.zeros((height, width), dtype=np.uint8)
    x0, y0 = positions[0]
    mask[y0 : y0 + 16, x0 : x0 + 16] = 255
    mask_path = root / "prompt.png"
    cv2.imwrite(str(mask_path), mask)
    return frames_dir, mask_path, positions


@pytest.fixture()
def manifest_file(clip, tmp_path):
    frames_dir, mask_path, _ = clip
    path = tmp_path / "manifest.cfg"
    path.write_text(
        f"video = {frames_dir}\n"
        f"frames = 0, 9\n"
        f"prompt.mask = {mask_path}\n"
        f"model.segmenter = tmpl-ncc-v1\n"
        f"model.tracker = lk-pyr-v1\n"
        f"out = {tmp_path / 'export.jsonl'}\n"
        f"track.window = 6\n"
        f"track.points = 12\n"
    )
    return path
