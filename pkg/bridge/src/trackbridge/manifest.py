"""Export manifest: flat key=value file, same grammar as tracker configs.

    video = clips/cup                 # frame directory or a video file
    frames = 0, 9                     # inclusive range
    prompt.mask = clips/cup_mask.png  # or prompt.box = cx, cy, w, h
    model.segmenter = tmpl-ncc-v1
    model.tracker = lk-pyr-v1
    out = cup_proposals.jsonl
    track.window = 8
    track.points = 16
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError


def parse_kv_file(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ManifestError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


@dataclass(frozen=True)
class ExportManifest:
    video: Path
    frame_start: int
    frame_end: int  # inclusive
    prompt_mask: Path | None
    prompt_box: tuple[float, float, float, float] | None
    segmenter: str
    tracker: str
    out: Path | None
    track_window: int = 8
    track_points: int = 16

    def __post_init__(self):
        if self.prompt_mask is None and self.prompt_box is None:
            raise ManifestError("manifest needs prompt.mask or prompt.box")
        if self.frame_start < 0 or self.frame_end < self.frame_start:
            raise ManifestError(
                f"bad frame range {self.frame_start}..{self.frame_end}"
            )

    @classmethod
    def from_file(cls, path: str | Path) -> "ExportManifest":
        kv = parse_kv_file(path)
        base = Path(path).parent
        try:
            start, end = (int(v) for v in kv["frames"].split(","))
            box = None
            if "prompt.box" in kv:
                parts = tuple(float(v) for v in kv["prompt.box"].split(","))
                if len(parts) != 4:
                    raise ManifestError("prompt.box needs cx, cy, w, h")
                box = parts
            return cls(
                video=base / kv["video"],
                frame_start=start,
                frame_end=end,
                prompt_mask=base / kv["prompt.mask"] if "prompt.mask" in kv else None,
                prompt_box=box,
                segmenter=kv.get("model.segmenter", "tmpl-ncc-v1"),
                tracker=kv.get("model.tracker", "lk-pyr-v1"),
                out=base / kv["out"] if "out" in kv else None,
                track_window=int(kv.get("track.window", 8)),
                track_points=int(kv.get("track.points", 16)),
            )
        except KeyError as exc:
            raise ManifestError(f"manifest missing key {exc}") from exc
        except ValueError as exc:
            raise ManifestError(f"bad manifest value: {exc}") from exc

    @property
    def frame_range(self) -> range:
        return range(self.frame_start, self.frame_end + 1)
