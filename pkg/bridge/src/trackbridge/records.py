"""Interchange record writers, schema-compatible with the tracker CLI.

Line-delimited JSON with a leading meta record (schema_version 1), masks as
row-major run-length encodings, canonical serialization (sorted keys, no
whitespace) so repeated exports are byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

import numpy as np

SCHEMA_VERSION = 1


def encode_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def write_records(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(encode_line(record))
            fh.write("\n")


def mask_to_obj(mask: np.ndarray) -> dict:
    """Row-major RLE of a boolean (height, width) array."""
    h, w = mask.shape
    flat = np.flatnonzero(mask.ravel())
    runs = []
    if flat.size:
        breaks = np.flatnonzero(np.diff(flat) > 1)
        starts = np.concatenate(([flat[0]], flat[breaks + 1]))
        ends = np.concatenate((flat[breaks], [flat[-1]]))
        runs = [[int(s), int(e - s + 1)] for s, e in zip(starts, ends)]
    return {"width": w, "height": h, "runs": runs}


def mask_bbox(mask: np.ndarray) -> list[float]:
    ys, xs = np.nonzero(mask)
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    return [(x0 + x1) / 2.0, (y0 + y1) / 2.0, float(x1 - x0 + 1),
            float(y1 - y0 + 1)]


def meta_record(kind: str) -> dict:
    return {"type": "meta", "schema_version": SCHEMA_VERSION, "kind": kind}


def frame_record(frame: int) -> dict:
    return {"type": "frame", "frame": frame}


def prompt_record(frame: int, mask: np.ndarray) -> dict:
    return {
        "type": "gt",
        "frame": frame,
        "visible": True,
        "bbox": mask_bbox(mask),
        "mask": mask_to_obj(mask),
    }


def proposal_record(frame: int, slot: int, mask: np.ndarray, s_iou: float,
                    objectness: float) -> dict:
    return {
        "type": "proposal",
        "frame": frame,
        "slot": slot,
        "mask": mask_to_obj(mask),
        "s_iou": float(s_iou),
        "objectness": float(objectness),
    }


def tracks_record(origin: int, slot: int, frames: list[int], xy: np.ndarray,
                  visible: np.ndarray) -> dict:
    points = []
    for i in range(xy.shape[0]):
        points.append(
            {
                "xy": [[float(x), float(y)] for x, y in xy[i]],
                "vis": [bool(v) for v in visible[i]],
            }
        )
    return {
        "type": "tracks",
        "origin_frame": origin,
        "slot": slot,
        "frames": [int(f) for f in frames],
        "points": points,
    }
