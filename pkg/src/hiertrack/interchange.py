"""Line-delimited interchange records.

One JSON object per line, each self-describing via a "type" tag. The first
record must be a meta record carrying the schema version. Unknown record
types are skipped with a warning so streams stay forward-extensible.
Serialization is canonical (sorted keys, no whitespace), which makes dumps
byte-identical across runs with identical inputs.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import IOFailure, SchemaError, SchemaVersionMismatch
from .geometry import BBox, BinaryMask
from .points import TrackBundle
from .selector import FrameDecision, Proposal, ScoreBreakdown

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

KNOWN_TYPES = {
    "meta",
    "frame",
    "scene_ref",
    "gt",
    "proposal",
    "tracks",
    "decision",
    "memory",
    "summary",
    "metrics",
    "curve",
}


def meta_record(kind: str) -> dict:
    return {"type": "meta", "schema_version": SCHEMA_VERSION, "kind": kind}


def encode_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def write_records(path: str | Path, records: Iterable[dict]) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(encode_line(record))
                fh.write("\n")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def read_records(path: str | Path) -> Iterator[dict]:
    """Yield known records; enforce the meta/version header on line one."""
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    with fh:
        first = True
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: not JSON: {exc}") from exc
            if not isinstance(record, dict) or "type" not in record:
                raise SchemaError(f"{path}:{lineno}: record lacks a type tag")
            if first:
                if record["type"] != "meta":
                    raise SchemaError(f"{path}:1: first record must be meta")
                version = record.get("schema_version")
                if version != SCHEMA_VERSION:
                    raise SchemaVersionMismatch(
                        f"{path}: schema version {version}, expected {SCHEMA_VERSION}"
                    )
                first = False
            if record["type"] not in KNOWN_TYPES:
                log.warning("%s:%d: skipping unknown record type %r",
                            path, lineno, record["type"])
                continue
            yield record


# --- field codecs ------------------------------------------------------------


def mask_to_obj(m: BinaryMask) -> dict:
    return {"width": m.width, "height": m.height,
            "runs": [[s, l] for s, l in m.runs]}


def mask_from_obj(obj: dict) -> BinaryMask:
    try:
        return BinaryMask(
            width=int(obj["width"]),
            height=int(obj["height"]),
            runs=tuple((int(s), int(l)) for s, l in obj["runs"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad mask record: {exc}") from exc


def bbox_to_obj(b: BBox) -> list[float]:
    return [b.cx, b.cy, b.w, b.h]


def bbox_from_obj(obj) -> BBox:
    try:
        cx, cy, w, h = (float(v) for v in obj)
        return BBox(cx=cx, cy=cy, w=w, h=h)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad bbox record: {exc}") from exc


def gt_record(frame: int, visible: bool, box: BBox | None,
              mask: BinaryMask | None = None) -> dict:
    record = {"type": "gt", "frame": frame, "visible": visible}
    if box is not None:
        record["bbox"] = bbox_to_obj(box)
    if mask is not None:
        record["mask"] = mask_to_obj(mask)
    return record


def proposal_record(frame: int, slot: int, p: Proposal) -> dict:
    return {
        "type": "proposal",
        "frame": frame,
        "slot": slot,
        "mask": mask_to_obj(p.mask),
        "s_iou": p.s_iou,
        "objectness": p.objectness,
    }


def proposal_from_record(record: dict) -> Proposal:
    try:
        return Proposal(
            mask=mask_from_obj(record["mask"]),
            s_iou=float(record["s_iou"]),
            objectness=float(record["objectness"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad proposal record: {exc}") from exc


def tracks_record(bundle: TrackBundle, slot: int = 0) -> dict:
    points = []
    for i in range(bundle.xy.shape[0]):
        points.append(
            {
                "xy": [[float(x), float(y)] for x, y in bundle.xy[i]],
                "vis": [bool(v) for v in bundle.visible[i]],
            }
        )
    return {
        "type": "tracks",
        "origin_frame": bundle.origin_frame,
        "slot": slot,
        "frames": list(bundle.frames),
        "points": points,
    }


def tracks_from_record(record: dict) -> tuple[int, TrackBundle]:
    """Returns (slot, bundle)."""
    try:
        frames = tuple(int(f) for f in record["frames"])
        pts = record["points"]
        n, k = len(pts), len(frames)
        xy = np.zeros((n, k, 2))
        vis = np.zeros((n, k), dtype=bool)
        for i, p in enumerate(pts):
            xy[i] = p["xy"]
            vis[i] = p["vis"]
        bundle = TrackBundle(
            origin_frame=int(record["origin_frame"]), frames=frames,
            xy=xy, visible=vis,
        )
        return int(record.get("slot", 0)), bundle
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad tracks record: {exc}") from exc


def breakdown_to_obj(b: ScoreBreakdown) -> dict:
    return {
        "s_iou": b.s_iou,
        "s_coarse": b.s_coarse,
        "s_fine": b.s_fine,
        "s_conf": b.s_conf,
        "fine_used": b.fine_used,
    }


def decision_record(d: FrameDecision) -> dict:
    return {
        "type": "decision",
        "frame": d.frame_index,
        "chosen": d.chosen,
        "breakdowns": [breakdown_to_obj(b) for b in d.breakdowns],
        "bbox": bbox_to_obj(d.chosen_bbox),
        "visible": d.visible,
        "kf_updated": d.kf_updated,
        "fine_used": d.fine_used,
        "fine_failed": d.fine_failed,
        "has_motion": d.has_motion,
    }


def decision_from_record(record: dict) -> FrameDecision:
    try:
        breakdowns = tuple(
            ScoreBreakdown(
                s_iou=float(b["s_iou"]),
                s_coarse=float(b["s_coarse"]),
                s_conf=float(b["s_conf"]),
                s_fine=None if b.get("s_fine") is None else float(b["s_fine"]),
                fine_used=bool(b.get("fine_used", False)),
            )
            for b in record["breakdowns"]
        )
        return FrameDecision(
            frame_index=int(record["frame"]),
            chosen=int(record["chosen"]),
            breakdowns=breakdowns,
            chosen_bbox=bbox_from_obj(record["bbox"]),
            visible=bool(record["visible"]),
            kf_updated=bool(record["kf_updated"]),
            fine_used=bool(record["fine_used"]),
            fine_failed=bool(record.get("fine_failed", False)),
            has_motion=bool(record.get("has_motion", True)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad decision record: {exc}") from exc


def memory_entry_to_obj(entry, kind: str) -> dict:
    return {
        "bank": kind,
        "frame": entry.frame_index,
        "mask": mask_to_obj(entry.mask),
        "s_conf": entry.s_conf,
        "s_iou": entry.s_iou,
        "distinctive": entry.distinctive,
        "separation": entry.separation,
    }


def memory_record(bank) -> dict:
    """Full bank state with admission metadata, for debugging and replay."""
    entries = [memory_entry_to_obj(bank.prompt, "prompt")]
    entries.extend(memory_entry_to_obj(e, "long") for e in bank.long)
    entries.extend(memory_entry_to_obj(e, "short") for e in bank.short)
    return {"type": "memory", "entries": entries,
            "sm_seen": bank.sm_seen, "lm_seen": bank.lm_seen}
