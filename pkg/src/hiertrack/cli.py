"""Command-line surface: simulate, track, eval, ablate, sweep.

Exit codes: 0 success, 2 bad input, 3 schema error. The config file path
defaults to $HIERTRACK_CONFIG when set; --set key=value flags override
file values. Latency numbers are printed to stdout but kept out of the
output dumps so identical runs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import interchange as ic
from .config import Config
from .errors import (
    EmptyGrid,
    FrameIndexGap,
    InputError,
    LengthMismatch,
    MissingPrompt,
    SchemaError,
)
from .memory import MemoryEntry
from .metrics import SequenceResult, ablation_report, summarize
from .pipeline import (
    ReplayProposalSource,
    ReplayTrackSource,
    RunResult,
    Toggles,
    run_replay,
    run_scene,
)
from .synth import (
    SCENE_LIBRARY,
    OracleTrackSource,
    generate_sequence,
    load_scene,
    scene_from_mapping,
    scene_to_mapping,
    synth_proposals,
)

ABLATION_ROWS = (
    Toggles(kf=False, pt=False, sm=False, lm=False),
    Toggles(kf=True, pt=False, sm=False, lm=False),
    Toggles(kf=False, pt=True, sm=False, lm=False),
    Toggles(kf=False, pt=False, sm=True, lm=False),
    Toggles(kf=False, pt=False, sm=False, lm=True),
    Toggles(kf=True, pt=False, sm=True, lm=False),
    Toggles(kf=True, pt=True, sm=True, lm=False),
    Toggles(kf=True, pt=True, sm=True, lm=True),
)


def _load_config(args) -> Config:
    path = getattr(args, "config", None) or os.environ.get("HIERTRACK_CONFIG")
    cfg = Config.from_file(path) if path else Config()
    overrides = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise InputError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = str(args.seed)
    return cfg.with_overrides(overrides) if overrides else cfg


def _toggles(args) -> Toggles:
    return Toggles(
        kf=not args.no_kf, pt=not args.no_pt,
        sm=not args.no_sm, lm=not args.no_lm,
    )


def _scene_names(spec: str) -> list[str]:
    if spec == "all":
        return list(SCENE_LIBRARY)
    return [s.strip() for s in spec.split(",") if s.strip()]


# --- simulate ----------------------------------------------------------------


def cmd_simulate(args) -> int:
    scene = load_scene(args.scene)
    seed = args.seed if args.seed is not None else scene.seed
    truths = generate_sequence(scene)
    if not truths[0].visible:
        raise MissingPrompt(f"scene {scene.name!r} target hidden on frame 0")

    records = [ic.meta_record("sequence")]
    records.append(
        {"type": "scene_ref", "name": scene.name, "seed": seed,
         "kv": scene_to_mapping(scene)}
    )
    for truth in truths:
        records.append(
            ic.gt_record(
                truth.frame_index,
                truth.visible,
                truth.target_box,
                mask=truth.target_mask if truth.frame_index == 0 else None,
            )
        )
    # proposals in the dump are generated against prompt-only conditioning;
    # memory-coupled runs regenerate them live from the scene_ref
    prompt_entry = MemoryEntry(frame_index=0, mask=truths[0].target_mask,
                               s_conf=1.0, s_iou=1.0)
    for t in range(1, scene.frame_count):
        proposals = synth_proposals(scene, t, [prompt_entry], seed, truths=truths)
        for slot, p in enumerate(proposals):
            records.append(ic.proposal_record(t, slot, p))
    ic.write_records(args.out, records)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


# --- track -------------------------------------------------------------------


def _parse_dump(path):
    """Split a sequence dump into its pieces."""
    prompt = None
    gt_frames = {}
    proposals: dict[int, dict[int, object]] = {}
    bundles = {}
    scene = None
    seed = None
    for record in ic.read_records(path):
        kind = record["type"]
        if kind == "gt":
            frame = int(record["frame"])
            box = ic.bbox_from_obj(record["bbox"]) if "bbox" in record else None
            gt_frames[frame] = (bool(record["visible"]), box)
            if "mask" in record and prompt is None:
                prompt = (frame, ic.mask_from_obj(record["mask"]))
        elif kind == "proposal":
            frame = int(record["frame"])
            proposals.setdefault(frame, {})[int(record["slot"])] = (
                ic.proposal_from_record(record)
            )
        elif kind == "tracks":
            slot, bundle = ic.tracks_from_record(record)
            bundles[(bundle.origin_frame, slot)] = bundle
        elif kind == "scene_ref":
            scene = scene_from_mapping(record["kv"])
            seed = int(record.get("seed", scene.seed))
    per_frame = {
        frame: [slots[k] for k in sorted(slots)] for frame, slots in proposals.items()
    }
    return prompt, gt_frames, per_frame, bundles, scene, seed


def _memory_records(result: RunResult) -> list[dict]:
    trace = [
        {"frame": f, "short": s, "long": l} for f, s, l in result.memory_trace
    ]
    return [
        {
            "type": "summary",
            "fine_used_fraction": result.fine_used_fraction,
            "fine_failed_frames": result.fine_failed_count,
            "toggles": result.toggles.label(),
            "memory_trace": trace,
        }
    ]


def _write_decisions(out, result: RunResult) -> None:
    records = [ic.meta_record("decisions")]
    records.extend(ic.decision_record(d) for d in result.decisions)
    if result.final_bank is not None:
        records.append(ic.memory_record(result.final_bank))
    records.extend(_memory_records(result))
    ic.write_records(out, records)


def cmd_track(args) -> int:
    cfg = _load_config(args)
    toggles = _toggles(args)
    if bool(args.scene) == bool(args.in_path):
        raise InputError("track needs exactly one of --scene or --in")

    if args.scene:
        scene = load_scene(args.scene)
        result = run_scene(scene, cfg, toggles)
    else:
        prompt, _, per_frame, bundles, scene, seed = _parse_dump(args.in_path)
        if prompt is None:
            raise MissingPrompt(f"{args.in_path} has no prompt-frame mask")
        if not per_frame:
            raise MissingPrompt(f"{args.in_path} has no proposal records")
        track_source = None
        if toggles.pt:
            if bundles:
                track_source = ReplayTrackSource(bundles)
            elif scene is not None:
                track_source = OracleTrackSource(
                    scene, track_noise=cfg.track_noise, seed=seed
                )
        result = run_replay(
            prompt[0], prompt[1], ReplayProposalSource(per_frame), cfg,
            toggles, track_source,
        )

    _write_decisions(args.out, result)
    stats = result.latency_stats()
    print(
        f"{len(result.decisions)} frames; fine used on "
        f"{result.fine_used_fraction:.1%} ({result.fine_failed_count} failures); "
        f"step latency mean {stats['mean_ms']:.3f} ms, p95 {stats['p95_ms']:.3f} ms"
    )
    return 0


# --- eval --------------------------------------------------------------------


def _result_from_dumps(pred_path, gt_path) -> SequenceResult:
    decisions = {}
    for record in ic.read_records(pred_path):
        if record["type"] == "decision":
            d = ic.decision_from_record(record)
            decisions[d.frame_index] = d
    gt = {}
    for record in ic.read_records(gt_path):
        if record["type"] == "gt":
            frame = int(record["frame"])
            box = ic.bbox_from_obj(record["bbox"]) if "bbox" in record else None
            gt[frame] = (bool(record["visible"]), box)
    if not decisions:
        raise LengthMismatch(f"{pred_path} holds no decision records")
    missing = sorted(set(decisions) - set(gt))
    if missing:
        raise LengthMismatch(f"ground truth lacks frames {missing[:5]}")
    frames = sorted(decisions)
    if frames != list(range(frames[0], frames[-1] + 1)):
        raise FrameIndexGap("decision frames are not contiguous")
    pred_boxes, pred_vis, conf, gt_boxes, gt_vis = [], [], [], [], []
    for f in frames:
        d = decisions[f]
        visible, box = gt[f]
        pred_boxes.append(d.chosen_bbox)
        pred_vis.append(d.visible)
        conf.append(d.chosen_breakdown.s_conf)
        gt_boxes.append(box)
        gt_vis.append(visible)
    return SequenceResult(
        pred_boxes=tuple(pred_boxes), pred_visible=tuple(pred_vis),
        confidence=tuple(conf), gt_boxes=tuple(gt_boxes),
        gt_visible=tuple(gt_vis),
    )


def cmd_eval(args) -> int:
    result = _result_from_dumps(args.pred, args.gt)
    report = summarize(result)
    print(f"frames          {len(result)}")
    print(f"AUC(%)          {report['auc']:.2f}")
    print(f"P(%)            {report['precision']:.2f}")
    print(f"P_norm(%)       {report['norm_precision']:.2f}")
    print(f"Pr/Re/F         {report['pr']:.3f} / {report['re']:.3f} / "
          f"{report['f']:.3f}")
    if args.out:
        ic.write_records(
            args.out,
            [ic.meta_record("metrics"), {"type": "metrics", **report}],
        )
    return 0


# --- ablate ------------------------------------------------------------------


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    scenes = [load_scene(name) for name in _scene_names(args.scenes)]
    records = [ic.meta_record("ablation")]
    header = (f"{'toggles':<16}{'AUC(%)':>9}{'P_norm(%)':>11}{'P(%)':>9}"
              f"{'fine%':>8}{'ms/frame':>10}")
    print(header)
    for row in ablation_report(scenes, cfg, ABLATION_ROWS,
                               workers=args.workers):
        toggles = row["toggles"]
        mean = row["metrics"]
        print(
            f"{toggles.label():<16}{mean['auc']:>9.2f}"
            f"{mean['norm_precision']:>11.2f}{mean['precision']:>9.2f}"
            f"{row['fine_used_fraction'] * 100:>8.2f}"
            f"{row['latency_ms']:>10.3f}"
        )
        records.append(
            {
                "type": "metrics",
                "toggles": toggles.label(),
                "kf": toggles.kf, "pt": toggles.pt,
                "sm": toggles.sm, "lm": toggles.lm,
                "auc": mean["auc"],
                "precision": mean["precision"],
                "norm_precision": mean["norm_precision"],
                "fine_used_fraction": row["fine_used_fraction"],
            }
        )
    if args.out:
        ic.write_records(args.out, records)
    return 0


# --- sweep -------------------------------------------------------------------


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    scenes = [load_scene(name) for name in _scene_names(args.scenes)]
    points = [p.strip() for p in args.grid.split(",") if p.strip()]
    if not points:
        raise EmptyGrid("sweep grid is empty")
    records = [ic.meta_record("sweep")]
    print(f"{'value':<12}{'AUC(%)':>9}{'fine%':>8}")
    for point in points:
        if args.param == "pt_frames":
            swept = cfg.replace(pt_frames=int(point))
            value: object = int(point)
        elif args.param == "tau":
            swept = cfg.replace(tau=float(point))
            value = float(point)
        elif args.param == "intervals":
            k_lm, k_sm = (int(v) for v in point.split(":"))
            swept = cfg.replace(k_lm=k_lm, k_sm=k_sm)
            value = [k_lm, k_sm]
        else:
            raise InputError(f"unknown sweep parameter {args.param!r}")
        row = ablation_report(scenes, swept, [Toggles()],
                              workers=args.workers)[0]
        print(f"{point:<12}{row['metrics']['auc']:>9.2f}"
              f"{row['fine_used_fraction'] * 100:>8.2f}")
        records.append(
            {
                "type": "curve",
                "param": args.param,
                "value": value,
                "auc": row["metrics"]["auc"],
                "fine_used_fraction": row["fine_used_fraction"],
            }
        )
    ic.write_records(args.out, records)
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiertrack",
        description="Hierarchical motion + long/short memory mask tracking",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        if config:
            p.add_argument("--config", help="config file (key=value lines)")
            p.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="override a config value")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("simulate", help="render a scene into a sequence dump")
    p.add_argument("--scene", required=True, help="library name or scene file")
    p.add_argument("--out", required=True)
    add_common(p, config=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", help="run the tracker on a scene or a dump")
    p.add_argument("--scene", help="live mode: library name or scene file")
    p.add_argument("--in", dest="in_path", help="replay mode: sequence dump")
    p.add_argument("--out", required=True)
    for name in ("kf", "pt", "sm", "lm"):
        p.add_argument(f"--no-{name}", action="store_true")
    add_common(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score a decision dump against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="toggle study over the scene library")
    p.add_argument("--scenes", default="all")
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1,
                   help="thread pool size, one sequence per worker")
    add_common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="parameter sensitivity curves")
    p.add_argument("--param", required=True,
                   choices=("pt_frames", "tau", "intervals"))
    p.add_argument("--grid", required=True,
                   help="comma list; intervals use k_lm:k_sm pairs")
    p.add_argument("--scenes", default="all")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1,
                   help="thread pool size, one sequence per worker")
    add_common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 3
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
