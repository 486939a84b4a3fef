"""Bridge CLI: export proposals or point tracks from a real clip."""

from __future__ import annotations

import argparse
import sys

from .errors import BridgeError
from .export import export_proposals, export_tracks
from .manifest import ExportManifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trackbridge",
        description="Dump segmenter proposals and point tracks into the "
                    "tracking interchange format",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in (("export-proposals", export_proposals),
                       ("export-tracks", export_tracks)):
        p = sub.add_parser(name)
        p.add_argument("--manifest", required=True)
        p.add_argument("--out", default=None,
                       help="override the manifest output path")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = ExportManifest.from_file(args.manifest)
        out = args.func(manifest, args.out)
    except BridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
