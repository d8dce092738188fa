"""Command-line entry point.

Exit status: 0 when every frame ran without a collision, 1 when at least one
collision (or particle bounce) occurred, 2 on any error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .detector import FieldKind
from .geometry import ObjParseError
from .pgm import dump_height_field
from .runner import (
    bench,
    bench_csv,
    bench_table,
    field_at,
    format_particle_report,
    format_report,
    format_timing,
    run_particles,
    run_sequence,
)
from .scene import SceneError, load_scene, parse_resolution

EXIT_CLEAR, EXIT_COLLISION, EXIT_ERROR = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _resolution(text: str) -> tuple[int, int]:
    try:
        return parse_resolution(text)
    except SceneError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _tolerance(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value >= 0 or value == float("inf"):
        raise argparse.ArgumentTypeError("tolerance must be finite and >= 0")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tolerance", type=_tolerance, metavar="W",
                        help="contact thickness in world units (default from scene, else 0)")
    common.add_argument("--two-boundary", action="store_true", default=None,
                        help="only count contacts between the object's front and back surfaces")
    common.add_argument("--stencil", action="store_true", default=None,
                        help="restrict environment rendering to the object's footprint")
    common.add_argument("--resolution", type=_resolution, metavar="WxH",
                        help="override every field resolution in the scene")
    common.add_argument("--backend", help="rasterizer backend (cython or python)")

    parser = _Parser(prog="zcollide", description="Height-field collision detection on scene files.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", parents=[common], help="detect collisions at frame 0")
    p.add_argument("scene")
    p.add_argument("--report", metavar="PATH", help="also write the report to a file")

    p = sub.add_parser("sequence", parents=[common], help="run every frame of the scene")
    p.add_argument("scene")
    p.add_argument("--oracle", action="store_true", help="cross-check each frame with exact triangle tests")
    p.add_argument("--emit-maps", metavar="DIR", help="write every height field as 16-bit PGM")
    p.add_argument("--report", metavar="PATH", help="also write the report to a file")

    p = sub.add_parser("particles", parents=[common], help="run the scene's particle system")
    p.add_argument("scene")
    p.add_argument("--steps", type=_positive_int, metavar="N", help="number of steps (default: frame count)")
    p.add_argument("--report", metavar="PATH", help="also write the report to a file")

    p = sub.add_parser("bench", parents=[common], help="time each detection phase")
    p.add_argument("scene")
    p.add_argument("--reps", type=_positive_int, default=3, metavar="N")
    p.add_argument("--oracle", action="store_true", help="time the exact oracle too")
    p.add_argument("--csv", metavar="PATH", help="write the CSV here instead of stdout")

    p = sub.add_parser("dump", parents=[common], help="write one height field as 16-bit PGM")
    p.add_argument("scene")
    p.add_argument("--frame", type=_positive_int, required=True, metavar="K")
    p.add_argument("--field", required=True, choices=[k.value for k in FieldKind])
    p.add_argument("--part", help="part name (default: the first one)")
    p.add_argument("-o", "--output", metavar="PATH", help="output file (default derived from the scene)")
    return parser


def _load(args):
    scene = load_scene(args.scene)
    return scene.with_overrides(tolerance=args.tolerance, two_boundary=args.two_boundary,
                                stencil=args.stencil, resolution=args.resolution)


def _write(text: str, path: str | None) -> None:
    sys.stdout.write(text)
    if path:
        Path(path).write_text(text, encoding="utf-8")


def _cmd_sequence(args, single_frame: bool) -> int:
    scene = _load(args)
    if single_frame:
        scene = replace(scene, frame_count=1)
    result = run_sequence(scene, with_oracle=getattr(args, "oracle", False),
                          emit_maps=getattr(args, "emit_maps", None), backend=args.backend)
    _write(format_report(result, scene), args.report)
    sys.stdout.write(format_timing(result.summary))
    return EXIT_COLLISION if result.any_collision else EXIT_CLEAR


def _cmd_particles(args) -> int:
    run = run_particles(_load(args), args.steps, backend=args.backend)
    _write(format_particle_report(run), args.report)
    return EXIT_COLLISION if run.total_bounces else EXIT_CLEAR


def _cmd_bench(args) -> int:
    if args.reps < 1:
        raise ValueError("--reps must be >= 1")
    rows = bench(_load(args), args.reps, with_oracle=args.oracle, backend=args.backend)
    csv = bench_csv(rows)
    if args.csv:
        Path(args.csv).write_text(csv, encoding="utf-8")
    else:
        sys.stdout.write(csv)
    sys.stderr.write(bench_table(rows))
    return EXIT_CLEAR


def _cmd_dump(args) -> int:
    scene = _load(args)
    kind = FieldKind(args.field)
    field = field_at(scene, args.frame, kind, args.part, backend=args.backend)
    out = args.output
    if out is None:
        part = args.part or scene.parts[0].name
        out = f"{Path(args.scene).stem}_frame{args.frame:04d}_{part}_{kind.value}.pgm"
    dump_height_field(field, out)
    sys.stdout.write(f"wrote {out}\n")
    return EXIT_CLEAR


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.backend is not None:
            from . import kernels
            kernels.get(args.backend)
        if args.command == "detect":
            return _cmd_sequence(args, single_frame=True)
        if args.command == "sequence":
            return _cmd_sequence(args, single_frame=False)
        if args.command == "particles":
            return _cmd_particles(args)
        if args.command == "bench":
            return _cmd_bench(args)
        return _cmd_dump(args)
    except (SceneError, ObjParseError, ValueError, OSError, KeyError) as exc:
        sys.stderr.write(f"zcollide: error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
