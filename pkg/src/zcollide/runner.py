"""Frame-sequence driver, benchmark harness and artifact export for scenes."""

from __future__ import annotations

import io
import os
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .detector import (
    CollisionReport,
    DetectionFields,
    FieldKind,
    HeightField,
    build_environment_field,
    build_object_back_field,
    build_object_field,
    compare,
    compare_two_boundary,
    detect_with_fields,
)
from .geometry import Mesh, apply_transform, load_obj
from .oracle import scene_collide
from .particles import Emitter, FieldSpec, ParticleSet, ParticleSystem
from .pgm import dump_height_field
from .scene import SceneDescription


@dataclass(frozen=True)
class LoadedScene:
    """A scene with every mesh read from disk, in local coordinates."""

    description: SceneDescription
    part_meshes: tuple[Mesh, ...]
    env_meshes: tuple[Mesh, ...]

    @classmethod
    def load(cls, scene: SceneDescription) -> "LoadedScene":
        parts = tuple(load_obj(p.mesh_path, p.object_id) for p in scene.parts)
        envs = tuple(load_obj(e.mesh_path, e.object_id) for e in scene.environment)
        return cls(scene, parts, envs)

    def environment_at(self, frame: int) -> list[Mesh]:
        return [apply_transform(m, e.track.at(frame))
                for m, e in zip(self.env_meshes, self.description.environment)]

    def part_at(self, k: int, frame: int):
        spec = self.description.parts[k]
        t = spec.track.at(frame)
        return apply_transform(self.part_meshes[k], t), spec.volume.in_world(t)


@dataclass(frozen=True)
class FrameResult:
    frame: int
    part_verdicts: tuple[tuple[str, bool], ...]
    contact_count: int
    environment_ids: tuple[int, ...]
    detect_ns: int
    oracle_collided: bool | None = None
    agreement: bool | None = None

    @property
    def collided(self) -> bool:
        return any(v for _, v in self.part_verdicts)


@dataclass(frozen=True)
class SequenceSummary:
    frames: int
    collided_frames: int
    first_collision: int | None
    mean_ns_all: float | None
    mean_ns_colliding: float | None
    mean_ns_clear: float | None
    oracle_agree: int | None = None
    oracle_disagree: int | None = None


@dataclass(frozen=True)
class SequenceResult:
    frames: tuple[FrameResult, ...]
    summary: SequenceSummary

    @property
    def any_collision(self) -> bool:
        return any(f.collided for f in self.frames)


def _mean(values: list[int]) -> float | None:
    return float(np.mean(values)) if values else None


def summarize(frames: list[FrameResult], with_oracle: bool) -> SequenceSummary:
    hits = [f for f in frames if f.collided]
    clear = [f for f in frames if not f.collided]
    agree = disagree = None
    if with_oracle:
        agree = sum(1 for f in frames if f.agreement)
        disagree = len(frames) - agree
    return SequenceSummary(
        frames=len(frames),
        collided_frames=len(hits),
        first_collision=hits[0].frame if hits else None,
        mean_ns_all=_mean([f.detect_ns for f in frames]),
        mean_ns_colliding=_mean([f.detect_ns for f in hits]),
        mean_ns_clear=_mean([f.detect_ns for f in clear]),
        oracle_agree=agree,
        oracle_disagree=disagree,
    )


def map_filename(frame: int, part: str, kind: FieldKind) -> str:
    return f"frame_{frame:04d}_{part}_{kind.value}.pgm"


def _emit(fields: DetectionFields, frame: int, part: str, out: Path) -> None:
    for f in (fields.object_front, fields.object_back, fields.environment):
        if f is not None:
            dump_height_field(f, out / map_filename(frame, part, f.kind))


def run_sequence(scene: SceneDescription | LoadedScene, with_oracle: bool = False,
                 emit_maps: str | os.PathLike | None = None,
                 backend: str | None = None) -> SequenceResult:
    """Detect every frame of the scene.

    Each part's volume rides with the part, so its object fields are built
    once and carried along for the remaining frames.
    """
    loaded = scene if isinstance(scene, LoadedScene) else LoadedScene.load(scene)
    desc = loaded.description
    cfg = desc.detection
    out = None
    if emit_maps is not None:
        out = Path(emit_maps)
        out.mkdir(parents=True, exist_ok=True)

    cached: dict[int, tuple[HeightField, HeightField | None]] = {}
    results: list[FrameResult] = []
    for frame in range(desc.frame_count):
        env = loaded.environment_at(frame)
        verdicts, count, ids = [], 0, set()
        elapsed = 0
        world_parts = []
        for k, spec in enumerate(desc.parts):
            mesh, volume = loaded.part_at(k, frame)
            world_parts.append(mesh)
            front = back = None
            if k in cached:
                front = cached[k][0].rebased(volume)
                back = cached[k][1].rebased(volume) if cached[k][1] is not None else None
            t0 = time.perf_counter_ns()
            report, fields = detect_with_fields(mesh, env, volume, cfg, reuse_object_field=front,
                                                reuse_object_back_field=back, backend=backend)
            elapsed += time.perf_counter_ns() - t0
            cached[k] = (fields.object_front, fields.object_back)
            verdicts.append((spec.name, report.collided))
            count += report.contact_count
            ids.update(report.environment_ids)
            if out is not None:
                _emit(fields, frame, spec.name, out)

        oracle_hit = agreement = None
        if with_oracle:
            oracle_hit = any(scene_collide(m, env).collided for m in world_parts)
            agreement = oracle_hit == any(v for _, v in verdicts)
        results.append(FrameResult(frame, tuple(verdicts), count, tuple(sorted(ids)), elapsed,
                                   oracle_hit, agreement))
    return SequenceResult(tuple(results), summarize(results, with_oracle))


def _b(v: bool) -> str:
    return "1" if v else "0"


def format_report(result: SequenceResult, scene: SceneDescription) -> str:
    """Deterministic line-oriented report; timings are left out on purpose."""
    cfg = scene.detection
    buf = io.StringIO()
    buf.write("zcollide-report 1\n")
    buf.write(f"config tolerance {cfg.contact_tolerance!r} two_boundary {_b(cfg.two_boundary)} "
              f"stencil {_b(cfg.use_stencil)}\n")
    for p in scene.parts:
        v = p.volume
        buf.write(f"part {p.name} id {p.object_id} resolution {v.width}x{v.height}\n")
    for f in result.frames:
        parts = " ".join(f"{name}={_b(v)}" for name, v in f.part_verdicts)
        ids = ",".join(map(str, f.environment_ids)) or "-"
        line = f"frame {f.frame} collided {_b(f.collided)} contacts {f.contact_count} parts {parts} ids {ids}"
        if f.agreement is not None:
            line += f" oracle {_b(f.oracle_collided)} agree {_b(f.agreement)}"
        buf.write(line + "\n")
    s = result.summary
    first = "-" if s.first_collision is None else str(s.first_collision)
    buf.write(f"summary frames {s.frames} collided_frames {s.collided_frames} first_collision {first}\n")
    if s.oracle_agree is not None:
        buf.write(f"oracle agree {s.oracle_agree} disagree {s.oracle_disagree}\n")
    return buf.getvalue()


def format_timing(summary: SequenceSummary) -> str:
    def sec(ns):
        return "-" if ns is None else f"{ns * 1e-9:.6e}"
    return (f"timing mean_all_s {sec(summary.mean_ns_all)} mean_colliding_s {sec(summary.mean_ns_colliding)} "
            f"mean_clear_s {sec(summary.mean_ns_clear)}\n")


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchRow:
    frame: int
    part: str
    phase: str
    mean_s: float
    std_s: float
    samples: int


def _timed(fn):
    t0 = time.perf_counter_ns()
    value = fn()
    return value, (time.perf_counter_ns() - t0) * 1e-9


def bench(scene: SceneDescription | LoadedScene, repetitions: int = 3, with_oracle: bool = False,
          backend: str | None = None) -> list[BenchRow]:
    """Wall time of each detection phase, per frame and part, over ``repetitions`` runs."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    loaded = scene if isinstance(scene, LoadedScene) else LoadedScene.load(scene)
    desc = loaded.description
    cfg = desc.detection
    rows: list[BenchRow] = []
    for frame in range(desc.frame_count):
        env = loaded.environment_at(frame)
        for k, spec in enumerate(desc.parts):
            mesh, volume = loaded.part_at(k, frame)
            samples: dict[str, list[float]] = {}
            for _ in range(repetitions):
                s_o, t = _timed(lambda: build_object_field(mesh, volume, backend))
                samples.setdefault("object_field", []).append(t)
                s_b = None
                if cfg.two_boundary:
                    s_b, t = _timed(lambda: build_object_back_field(mesh, volume, backend))
                    samples.setdefault("object_back_field", []).append(t)
                stencil = s_o.coverage if cfg.use_stencil else None
                s_e, t = _timed(lambda: build_environment_field(env, volume, stencil=stencil, backend=backend))
                samples.setdefault("environment_field", []).append(t)
                if s_b is not None:
                    _, t = _timed(lambda: compare_two_boundary(s_o, s_b, s_e, cfg))
                else:
                    _, t = _timed(lambda: compare(s_o, s_e, cfg))
                samples.setdefault("compare", []).append(t)
                if with_oracle:
                    _, t = _timed(lambda: scene_collide(mesh, env))
                    samples.setdefault("oracle", []).append(t)
            for phase, values in samples.items():
                std = statistics.pstdev(values) if len(values) > 1 else 0.0
                rows.append(BenchRow(frame, spec.name, phase, statistics.fmean(values), std, len(values)))
    return rows


BENCH_COLUMNS = ("frame", "part", "phase", "mean_s", "std_s", "samples")


def bench_csv(rows: list[BenchRow]) -> str:
    lines = [",".join(BENCH_COLUMNS)]
    lines += [f"{r.frame},{r.part},{r.phase},{r.mean_s:.9e},{r.std_s:.9e},{r.samples}" for r in rows]
    return "\n".join(lines) + "\n"


def bench_table(rows: list[BenchRow]) -> str:
    """Per-phase means over all frames, for the terminal."""
    by_phase: dict[str, list[float]] = {}
    for r in rows:
        by_phase.setdefault(r.phase, []).append(r.mean_s)
    out = [f"{'phase':<20}{'mean_s':>14}{'cells':>8}"]
    for phase, values in by_phase.items():
        out.append(f"{phase:<20}{statistics.fmean(values):>14.6e}{len(values):>8}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# single-field dumps
# ---------------------------------------------------------------------------

def field_at(scene: SceneDescription | LoadedScene, frame: int, kind: FieldKind,
             part: str | None = None, backend: str | None = None) -> HeightField:
    loaded = scene if isinstance(scene, LoadedScene) else LoadedScene.load(scene)
    desc = loaded.description
    if not desc.parts:
        raise ValueError("scene has no object")
    names = [p.name for p in desc.parts]
    if part is None:
        k = 0
    elif part in names:
        k = names.index(part)
    else:
        raise ValueError(f"no part named {part!r}; have {', '.join(names)}")
    if frame < 0:
        raise ValueError("frame must be >= 0")
    mesh, volume = loaded.part_at(k, frame)
    if kind is FieldKind.OBJECT_FRONT:
        return build_object_field(mesh, volume, backend)
    if kind is FieldKind.OBJECT_BACK:
        return build_object_back_field(mesh, volume, backend)
    stencil = None
    if desc.detection.use_stencil:
        stencil = build_object_field(mesh, volume, backend).coverage
    return build_environment_field(loaded.environment_at(frame), volume, stencil=stencil, backend=backend)


# ---------------------------------------------------------------------------
# particles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParticleRun:
    steps: int
    particles: int
    total_bounces: int
    bounces_per_step: tuple[int, ...]
    field_builds: int
    final: ParticleSet


def run_particles(scene: SceneDescription | LoadedScene, steps: int | None = None,
                  backend: str | None = None) -> ParticleRun:
    loaded = scene if isinstance(scene, LoadedScene) else LoadedScene.load(scene)
    desc = loaded.description
    spec = desc.particles
    if spec is None:
        raise ValueError("scene has no particles section")
    steps = desc.frame_count if steps is None else steps
    if steps < 0:
        raise ValueError("steps must be >= 0")
    emitter = Emitter(spec.source, spec.direction, spec.rate, spec.speed, spec.spread, spec.seed)
    initial = emitter.emit(spec.initial) if spec.initial else None
    fspec = FieldSpec(spec.field_kind, spec.half_width, spec.half_height, spec.length,
                      (spec.width, spec.height))
    system = ParticleSystem(loaded.environment_at(0), fspec, initial, spec.acceleration,
                            spec.restitution, emitter, backend)
    per_step = []
    for step in range(steps):
        system.environment = loaded.environment_at(step)
        per_step.append(system.advance(desc.dt).bounce_count)
    return ParticleRun(steps, len(system.particles), system.total_bounces, tuple(per_step),
                       system.field_builds, system.particles)


def format_particle_report(run: ParticleRun) -> str:
    buf = io.StringIO()
    buf.write("zcollide-particles 1\n")
    for k, b in enumerate(run.bounces_per_step):
        buf.write(f"step {k} bounces {b}\n")
    pos = run.final.position
    centroid = " ".join(repr(float(v)) for v in (pos.mean(axis=0) if len(pos) else np.zeros(3)))
    buf.write(f"summary steps {run.steps} particles {run.particles} bounces {run.total_bounces} "
              f"field_builds {run.field_builds} centroid {centroid}\n")
    return buf.getvalue()


__all__ = [
    "BENCH_COLUMNS", "BenchRow", "FrameResult", "LoadedScene", "ParticleRun", "SequenceResult",
    "SequenceSummary", "bench", "bench_csv", "bench_table", "field_at", "format_particle_report",
    "format_report", "format_timing", "map_filename", "run_particles", "run_sequence", "summarize",
]
