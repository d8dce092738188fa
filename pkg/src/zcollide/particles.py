"""Particle/environment collisions against shared height fields.

Every particle reads the same environment field(s), so the render cost per
step is one field (or six for a cube of directions) no matter how many
particles there are.  Bounces reflect the velocity about the normal stored
with the field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .detector import DetectionVolume, FieldKind, HeightField, build_environment_field
from .geometry import Mesh
from .pipeline import OrthoCamera, project_points

# depth slack (normalized units) for a particle resting exactly on a surface
_SURFACE_SLACK = 1e-12

CUBE_DIRECTIONS = np.array([
    [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0], [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0], [0.0, 0.0, -1.0],
])


@dataclass
class ParticleSet:
    """Struct-of-arrays particle state."""

    position: np.ndarray
    velocity: np.ndarray
    age: np.ndarray = None
    alive: np.ndarray = None

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(-1, 3)
        self.velocity = np.asarray(self.velocity, dtype=np.float64).reshape(-1, 3)
        n = len(self.position)
        if self.velocity.shape != (n, 3):
            raise ValueError("velocity must match position shape")
        self.age = np.zeros(n) if self.age is None else np.asarray(self.age, dtype=np.float64)
        self.alive = np.ones(n, bool) if self.alive is None else np.asarray(self.alive, dtype=bool)
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise ValueError("particle state must be finite")

    def __len__(self) -> int:
        return len(self.position)

    def copy(self) -> "ParticleSet":
        return ParticleSet(self.position.copy(), self.velocity.copy(), self.age.copy(), self.alive.copy())

    @classmethod
    def concat(cls, sets: Sequence["ParticleSet"]) -> "ParticleSet":
        sets = [s for s in sets if len(s)]
        if not sets:
            return cls(np.zeros((0, 3)), np.zeros((0, 3)))
        return cls(np.concatenate([s.position for s in sets]), np.concatenate([s.velocity for s in sets]),
                   np.concatenate([s.age for s in sets]), np.concatenate([s.alive for s in sets]))


@dataclass(frozen=True)
class ParticleField:
    field: HeightField

    def __post_init__(self):
        if self.field.kind is not FieldKind.ENVIRONMENT or self.field.normal is None:
            raise ValueError("particle fields need an environment field with normals")

    @property
    def direction(self) -> np.ndarray:
        return self.field.volume.camera.view


@dataclass(frozen=True)
class CubeField:
    """Six fields looking along +x, -x, +y, -y, +z, -z from one centroid."""

    faces: tuple[ParticleField, ...]

    def __post_init__(self):
        if len(self.faces) != 6:
            raise ValueError("a cube field has exactly six faces")


@dataclass
class StepResult:
    particles: ParticleSet
    bounce_count: int
    bounced: np.ndarray
    incident_velocity: np.ndarray
    contact_normal: np.ndarray


def _perpendicular(direction: np.ndarray) -> np.ndarray:
    # deterministic up vector: world axis least aligned with the direction
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(direction)))] = 1.0
    up = axis - (axis @ direction) * direction
    return up / np.linalg.norm(up)


def build_particle_field(environment: Sequence[Mesh], source, direction, half_width: float,
                         half_height: float, length: float, resolution: tuple[int, int],
                         up=None, backend: str | None = None) -> ParticleField:
    """Environment field seen from ``source`` looking along ``direction``."""
    direction = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    up = _perpendicular(direction) if up is None else np.asarray(up, dtype=np.float64)
    w, h = resolution
    volume = DetectionVolume(OrthoCamera(source, direction, up, half_width, half_height, length), w, h)
    return ParticleField(build_environment_field(environment, volume, emit_normals=True, emit_ids=True,
                                                 backend=backend))


def build_cube_field(environment: Sequence[Mesh], centroid, half_extent: float, length: float,
                     resolution: tuple[int, int], backend: str | None = None) -> CubeField:
    if not (half_extent > 0 and length > 0):
        raise ValueError("half_extent and length must be positive")
    return CubeField(tuple(
        build_particle_field(environment, centroid, d, half_extent, half_extent, length, resolution,
                             backend=backend)
        for d in CUBE_DIRECTIONS))


def _collide_with_field(pf: ParticleField, sel: np.ndarray, p0, p1, v1, restitution,
                        out_p, out_v, bounced, normals) -> None:
    f = pf.field
    vol = f.volume
    cam = vol.camera
    nx, ny, d0 = project_points(cam, p0[sel])
    _, _, d1 = project_points(cam, p1[sel])
    col = np.floor((nx + 1.0) * (0.5 * vol.width)).astype(np.int64)
    row = np.floor((1.0 - ny) * (0.5 * vol.height)).astype(np.int64)
    inside = (col >= 0) & (col < vol.width) & (row >= 0) & (row < vol.height)
    idx = np.flatnonzero(sel)[inside]
    col, row, d0, d1 = col[inside], row[inside], d0[inside], d1[inside]
    covered = f.coverage[row, col]
    idx, col, row, d0, d1 = idx[covered], col[covered], row[covered], d0[covered], d1[covered]
    de = f.depth[row, col]
    crossing = (d0 <= de + _SURFACE_SLACK) & (d1 >= de) & (d1 > d0)
    if not crossing.any():
        return
    idx, col, row, d0, d1, de = idx[crossing], col[crossing], row[crossing], d0[crossing], d1[crossing], de[crossing]
    s = np.clip((de - d0) / (d1 - d0), 0.0, 1.0)
    hit = p0[idx] + s[:, None] * (p1[idx] - p0[idx])
    n = f.normal[row, col]
    v = v1[idx]
    vn = np.einsum("ij,ij->i", v, n)
    # grazing motion along the surface is not a bounce
    approaching = vn < 0.0
    idx, hit, n, v, vn = idx[approaching], hit[approaching], n[approaching], v[approaching], vn[approaching]
    out_p[idx] = hit
    out_v[idx] = v - ((1.0 + restitution) * vn)[:, None] * n
    bounced[idx] = True
    normals[idx] = n


def step_particles(particles: ParticleSet, field_: ParticleField | CubeField, dt: float,
                   acceleration=(0.0, 0.0, 0.0), restitution: float = 1.0) -> StepResult:
    """Advance one step and bounce particles that cross the field's surface.

    Position advances with the start-of-step velocity plus the half
    acceleration term, then the velocity is updated.  A particle whose depth
    passes the stored surface depth at its texel is placed on the crossing
    point and its velocity reflected about the stored normal.  Dead particles
    are left untouched.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not 0.0 <= restitution <= 1.0:
        raise ValueError("restitution must lie in [0, 1]")
    a = np.asarray(acceleration, dtype=np.float64).reshape(3)
    p0, v0 = particles.position, particles.velocity
    alive = particles.alive
    p1 = p0 + v0 * dt + (0.5 * dt * dt) * a
    v1 = v0 + a * dt
    p1 = np.where(alive[:, None], p1, p0)
    v1 = np.where(alive[:, None], v1, v0)

    out_p, out_v = p1.copy(), v1.copy()
    bounced = np.zeros(len(particles), dtype=bool)
    normals = np.zeros((len(particles), 3))
    if isinstance(field_, CubeField):
        # each particle uses the face best aligned with its velocity
        axis = np.argmax(np.abs(v0), axis=1)
        negative = np.take_along_axis(v0, axis[:, None], axis=1)[:, 0] < 0
        choice = 2 * axis + negative
        for k, face in enumerate(field_.faces):
            sel = alive & (choice == k)
            if sel.any():
                _collide_with_field(face, sel, p0, p1, v1, restitution, out_p, out_v, bounced, normals)
    else:
        if alive.any():
            _collide_with_field(field_, alive, p0, p1, v1, restitution, out_p, out_v, bounced, normals)

    age = np.where(alive, particles.age + dt, particles.age)
    nxt = ParticleSet(out_p, out_v, age, alive.copy())
    return StepResult(nxt, int(bounced.sum()), bounced, v1.copy(), normals)


@dataclass
class Emitter:
    source: np.ndarray
    direction: np.ndarray
    rate: int
    speed: float
    spread: float = 0.0
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.source = np.asarray(self.source, dtype=np.float64)
        d = np.asarray(self.direction, dtype=np.float64)
        self.direction = d / np.linalg.norm(d)
        self._rng = np.random.default_rng(self.seed)

    def emit(self, count: int | None = None) -> ParticleSet:
        n = self.rate if count is None else count
        jitter = self._rng.normal(size=(n, 3)) * self.spread
        dirs = self.direction + jitter
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        return ParticleSet(np.broadcast_to(self.source, (n, 3)).copy(), dirs * self.speed)


@dataclass
class FieldSpec:
    """How a :class:`ParticleSystem` rebuilds its field every step."""

    kind: str = "single"            # "single" or "cube"
    half_width: float = 1.0
    half_height: float = 1.0
    length: float = 1.0
    resolution: tuple[int, int] = (256, 256)
    source: np.ndarray | None = None      # single: camera origin (defaults to emitter source)
    direction: np.ndarray | None = None   # single: look direction (defaults to emitter direction)


class ParticleSystem:
    """Particles plus the per-step field rebuild, with a build counter."""

    def __init__(self, environment: Sequence[Mesh], spec: FieldSpec, particles: ParticleSet | None = None,
                 acceleration=(0.0, 0.0, 0.0), restitution: float = 1.0, emitter: Emitter | None = None,
                 backend: str | None = None):
        self.environment = list(environment)
        self.spec = spec
        self.particles = particles if particles is not None else ParticleSet(np.zeros((0, 3)), np.zeros((0, 3)))
        self.acceleration = np.asarray(acceleration, dtype=np.float64)
        self.restitution = restitution
        self.emitter = emitter
        self.backend = backend
        self.field_builds = 0
        self.steps = 0
        self.total_bounces = 0

    def build_field(self) -> ParticleField | CubeField:
        spec = self.spec
        if spec.kind == "cube":
            pos = self.particles.position[self.particles.alive]
            centroid = pos.mean(axis=0) if len(pos) else (
                self.emitter.source if self.emitter is not None else np.zeros(3))
            self.field_builds += 6
            return build_cube_field(self.environment, centroid, spec.half_width, spec.length,
                                    spec.resolution, backend=self.backend)
        if spec.kind != "single":
            raise ValueError(f"unknown field kind {spec.kind!r}")
        source = spec.source if spec.source is not None else self.emitter.source
        direction = spec.direction if spec.direction is not None else self.emitter.direction
        self.field_builds += 1
        return build_particle_field(self.environment, source, direction, spec.half_width, spec.half_height,
                                    spec.length, spec.resolution, backend=self.backend)

    def advance(self, dt: float) -> StepResult:
        if self.emitter is not None and self.emitter.rate > 0:
            self.particles = ParticleSet.concat([self.particles, self.emitter.emit()])
        fld = self.build_field()
        res = step_particles(self.particles, fld, dt, self.acceleration, self.restitution)
        self.particles = res.particles
        self.steps += 1
        self.total_bounces += res.bounce_count
        return res


__all__ = [
    "CubeField", "Emitter", "FieldSpec", "ParticleField", "ParticleSet", "ParticleSystem",
    "StepResult", "build_cube_field", "build_particle_field", "step_particles",
]
