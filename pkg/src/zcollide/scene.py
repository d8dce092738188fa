"""Line-oriented ``key = value`` scene descriptions.

See ``docs/scene-format.md`` for the full key reference.  Every error
carries the offending line number.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .detector import CollisionConfig, DetectionVolume
from .geometry import RigidTransform
from .pipeline import OrthoCamera

MAX_RESOLUTION = 8192


class SceneError(ValueError):
    def __init__(self, lineno: int | None, message: str):
        where = f"line {lineno}: " if lineno else ""
        super().__init__(where + message)
        self.lineno = lineno


@dataclass(frozen=True)
class Keyframe:
    frame: float
    translation: np.ndarray
    rotation: Rotation


@dataclass(frozen=True)
class Track:
    """Keyframed rigid motion: linear translation, spherical rotation blend."""

    keys: tuple[Keyframe, ...] = ()

    def at(self, frame: float) -> RigidTransform:
        if not self.keys:
            return RigidTransform.identity()
        keys = self.keys
        if frame <= keys[0].frame or len(keys) == 1:
            k = keys[0]
            return RigidTransform(k.rotation.as_matrix(), k.translation)
        if frame >= keys[-1].frame:
            k = keys[-1]
            return RigidTransform(k.rotation.as_matrix(), k.translation)
        for a, b in zip(keys[:-1], keys[1:]):
            if a.frame <= frame <= b.frame:
                s = (frame - a.frame) / (b.frame - a.frame)
                t = a.translation + s * (b.translation - a.translation)
                rots = Rotation.concatenate([a.rotation, b.rotation])
                r = Slerp([0.0, 1.0], rots)([s])[0]
                return RigidTransform(r.as_matrix(), t)
        raise AssertionError("unreachable")

    @property
    def is_static(self) -> bool:
        return len(self.keys) <= 1


@dataclass(frozen=True)
class VolumeSpec:
    """Detection volume in the owning part's local frame."""

    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    view: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    up: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    half_width: float = 1.0
    half_height: float = 1.0
    length: float = 2.0
    width: int = 128
    height: int = 128

    def local(self) -> DetectionVolume:
        return DetectionVolume.from_center(self.center, self.view, self.up, self.half_width,
                                           self.half_height, self.length, self.width, self.height)

    def in_world(self, t: RigidTransform) -> DetectionVolume:
        return self.local().moved(t)


@dataclass(frozen=True)
class PartSpec:
    name: str
    mesh_path: Path
    object_id: int
    track: Track
    volume: VolumeSpec


@dataclass(frozen=True)
class EnvSpec:
    object_id: int
    mesh_path: Path
    track: Track


@dataclass(frozen=True)
class ParticleSpec:
    source: np.ndarray
    direction: np.ndarray
    rate: int = 0
    speed: float = 1.0
    spread: float = 0.0
    seed: int = 0
    field_kind: str = "single"
    half_width: float = 1.0
    half_height: float = 1.0
    length: float = 2.0
    width: int = 256
    height: int = 256
    restitution: float = 1.0
    acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))
    initial: int = 0


@dataclass(frozen=True)
class SceneDescription:
    parts: tuple[PartSpec, ...]
    environment: tuple[EnvSpec, ...]
    detection: CollisionConfig = CollisionConfig()
    frame_count: int = 1
    dt: float = 1.0 / 60.0
    particles: ParticleSpec | None = None
    base_dir: Path = Path(".")

    def with_overrides(self, tolerance: float | None = None, two_boundary: bool | None = None,
                       stencil: bool | None = None, resolution: tuple[int, int] | None = None
                       ) -> "SceneDescription":
        det = self.detection
        det = replace(det,
                      contact_tolerance=det.contact_tolerance if tolerance is None else tolerance,
                      two_boundary=det.two_boundary if two_boundary is None else two_boundary,
                      use_stencil=det.use_stencil if stencil is None else stencil)
        parts = self.parts
        particles = self.particles
        if resolution is not None:
            _check_resolution(resolution, None)
            w, h = resolution
            parts = tuple(replace(p, volume=replace(p.volume, width=w, height=h)) for p in parts)
            if particles is not None:
                particles = replace(particles, width=w, height=h)
        return replace(self, detection=det, parts=parts, particles=particles)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_NAME = r"[A-Za-z_][A-Za-z0-9_-]*"
_VOLUME_KEYS = {"center", "view", "up", "axes", "half_extents", "length", "resolution"}
_DETECTION_KEYS = {"tolerance", "two_boundary", "stencil", "max_contacts"}
_FRAME_KEYS = {"count", "dt"}
_PARTICLE_KEYS = {"source", "direction", "rate", "speed", "spread", "seed", "field", "half_extents",
                  "length", "resolution", "restitution", "acceleration", "initial"}


def _floats(value: str, n: int | tuple[int, ...], lineno: int) -> list[float]:
    parts = value.split()
    counts = (n,) if isinstance(n, int) else n
    if len(parts) not in counts:
        raise SceneError(lineno, f"expected {' or '.join(map(str, counts))} numbers, got {len(parts)}")
    try:
        out = [float(p) for p in parts]
    except ValueError:
        raise SceneError(lineno, f"non-numeric value {value!r}") from None
    if not all(math.isfinite(v) for v in out):
        raise SceneError(lineno, "values must be finite")
    return out


def _vec(value: str, lineno: int) -> np.ndarray:
    return np.array(_floats(value, 3, lineno))


def _int(value: str, lineno: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise SceneError(lineno, f"expected an integer, got {value!r}") from None


def _bool(value: str, lineno: int) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise SceneError(lineno, f"expected a boolean, got {value!r}")


def _check_resolution(res: tuple[int, int], lineno: int | None) -> None:
    for v in res:
        if not 1 <= v <= MAX_RESOLUTION:
            raise SceneError(lineno, f"resolution must lie in 1..{MAX_RESOLUTION}, got {v}")


def parse_resolution(value: str, lineno: int | None = None) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(-?\d+)\s*[xX]\s*(-?\d+)\s*", value)
    if not m:
        raise SceneError(lineno, f"resolution must look like WxH, got {value!r}")
    res = (int(m.group(1)), int(m.group(2)))
    _check_resolution(res, lineno)
    return res


def _keyframe(value: str, lineno: int) -> Keyframe:
    nums = _floats(value, (4, 8), lineno)
    rot = Rotation.identity()
    if len(nums) == 8:
        axis = np.array(nums[4:7])
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise SceneError(lineno, "rotation axis must be non-zero")
        rot = Rotation.from_rotvec(axis / norm * math.radians(nums[7]))
    return Keyframe(nums[0], np.array(nums[1:4]), rot)


class _VolumeBuilder:
    def __init__(self):
        self.values: dict[str, tuple[str, int]] = {}

    def set(self, key: str, value: str, lineno: int) -> None:
        if key not in _VOLUME_KEYS:
            raise SceneError(lineno, f"unknown volume key {key!r}")
        self.values[key] = (value, lineno)

    def build(self, owner: str) -> VolumeSpec:
        spec = VolumeSpec()
        kw = {}
        v = self.values
        if "center" in v:
            kw["center"] = _vec(*v["center"])
        if "axes" in v:
            if "view" in v or "up" in v:
                raise SceneError(v["axes"][1], "give either axes or view/up, not both")
            value, lineno = v["axes"]
            nums = np.array(_floats(value, 9, lineno)).reshape(3, 3)
            right, up, view = nums
            try:
                OrthoCamera.from_axes(np.zeros(3), right, up, view, 1, 1, 1)
            except ValueError as exc:
                raise SceneError(lineno, str(exc)) from None
            kw["view"], kw["up"] = view, up
        if "view" in v:
            kw["view"] = _vec(*v["view"])
        if "up" in v:
            kw["up"] = _vec(*v["up"])
        if "half_extents" in v:
            value, lineno = v["half_extents"]
            hw, hh = _floats(value, 2, lineno)
            if hw <= 0 or hh <= 0:
                raise SceneError(lineno, "half extents must be positive")
            kw["half_width"], kw["half_height"] = hw, hh
        if "length" in v:
            value, lineno = v["length"]
            (length,) = _floats(value, 1, lineno)
            if length <= 0:
                raise SceneError(lineno, "volume length must be positive")
            kw["length"] = length
        if "resolution" in v:
            kw["width"], kw["height"] = parse_resolution(*v["resolution"])
        spec = replace(spec, **kw)
        try:
            spec.local()
        except ValueError as exc:
            line = min((ln for _, ln in v.values()), default=None)
            raise SceneError(line, f"invalid volume for {owner}: {exc}") from None
        return spec


class _PartBuilder:
    def __init__(self, name: str):
        self.name = name
        self.mesh: tuple[str, int] | None = None
        self.object_id: int | None = None
        self.keys: list[tuple[Keyframe, int]] = []
        self.volume = _VolumeBuilder()


def _track(keys: list[tuple[Keyframe, int]]) -> Track:
    seen = {}
    for k, lineno in keys:
        if k.frame in seen:
            raise SceneError(lineno, f"duplicate keyframe at frame {k.frame:g}")
        seen[k.frame] = k
    return Track(tuple(sorted(seen.values(), key=lambda k: k.frame)))


def _resolve(base: Path, value: str, lineno: int, check: bool) -> Path:
    path = Path(value.strip())
    if not path.is_absolute():
        path = base / path
    if check and not path.is_file():
        raise SceneError(lineno, f"mesh file not found: {value.strip()}")
    return path


def parse_scene(text: str, base_dir: str | os.PathLike = ".", check_files: bool = True) -> SceneDescription:
    """Parse and validate a scene; relative mesh paths resolve against ``base_dir``."""
    base = Path(base_dir)
    parts: dict[str, _PartBuilder] = {}
    envs: dict[int, dict] = {}
    detection: dict[str, object] = {}
    frames: dict[str, object] = {}
    particles: dict[str, tuple[str, int]] = {}
    seen_scalar: dict[str, int] = {}

    def part(name: str) -> _PartBuilder:
        return parts.setdefault(name, _PartBuilder(name))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SceneError(lineno, f"expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not value:
            raise SceneError(lineno, f"missing value for {key!r}")
        if not key.endswith(".key"):
            if key in seen_scalar:
                m = re.fullmatch(r"environment\.(-?\d+)\.mesh", key)
                if m:
                    raise SceneError(lineno, f"duplicate environment id {m.group(1)} "
                                             f"(first defined on line {seen_scalar[key]})")
                raise SceneError(lineno, f"duplicate key {key!r} (first on line {seen_scalar[key]})")
            seen_scalar[key] = lineno

        m = re.fullmatch(rf"(object|part\.({_NAME}))\.(mesh|id|key|volume\.(\w+))", key)
        if key.startswith("volume."):
            part("object").volume.set(key[len("volume."):], value, lineno)
            continue
        if m:
            p = part("object" if m.group(1) == "object" else m.group(2))
            field_name = m.group(3)
            if field_name == "mesh":
                p.mesh = (value, lineno)
            elif field_name == "id":
                p.object_id = _int(value, lineno)
                if p.object_id < 1:
                    raise SceneError(lineno, "ids must be >= 1")
            elif field_name == "key":
                p.keys.append((_keyframe(value, lineno), lineno))
            else:
                p.volume.set(m.group(4), value, lineno)
            continue

        m = re.fullmatch(r"environment\.(-?\d+)\.(mesh|key)", key)
        if m:
            env_id = int(m.group(1))
            if env_id < 1:
                raise SceneError(lineno, f"environment id must be >= 1, got {env_id}")
            e = envs.setdefault(env_id, {"mesh": None, "keys": [], "line": lineno})
            if m.group(2) == "mesh":
                e["mesh"] = (value, lineno)
            else:
                e["keys"].append((_keyframe(value, lineno), lineno))
            continue

        section, _, sub = key.partition(".")
        if section == "detection" and sub in _DETECTION_KEYS:
            if sub == "tolerance":
                (tol,) = _floats(value, 1, lineno)
                if tol < 0:
                    raise SceneError(lineno, "tolerance must be >= 0")
                detection["contact_tolerance"] = tol
            elif sub == "max_contacts":
                detection["max_contacts_reported"] = _int(value, lineno)
                if detection["max_contacts_reported"] < 0:
                    raise SceneError(lineno, "max_contacts must be >= 0")
            else:
                detection["use_stencil" if sub == "stencil" else "two_boundary"] = _bool(value, lineno)
        elif section == "frames" and sub in _FRAME_KEYS:
            if sub == "count":
                frames["count"] = _int(value, lineno)
                if frames["count"] < 0:
                    raise SceneError(lineno, "frame count must be >= 0")
            else:
                (dt,) = _floats(value, 1, lineno)
                if dt <= 0:
                    raise SceneError(lineno, "dt must be positive")
                frames["dt"] = dt
        elif section == "particles" and sub in _PARTICLE_KEYS:
            particles[sub] = (value, lineno)
        else:
            raise SceneError(lineno, f"unknown key {key!r}")

    specs = []
    for name, p in parts.items():
        if p.mesh is None:
            line = min([ln for _, ln in p.keys] + [ln for _, ln in p.volume.values.values()], default=None)
            raise SceneError(line, f"{'object' if name == 'object' else 'part ' + name} has no mesh")
        path = _resolve(base, p.mesh[0], p.mesh[1], check_files)
        specs.append(PartSpec(name, path, p.object_id or 1, _track(p.keys), p.volume.build(name)))

    env_specs = []
    for env_id in sorted(envs):
        e = envs[env_id]
        if e["mesh"] is None:
            raise SceneError(e["line"], f"environment {env_id} has no mesh")
        env_specs.append(EnvSpec(env_id, _resolve(base, *e["mesh"], check_files), _track(e["keys"])))

    part_ids = {s.object_id for s in specs}
    clash = part_ids & set(envs)
    if clash:
        raise SceneError(None, f"ids shared between object parts and environment: {sorted(clash)}")

    return SceneDescription(
        parts=tuple(specs),
        environment=tuple(env_specs),
        detection=CollisionConfig(**detection),
        frame_count=int(frames.get("count", 1)),
        dt=float(frames.get("dt", 1.0 / 60.0)),
        particles=_particle_spec(particles) if particles else None,
        base_dir=base,
    )


def _particle_spec(raw: dict[str, tuple[str, int]]) -> ParticleSpec:
    kw: dict[str, object] = {}
    for key in ("source", "direction", "acceleration"):
        if key in raw:
            kw[key] = _vec(*raw[key])
    if "source" not in kw:
        raise SceneError(None, "particles.source is required")
    if "direction" not in kw:
        raise SceneError(None, "particles.direction is required")
    norm = np.linalg.norm(kw["direction"])
    if norm == 0:
        raise SceneError(raw["direction"][1], "particle direction must be non-zero")
    kw["direction"] = kw["direction"] / norm
    for key in ("rate", "seed", "initial"):
        if key in raw:
            kw[key] = _int(*raw[key])
            if kw[key] < 0:
                raise SceneError(raw[key][1], f"particles.{key} must be >= 0")
    for key in ("speed", "spread", "length", "restitution"):
        if key in raw:
            (kw[key],) = _floats(raw[key][0], 1, raw[key][1])
    if "length" in kw and kw["length"] <= 0:
        raise SceneError(raw["length"][1], "particles.length must be positive")
    if "restitution" in kw and not 0.0 <= kw["restitution"] <= 1.0:
        raise SceneError(raw["restitution"][1], "restitution must lie in [0, 1]")
    if "half_extents" in raw:
        hw, hh = _floats(raw["half_extents"][0], 2, raw["half_extents"][1])
        if hw <= 0 or hh <= 0:
            raise SceneError(raw["half_extents"][1], "half extents must be positive")
        kw["half_width"], kw["half_height"] = hw, hh
    if "resolution" in raw:
        kw["width"], kw["height"] = parse_resolution(*raw["resolution"])
    if "field" in raw:
        value, lineno = raw["field"]
        if value not in ("single", "cube"):
            raise SceneError(lineno, f"particles.field must be 'single' or 'cube', got {value!r}")
        kw["field_kind"] = value
    return ParticleSpec(**kw)


def load_scene(path: str | os.PathLike, check_files: bool = True) -> SceneDescription:
    path = Path(path)
    return parse_scene(path.read_text(encoding="utf-8"), path.parent, check_files)
