"""Height-field collision detection between one object and its environment.

The object is rendered with the depth test and face culling both inverted,
which leaves its far (environment-facing) surface in the depth buffer.  The
environment is rendered through the same orthographic camera with regular
settings.  A texel collides when the environment surface is no farther than
the object surface.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Mesh, RigidTransform
from .pipeline import (
    Cull,
    DepthTest,
    OrthoCamera,
    RenderConfig,
    RenderTargets,
    rasterize,
)


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class DetectionVolume:
    """The oriented box bounding the watched object.

    The camera's near plane is the box's rear face; ``view`` points from the
    rear face toward the front face.
    """

    camera: OrthoCamera
    width: int
    height: int

    def __post_init__(self):
        for name in ("width", "height"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be >= 1, got {v}")
            object.__setattr__(self, name, int(v))

    @classmethod
    def from_center(cls, center, view, up, half_width, half_height, depth_length,
                    width: int, height: int) -> "DetectionVolume":
        view = np.asarray(view, dtype=np.float64)
        origin = np.asarray(center, dtype=np.float64) - 0.5 * depth_length * view
        return cls(OrthoCamera(origin, view, up, half_width, half_height, depth_length), width, height)

    @property
    def pitch(self) -> tuple[float, float]:
        """World size of one texel along right and up."""
        cam = self.camera
        return 2.0 * cam.half_width / self.width, 2.0 * cam.half_height / self.height

    @property
    def texel_diagonal(self) -> float:
        px, py = self.pitch
        return float(np.hypot(px, py))

    @property
    def center(self) -> np.ndarray:
        return self.camera.origin + 0.5 * self.camera.depth_length * self.camera.view

    def moved(self, t: RigidTransform) -> "DetectionVolume":
        return DetectionVolume(self.camera.moved(t), self.width, self.height)

    def translated(self, offset) -> "DetectionVolume":
        return DetectionVolume(self.camera.translated(offset), self.width, self.height)

    def render_config(self, cull: Cull, depth_test: DepthTest, **kw) -> RenderConfig:
        return RenderConfig(self.width, self.height, cull, depth_test, **kw)


class FieldKind(enum.Enum):
    OBJECT_FRONT = "object"
    OBJECT_BACK = "object-back"
    ENVIRONMENT = "env"


@dataclass(frozen=True, eq=False)
class HeightField:
    targets: RenderTargets
    volume: DetectionVolume
    kind: FieldKind

    @property
    def depth(self) -> np.ndarray:
        return self.targets.depth

    @property
    def coverage(self) -> np.ndarray:
        return self.targets.coverage

    @property
    def normal(self) -> np.ndarray | None:
        return self.targets.normal

    @property
    def ids(self) -> np.ndarray | None:
        return self.targets.id

    def rebased(self, volume: DetectionVolume) -> "HeightField":
        """Same texels, carried to a rigidly moved copy of the volume.

        Valid when the meshes rendered into this field moved together with
        the volume, so the field is unchanged in volume coordinates.
        """
        if (volume.width, volume.height) != (self.volume.width, self.volume.height) \
                or not volume.camera.same_shape(self.volume.camera):
            raise UsageError("can only rebase onto a volume of identical shape and resolution")
        return HeightField(self.targets, volume, self.kind)


@dataclass(frozen=True)
class CollisionConfig:
    contact_tolerance: float = 0.0
    use_stencil: bool = False
    max_contacts_reported: int = 256
    two_boundary: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.contact_tolerance) and self.contact_tolerance >= 0):
            raise ValueError("contact_tolerance must be finite and >= 0")
        if self.max_contacts_reported < 0:
            raise ValueError("max_contacts_reported must be >= 0")


@dataclass(frozen=True)
class Contact:
    texel: tuple[int, int]
    world_point: tuple[float, float, float]
    depth_object: float
    depth_environment: float
    environment_normal: tuple[float, float, float] | None
    environment_id: int


@dataclass(frozen=True)
class CollisionReport:
    """Verdict plus up to ``max_contacts_reported`` contacts, in row-major order.

    ``contact_count`` and ``environment_ids`` always cover every contact.
    """

    collided: bool
    contact_count: int
    contacts: tuple[Contact, ...] = field(default_factory=tuple)
    environment_ids: tuple[int, ...] = field(default_factory=tuple)


# ---------------------------------------------------------------------------
# field construction
# ---------------------------------------------------------------------------

def build_object_field(obj: Mesh, volume: DetectionVolume, backend: str | None = None) -> HeightField:
    cfg = volume.render_config(Cull.FRONT, DepthTest.KEEP_GREATER)
    return HeightField(rasterize([obj], volume.camera, cfg, backend=backend), volume, FieldKind.OBJECT_FRONT)


def build_object_back_field(obj: Mesh, volume: DetectionVolume, backend: str | None = None) -> HeightField:
    cfg = volume.render_config(Cull.BACK, DepthTest.KEEP_LESS)
    return HeightField(rasterize([obj], volume.camera, cfg, backend=backend), volume, FieldKind.OBJECT_BACK)


def build_environment_field(environment: Sequence[Mesh], volume: DetectionVolume,
                            emit_normals: bool = True, emit_ids: bool = True,
                            stencil: np.ndarray | None = None,
                            backend: str | None = None) -> HeightField:
    cfg = volume.render_config(Cull.BACK, DepthTest.KEEP_LESS,
                               emit_normals=emit_normals, emit_ids=emit_ids)
    targets = rasterize(list(environment), volume.camera, cfg, stencil=stencil, backend=backend)
    return HeightField(targets, volume, FieldKind.ENVIRONMENT)


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------

def texel_world_point(volume: DetectionVolume, texel: tuple[int, int], d: float) -> np.ndarray:
    """World point projecting onto the center of texel ``(col, row)`` at depth ``d``."""
    i, j = texel
    if not (0 <= i < volume.width and 0 <= j < volume.height):
        raise UsageError(f"texel {texel} outside {volume.width}x{volume.height}")
    cam = volume.camera
    ndc_x = (i + 0.5) * 2.0 / volume.width - 1.0
    ndc_y = 1.0 - (j + 0.5) * 2.0 / volume.height
    return (cam.origin + (ndc_x * cam.half_width) * cam.right + (ndc_y * cam.half_height) * cam.up
            + (d * cam.depth_length) * cam.view)


def _check_same_volume(*fields: HeightField) -> None:
    ref = fields[0].volume
    for f in fields[1:]:
        if f.volume != ref:
            raise UsageError("height fields were built for different detection volumes")


def _check_kind(f: HeightField, kind: FieldKind, role: str) -> None:
    if f.kind is not kind:
        raise UsageError(f"{role} must be a {kind.value} field, got {f.kind.value}")


def _report(mask: np.ndarray, s_o: HeightField, s_e: HeightField, limit: int) -> CollisionReport:
    count = int(np.count_nonzero(mask))
    rows, cols = np.nonzero(mask)
    contacts = []
    for j, i in zip(rows[:limit].tolist(), cols[:limit].tolist()):
        d_e = float(s_e.depth[j, i])
        wp = texel_world_point(s_e.volume, (i, j), d_e)
        normal = None if s_e.normal is None else tuple(float(v) for v in s_e.normal[j, i])
        env_id = 0 if s_e.ids is None else int(s_e.ids[j, i])
        contacts.append(Contact((i, j), tuple(float(v) for v in wp), float(s_o.depth[j, i]),
                                d_e, normal, env_id))
    ids = () if s_e.ids is None else tuple(int(k) for k in np.unique(s_e.ids[mask]) if k)
    return CollisionReport(count > 0, count, tuple(contacts), ids)


def contact_mask(s_o: HeightField, s_e: HeightField, tolerance: float = 0.0) -> np.ndarray:
    tol = tolerance / s_o.volume.camera.depth_length
    return s_o.coverage & s_e.coverage & (s_e.depth <= s_o.depth + tol)


def compare(s_o: HeightField, s_e: HeightField, config: CollisionConfig = CollisionConfig()) -> CollisionReport:
    _check_kind(s_o, FieldKind.OBJECT_FRONT, "object field")
    _check_kind(s_e, FieldKind.ENVIRONMENT, "environment field")
    _check_same_volume(s_o, s_e)
    mask = contact_mask(s_o, s_e, config.contact_tolerance)
    return _report(mask, s_o, s_e, config.max_contacts_reported)


def compare_two_boundary(s_front: HeightField, s_back: HeightField, s_e: HeightField,
                         config: CollisionConfig = CollisionConfig()) -> CollisionReport:
    """Contact only where the environment lies between the object's two surfaces."""
    _check_kind(s_front, FieldKind.OBJECT_FRONT, "front field")
    _check_kind(s_back, FieldKind.OBJECT_BACK, "back field")
    _check_kind(s_e, FieldKind.ENVIRONMENT, "environment field")
    _check_same_volume(s_front, s_back, s_e)
    tol = config.contact_tolerance / s_front.volume.camera.depth_length
    mask = (s_front.coverage & s_back.coverage & s_e.coverage
            & (s_back.depth - tol <= s_e.depth) & (s_e.depth <= s_front.depth + tol))
    return _report(mask, s_front, s_e, config.max_contacts_reported)


# ---------------------------------------------------------------------------
# end-to-end
# ---------------------------------------------------------------------------

@dataclass
class DetectionFields:
    """Every field built during one :func:`detect` call (for dumps and reuse)."""

    object_front: HeightField
    environment: HeightField
    object_back: HeightField | None = None


def detect_with_fields(obj: Mesh, environment: Sequence[Mesh], volume: DetectionVolume,
                       config: CollisionConfig = CollisionConfig(),
                       reuse_object_field: HeightField | None = None,
                       reuse_object_back_field: HeightField | None = None,
                       backend: str | None = None) -> tuple[CollisionReport, DetectionFields]:
    if reuse_object_field is not None:
        _check_kind(reuse_object_field, FieldKind.OBJECT_FRONT, "reused object field")
        s_o = reuse_object_field
        if s_o.volume != volume:
            raise UsageError("reused object field belongs to a different volume")
    else:
        s_o = build_object_field(obj, volume, backend)
    stencil = s_o.coverage if config.use_stencil else None
    s_e = build_environment_field(environment, volume, stencil=stencil, backend=backend)
    if config.two_boundary:
        if reuse_object_back_field is not None:
            _check_kind(reuse_object_back_field, FieldKind.OBJECT_BACK, "reused back field")
            s_b = reuse_object_back_field
            if s_b.volume != volume:
                raise UsageError("reused back field belongs to a different volume")
        else:
            s_b = build_object_back_field(obj, volume, backend)
        report = compare_two_boundary(s_o, s_b, s_e, config)
        return report, DetectionFields(s_o, s_e, s_b)
    return compare(s_o, s_e, config), DetectionFields(s_o, s_e)


def detect(obj: Mesh, environment: Sequence[Mesh], volume: DetectionVolume,
           config: CollisionConfig = CollisionConfig(),
           reuse_object_field: HeightField | None = None,
           backend: str | None = None) -> CollisionReport:
    """Render both fields (reusing a prebuilt object field if given) and compare."""
    return detect_with_fields(obj, environment, volume, config, reuse_object_field,
                              backend=backend)[0]


def detect_multi(parts: Sequence[tuple[Mesh, DetectionVolume]], environment: Sequence[Mesh],
                 config: CollisionConfig = CollisionConfig()) -> list[CollisionReport]:
    """One independent projection per part of an articulated object."""
    return [detect(mesh, environment, volume, config) for mesh, volume in parts]


def any_collided(reports: Sequence[CollisionReport]) -> bool:
    return any(r.collided for r in reports)


__all__ = [
    "CollisionConfig", "CollisionReport", "Contact", "DetectionFields", "DetectionVolume",
    "FieldKind", "HeightField", "UsageError", "any_collided", "build_environment_field",
    "build_object_back_field", "build_object_field", "compare", "compare_two_boundary",
    "contact_mask", "detect", "detect_multi", "detect_with_fields", "texel_world_point",
]
