"""Meshes, rigid transforms and Wavefront OBJ ingestion."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Union

import numpy as np

DEGENERATE_AREA = 1e-12


class DegenerateTriangleError(ValueError):
    """Raised when a triangle has (numerically) zero area."""


class ObjParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _frozen(a, dtype, shape_tail) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    if arr.size == 0:
        arr = arr.reshape((0,) + shape_tail)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Mesh:
    """Indexed triangle/line/point geometry in world coordinates.

    Triangles wound counter-clockwise are front-facing when seen from the
    side their normal points toward.  ``object_id`` 0 is reserved.
    """

    vertices: np.ndarray
    triangles: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), np.int64))
    lines: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), np.int64))
    points: np.ndarray = field(default_factory=lambda: np.zeros((0,), np.int64))
    object_id: int = 1

    def __post_init__(self):
        verts = _frozen(self.vertices, np.float64, (3,))
        tris = _frozen(self.triangles, np.int64, (3,))
        lines = _frozen(self.lines, np.int64, (2,))
        pts = _frozen(self.points, np.int64, ())
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise ValueError(f"vertices must have shape (N, 3), got {verts.shape}")
        if not np.all(np.isfinite(verts)):
            raise ValueError("vertices must be finite")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise ValueError(f"triangles must have shape (T, 3), got {tris.shape}")
        if lines.ndim != 2 or lines.shape[1] != 2:
            raise ValueError(f"lines must have shape (M, 2), got {lines.shape}")
        if pts.ndim != 1:
            raise ValueError(f"points must have shape (P,), got {pts.shape}")
        n = len(verts)
        for name, idx in (("triangle", tris), ("line", lines), ("point", pts)):
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise ValueError(f"{name} index out of range for {n} vertices")
        if int(self.object_id) < 1:
            raise ValueError("object_id must be >= 1 (0 means 'no object')")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "lines", lines)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "object_id", int(self.object_id))

    @property
    def triangle_vertices(self) -> np.ndarray:
        """Triangle corner coordinates, shape (T, 3, 3)."""
        return self.vertices[self.triangles]

    def with_id(self, object_id: int) -> "Mesh":
        return Mesh(self.vertices, self.triangles, self.lines, self.points, object_id)

    def with_vertices(self, vertices) -> "Mesh":
        return Mesh(vertices, self.triangles, self.lines, self.points, self.object_id)

    def aabb(self) -> "Aabb":
        return Aabb.from_points(self.vertices)

    def same_as(self, other: "Mesh") -> bool:
        return (
            self.object_id == other.object_id
            and np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.lines, other.lines)
            and np.array_equal(self.points, other.points)
        )


@dataclass(frozen=True)
class Aabb:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=np.float64)
        hi = np.asarray(self.max, dtype=np.float64)
        if np.any(lo > hi):
            raise ValueError("Aabb min must be <= max componentwise")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @classmethod
    def from_points(cls, pts) -> "Aabb":
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
        if len(pts) == 0:
            raise ValueError("cannot bound an empty point set")
        return cls(pts.min(axis=0), pts.max(axis=0))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min + self.max)

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min

    def overlaps(self, other: "Aabb", margin: float = 0.0) -> bool:
        return bool(np.all(self.min - margin <= other.max) and np.all(other.min - margin <= self.max))

    def expanded(self, margin: float) -> "Aabb":
        return Aabb(self.min - margin, self.max + margin)


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(r.T @ r, np.eye(3), rtol=0, atol=1e-9):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation must have determinant +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_translation(cls, t) -> "RigidTransform":
        return cls(np.eye(3), t)

    @classmethod
    def from_axis_angle(cls, axis, angle: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        axis = np.asarray(axis, dtype=np.float64)
        axis = axis / np.linalg.norm(axis)
        x, y, z = axis
        c, s = np.cos(angle), np.sin(angle)
        k = np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]])
        r = c * np.eye(3) + s * k + (1 - c) * np.outer(axis, axis)
        return cls(r, translation)

    def is_identity(self) -> bool:
        return np.array_equal(self.rotation, np.eye(3)) and not np.any(self.translation)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self ∘ other``: apply ``other`` first."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def apply(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        if self.is_identity():
            return pts.copy()
        return pts @ self.rotation.T + self.translation

    def apply_vector(self, v) -> np.ndarray:
        return np.asarray(v, dtype=np.float64) @ self.rotation.T


def apply_transform(mesh: Mesh, t: RigidTransform) -> Mesh:
    return mesh.with_vertices(t.apply(mesh.vertices))


def triangle_normal(a, b, c) -> np.ndarray:
    """Unit normal ``(b - a) x (c - a)``; raises on degenerate input."""
    a = np.asarray(a, dtype=np.float64)
    n = np.cross(np.asarray(b, dtype=np.float64) - a, np.asarray(c, dtype=np.float64) - a)
    norm = float(np.linalg.norm(n))
    if norm <= DEGENERATE_AREA:
        raise DegenerateTriangleError("triangle has zero area")
    return n / norm


def face_normals(tri_vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized triangle normals.

    Returns ``(normals, degenerate)``; normals of degenerate faces are zero.
    """
    tv = np.asarray(tri_vertices, dtype=np.float64).reshape(-1, 3, 3)
    n = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
    norm = np.linalg.norm(n, axis=1)
    degenerate = norm <= DEGENERATE_AREA
    safe = np.where(degenerate, 1.0, norm)
    n = n / safe[:, None]
    n[degenerate] = 0.0
    return n, degenerate


def merge_meshes(meshes: Iterable[Mesh], object_id: int | None = None) -> Mesh:
    meshes = list(meshes)
    if not meshes:
        raise ValueError("nothing to merge")
    verts, tris, lines, pts = [], [], [], []
    base = 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + base)
        lines.append(m.lines + base)
        pts.append(m.points + base)
        base += len(m.vertices)
    return Mesh(np.concatenate(verts), np.concatenate(tris), np.concatenate(lines),
                np.concatenate(pts), object_id if object_id is not None else meshes[0].object_id)


# ---------------------------------------------------------------------------
# Wavefront OBJ (v / f / l / p subset)
# ---------------------------------------------------------------------------

ObjSource = Union[bytes, str, os.PathLike, BinaryIO]


def _resolve_index(token: str, nverts: int, lineno: int) -> int:
    head = token.split("/", 1)[0]
    try:
        k = int(head)
    except ValueError:
        raise ObjParseError(lineno, f"bad vertex index {token!r}") from None
    idx = k - 1 if k > 0 else nverts + k
    if k == 0 or not 0 <= idx < nverts:
        raise ObjParseError(lineno, f"vertex index {k} out of range (have {nverts} vertices)")
    return idx


def load_obj(source: ObjSource, object_id: int = 1) -> Mesh:
    """Parse a Wavefront OBJ subset into a :class:`Mesh`.

    ``source`` may be raw bytes, a binary stream or a filesystem path.
    Polygons are fan-triangulated around their first vertex; all other
    record types (``vn``, ``vt``, ``usemtl``, ...) are ignored.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()

    verts: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []
    lines: list[tuple[int, int]] = []
    pts: list[int] = []
    for lineno, raw in enumerate(io.BytesIO(data), start=1):
        text = raw.split(b"#", 1)[0].decode("utf-8", errors="replace").strip()
        if not text:
            continue
        tag, *args = text.split()
        if tag == "v":
            if len(args) < 3:
                raise ObjParseError(lineno, "vertex needs 3 coordinates")
            try:
                xyz = tuple(float(a) for a in args[:3])
            except ValueError:
                raise ObjParseError(lineno, f"non-numeric coordinate in {text!r}") from None
            if not all(np.isfinite(xyz)):
                raise ObjParseError(lineno, "non-finite coordinate")
            verts.append(xyz)
        elif tag == "f":
            if len(args) < 3:
                raise ObjParseError(lineno, "face needs at least 3 vertices")
            idx = [_resolve_index(a, len(verts), lineno) for a in args]
            for k in range(1, len(idx) - 1):
                tris.append((idx[0], idx[k], idx[k + 1]))
        elif tag == "l":
            if len(args) < 2:
                raise ObjParseError(lineno, "line needs at least 2 vertices")
            idx = [_resolve_index(a, len(verts), lineno) for a in args]
            lines.extend(zip(idx[:-1], idx[1:]))
        elif tag == "p":
            pts.extend(_resolve_index(a, len(verts), lineno) for a in args)

    return Mesh(
        np.array(verts, dtype=np.float64).reshape(-1, 3),
        np.array(tris, dtype=np.int64).reshape(-1, 3),
        np.array(lines, dtype=np.int64).reshape(-1, 2),
        np.array(pts, dtype=np.int64),
        object_id,
    )


def dump_obj(mesh: Mesh) -> str:
    # repr() round-trips doubles exactly
    out = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    out += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles.tolist()]
    out += [f"l {a + 1} {b + 1}" for a, b in mesh.lines.tolist()]
    out += [f"p {a + 1}" for a in mesh.points.tolist()]
    return "\n".join(out) + "\n"
