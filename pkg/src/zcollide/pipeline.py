"""Deterministic software rasterizer with fixed-function depth semantics.

Orthographic projection only.  Depth is linear along the view axis and
normalized to ``[0, 1]`` over the camera's depth length.  Face culling and
the depth test are both switchable, which is all the detector needs to
render the inverted object pass and the regular environment pass.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .geometry import DEGENERATE_AREA, Mesh, RigidTransform

_UNIT_TOL = 1e-9


class Cull(enum.Enum):
    BACK = "back"
    FRONT = "front"
    NONE = "none"


class DepthTest(enum.Enum):
    KEEP_LESS = "less"
    KEEP_GREATER = "greater"


def _unit(v, name: str) -> np.ndarray:
    v = np.array(v, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(v)) or abs(np.linalg.norm(v) - 1.0) > _UNIT_TOL:
        raise ValueError(f"{name} must be a unit vector, got {v}")
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class OrthoCamera:
    """Orthographic camera; ``origin`` is the center of the near plane.

    The frame is right-handed with ``right = view x up``, so a triangle that
    is counter-clockwise on screen faces the camera.
    """

    origin: np.ndarray
    view: np.ndarray
    up: np.ndarray
    half_width: float
    half_height: float
    depth_length: float
    right: np.ndarray = field(init=False)

    def __post_init__(self):
        origin = np.array(self.origin, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(origin)):
            raise ValueError("camera origin must be finite")
        origin.setflags(write=False)
        view = _unit(self.view, "view")
        up = _unit(self.up, "up")
        if abs(float(view @ up)) > _UNIT_TOL:
            raise ValueError("view and up must be orthogonal")
        right = np.cross(view, up)
        right.setflags(write=False)
        for name in ("half_width", "half_height", "depth_length"):
            val = float(getattr(self, name))
            if not (val > 0 and math.isfinite(val)):
                raise ValueError(f"{name} must be positive, got {val}")
            object.__setattr__(self, name, val)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "view", view)
        object.__setattr__(self, "up", up)
        object.__setattr__(self, "right", right)

    @classmethod
    def from_axes(cls, origin, right, up, view, half_width, half_height, depth_length) -> "OrthoCamera":
        cam = cls(origin, view, up, half_width, half_height, depth_length)
        if np.max(np.abs(cam.right - np.asarray(right, dtype=np.float64))) > _UNIT_TOL:
            raise ValueError("axes must be orthonormal and right-handed (right = view x up)")
        return cam

    def __eq__(self, other) -> bool:
        if not isinstance(other, OrthoCamera):
            return NotImplemented
        return (np.array_equal(self.origin, other.origin)
                and np.array_equal(self.view, other.view)
                and np.array_equal(self.up, other.up)
                and self.half_width == other.half_width
                and self.half_height == other.half_height
                and self.depth_length == other.depth_length)

    __hash__ = None

    def same_shape(self, other: "OrthoCamera") -> bool:
        return (self.half_width == other.half_width and self.half_height == other.half_height
                and self.depth_length == other.depth_length)

    def moved(self, t: RigidTransform) -> "OrthoCamera":
        """Camera carried along by a rigid motion."""
        return OrthoCamera(t.apply(self.origin), t.apply_vector(self.view), t.apply_vector(self.up),
                           self.half_width, self.half_height, self.depth_length)

    def translated(self, offset) -> "OrthoCamera":
        return OrthoCamera(self.origin + np.asarray(offset, dtype=np.float64), self.view, self.up,
                           self.half_width, self.half_height, self.depth_length)


@dataclass(frozen=True)
class RenderConfig:
    width: int
    height: int
    cull: Cull = Cull.BACK
    depth_test: DepthTest = DepthTest.KEEP_LESS
    clear_depth: float | None = None
    emit_normals: bool = False
    emit_ids: bool = False

    def __post_init__(self):
        for name in ("width", "height"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v}")
            object.__setattr__(self, name, int(v))
        if self.clear_depth is None:
            object.__setattr__(self, "clear_depth",
                               0.0 if self.depth_test is DepthTest.KEEP_GREATER else 1.0)
        elif not 0.0 <= self.clear_depth <= 1.0:
            raise ValueError("clear_depth must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class RenderTargets:
    """Per-texel outputs, arrays shaped ``(height, width)``; row 0 is the top."""

    depth: np.ndarray
    coverage: np.ndarray
    normal: np.ndarray | None = None
    id: np.ndarray | None = None
    degenerate_skipped: int = 0

    def __post_init__(self):
        for a in (self.depth, self.coverage, self.normal, self.id):
            if a is not None:
                a.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    def identical(self, other: "RenderTargets") -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is b
            return a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()
        return (same(self.depth, other.depth) and same(self.coverage, other.coverage)
                and same(self.normal, other.normal) and same(self.id, other.id))


def _dot3(rel: np.ndarray, axis: np.ndarray) -> np.ndarray:
    # fixed summation order; shared by scalar and vectorized projection
    return rel[..., 0] * axis[0] + rel[..., 1] * axis[1] + rel[..., 2] * axis[2]


def project_points(camera: OrthoCamera, pts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`project_vertex`: returns ``(ndc_x, ndc_y, depth)``."""
    rel = np.asarray(pts, dtype=np.float64) - camera.origin
    return (_dot3(rel, camera.right) / camera.half_width,
            _dot3(rel, camera.up) / camera.half_height,
            _dot3(rel, camera.view) / camera.depth_length)


def project_vertex(camera: OrthoCamera, p) -> tuple[float, float, float]:
    x, y, d = project_points(camera, np.asarray(p, dtype=np.float64).reshape(1, 3))
    return float(x[0]), float(y[0]), float(d[0])


def to_pixels(ndc_x, ndc_y, width: int, height: int):
    """NDC to y-up pixel coordinates; texel centers sit at ``k + 0.5``."""
    return (ndc_x + 1.0) * (0.5 * width), (ndc_y + 1.0) * (0.5 * height)


def _line_fragments(sx, sy, sd, segs, keys):
    """DDA samples along each projected segment, one per texel step."""
    if len(segs) == 0:
        empty_i = np.zeros(0, np.int64)
        return empty_i, empty_i, np.zeros(0), empty_i
    xa, ya, da = sx[segs[:, 0]], sy[segs[:, 0]], sd[segs[:, 0]]
    xb, yb, db = sx[segs[:, 1]], sy[segs[:, 1]], sd[segs[:, 1]]
    steps = np.maximum(np.ceil(np.maximum(np.abs(xb - xa), np.abs(yb - ya))), 1.0).astype(np.int64)
    counts = steps + 1
    owner = np.repeat(np.arange(len(segs)), counts)
    first = np.repeat(np.cumsum(counts) - counts, counts)
    k = np.arange(owner.size) - first
    t = k / steps[owner]
    x = xa[owner] + t * (xb - xa)[owner]
    y = ya[owner] + t * (yb - ya)[owner]
    d = da[owner] + t * (db - da)[owner]
    return np.floor(x).astype(np.int64), np.floor(y).astype(np.int64), d, keys[owner]


def rasterize(meshes: Sequence[Mesh] | Mesh, camera: OrthoCamera, config: RenderConfig,
              stencil: np.ndarray | None = None, backend: str | None = None) -> RenderTargets:
    """Render ``meshes`` into depth/coverage (and optional normal/id) targets.

    Triangles are culled by the sign of their screen-space area, sampled at
    texel centers with the top-left fill rule, and depth-tested per texel.
    Lines are walked texel by texel and points hit a single texel; neither
    is culled.  Equal-depth ties go to the primitive with the lowest
    ``(mesh index, primitive index)``, triangles before lines before points.

    ``stencil`` (same shape as the targets, row 0 at the top) blocks writes
    wherever it is false.
    """
    if isinstance(meshes, Mesh):
        meshes = [meshes]
    kern = kernels.get(backend)
    W, H = config.width, config.height
    keep_greater = config.depth_test is DepthTest.KEEP_GREATER
    minus_view = -camera.view

    tri_blocks, tri_keys = [], []
    frag_blocks = []
    attr_normals, attr_ids = [], []
    base = 0
    degenerate = 0
    for mesh in meshes:
        nx, ny, nd = project_points(camera, mesh.vertices)
        sx, sy = to_pixels(nx, ny, W, H)
        T, M, P = len(mesh.triangles), len(mesh.lines), len(mesh.points)

        if T:
            tv = mesh.triangle_vertices
            n = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
            norm = np.linalg.norm(n, axis=1)
            degen = norm <= DEGENERATE_AREA
            degenerate += int(degen.sum())
            normals = n / np.where(degen, 1.0, norm)[:, None]
            normals[degen] = 0.0

            tri = mesh.triangles
            x0, x1, x2 = sx[tri[:, 0]], sx[tri[:, 1]], sx[tri[:, 2]]
            y0, y1, y2 = sy[tri[:, 0]], sy[tri[:, 1]], sy[tri[:, 2]]
            sigma = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
            keep = ~degen & (sigma != 0.0)
            if config.cull is Cull.BACK:
                keep &= sigma > 0.0
            elif config.cull is Cull.FRONT:
                keep &= sigma < 0.0
            idx = np.flatnonzero(keep)
            if idx.size:
                corners = tri[idx].copy()
                flip = sigma[idx] < 0.0
                corners[flip] = corners[flip][:, [0, 2, 1]]
                block = np.stack([sx[corners], sy[corners], nd[corners]], axis=-1)
                tri_blocks.append(block)
                tri_keys.append(base + idx)
            attr_normals.append(normals)
        if M:
            fc, fr, fd, fk = _line_fragments(sx, sy, nd, mesh.lines, base + T + np.arange(M))
            frag_blocks.append((fc, fr, fd, fk))
            attr_normals.append(np.broadcast_to(minus_view, (M, 3)))
        if P:
            p = mesh.points
            frag_blocks.append((np.floor(sx[p]).astype(np.int64), np.floor(sy[p]).astype(np.int64),
                                nd[p], base + T + M + np.arange(P)))
            attr_normals.append(np.broadcast_to(minus_view, (P, 3)))
        attr_ids.append(np.full(T + M + P, mesh.object_id, dtype=np.int64))
        base += T + M + P

    depth = np.full((H, W), config.clear_depth, dtype=np.float64)
    winner = np.full((H, W), -1, dtype=np.int64)
    st = None
    if stencil is not None:
        stencil = np.asarray(stencil)
        if stencil.shape != (H, W):
            raise ValueError(f"stencil shape {stencil.shape} != {(H, W)}")
        st = np.ascontiguousarray(stencil[::-1].astype(np.uint8))

    if tri_blocks:
        kern.raster_triangles(np.ascontiguousarray(np.concatenate(tri_blocks)),
                              np.ascontiguousarray(np.concatenate(tri_keys), dtype=np.int64),
                              depth, winner, st, keep_greater)
    if frag_blocks:
        cols, rows, dvals, keys = (np.ascontiguousarray(np.concatenate(c)) for c in zip(*frag_blocks))
        kern.splat_fragments(cols.astype(np.int64), rows.astype(np.int64), dvals.astype(np.float64),
                             keys.astype(np.int64), depth, winner, st, keep_greater)

    depth = np.ascontiguousarray(depth[::-1])
    winner = np.ascontiguousarray(winner[::-1])
    coverage = winner >= 0
    normal_map = ids = None
    if config.emit_normals:
        normal_map = np.zeros((H, W, 3), dtype=np.float64)
        if coverage.any():
            normal_map[coverage] = np.concatenate(attr_normals)[winner[coverage]]
    if config.emit_ids:
        ids = np.zeros((H, W), dtype=np.int64)
        if coverage.any():
            ids[coverage] = np.concatenate(attr_ids)[winner[coverage]]
    return RenderTargets(depth, coverage, normal_map, ids, degenerate)
