"""Procedural meshes: boxes, icospheres, quads and convex hulls.

All closed shapes are wound counter-clockwise seen from outside.
"""

from __future__ import annotations

import numpy as np

from .geometry import Mesh

_BOX_FACES = np.array([
    [0, 2, 1], [0, 3, 2],  # -z
    [4, 5, 6], [4, 6, 7],  # +z
    [0, 1, 5], [0, 5, 4],  # -y
    [3, 7, 6], [3, 6, 2],  # +y
    [0, 4, 7], [0, 7, 3],  # -x
    [1, 2, 6], [1, 6, 5],  # +x
], dtype=np.int64)


def box(lo, hi, object_id: int = 1, inward: bool = False) -> Mesh:
    """Axis-aligned box.  ``inward=True`` flips the winding (a hollow room)."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    verts = np.array([
        [x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
        [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1],
    ])
    faces = _BOX_FACES[:, ::-1] if inward else _BOX_FACES
    return Mesh(verts, faces, object_id=object_id)


def centered_box(center, half_extents, object_id: int = 1) -> Mesh:
    c = np.asarray(center, dtype=np.float64)
    h = np.broadcast_to(np.asarray(half_extents, dtype=np.float64), (3,))
    return box(c - h, c + h, object_id)


def quad(corner, edge_u, edge_v, object_id: int = 1) -> Mesh:
    """Parallelogram ``corner + s*edge_u + t*edge_v``; normal is ``edge_u x edge_v``."""
    c = np.asarray(corner, dtype=np.float64)
    u = np.asarray(edge_u, dtype=np.float64)
    v = np.asarray(edge_v, dtype=np.float64)
    verts = np.array([c, c + u, c + u + v, c + v])
    return Mesh(verts, [[0, 1, 2], [0, 2, 3]], object_id=object_id)


def icosphere(subdivisions: int = 3, radius: float = 1.0, center=(0.0, 0.0, 0.0),
              object_id: int = 1) -> Mesh:
    """Geodesic sphere with ``20 * 4**subdivisions`` faces."""
    t = (1.0 + 5.0 ** 0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.array(verts) * radius + np.asarray(center, dtype=np.float64)
    return Mesh(v, np.array(faces, dtype=np.int64), object_id=object_id)


def convex_hull(points, object_id: int = 1) -> Mesh:
    """Outward-wound convex hull of a point cloud."""
    from scipy.spatial import ConvexHull

    pts = np.asarray(points, dtype=np.float64)
    hull = ConvexHull(pts)
    used = np.unique(hull.simplices)
    remap = np.full(len(pts), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    faces = remap[hull.simplices]
    verts = pts[used]
    centroid = verts.mean(axis=0)
    tv = verts[faces]
    n = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
    flip = np.einsum("ij,ij->i", n, tv[:, 0] - centroid) < 0
    faces[flip] = faces[flip][:, ::-1]
    return Mesh(verts, faces, object_id=object_id)
