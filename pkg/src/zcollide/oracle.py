"""Exact brute-force geometry used as ground truth for the detector.

Nothing here is fast; everything here is meant to be trustworthy.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import DEGENERATE_AREA, Mesh, face_normals

# plane-distance snapping, relative to the triangles' coordinate scale
_REL_EPS = 1e-12


class Facing(enum.Enum):
    FRONT = "front"
    BACK = "back"
    ANY = "any"


class Select(enum.Enum):
    NEAREST = "nearest"
    FARTHEST = "farthest"


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("ray direction must be a unit vector")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class RayHit:
    t: float
    normal: np.ndarray
    object_id: int
    triangle: int


@dataclass(frozen=True)
class OracleVerdict:
    collided: bool
    witness: tuple[int, int] | None = None
    min_separation_estimate: float | None = None

    def __post_init__(self):
        if self.collided and self.witness is None:
            raise ValueError("a positive verdict needs a witness pair")


# ---------------------------------------------------------------------------
# triangle / triangle intersection: interval overlap on the planes' line
# ---------------------------------------------------------------------------

def _as_tris(t) -> np.ndarray:
    return np.asarray(t, dtype=np.float64).reshape(-1, 3, 3)


def _check_nondegenerate(*tris: np.ndarray) -> None:
    for t in tris:
        _, degen = face_normals(t)
        if degen.any():
            raise ValueError("degenerate triangle passed to triangle intersection test")


def _plane_distances(tri_p: np.ndarray, tri_q: np.ndarray):
    """Signed distances of q's corners to p's plane, snapped to zero near it."""
    n = np.cross(tri_p[:, 1] - tri_p[:, 0], tri_p[:, 2] - tri_p[:, 0])
    dist = np.einsum("nj,nkj->nk", n, tri_q - tri_p[:, None, 0])
    scale = np.linalg.norm(n, axis=1) * (np.abs(tri_q).max(axis=(1, 2))
                                         + np.abs(tri_p).max(axis=(1, 2)) + 1.0)
    dist[np.abs(dist) <= (_REL_EPS * scale)[:, None]] = 0.0
    return n, dist


def _interval(proj: np.ndarray, dist: np.ndarray):
    """Segment where a triangle crosses the other plane, as [lo, hi] on the line.

    Collects corners lying on the plane plus edge crossings with a strict
    sign change.  Empty (lo > hi) when the triangle misses the plane.
    """
    lo = np.full(len(proj), np.inf)
    hi = np.full(len(proj), -np.inf)
    for k in range(3):
        on = dist[:, k] == 0.0
        lo = np.where(on, np.minimum(lo, proj[:, k]), lo)
        hi = np.where(on, np.maximum(hi, proj[:, k]), hi)
    for a, b in ((0, 1), (1, 2), (2, 0)):
        da, db = dist[:, a], dist[:, b]
        cross = da * db < 0.0
        with np.errstate(invalid="ignore", divide="ignore"):
            t = proj[:, a] + (proj[:, b] - proj[:, a]) * (da / (da - db))
        lo = np.where(cross, np.minimum(lo, t), lo)
        hi = np.where(cross, np.maximum(hi, t), hi)
    return lo, hi


def _segments_intersect_2d(p0, p1, q0, q1) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def on_segment(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2 = orient(p0, p1, q0), orient(p0, p1, q1)
    o3, o4 = orient(q0, q1, p0), orient(q0, q1, p1)
    if ((o1 > 0 and o2 < 0) or (o1 < 0 and o2 > 0)) and ((o3 > 0 and o4 < 0) or (o3 < 0 and o4 > 0)):
        return True
    return ((o1 == 0 and on_segment(p0, p1, q0)) or (o2 == 0 and on_segment(p0, p1, q1))
            or (o3 == 0 and on_segment(q0, q1, p0)) or (o4 == 0 and on_segment(q0, q1, p1)))


def _point_in_tri_2d(p, tri) -> bool:
    a, b, c = tri
    d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    d2 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
    d3 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
    has_neg = d1 < 0 or d2 < 0 or d3 < 0
    has_pos = d1 > 0 or d2 > 0 or d3 > 0
    return not (has_neg and has_pos)


def _coplanar_intersect(ta: np.ndarray, tb: np.ndarray, normal: np.ndarray) -> bool:
    drop = int(np.argmax(np.abs(normal)))
    keep = [k for k in range(3) if k != drop]
    a = ta[:, keep]
    b = tb[:, keep]
    for i in range(3):
        for j in range(3):
            if _segments_intersect_2d(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3]):
                return True
    return _point_in_tri_2d(a[0], b) or _point_in_tri_2d(b[0], a)


def tri_tri_intersect_many(ta, tb) -> np.ndarray:
    """Pairwise closed-triangle intersection for arrays of shape (N, 3, 3)."""
    ta, tb = _as_tris(ta), _as_tris(tb)
    if len(ta) != len(tb):
        raise ValueError("triangle batches must have equal length")
    out = np.zeros(len(ta), dtype=bool)
    if len(ta) == 0:
        return out
    nb, da = _plane_distances(tb, ta)
    na, db = _plane_distances(ta, tb)
    a_side = ((da > 0).all(axis=1) | (da < 0).all(axis=1))
    b_side = ((db > 0).all(axis=1) | (db < 0).all(axis=1))
    live = ~(a_side | b_side)
    coplanar = live & (da == 0.0).all(axis=1)
    general = live & ~coplanar

    if general.any():
        g = np.flatnonzero(general)
        direction = np.cross(na[g], nb[g])
        axis = np.argmax(np.abs(direction), axis=1)
        pa = np.take_along_axis(ta[g], axis[:, None, None], axis=2)[:, :, 0]
        pb = np.take_along_axis(tb[g], axis[:, None, None], axis=2)[:, :, 0]
        sign = np.sign(np.take_along_axis(direction, axis[:, None], axis=1))
        lo_a, hi_a = _interval(pa * sign, da[g])
        lo_b, hi_b = _interval(pb * sign, db[g])
        out[g] = (lo_a <= hi_a) & (lo_b <= hi_b) & (lo_a <= hi_b) & (lo_b <= hi_a)
    for k in np.flatnonzero(coplanar):
        out[k] = _coplanar_intersect(ta[k], tb[k], na[k])
    return out


def tri_tri_intersect(ta, tb) -> bool:
    """True iff the two closed triangles share at least one point."""
    ta, tb = _as_tris(ta), _as_tris(tb)
    _check_nondegenerate(ta, tb)
    return bool(tri_tri_intersect_many(ta, tb)[0])


def tri_tri_intersect_sat(ta, tb) -> bool:
    """Separating-axis cross-check; independent of the interval method."""
    a = _as_tris(ta)[0]
    b = _as_tris(tb)[0]
    _check_nondegenerate(a[None], b[None])
    ea = [a[(i + 1) % 3] - a[i] for i in range(3)]
    eb = [b[(i + 1) % 3] - b[i] for i in range(3)]
    na = np.cross(ea[0], ea[1])
    nb = np.cross(eb[0], eb[1])
    axes = [na, nb]
    axes += [np.cross(u, v) for u in ea for v in eb]
    axes += [np.cross(na, u) for u in ea] + [np.cross(nb, v) for v in eb]
    scale = max(np.abs(a).max(), np.abs(b).max(), 1.0)
    for ax in axes:
        length = np.linalg.norm(ax)
        if length <= 1e-12 * scale * scale:
            continue
        pa = a @ ax
        pb = b @ ax
        if pa.max() < pb.min() or pb.max() < pa.min():
            return False
    return True


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def _dot(u, v):
    return np.einsum("...j,...j->...", u, v)


def point_triangle_distance(p, tri) -> np.ndarray:
    """Distance from points (N, 3) to triangles (N, 3, 3), closest-feature walk."""
    p = np.asarray(p, dtype=np.float64)
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = _dot(ab, ap), _dot(ac, ap)
    bp = p - b
    d3, d4 = _dot(ab, bp), _dot(ac, bp)
    cp = p - c
    d5, d6 = _dot(ab, cp), _dot(ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(invalid="ignore", divide="ignore"):
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        closest = a + ab * v[:, None] + ac * w[:, None]
        # edge regions, most specific first (later assignments override)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        closest = np.where(((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0))[:, None],
                           b + (c - b) * t_bc[:, None], closest)
        t_ac = d2 / (d2 - d6)
        closest = np.where(((vb <= 0) & (d2 >= 0) & (d6 <= 0))[:, None], a + ac * t_ac[:, None], closest)
        t_ab = d1 / (d1 - d3)
        closest = np.where(((vc <= 0) & (d1 >= 0) & (d3 <= 0))[:, None], a + ab * t_ab[:, None], closest)
    closest = np.where(((d6 >= 0) & (d5 <= d6))[:, None], c, closest)
    closest = np.where(((d3 >= 0) & (d4 <= d3))[:, None], b, closest)
    closest = np.where(((d1 <= 0) & (d2 <= 0))[:, None], a, closest)
    return np.linalg.norm(p - closest, axis=1)


def segment_segment_distance(p0, p1, q0, q1) -> np.ndarray:
    """Distance between segments, vectorized over the leading axis."""
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = _dot(d1, d1)
    e = _dot(d2, d2)
    f = _dot(d2, r)
    c = _dot(d1, r)
    b = _dot(d1, d2)
    denom = a * e - b * b
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 1e-300, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = (b * s + f) / e
        s = np.where(t < 0.0, np.clip(-c / a, 0.0, 1.0), s)
        s = np.where(t > 1.0, np.clip((b - c) / a, 0.0, 1.0), s)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm((p0 + d1 * s[:, None]) - (q0 + d2 * t[:, None]), axis=1)


def tri_tri_distance_many(ta, tb) -> np.ndarray:
    """Distance between triangle pairs; zero where they intersect."""
    ta, tb = _as_tris(ta), _as_tris(tb)
    best = np.full(len(ta), np.inf)
    for k in range(3):
        best = np.minimum(best, point_triangle_distance(ta[:, k], tb))
        best = np.minimum(best, point_triangle_distance(tb[:, k], ta))
    for i in range(3):
        for j in range(3):
            best = np.minimum(best, segment_segment_distance(
                ta[:, i], ta[:, (i + 1) % 3], tb[:, j], tb[:, (j + 1) % 3]))
    return np.where(tri_tri_intersect_many(ta, tb), 0.0, best)


# ---------------------------------------------------------------------------
# mesh vs mesh
# ---------------------------------------------------------------------------

def _valid_triangles(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    tv = mesh.triangle_vertices
    _, degen = face_normals(tv)
    idx = np.flatnonzero(~degen)
    return idx, tv[idx]


def _candidate_pairs(ta: np.ndarray, tb: np.ndarray, margin: float, prefilter: bool):
    if not prefilter:
        ii, jj = np.meshgrid(np.arange(len(ta)), np.arange(len(tb)), indexing="ij")
        return ii.ravel(), jj.ravel()
    lo_a, hi_a = ta.min(axis=1) - margin, ta.max(axis=1) + margin
    lo_b, hi_b = tb.min(axis=1), tb.max(axis=1)
    out_i, out_j = [], []
    chunk = max(1, 2_000_000 // max(len(tb), 1))
    for s in range(0, len(ta), chunk):
        ok = np.all((lo_a[s:s + chunk, None] <= hi_b[None]) & (lo_b[None] <= hi_a[s:s + chunk, None]), axis=2)
        i, j = np.nonzero(ok)
        out_i.append(i + s)
        out_j.append(j)
    if not out_i:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(out_i), np.concatenate(out_j)


def mesh_collide(a: Mesh, b: Mesh, epsilon: float = 0.0, prefilter: bool = True,
                 separation_cap: float | None = None, batch: int = 200_000) -> OracleVerdict:
    """All-pairs triangle test with an optional bounding-box prefilter.

    ``min_separation_estimate`` is the smallest triangle-pair distance among
    pairs whose boxes lie within ``separation_cap`` (every pair when the cap
    is None); it is absent when no pair qualifies, meaning the separation
    exceeds the cap.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    ia, ta = _valid_triangles(a)
    ib, tb = _valid_triangles(b)
    if len(ta) == 0 or len(tb) == 0:
        return OracleVerdict(False, None, None)

    ci, cj = _candidate_pairs(ta, tb, epsilon, prefilter)
    for s in range(0, len(ci), batch):
        hit = tri_tri_intersect_many(ta[ci[s:s + batch]], tb[cj[s:s + batch]])
        if hit.any():
            k = s + int(np.argmax(hit))
            return OracleVerdict(True, (int(ia[ci[k]]), int(ib[cj[k]])), 0.0)

    if separation_cap is None:
        di, dj = _candidate_pairs(ta, tb, 0.0, prefilter=False)
    else:
        di, dj = _candidate_pairs(ta, tb, max(separation_cap, epsilon), prefilter=True)
    if len(di) == 0:
        return OracleVerdict(False, None, None)
    best, best_k = np.inf, -1
    for s in range(0, len(di), batch):
        dist = tri_tri_distance_many(ta[di[s:s + batch]], tb[dj[s:s + batch]])
        k = int(np.argmin(dist))
        if dist[k] < best:
            best, best_k = float(dist[k]), s + k
    witness = (int(ia[di[best_k]]), int(ib[dj[best_k]]))
    if epsilon > 0 and best <= epsilon:
        return OracleVerdict(True, witness, best)
    return OracleVerdict(False, None, best)


def scene_collide(a: Mesh, others: Sequence[Mesh], **kw) -> OracleVerdict:
    """:func:`mesh_collide` against several meshes; separation is the minimum."""
    best = None
    for other in others:
        v = mesh_collide(a, other, **kw)
        if v.collided:
            return v
        if v.min_separation_estimate is not None:
            best = v.min_separation_estimate if best is None else min(best, v.min_separation_estimate)
    return OracleVerdict(False, None, best)


# ---------------------------------------------------------------------------
# ray casting
# ---------------------------------------------------------------------------

def raycast_many(meshes: Sequence[Mesh] | Mesh, origins, direction, facing: Facing = Facing.ANY,
                 select: Select = Select.NEAREST, t_range: tuple[float, float] = (0.0, np.inf)):
    """Cast parallel rays; returns ``(t, hit, normal, object_id, triangle)`` arrays.

    Hits with ``t`` outside ``t_range`` or on triangles of the wrong facing
    are ignored.  Facing is judged against the ray direction: front-facing
    triangles have ``normal . direction < 0``.  ``triangle`` indexes into the
    owning mesh's triangle list.
    """
    if isinstance(meshes, Mesh):
        meshes = [meshes]
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    direction = np.asarray(direction, dtype=np.float64).reshape(3)
    R = len(origins)
    best_t = np.full(R, np.nan)
    best_n = np.zeros((R, 3))
    best_id = np.zeros(R, dtype=np.int64)
    best_tri = np.full(R, -1, dtype=np.int64)
    t_lo, t_hi = t_range
    eps = 1e-12
    for mesh in meshes:
        tv = mesh.triangle_vertices
        normals, degen = face_normals(tv)
        for k in np.flatnonzero(~degen):
            cos = float(normals[k] @ direction)
            if facing is Facing.FRONT and not cos < 0:
                continue
            if facing is Facing.BACK and not cos > 0:
                continue
            v0, v1, v2 = tv[k]
            e1, e2 = v1 - v0, v2 - v0
            pvec = np.cross(direction, e2)
            det = float(e1 @ pvec)
            if abs(det) < 1e-15:
                continue
            tvec = origins - v0
            u = (tvec @ pvec) / det
            qvec = np.cross(tvec, e1)
            v = (qvec @ direction) / det
            t = (qvec @ e2) / det
            ok = (u >= -eps) & (v >= -eps) & (u + v <= 1 + eps) & (t >= t_lo) & (t <= t_hi)
            if select is Select.NEAREST:
                take = ok & (np.isnan(best_t) | (t < best_t))
            else:
                take = ok & (np.isnan(best_t) | (t > best_t))
            best_t[take] = t[take]
            best_n[take] = normals[k]
            best_id[take] = mesh.object_id
            best_tri[take] = k
    hit = ~np.isnan(best_t)
    return best_t, hit, best_n, best_id, best_tri


def raycast_surface(mesh: Mesh | Sequence[Mesh], ray: Ray, facing: Facing = Facing.ANY,
                    select: Select = Select.NEAREST, t_range: tuple[float, float] = (0.0, np.inf)
                    ) -> RayHit | None:
    """Selected extremal hit of one ray, or None."""
    t, hit, n, oid, tri = raycast_many(mesh, ray.origin, ray.direction, facing, select, t_range)
    if not hit[0]:
        return None
    return RayHit(float(t[0]), n[0], int(oid[0]), int(tri[0]))


# ---------------------------------------------------------------------------
# containment
# ---------------------------------------------------------------------------

def point_inside_closed_mesh(p, mesh: Mesh, seed: int = 0, max_attempts: int = 32) -> bool:
    """Ray-parity inside test for a watertight mesh.

    A ray that grazes a vertex or an edge (barycentric coordinate within
    1e-9 of the boundary) or runs parallel to a face it touches is discarded
    and re-drawn in a new random direction.
    """
    p = np.asarray(p, dtype=np.float64)
    tv = mesh.triangle_vertices
    _, degen = face_normals(tv)
    tv = tv[~degen]
    if len(tv) == 0:
        return False
    rng = np.random.default_rng(seed)
    v0, e1, e2 = tv[:, 0], tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0]
    scale = float(np.abs(tv).max()) + float(np.abs(p).max()) + 1.0
    for _ in range(max_attempts):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        pvec = np.cross(d, e2)
        det = np.einsum("ij,ij->i", e1, pvec)
        tvec = p - v0
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.einsum("ij,ij->i", tvec, pvec) / det
            qvec = np.cross(tvec, e1)
            v = (qvec @ d) / det
            t = np.einsum("ij,ij->i", qvec, e2) / det
        parallel = np.abs(det) < 1e-12 * scale * scale
        w = 1.0 - u - v
        inside = (u > -1e-9) & (v > -1e-9) & (w > -1e-9) & (t > 0) & ~parallel
        grazing = inside & ((np.abs(u) < 1e-9) | (np.abs(v) < 1e-9) | (np.abs(w) < 1e-9))
        if grazing.any():
            continue
        if np.any(parallel & (np.abs(np.einsum("ij,ij->i", tvec, np.cross(e1, e2))) < 1e-9 * scale)):
            continue
        return bool(np.count_nonzero(inside) % 2 == 1)
    raise RuntimeError("could not find a non-grazing ray direction")
