"""Pure numpy implementation of the rasterization kernels.

Reference twin of ``_kernels.pyx``.  Both evaluate the same floating-point
expressions in the same order so their outputs are bit-identical.

Buffers are indexed ``[row, col]`` with row 0 at the *bottom* of the
viewport (y-up pixel space); the caller flips them for export.
"""

from __future__ import annotations

import math

import numpy as np


def _edge(ax, ay, bx, by, px, py):
    # Always evaluated from the lexicographically smaller endpoint so that the
    # two triangles sharing an edge get exactly negated values.
    if (ax, ay) < (bx, by):
        return (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    return -((ax - bx) * (py - by) - (ay - by) * (px - bx))


def _top_left(ax, ay, bx, by) -> bool:
    dy = by - ay
    return dy < 0.0 or (dy == 0.0 and bx - ax < 0.0)


def _inside(w, top_left: bool):
    return (w > 0.0) | ((w == 0.0) & top_left)


def raster_triangles(tri, keys, depth, winner, stencil, keep_greater: bool) -> None:
    """Rasterize counter-clockwise screen triangles into ``depth``/``winner``.

    ``tri`` has shape (T, 3, 3) holding (x, y, d) per corner in pixel units.
    A fragment replaces the stored one when it passes the depth test, or
    ties on depth with a smaller key.
    """
    height, width = depth.shape
    for t in range(tri.shape[0]):
        x0, y0, d0 = (float(v) for v in tri[t, 0])
        x1, y1, d1 = (float(v) for v in tri[t, 1])
        x2, y2, d2 = (float(v) for v in tri[t, 2])
        key = int(keys[t])
        sigma = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if not sigma > 0.0:
            continue
        i_lo = max(0, math.ceil(min(x0, x1, x2) - 0.5))
        i_hi = min(width - 1, math.floor(max(x0, x1, x2) - 0.5))
        r_lo = max(0, math.ceil(min(y0, y1, y2) - 0.5))
        r_hi = min(height - 1, math.floor(max(y0, y1, y2) - 0.5))
        if i_lo > i_hi or r_lo > r_hi:
            continue
        px = np.arange(i_lo, i_hi + 1, dtype=np.float64)[None, :] + 0.5
        py = np.arange(r_lo, r_hi + 1, dtype=np.float64)[:, None] + 0.5

        w0 = _edge(x1, y1, x2, y2, px, py)
        w1 = _edge(x2, y2, x0, y0, px, py)
        w2 = _edge(x0, y0, x1, y1, px, py)
        mask = (_inside(w0, _top_left(x1, y1, x2, y2))
                & _inside(w1, _top_left(x2, y2, x0, y0))
                & _inside(w2, _top_left(x0, y0, x1, y1)))
        if not mask.any():
            continue
        b1 = w1 / sigma
        b2 = w2 / sigma
        d = d0 + b1 * (d1 - d0) + b2 * (d2 - d0)
        mask &= (d >= 0.0) & (d <= 1.0)

        dv = depth[r_lo:r_hi + 1, i_lo:i_hi + 1]
        wv = winner[r_lo:r_hi + 1, i_lo:i_hi + 1]
        if stencil is not None:
            mask &= stencil[r_lo:r_hi + 1, i_lo:i_hi + 1] != 0
        better = (d > dv) if keep_greater else (d < dv)
        mask &= (wv < 0) | better | ((d == dv) & (key < wv))
        dv[mask] = d[mask]
        wv[mask] = key


def splat_fragments(cols, rows, dvals, keys, depth, winner, stencil, keep_greater: bool) -> None:
    """Depth-test single-texel fragments (lines and points) into the buffers."""
    height, width = depth.shape
    for k in range(len(cols)):
        i = int(cols[k])
        r = int(rows[k])
        d = float(dvals[k])
        key = int(keys[k])
        if i < 0 or i >= width or r < 0 or r >= height:
            continue
        if not (0.0 <= d <= 1.0):
            continue
        if stencil is not None and stencil[r, i] == 0:
            continue
        cur = depth[r, i]
        w = winner[r, i]
        better = d > cur if keep_greater else d < cur
        if w < 0 or better or (d == cur and key < w):
            depth[r, i] = d
            winner[r, i] = key
