# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled rasterization kernels.

Mirrors ``_pykernels`` expression for expression; keep the two in sync.
Built with ``-ffp-contract=off`` so no multiply-add fusion changes rounding.
"""

from libc.math cimport ceil, floor


cdef inline double _edge(double ax, double ay, double bx, double by,
                         double px, double py) noexcept nogil:
    if ax < bx or (ax == bx and ay < by):
        return (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    return -((ax - bx) * (py - by) - (ay - by) * (px - bx))


cdef inline bint _top_left(double ax, double ay, double bx, double by) noexcept nogil:
    cdef double dy = by - ay
    return dy < 0.0 or (dy == 0.0 and bx - ax < 0.0)


cdef inline bint _inside(double w, bint tl) noexcept nogil:
    return w > 0.0 or (w == 0.0 and tl)


cdef inline double _min3(double a, double b, double c) noexcept nogil:
    cdef double m = a
    if b < m:
        m = b
    if c < m:
        m = c
    return m


cdef inline double _max3(double a, double b, double c) noexcept nogil:
    cdef double m = a
    if b > m:
        m = b
    if c > m:
        m = c
    return m


def raster_triangles(const double[:, :, ::1] tri, const long long[::1] keys,
                     double[:, ::1] depth, long long[:, ::1] winner,
                     stencil, bint keep_greater):
    cdef Py_ssize_t height = depth.shape[0]
    cdef Py_ssize_t width = depth.shape[1]
    cdef const unsigned char[:, ::1] st
    cdef bint use_stencil = stencil is not None
    if use_stencil:
        st = stencil
    cdef Py_ssize_t t, i, r, i_lo, i_hi, r_lo, r_hi
    cdef double x0, y0, d0, x1, y1, d1, x2, y2, d2, sigma
    cdef double px, py, w0, w1, w2, b1, b2, d, cur
    cdef bint tl0, tl1, tl2, better
    cdef long long key, w

    with nogil:
        for t in range(tri.shape[0]):
            x0 = tri[t, 0, 0]; y0 = tri[t, 0, 1]; d0 = tri[t, 0, 2]
            x1 = tri[t, 1, 0]; y1 = tri[t, 1, 1]; d1 = tri[t, 1, 2]
            x2 = tri[t, 2, 0]; y2 = tri[t, 2, 1]; d2 = tri[t, 2, 2]
            key = keys[t]
            sigma = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
            if not sigma > 0.0:
                continue
            i_lo = <Py_ssize_t>ceil(_min3(x0, x1, x2) - 0.5)
            i_hi = <Py_ssize_t>floor(_max3(x0, x1, x2) - 0.5)
            r_lo = <Py_ssize_t>ceil(_min3(y0, y1, y2) - 0.5)
            r_hi = <Py_ssize_t>floor(_max3(y0, y1, y2) - 0.5)
            if i_lo < 0:
                i_lo = 0
            if r_lo < 0:
                r_lo = 0
            if i_hi > width - 1:
                i_hi = width - 1
            if r_hi > height - 1:
                r_hi = height - 1
            tl0 = _top_left(x1, y1, x2, y2)
            tl1 = _top_left(x2, y2, x0, y0)
            tl2 = _top_left(x0, y0, x1, y1)
            for r in range(r_lo, r_hi + 1):
                py = <double>r + 0.5
                for i in range(i_lo, i_hi + 1):
                    px = <double>i + 0.5
                    w0 = _edge(x1, y1, x2, y2, px, py)
                    if not _inside(w0, tl0):
                        continue
                    w1 = _edge(x2, y2, x0, y0, px, py)
                    if not _inside(w1, tl1):
                        continue
                    w2 = _edge(x0, y0, x1, y1, px, py)
                    if not _inside(w2, tl2):
                        continue
                    b1 = w1 / sigma
                    b2 = w2 / sigma
                    d = d0 + b1 * (d1 - d0) + b2 * (d2 - d0)
                    if not (d >= 0.0 and d <= 1.0):
                        continue
                    if use_stencil and st[r, i] == 0:
                        continue
                    cur = depth[r, i]
                    w = winner[r, i]
                    if keep_greater:
                        better = d > cur
                    else:
                        better = d < cur
                    if w < 0 or better or (d == cur and key < w):
                        depth[r, i] = d
                        winner[r, i] = key


def splat_fragments(const long long[::1] cols, const long long[::1] rows,
                    const double[::1] dvals, const long long[::1] keys,
                    double[:, ::1] depth, long long[:, ::1] winner,
                    stencil, bint keep_greater):
    cdef Py_ssize_t height = depth.shape[0]
    cdef Py_ssize_t width = depth.shape[1]
    cdef const unsigned char[:, ::1] st
    cdef bint use_stencil = stencil is not None
    if use_stencil:
        st = stencil
    cdef Py_ssize_t k, i, r
    cdef double d, cur
    cdef long long key, w
    cdef bint better
    with nogil:
        for k in range(cols.shape[0]):
            i = cols[k]
            r = rows[k]
            d = dvals[k]
            key = keys[k]
            if i < 0 or i >= width or r < 0 or r >= height:
                continue
            if not (d >= 0.0 and d <= 1.0):
                continue
            if use_stencil and st[r, i] == 0:
                continue
            cur = depth[r, i]
            w = winner[r, i]
            if keep_greater:
                better = d > cur
            else:
                better = d < cur
            if w < 0 or better or (d == cur and key < w):
                depth[r, i] = d
                winner[r, i] = key
