# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: the xoshiro256** stream and disk-stamp coverage.

Every function here has a line-for-line twin in ``_pykernels``; the two must
produce identical bits, so floating-point expressions are written in the same
order in both files.
"""

from libc.math cimport cos, log, sin, sqrt

ctypedef unsigned long long u64

cdef double TWO_PI = 6.283185307179586
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline u64 rotl(u64 x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline u64 next_u64(u64[::1] s) nogil:
    cdef u64 result = rotl(s[1] * 5, 7) * 9
    cdef u64 t = s[1] << 17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = rotl(s[3], 45)
    return result


def xoshiro_u64(u64[::1] state, u64[::1] out):
    cdef Py_ssize_t k
    for k in range(out.shape[0]):
        out[k] = next_u64(state)


def xoshiro_uniform(u64[::1] state, double[::1] out):
    cdef Py_ssize_t k
    for k in range(out.shape[0]):
        out[k] = (next_u64(state) >> 11) * INV_2_53


def xoshiro_normal(u64[::1] state, double[::1] out):
    cdef Py_ssize_t k = 0
    cdef Py_ssize_t n = out.shape[0]
    cdef double ua, ub, r, theta
    while k < n:
        ua = (next_u64(state) >> 11) * INV_2_53
        ub = (next_u64(state) >> 11) * INV_2_53
        r = sqrt(-2.0 * log(1.0 - ua))
        theta = TWO_PI * ub
        out[k] = r * cos(theta)
        if k + 1 < n:
            out[k + 1] = r * sin(theta)
        k += 2


def render_coverage(double[:, ::1] segments, double radius, int ss, double shear, double cy,
                    int[:, ::1] counts):
    cdef Py_ssize_t h = counts.shape[0]
    cdef Py_ssize_t w = counts.shape[1]
    cdef Py_ssize_t nseg = segments.shape[0]
    cdef Py_ssize_t r, c, sy, sx, j
    cdef double r2 = radius * radius
    cdef double px, py, ax, ay, dx, dy, l2, t, qx, qy, ex, ey
    cdef int count
    for r in range(h):
        for c in range(w):
            count = 0
            for sy in range(ss):
                py = r + (sy + 0.5) / ss
                for sx in range(ss):
                    # canvas point mapped back into the unsheared glyph frame
                    px = (c + (sx + 0.5) / ss) - shear * (py - cy)
                    for j in range(nseg):
                        ax = segments[j, 0]
                        ay = segments[j, 1]
                        dx = segments[j, 2] - ax
                        dy = segments[j, 3] - ay
                        l2 = dx * dx + dy * dy
                        if l2 > 0.0:
                            t = ((px - ax) * dx + (py - ay) * dy) / l2
                            if t < 0.0:
                                t = 0.0
                            elif t > 1.0:
                                t = 1.0
                        else:
                            t = 0.0
                        qx = ax + t * dx
                        qy = ay + t * dy
                        ex = px - qx
                        ey = py - qy
                        if ex * ex + ey * ey <= r2:
                            count += 1
                            break
            counts[r, c] = count
