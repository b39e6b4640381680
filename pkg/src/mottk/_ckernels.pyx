# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``.

Arithmetic is written in the same order as the Python fallback so both
backends agree bit for bit (built with ``-ffp-contract=off``).
"""
import numpy as np

from libc.math cimport fabs, INFINITY

cdef double _TIGHT_RTOL = 1e-9
TIGHT_RTOL = _TIGHT_RTOL


cdef inline double _fmin(double x, double y) nogil:
    return x if x < y else y


cdef inline double _fmax(double x, double y) nogil:
    return x if x > y else y


def iou_matrix(a, b):
    cdef double[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    cdef double[:, ::1] B = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0], i, j
    out = np.zeros((n, m))
    cdef double[:, ::1] O = out
    cdef double al, at, ar, ab, aa, bl, bt, br, bb, iw, ih, inter
    with nogil:
        for i in range(n):
            al = A[i, 0]
            at = A[i, 1]
            ar = al + A[i, 2]
            ab = at + A[i, 3]
            aa = (ar - al) * (ab - at)
            for j in range(m):
                bl = B[j, 0]
                bt = B[j, 1]
                br = bl + B[j, 2]
                bb = bt + B[j, 3]
                iw = _fmin(ar, br) - _fmax(al, bl)
                ih = _fmin(ab, bb) - _fmax(at, bt)
                if iw > 0 and ih > 0:
                    inter = iw * ih
                else:
                    inter = 0.0
                O[i, j] = inter / (aa + (br - bl) * (bb - bt) - inter)
    return out


def giou_matrix(a, b):
    cdef double[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    cdef double[:, ::1] B = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0], i, j
    out = np.zeros((n, m))
    cdef double[:, ::1] O = out
    cdef double al, at, ar, ab, aa, bl, bt, br, bb, iw, ih, inter, union, enc
    with nogil:
        for i in range(n):
            al = A[i, 0]
            at = A[i, 1]
            ar = al + A[i, 2]
            ab = at + A[i, 3]
            aa = (ar - al) * (ab - at)
            for j in range(m):
                bl = B[j, 0]
                bt = B[j, 1]
                br = bl + B[j, 2]
                bb = bt + B[j, 3]
                iw = _fmin(ar, br) - _fmax(al, bl)
                ih = _fmin(ab, bb) - _fmax(at, bt)
                if iw > 0 and ih > 0:
                    inter = iw * ih
                else:
                    inter = 0.0
                union = aa + (br - bl) * (bb - bt) - inter
                enc = (_fmax(ar, br) - _fmin(al, bl)) * (_fmax(ab, bb) - _fmin(at, bt))
                O[i, j] = inter / union - (enc - union) / enc
    return out


def solve_lsa(cost):
    """Minimum-cost assignment; see ``_pykernels.solve_lsa``."""
    C = np.asarray(cost, dtype=np.float64)
    cdef Py_ssize_t nr = C.shape[0], nc = C.shape[1]
    if nr == 0 or nc == 0:
        return [], []
    cdef Py_ssize_t n = nr if nr > nc else nc
    pad = np.zeros((n, n))
    pad[:nr, :nc] = C
    cdef double[:, ::1] a = pad
    cdef double[::1] u = np.zeros(n + 1)
    cdef double[::1] v = np.zeros(n + 1)
    cdef double[::1] minv = np.zeros(n + 1)
    cdef Py_ssize_t[::1] p = np.zeros(n + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] way = np.zeros(n + 1, dtype=np.intp)
    cdef unsigned char[::1] used = np.zeros(n + 1, dtype=np.uint8)
    cdef Py_ssize_t[::1] col_of = np.zeros(n, dtype=np.intp)
    cdef Py_ssize_t[::1] row_of = np.zeros(n, dtype=np.intp)
    cdef Py_ssize_t[::1] next_col = np.zeros(n, dtype=np.intp)
    cdef Py_ssize_t[::1] queue = np.zeros(n, dtype=np.intp)
    cdef unsigned char[::1] reach = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] seen = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[:, ::1] tight = np.zeros((n, n), dtype=np.uint8)
    cdef Py_ssize_t i, j, i0, j0, j1, r, c, c0, cj, head, tail, nxt
    cdef double delta, cur, ui0, scale, tol

    with nogil:
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            for j in range(n + 1):
                minv[j] = INFINITY
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = p[j0]
                ui0 = u[i0]
                delta = INFINITY
                j1 = 0
                for j in range(1, n + 1):
                    if not used[j]:
                        cur = a[i0 - 1, j - 1] - ui0 - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(n + 1):
                    if used[j]:
                        u[p[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
                j0 = j1
                if p[j0] == 0:
                    break
            while True:
                j1 = way[j0]
                p[j0] = p[j1]
                j0 = j1
                if j0 == 0:
                    break
        for j in range(1, n + 1):
            col_of[p[j] - 1] = j - 1

        # lexicographic tie-break over the tight-edge graph
        scale = 1.0
        for i in range(n):
            for j in range(n):
                if fabs(a[i, j]) > scale:
                    scale = fabs(a[i, j])
        tol = _TIGHT_RTOL * scale
        for i in range(n):
            for j in range(n):
                tight[i, j] = (a[i, j] - u[i + 1] - v[j + 1]) <= tol
        for i in range(n):
            row_of[col_of[i]] = i
        for r in range(n):
            c0 = col_of[r]
            for j in range(n):
                reach[j] = 0
                seen[j] = 0
                next_col[j] = -1
            reach[c0] = 1
            queue[0] = c0
            head = 0
            tail = 1
            while head < tail:
                j = queue[head]
                head += 1
                for i in range(r + 1, n):
                    if not seen[i] and col_of[i] != j and tight[i, j]:
                        seen[i] = 1
                        next_col[i] = j
                        cj = col_of[i]
                        if not reach[cj]:
                            reach[cj] = 1
                            queue[tail] = cj
                            tail += 1
            c = 0
            while not (tight[r, c] and reach[c]):
                c += 1
            if c == c0:
                continue
            i = row_of[c]
            col_of[r] = c
            row_of[c] = r
            while True:
                j = next_col[i]
                nxt = row_of[j]
                col_of[i] = j
                row_of[j] = i
                if j == c0:
                    break
                i = nxt

    rows, cols = [], []
    for i in range(nr):
        if col_of[i] < nc:
            rows.append(i)
            cols.append(col_of[i])
    return rows, cols
