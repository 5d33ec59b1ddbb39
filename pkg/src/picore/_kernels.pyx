# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled kernels; contract and witness order match ``_kernels_py``."""
import numpy as np
cimport numpy as cnp


def compose(cnp.uint8_t[:, ::1] a, cnp.uint8_t[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], m = a.shape[1], p = b.shape[1]
    cdef Py_ssize_t i, j, k
    out = np.zeros((n, p), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            if a[i, j]:
                for k in range(p):
                    o[i, k] |= b[j, k]
    return out


cdef inline bint _collect(Py_ssize_t g, Py_ssize_t r, cnp.uint8_t[:, ::1] e,
                          cnp.int64_t[::1] ob, cnp.int64_t[:, ::1] rs,
                          cnp.int64_t[:, ::1] cs, cnp.int64_t[:, ::1] os,
                          cnp.int64_t[::1] cnt):
    cdef Py_ssize_t c, n = e.shape[1]
    cdef cnp.int64_t o
    cdef bint changed = False
    for c in range(n):
        if cnt[g] == 2:
            break
        if e[r, c]:
            o = ob[c]
            if cnt[g] == 0 or (cnt[g] == 1 and os[g, 0] != o):
                rs[g, cnt[g]] = r
                cs[g, cnt[g]] = c
                os[g, cnt[g]] = o
                cnt[g] += 1
                changed = True
    return changed


def grouped_mismatch(cnp.uint8_t[:, ::1] e1, cnp.uint8_t[:, ::1] e2,
                     cnp.int64_t[::1] ob, cnp.int64_t[::1] group):
    cdef Py_ssize_t n = e1.shape[0], r, x, y
    cdef cnp.int64_t g, ng = 0
    for r in range(n):
        if group[r] + 1 > ng:
            ng = group[r] + 1
    if ng == 0:
        return None
    r1 = np.zeros((ng, 2), dtype=np.int64); c1 = np.zeros((ng, 2), dtype=np.int64)
    o1 = np.zeros((ng, 2), dtype=np.int64); n1 = np.zeros(ng, dtype=np.int64)
    r2 = np.zeros((ng, 2), dtype=np.int64); c2 = np.zeros((ng, 2), dtype=np.int64)
    o2 = np.zeros((ng, 2), dtype=np.int64); n2 = np.zeros(ng, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] R1 = r1, C1 = c1, O1 = o1, R2 = r2, C2 = c2, O2 = o2
    cdef cnp.int64_t[::1] N1 = n1, N2 = n2
    cdef bint changed
    for r in range(n):
        g = group[r]
        if g < 0:
            continue
        changed = _collect(g, r, e1, ob, R1, C1, O1, N1)
        changed = _collect(g, r, e2, ob, R2, C2, O2, N2) or changed
        if changed:
            for x in range(N1[g]):
                for y in range(N2[g]):
                    if O1[g, x] != O2[g, y]:
                        return (int(R1[g, x]), int(C1[g, x]), int(R2[g, y]), int(C2[g, y]))
    return None
