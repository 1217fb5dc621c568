# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: hysteretic path counting and vertex classes."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, int32_t, uint8_t, uint64_t

cnp.import_array()


def path_counts(int32_t[::1] topo, int32_t[::1] offsets, int32_t[::1] targets,
                uint8_t[::1] start, uint8_t[::1] mid, uint8_t[::1] end,
                Py_ssize_t vmin, Py_ssize_t vmax):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t t, i, v, w
    cdef int64_t nv, yv, fav, fyv, sv, fs, partial = 0
    a_arr = np.zeros(n, dtype=np.int64)
    y_arr = np.zeros(n, dtype=np.int64)
    fa_arr = np.zeros(n, dtype=np.int64)
    fy_arr = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] a = a_arr
    cdef int64_t[::1] y = y_arr
    cdef int64_t[::1] fa = fa_arr
    cdef int64_t[::1] fy = fy_arr
    for t in range(topo.shape[0]):
        v = topo[t]
        nv = a[v]
        yv = y[v]
        fav = fa[v]
        fyv = fy[v]
        sv = start[v]
        fs = sv if v == vmin else 0
        if mid[v]:
            yv += nv
            fyv += fav
            nv = 0
            fav = 0
        for i in range(offsets[v], offsets[v + 1]):
            w = targets[i]
            a[w] += sv + nv
            y[w] += yv
            fa[w] += fs + fav
            fy[w] += fyv
    for v in range(n):
        if end[v]:
            partial += y[v]
    return int(partial), int(fy[vmax] if end[vmax] else 0)


def vertex_classes(uint64_t[:, ::1] s0, uint64_t[::1] m, uint64_t[::1] j0):
    cdef Py_ssize_t n = s0.shape[0], nw = s0.shape[1], i, k
    cdef uint64_t h
    cdef uint8_t c
    out = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] o = out
    for i in range(n):
        c = 0
        for k in range(nw):
            h = s0[i, k] & m[k]
            if h & j0[k]:
                c |= 1
            if h & ~j0[k]:
                c |= 2
        o[i] = c
    return out


def batch_classes(uint64_t[:, ::1] s0, uint64_t[:, ::1] masks, uint64_t[::1] j0):
    cdef Py_ssize_t n = s0.shape[0], nw = s0.shape[1], rows = masks.shape[0]
    cdef Py_ssize_t r, i, k
    cdef uint64_t h
    cdef uint8_t c
    out = np.zeros((rows, n), dtype=np.uint8)
    cdef uint8_t[:, ::1] o = out
    for r in range(rows):
        for i in range(n):
            c = 0
            for k in range(nw):
                h = s0[i, k] & masks[r, k]
                if h & j0[k]:
                    c |= 1
                if h & ~j0[k]:
                    c |= 2
            o[r, i] = c
    return out
