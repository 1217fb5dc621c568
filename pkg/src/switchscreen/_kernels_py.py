"""Pure-Python versions of the hot kernels; used when the extension is not built."""

import numpy as np


def path_counts(topo, offsets, targets, start, mid, end, vmin, vmax):
    """Count hysteretic monotone paths in a DAG by dynamic programming.

    A path counts when its first vertex passes ``start``, its last passes
    ``end`` and some strictly interior vertex passes ``mid``; it then has at
    least three vertices.  Returns ``(partial, full)`` where ``full`` only
    counts paths from ``vmin`` to ``vmax``.
    """
    topo = topo.tolist()
    off = offsets.tolist()
    tgt = targets.tolist()
    start = start.tolist()
    mid = mid.tolist()
    end = end.tolist()
    n = len(off) - 1
    # no-mid / with-mid counters for all start vertices and for vmin only
    s1 = [1 if start[v] else 0 for v in range(n)]
    a = [0] * n
    y = [0] * n
    fa = [0] * n
    fy = [0] * n
    f1 = 1 if start[vmin] else 0
    for v in topo:
        nv, yv, fav, fyv = a[v], y[v], fa[v], fy[v]
        sv = s1[v]
        fs = f1 if v == vmin else 0
        if mid[v]:
            yv += nv
            fyv += fav
            nv = 0
            fav = 0
        for i in range(off[v], off[v + 1]):
            w = tgt[i]
            a[w] += sv + nv
            y[w] += yv
            fa[w] += fs + fav
            fy[w] += fyv
    partial = sum(y[v] for v in range(n) if end[v])
    full = fy[vmax] if end[vmax] else 0
    return partial, full


def vertex_classes(s0, m, j0):
    """Bit 0: a sink with output coordinate 0; bit 1: a sink above it.

    ``s0`` is ``(n_logic, words)`` uint64, ``m`` and ``j0`` are ``(words,)``.
    """
    hit = s0 & m
    low = np.any(hit & j0, axis=1)
    high = np.any(hit & ~j0, axis=1)
    return (low.astype(np.uint8) | (high.astype(np.uint8) << 1))


def batch_classes(s0, masks, j0):
    """``vertex_classes`` for every row of ``masks``: returns ``(rows, n_logic)`` uint8."""
    hit = s0[None, :, :] & masks[:, None, :]
    low = np.any(hit & j0, axis=2)
    high = np.any(hit & ~j0, axis=2)
    return low.astype(np.uint8) | (high.astype(np.uint8) << 1)
