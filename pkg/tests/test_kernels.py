import numpy as np
import pytest
from hypothesis import given, strategies as st

from switchscreen import _kernels_py as pure
from switchscreen import kernels

try:
    from switchscreen import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

BACKENDS = [pure] + ([compiled] if compiled is not None else [])


@st.composite
def dags(draw):
    n = draw(st.integers(2, 20))
    edges = draw(st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n))
    edges = sorted((a, b) for a, b in edges if a < b)
    bits = st.lists(st.booleans(), min_size=n, max_size=n)
    start, mid, end = draw(bits), draw(bits), draw(bits)
    vmin = draw(st.integers(0, n - 1))
    vmax = draw(st.integers(0, n - 1))
    return n, edges, start, mid, end, vmin, vmax


def _csr(n, edges):
    off = np.zeros(n + 1, dtype=np.int32)
    for a, _ in edges:
        off[a + 1] += 1
    off = np.cumsum(off).astype(np.int32)
    tgt = np.array([b for _, b in edges], dtype=np.int32)
    return off, tgt


def _dfs_counts(n, edges, start, mid, end, vmin, vmax):
    succ = {v: [b for a, b in edges if a == v] for v in range(n)}
    partial = full = 0
    stack = [[v] for v in range(n)]
    while stack:
        p = stack.pop()
        if len(p) >= 3 and start[p[0]] and end[p[-1]] and any(mid[v] for v in p[1:-1]):
            partial += 1
            if p[0] == vmin and p[-1] == vmax:
                full += 1
        stack.extend(p + [w] for w in succ[p[-1]])
    return partial, full


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda m: m.__name__)
@given(dags())
def test_path_counts_match_dfs(backend, dag):
    n, edges, start, mid, end, vmin, vmax = dag
    off, tgt = _csr(n, edges)
    u8 = lambda xs: np.array(xs, dtype=np.uint8)
    got = backend.path_counts(np.arange(n, dtype=np.int32), off, tgt,
                              u8(start), u8(mid), u8(end), vmin, vmax)
    assert tuple(got) == _dfs_counts(n, edges, start, mid, end, vmin, vmax)


@st.composite
def masks(draw):
    rows = draw(st.integers(1, 6))
    words = draw(st.integers(1, 3))
    n_masks = draw(st.integers(1, 5))
    w64 = st.integers(0, 2**64 - 1)
    arr = lambda r, c: np.array(draw(st.lists(w64, min_size=r * c, max_size=r * c)),
                                dtype=np.uint64).reshape(r, c)
    return arr(rows, words), arr(n_masks, words), arr(1, words)[0]


@pytest.mark.skipif(compiled is None, reason="extension not built")
@given(masks())
def test_backends_agree_on_classes(data):
    s0, m, j0 = data
    for row in m:
        row = np.ascontiguousarray(row)
        assert np.array_equal(pure.vertex_classes(s0, row, j0), compiled.vertex_classes(s0, row, j0))
    assert np.array_equal(pure.batch_classes(s0, m, j0), compiled.batch_classes(s0, m, j0))


@given(masks())
def test_vertex_classes_bits(data):
    s0, m, j0 = data
    got = pure.vertex_classes(s0, np.ascontiguousarray(m[0]), j0)
    for r in range(s0.shape[0]):
        hit = [int(a) & int(b) for a, b in zip(s0[r], m[0])]
        low = any(h & int(j) for h, j in zip(hit, j0))
        high = any(h & ~int(j) & (2**64 - 1) for h, j in zip(hit, j0))
        assert got[r] == low | (high << 1)


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")
    if compiled is not None:
        assert kernels.BACKEND == "cython" or kernels.os.environ.get("SWITCHSCREEN_PURE")
