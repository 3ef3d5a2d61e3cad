"""Hot numeric kernels with two interchangeable backends.

The numba-compiled path is used when numba imports cleanly; setting the
environment variable ``VECANON_NO_NUMBA`` to 1/true/yes forces the pure-numpy
fallback. Both paths are exported under ``*_numpy`` / ``*_numba`` names so
``benchmarks/bench_kernels.py`` can compare them in one process; the unsuffixed
names are the selected backend.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("VECANON_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in {"1", "true", "yes", "on"}

try:
    if NUMBA_DISABLED:
        raise ImportError("numba disabled via VECANON_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def _as_c_f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


# ---------------------------------------------------------------------------
# pure-numpy backend
# ---------------------------------------------------------------------------

def cosine_distances_numpy(query: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """1 - cosine similarity between ``query`` (d,) and every row of ``matrix`` (n, d)."""
    q = _as_c_f64(query)
    m = _as_c_f64(matrix)
    qn = np.sqrt(q @ q)
    rn = np.sqrt(np.einsum("ij,ij->i", m, m))
    return 1.0 - (m @ q) / (rn * qn)


def rowwise_cosine_numpy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cosine similarity of row i of ``a`` against row i of ``b``; both (m, d)."""
    a = _as_c_f64(a)
    b = _as_c_f64(b)
    num = np.einsum("ij,ij->i", a, b)
    na = np.sqrt(np.einsum("ij,ij->i", a, a))
    nb = np.sqrt(np.einsum("ij,ij->i", b, b))
    return num / (na * nb)


def far_frr_counts_numpy(genuine_sorted: np.ndarray, impostor_sorted: np.ndarray,
                         thresholds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per threshold t: count of impostor scores >= t and of genuine scores < t.

    Score arrays must be sorted ascending; thresholds ascending.
    """
    g = _as_c_f64(genuine_sorted)
    i = _as_c_f64(impostor_sorted)
    t = _as_c_f64(thresholds)
    imp_ge = i.size - np.searchsorted(i, t, side="left")
    gen_lt = np.searchsorted(g, t, side="left")
    return imp_ge.astype(np.int64), gen_lt.astype(np.int64)


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _cosine_distances_jit(q, m):
        n, d = m.shape
        out = np.empty(n, dtype=np.float64)
        qn = 0.0
        for j in range(d):
            qn += q[j] * q[j]
        qn = np.sqrt(qn)
        for r in range(n):
            dot = 0.0
            rn = 0.0
            for j in range(d):
                dot += m[r, j] * q[j]
                rn += m[r, j] * m[r, j]
            out[r] = 1.0 - dot / (np.sqrt(rn) * qn)
        return out

    @njit(cache=True)
    def _rowwise_cosine_jit(a, b):
        n, d = a.shape
        out = np.empty(n, dtype=np.float64)
        for r in range(n):
            dot = 0.0
            na = 0.0
            nb = 0.0
            for j in range(d):
                dot += a[r, j] * b[r, j]
                na += a[r, j] * a[r, j]
                nb += b[r, j] * b[r, j]
            out[r] = dot / (np.sqrt(na) * np.sqrt(nb))
        return out

    @njit(cache=True)
    def _far_frr_counts_jit(g, i, t):
        imp_ge = np.empty(t.size, dtype=np.int64)
        gen_lt = np.empty(t.size, dtype=np.int64)
        gp = 0
        ip = 0
        for k in range(t.size):
            while ip < i.size and i[ip] < t[k]:
                ip += 1
            while gp < g.size and g[gp] < t[k]:
                gp += 1
            imp_ge[k] = i.size - ip
            gen_lt[k] = gp
        return imp_ge, gen_lt

    def cosine_distances_numba(query, matrix):
        return _cosine_distances_jit(_as_c_f64(query), _as_c_f64(matrix))

    def rowwise_cosine_numba(a, b):
        return _rowwise_cosine_jit(_as_c_f64(a), _as_c_f64(b))

    def far_frr_counts_numba(genuine_sorted, impostor_sorted, thresholds):
        return _far_frr_counts_jit(_as_c_f64(genuine_sorted), _as_c_f64(impostor_sorted),
                                   _as_c_f64(thresholds))


USING_NUMBA = HAVE_NUMBA

if USING_NUMBA:
    cosine_distances = cosine_distances_numba
    rowwise_cosine = rowwise_cosine_numba
    far_frr_counts = far_frr_counts_numba
else:
    cosine_distances = cosine_distances_numpy
    rowwise_cosine = rowwise_cosine_numpy
    far_frr_counts = far_frr_counts_numpy

BACKEND = "numba" if USING_NUMBA else "numpy"
