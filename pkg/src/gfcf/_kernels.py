"""Hot inner loops: CSR row-gather products and masked top-N selection.

Two interchangeable backends live here. The numba one is compiled with
``@njit``; the numpy/scipy one is the reference path. Set
``GFCF_DISABLE_NUMBA=1`` before import to force the reference path (the
numba backend is also skipped automatically when numba is missing).

Both backends are deterministic: every output element is reduced in a
fixed order regardless of thread count.
"""

import os

import numpy as np
import scipy.sparse as sp

try:
    import numba as nb

    # the system TBB is too old for numba; try OpenMP first
    nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def _env_disabled():
    return os.environ.get("GFCF_DISABLE_NUMBA", "").strip().lower() in {
        "1",
        "true",
        "yes",
        "on",
    }


# --------------------------------------------------------------------------
# numpy / scipy reference backend
# --------------------------------------------------------------------------


def _gather_numpy(indptr, indices, data, X, n_cols):
    n_rows = indptr.shape[0] - 1
    A = sp.csr_matrix((data, indices, indptr), shape=(n_rows, n_cols))
    return np.ascontiguousarray(A @ X)


def _topn_numpy(scores, seen_indptr, seen_indices, n):
    b, m = scores.shape
    ids = np.full((b, n), -1, dtype=np.int64)
    vals = np.full((b, n), -np.inf)
    lens = np.zeros(b, dtype=np.int64)
    keep = np.ones(m, dtype=bool)
    for r in range(b):
        seen = seen_indices[seen_indptr[r] : seen_indptr[r + 1]]
        keep[seen] = False
        valid = np.flatnonzero(keep)
        keep[seen] = True
        row = scores[r, valid]
        cnt = min(n, valid.size)
        if cnt == 0:
            continue
        if cnt < valid.size:
            thr = np.partition(row, valid.size - cnt)[valid.size - cnt]
            cand = np.flatnonzero(row >= thr)
        else:
            cand = np.arange(valid.size)
        order = np.lexsort((valid[cand], -row[cand]))[:cnt]
        ids[r, :cnt] = valid[cand[order]]
        vals[r, :cnt] = row[cand[order]]
        lens[r] = cnt
    return ids, vals, lens


# --------------------------------------------------------------------------
# numba backend
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @nb.njit(parallel=True, cache=True)
    def _gather_kernel(indptr, indices, data, X, out):
        n_rows = indptr.shape[0] - 1
        b = X.shape[1]
        for r in nb.prange(n_rows):
            for p in range(indptr[r], indptr[r + 1]):
                c = indices[p]
                w = data[p]
                for j in range(b):
                    out[r, j] += w * X[c, j]

    @nb.njit(parallel=True, cache=True)
    def _topn_kernel(scores, seen_indptr, seen_indices, n, ids, vals, lens):
        b, m = scores.shape
        for r in nb.prange(b):
            mask = np.zeros(m, dtype=np.bool_)
            for p in range(seen_indptr[r], seen_indptr[r + 1]):
                mask[seen_indices[p]] = True
            cnt = 0
            for i in range(m):
                if mask[i]:
                    continue
                s = scores[r, i]
                # items arrive in ascending id, so an equal score never
                # displaces an earlier entry
                if cnt < n:
                    pos = cnt
                    cnt += 1
                elif s > vals[r, n - 1]:
                    pos = n - 1
                else:
                    continue
                while pos > 0 and vals[r, pos - 1] < s:
                    vals[r, pos] = vals[r, pos - 1]
                    ids[r, pos] = ids[r, pos - 1]
                    pos -= 1
                vals[r, pos] = s
                ids[r, pos] = i
            lens[r] = cnt

    def _gather_numba(indptr, indices, data, X, n_cols):
        out = np.zeros((indptr.shape[0] - 1, X.shape[1]))
        _gather_kernel(indptr, indices, data, X, out)
        return out

    def _topn_numba(scores, seen_indptr, seen_indices, n):
        b = scores.shape[0]
        ids = np.full((b, n), -1, dtype=np.int64)
        vals = np.full((b, n), -np.inf)
        lens = np.zeros(b, dtype=np.int64)
        _topn_kernel(scores, seen_indptr, seen_indices, n, ids, vals, lens)
        return ids, vals, lens


BACKENDS = {"numpy": (_gather_numpy, _topn_numpy)}
if HAVE_NUMBA:
    BACKENDS["numba"] = (_gather_numba, _topn_numba)

_active = "numba" if HAVE_NUMBA and not _env_disabled() else "numpy"


def active_backend():
    return _active


def set_backend(name):
    """Switch backends at runtime; used by the benchmark and backend tests."""
    global _active
    if name not in BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; have {sorted(BACKENDS)}")
    _active = name


def csr_gather(indptr, indices, data, X, n_cols, backend=None):
    """Return ``A @ X`` for the CSR matrix ``A`` (``X`` is ``n_cols x b``)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != n_cols:
        raise ValueError(f"expected a ({n_cols}, b) block, got {X.shape}")
    return BACKENDS[backend or _active][0](indptr, indices, data, X, n_cols)


def masked_topn(scores, seen_indptr, seen_indices, n, backend=None):
    """Top-``n`` per row of ``scores`` skipping each row's seen ids.

    Returns ``(ids, values, lengths)``; rows with fewer than ``n`` unseen
    items are padded with id -1. Ties go to the smaller item id.
    """
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    return BACKENDS[backend or _active][1](
        scores,
        np.ascontiguousarray(seen_indptr, dtype=np.int64),
        np.ascontiguousarray(seen_indices, dtype=np.int64),
        int(n),
    )
