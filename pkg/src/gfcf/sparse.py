"""Interaction storage, symmetric degree normalization and the item-graph
operator ``x -> x R~^T R~`` applied without forming the item-item matrix.

Zero-degree users or items get a scale of 0 instead of ``0 ** -0.5``, so a
user absent from training simply has an all-zero normalized row.
"""

import hashlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import DenseCapError, DimensionError, InputError, NumericError, ValidationError

DEFAULT_DENSE_CAP = 4096


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _inv_sqrt(deg):
    out = np.zeros(deg.shape, dtype=np.float64)
    pos = deg > 0
    out[pos] = 1.0 / np.sqrt(deg[pos].astype(np.float64))
    return out


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Binary user-item matrix in CSR form with a cached transpose."""

    n_users: int
    n_items: int
    indptr: np.ndarray
    indices: np.ndarray
    t_indptr: np.ndarray
    t_indices: np.ndarray
    user_degrees: np.ndarray
    item_degrees: np.ndarray

    @property
    def nnz(self):
        return int(self.indices.shape[0])

    @property
    def shape(self):
        return (self.n_users, self.n_items)

    def row(self, user):
        return self.indices[self.indptr[user] : self.indptr[user + 1]]

    def pairs(self):
        users = np.repeat(np.arange(self.n_users, dtype=np.int64), self.user_degrees)
        return np.column_stack([users, self.indices])

    def to_scipy(self):
        data = np.ones(self.nnz)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=self.shape)

    def dense(self):
        return self.to_scipy().toarray()

    def row_block(self, users):
        """Dense ``(len(users), n_items)`` block of raw binary rows."""
        users = np.asarray(users, dtype=np.int64)
        out = np.zeros((users.size, self.n_items))
        for r, u in enumerate(users):
            out[r, self.row(u)] = 1.0
        return out

    def seen_csr(self, users):
        """CSR ``(indptr, indices)`` of the training rows for ``users``."""
        users = np.asarray(users, dtype=np.int64)
        counts = self.user_degrees[users]
        indptr = np.zeros(users.size + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        if users.size == 0:
            return indptr, np.zeros(0, dtype=np.int64)
        indices = np.concatenate([self.row(u) for u in users])
        return indptr, indices.astype(np.int64, copy=False)


def build_interactions(pairs, n_users, n_items):
    """Collapse ``(user, item)`` pairs into an :class:`InteractionMatrix`.

    Duplicates are merged (set semantics). Any id outside
    ``[0, n_users) x [0, n_items)`` raises :class:`InputError` naming the pair.
    """
    n_users = int(n_users)
    n_items = int(n_items)
    if n_users < 0 or n_items < 0:
        raise ValidationError("matrix dimensions must be non-negative")
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2) if len(pairs) else np.zeros((0, 2), np.int64)
    users, items = arr[:, 0], arr[:, 1]
    bad = (users < 0) | (users >= n_users) | (items < 0) | (items >= n_items)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise InputError(
            f"pair ({int(users[k])}, {int(items[k])}) out of range for "
            f"{n_users} users x {n_items} items"
        )
    keys = np.unique(users * np.int64(max(n_items, 1)) + items)
    users = keys // max(n_items, 1)
    items = keys % max(n_items, 1)

    user_deg = np.bincount(users, minlength=n_users).astype(np.int64)
    item_deg = np.bincount(items, minlength=n_items).astype(np.int64)
    indptr = np.zeros(n_users + 1, dtype=np.int64)
    np.cumsum(user_deg, out=indptr[1:])

    order = np.lexsort((users, items))
    t_indptr = np.zeros(n_items + 1, dtype=np.int64)
    np.cumsum(item_deg, out=t_indptr[1:])

    return InteractionMatrix(
        n_users=n_users,
        n_items=n_items,
        indptr=_frozen(indptr, np.int64),
        indices=_frozen(items, np.int64),
        t_indptr=_frozen(t_indptr, np.int64),
        t_indices=_frozen(users[order], np.int64),
        user_degrees=_frozen(user_deg, np.int64),
        item_degrees=_frozen(item_deg, np.int64),
    )


@dataclass(frozen=True, eq=False)
class NormalizedMatrix:
    """``R~ = D_U^{-1/2} R D_I^{-1/2}`` sharing the sparsity of ``base``.

    ``data`` is aligned with ``base.indices`` and ``t_data`` with
    ``base.t_indices`` so both ``R~ X`` and ``R~^T Y`` are row gathers.
    """

    base: InteractionMatrix
    row_scale: np.ndarray
    col_scale: np.ndarray
    data: np.ndarray
    t_data: np.ndarray

    @property
    def shape(self):
        return self.base.shape

    @property
    def n_users(self):
        return self.base.n_users

    @property
    def n_items(self):
        return self.base.n_items

    def matmat(self, X):
        """``R~ @ X`` for an ``(n_items, b)`` block."""
        b = self.base
        return _kernels.csr_gather(b.indptr, b.indices, self.data, X, b.n_items)

    def rmatmat(self, Y):
        """``R~^T @ Y`` for an ``(n_users, b)`` block."""
        b = self.base
        return _kernels.csr_gather(b.t_indptr, b.t_indices, self.t_data, Y, b.n_users)

    def row_block(self, users):
        """Dense rows of ``R~`` for ``users``."""
        users = np.asarray(users, dtype=np.int64)
        out = np.zeros((users.size, self.n_items))
        b = self.base
        for r, u in enumerate(users):
            lo, hi = b.indptr[u], b.indptr[u + 1]
            out[r, b.indices[lo:hi]] = self.data[lo:hi]
        return out

    def to_scipy(self):
        return sp.csr_matrix((self.data, self.base.indices, self.base.indptr), shape=self.shape)

    def dense(self):
        return self.to_scipy().toarray()


def normalize(m):
    row_scale = _inv_sqrt(m.user_degrees)
    col_scale = _inv_sqrt(m.item_degrees)
    users = np.repeat(np.arange(m.n_users, dtype=np.int64), m.user_degrees)
    data = row_scale[users] * col_scale[m.indices]
    items = np.repeat(np.arange(m.n_items, dtype=np.int64), m.item_degrees)
    t_data = col_scale[items] * row_scale[m.t_indices]
    return NormalizedMatrix(
        base=m,
        row_scale=_frozen(row_scale, np.float64),
        col_scale=_frozen(col_scale, np.float64),
        data=_frozen(data, np.float64),
        t_data=_frozen(t_data, np.float64),
    )


@dataclass(frozen=True, eq=False)
class ItemGraphOperator:
    """The item-item operator ``P~ = R~^T R~``, applied as two sparse passes."""

    source: NormalizedMatrix
    dense_cap: int = DEFAULT_DENSE_CAP

    @property
    def n_items(self):
        return self.source.n_items

    def matmat(self, V):
        """``P~ @ V`` for an ``(n_items, b)`` block."""
        return self.source.rmatmat(self.source.matmat(V))

    @cached_property
    def dense_cache(self):
        if self.n_items > self.dense_cap:
            raise DenseCapError(self.n_items, self.dense_cap)
        Rt = self.source.to_scipy()
        P = np.asarray((Rt.T @ Rt).toarray())
        P = 0.5 * (P + P.T)
        P.setflags(write=False)
        return P


def item_graph(normalized, dense_cap=DEFAULT_DENSE_CAP):
    return ItemGraphOperator(normalized, int(dense_cap))


def _as_signal_block(x, n_items):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != n_items:
        raise DimensionError(f"signal length {X.shape[-1]} does not match {n_items} items")
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite values in input signal")
    return X, single


def apply_gram(op, x, power=1):
    """``x P~^power`` via ``power`` sequential ``(x R~^T) R~`` passes.

    ``x`` is one signal of length ``n_items`` or a ``(b, n_items)`` stack of
    row signals.
    """
    if int(power) != power or power < 1:
        raise ValidationError(f"power must be an integer >= 1, got {power}")
    X, single = _as_signal_block(x, op.n_items)
    V = np.ascontiguousarray(X.T)
    for _ in range(int(power)):
        V = op.matmat(V)
    out = V.T
    return out[0].copy() if single else np.ascontiguousarray(out)


def densify_item_graph(op):
    """Dense symmetric ``P~``; raises :class:`DenseCapError` above the cap."""
    return np.array(op.dense_cache)


def fingerprint(m):
    """64-bit hex digest of the shape and the sorted entry list."""
    h = hashlib.blake2b(digest_size=8)
    h.update(np.asarray([m.n_users, m.n_items], dtype="<i8").tobytes())
    h.update(np.asarray(m.indptr, dtype="<i8").tobytes())
    h.update(np.asarray(m.indices, dtype="<i8").tobytes())
    return h.hexdigest()
