"""Top-k spectral basis of the item graph.

:func:`generalized_power_method` alternates a spatial convolution step
``E <- P~ E`` with re-orthonormalization onto the Stiefel manifold. It never
forms ``P~``. :func:`dense_spectral_oracle` is the full ``eigh`` used to
validate it on small instances.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DenseCapError, InputError, ParseError, ValidationError
from .sparse import DEFAULT_DENSE_CAP

MAGIC = b"GFCF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHQQ")

# eigenvalues below this (relative to 1) count as numerically zero rank
_RANK_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Orthonormal columns ``vectors`` with eigenvalues ``values`` (descending).

    ``values`` are eigenvalues of ``P~`` (squared singular values of ``R~``)
    when produced by the power method. The dense oracle reuses this type for
    arbitrary symmetric matrices.
    """

    vectors: np.ndarray
    values: np.ndarray
    iterations_used: int = 0
    residual: float = float("nan")
    converged: bool = True
    rank_deficient: bool = False
    trace_history: tuple = field(default=(), repr=False)

    @property
    def k(self):
        return int(self.values.shape[0])

    @property
    def n_items(self):
        return int(self.vectors.shape[0])

    def truncate(self, k):
        if not 1 <= k <= self.k:
            raise ValidationError(f"cannot truncate a rank-{self.k} basis to {k}")
        return SpectralBasis(
            vectors=np.ascontiguousarray(self.vectors[:, :k]),
            values=self.values[:k].copy(),
            iterations_used=self.iterations_used,
            residual=self.residual,
            converged=self.converged,
            rank_deficient=self.rank_deficient,
        )


@dataclass(frozen=True)
class GpmConfig:
    k: int = 256
    max_iterations: int = 1000
    tolerance: float = 1e-10
    seed: int = 0
    # extra trailing columns carried through the iteration; None -> k // 2 + 8
    oversample: int | None = None
    patience: int = 3

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if not self.tolerance > 0:
            raise ValidationError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.oversample is not None and self.oversample < 0:
            raise ValidationError("oversample must be >= 0")


def _orthonormalize(E):
    Q, _ = np.linalg.qr(E)
    return Q


def _fix_signs(V):
    # largest-magnitude entry of each column made positive
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def generalized_power_method(op, cfg, start=None):
    """Top-``cfg.k`` eigenpairs of ``P~`` by block power iteration.

    Each step multiplies the current orthonormal block by ``P~`` (two sparse
    passes) and re-orthonormalizes it with a thin QR, which spans the same
    subspace as the polar factor ``E (E^T E)^{-1/2}``. A Rayleigh-Ritz
    rotation inside the block separates individual eigenvectors.

    Stops once the largest Ritz-value change stays below ``cfg.tolerance``
    for ``cfg.patience`` consecutive steps, or as soon as every eigen-residual
    ``||P~ v - lam v||`` is below the tolerance. Hitting ``max_iterations``
    returns the last iterate with ``converged=False``.
    """
    n = op.n_items
    src = op.source
    rank_bound = min(n, src.n_users, src.base.nnz)
    k = min(cfg.k, n)
    flagged = k < cfg.k
    if k == 0 or rank_bound == 0:
        return SpectralBasis(
            vectors=np.zeros((n, 0)),
            values=np.zeros(0),
            rank_deficient=True,
        )
    p = cfg.oversample if cfg.oversample is not None else k // 2 + 8
    block = min(n, k + p)

    rng = np.random.default_rng(cfg.seed)
    E = rng.standard_normal((n, block))
    if start is not None:
        start = np.asarray(start, dtype=np.float64).reshape(n, -1)
        if start.shape[1] > block:
            raise ValidationError("start block has more columns than the iterate")
        E[:, : start.shape[1]] = start
    Q = _orthonormalize(E)

    prev = None
    stable = 0
    traces = []
    converged = False
    theta = X = None
    resid = np.inf
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        W = op.matmat(Q)
        H = Q.T @ W
        H = 0.5 * (H + H.T)
        theta, S = np.linalg.eigh(H)
        theta, S = theta[::-1], S[:, ::-1]
        traces.append(float(theta.sum()))
        X = Q @ S
        PX = W @ S
        resid = float(np.max(np.linalg.norm(PX[:, :k] - X[:, :k] * theta[:k], axis=0)))
        rq = theta[:k]
        if prev is not None and np.max(np.abs(rq - prev)) < cfg.tolerance:
            stable += 1
        else:
            stable = 0
        prev = rq
        if resid < cfg.tolerance or stable >= cfg.patience:
            converged = True
            break
        Q = _orthonormalize(PX)

    values = np.clip(theta[:k], 0.0, None)
    vectors = _fix_signs(X[:, :k])
    keep = int(np.count_nonzero(values > _RANK_RTOL * max(1.0, values[0])))
    keep = min(keep, rank_bound)
    if keep < k:
        flagged = True
        values, vectors = values[:keep], vectors[:, :keep]
    return SpectralBasis(
        vectors=np.ascontiguousarray(vectors),
        values=values.copy(),
        iterations_used=it,
        residual=resid,
        converged=converged,
        rank_deficient=flagged,
        trace_history=tuple(traces),
    )


def dense_spectral_oracle(A, dense_cap=DEFAULT_DENSE_CAP, sym_tol=1e-10):
    """Full eigendecomposition of a symmetric matrix, values descending."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] > dense_cap:
        raise DenseCapError(A.shape[0], dense_cap)
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A - A.T)) > sym_tol * scale:
        raise ValidationError("matrix is not symmetric")
    w, U = np.linalg.eigh(0.5 * (A + A.T))
    w, U = w[::-1].copy(), np.ascontiguousarray(U[:, ::-1])
    recon = float(np.linalg.norm(A - (U * w) @ U.T)) if A.size else 0.0
    return SpectralBasis(vectors=U, values=w, residual=recon)


# --------------------------------------------------------------------------
# binary container
# --------------------------------------------------------------------------


def basis_to_bytes(basis):
    n, k = basis.vectors.shape
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, n, k)
    vals = np.asarray(basis.values, dtype="<f8").tobytes()
    vecs = np.asarray(basis.vectors, dtype="<f8").tobytes(order="F")
    return head + vals + vecs


def basis_from_bytes(buf):
    if len(buf) < _HEADER.size:
        raise ParseError("truncated spectral basis header")
    magic, version, n, k = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}; not a spectral basis file")
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported spectral basis version {version}")
    expected = _HEADER.size + 8 * (k + n * k)
    if len(buf) != expected:
        raise ParseError(f"spectral basis body is {len(buf)} bytes, expected {expected}")
    off = _HEADER.size
    values = np.frombuffer(buf, dtype="<f8", count=k, offset=off).astype(np.float64)
    off += 8 * k
    flat = np.frombuffer(buf, dtype="<f8", count=n * k, offset=off)
    vectors = np.ascontiguousarray(flat.reshape((n, k), order="F"), dtype=np.float64)
    return SpectralBasis(vectors=vectors, values=values)


def save_basis(path, basis):
    Path(path).write_bytes(basis_to_bytes(basis))


def load_basis(path):
    try:
        buf = Path(path).read_bytes()
    except FileNotFoundError as exc:
        raise InputError(f"{path}: no such file") from exc
    try:
        return basis_from_bytes(buf)
    except ParseError as exc:
        raise ParseError(str(exc), path=path) from None
