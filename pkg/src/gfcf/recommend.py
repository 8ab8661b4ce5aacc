"""Closed-form recommenders built on the item graph, plus top-N extraction.

Every model scores a block of users at once; the ``score_*`` functions are
single-user views over :meth:`RecommenderModel.score_users`.
"""

import enum
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import DimensionError, InputError, ParseError, ValidationError
from .sparse import DEFAULT_DENSE_CAP, densify_item_graph, fingerprint, item_graph, normalize
from .spectral import GpmConfig, SpectralBasis, generalized_power_method, load_basis, save_basis

MASK_VALUE = np.finfo(np.float64).min
DEFAULT_ALPHA = 0.3
DEFAULT_BETA = (1.0, 1.0)
DEFAULT_MU = 1.0
DEFAULT_DIM = 256
DEFAULT_MEMORY_BUDGET = 256 * 2**20


class Kind(str, enum.Enum):
    GFCF = "gfcf"
    LGCN_IDE = "lgcn-ide"
    NEIGHBORHOOD = "neighborhood"
    IDEAL_LOWPASS = "ideal-lowpass"
    AUTOENCODER = "autoencoder"


@dataclass(frozen=True, eq=False)
class RecommenderModel:
    kind: Kind
    normalized: object
    basis: SpectralBasis | None = None
    dense_B: np.ndarray | None = None
    alpha: float = DEFAULT_ALPHA
    beta: tuple = DEFAULT_BETA
    mu: float = DEFAULT_MU
    dim: int = DEFAULT_DIM
    normalized_input: bool = False
    dense_cap: int = DEFAULT_DENSE_CAP
    fit_seconds: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if not self.alpha >= 0:
            raise ValidationError(f"alpha must be >= 0, got {self.alpha}")
        if not self.mu > 0:
            raise ValidationError(f"mu must be > 0, got {self.mu}")
        if len(self.beta) < 1 or not all(np.isfinite(self.beta)):
            raise ValidationError("beta must be a non-empty finite vector")
        if self.kind in (Kind.GFCF, Kind.IDEAL_LOWPASS) and self.basis is None:
            raise ValidationError(f"{self.kind.value} requires a spectral basis")
        if self.kind is Kind.AUTOENCODER and self.dense_B is None:
            raise ValidationError("autoencoder requires its dense B matrix")
        if self.basis is not None and self.basis.n_items != self.n_items:
            raise DimensionError("basis dimension does not match the item count")

    @property
    def interactions(self):
        return self.normalized.base

    @property
    def n_users(self):
        return self.normalized.n_users

    @property
    def n_items(self):
        return self.normalized.n_items

    @property
    def K(self):
        return len(self.beta)

    def with_params(self, **kw):
        return replace(self, **kw)

    def _check_users(self, users):
        users = np.atleast_1d(np.asarray(users, dtype=np.int64))
        if users.size and (users.min() < 0 or users.max() >= self.n_users):
            bad = users[(users < 0) | (users >= self.n_users)][0]
            raise DimensionError(f"user {bad} out of range for {self.n_users} users")
        return users

    def score_users(self, users):
        """Dense ``(len(users), n_items)`` score block."""
        users = self._check_users(users)
        R = self.interactions
        op = item_graph(self.normalized, self.dense_cap)
        if self.kind is Kind.NEIGHBORHOOD:
            return _gram(op, R.row_block(users))
        if self.kind is Kind.GFCF:
            raw = R.row_block(users)
            lin_in = self.normalized.row_block(users) if self.normalized_input else raw
            out = _gram(op, lin_in)
            if self.alpha:
                out += self.alpha * _ideal_term(raw, self.basis.vectors, R.item_degrees)
            return out
        if self.kind is Kind.LGCN_IDE:
            t = self.normalized.row_block(users)
            out = self.beta[0] * t
            for b in self.beta[1:]:
                t = _gram(op, t)
                out += b * t
            return out
        if self.kind is Kind.IDEAL_LOWPASS:
            U = self.basis.vectors[:, : self.dim]
            return (self.normalized.row_block(users) @ U) @ U.T
        if self.kind is Kind.AUTOENCODER:
            return self.normalized.row_block(users) @ self.dense_B
        raise AssertionError(self.kind)


def _gram(op, X):
    V = op.matmat(np.ascontiguousarray(X.T))
    return np.ascontiguousarray(V.T)


def _ideal_term(raw, U, item_degrees):
    deg = item_degrees.astype(np.float64)
    inv_sqrt = np.zeros_like(deg)
    pos = deg > 0
    inv_sqrt[pos] = deg[pos] ** -0.5
    return ((raw * inv_sqrt) @ U) @ U.T * np.sqrt(deg)


def _single(model, kind, user):
    if model.kind is not kind:
        raise ValidationError(f"model kind is {model.kind.value}, not {kind.value}")
    return model.score_users([user])[0]


def score_gfcf(model, user):
    return _single(model, Kind.GFCF, user)


def score_lgcn_ide(model, user):
    return _single(model, Kind.LGCN_IDE, user)


def score_neighborhood(model, user):
    return _single(model, Kind.NEIGHBORHOOD, user)


def score_ideal_lowpass(model, user):
    return _single(model, Kind.IDEAL_LOWPASS, user)


def score_autoencoder(model, user):
    return _single(model, Kind.AUTOENCODER, user)


def fit_autoencoder(normalized, mu, dense_cap=DEFAULT_DENSE_CAP):
    """``B* = (P~ + mu I)^{-1} P~`` by a dense symmetric solve."""
    if not mu > 0:
        raise ValidationError(f"mu must be > 0, got {mu}")
    P = densify_item_graph(item_graph(normalized, dense_cap))
    A = P + mu * np.eye(P.shape[0])
    B = scipy.linalg.solve(A, P, assume_a="pos")
    return 0.5 * (B + B.T)


def fit_model(
    kind,
    interactions,
    *,
    alpha=DEFAULT_ALPHA,
    beta=DEFAULT_BETA,
    mu=DEFAULT_MU,
    dim=DEFAULT_DIM,
    normalized_input=False,
    dense_cap=DEFAULT_DENSE_CAP,
    gpm=None,
    basis=None,
):
    """Fit a model of ``kind`` on ``interactions``; wall time lands in ``fit_seconds``.

    A precomputed ``basis`` skips the power method (used by the alpha sweep).
    """
    kind = Kind(kind)
    t0 = time.perf_counter()
    normalized = normalize(interactions)
    dense_B = None
    if kind in (Kind.GFCF, Kind.IDEAL_LOWPASS) and basis is None:
        cfg = gpm or GpmConfig(k=dim)
        basis = generalized_power_method(item_graph(normalized, dense_cap), cfg)
    if kind is Kind.AUTOENCODER:
        dense_B = fit_autoencoder(normalized, mu, dense_cap)
    if basis is not None:
        dim = min(dim, basis.k)
    elapsed = time.perf_counter() - t0
    return RecommenderModel(
        kind=kind,
        normalized=normalized,
        basis=basis,
        dense_B=dense_B,
        alpha=alpha,
        beta=tuple(beta),
        mu=mu,
        dim=dim,
        normalized_input=normalized_input,
        dense_cap=dense_cap,
        fit_seconds=elapsed,
    )


# --------------------------------------------------------------------------
# top-N
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScoredSlate:
    user: int | None
    item_ids: np.ndarray
    scores: np.ndarray
    truncated: bool = False

    def __len__(self):
        return int(self.item_ids.size)


def top_n(scores, seen, n=20, user=None):
    """Best ``n`` unseen items, ties to the smaller id.

    If fewer than ``n`` items are unseen the slate is shorter and
    ``truncated`` is set.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    s = np.array(scores, dtype=np.float64).ravel()
    seen = np.unique(np.fromiter(seen, dtype=np.int64))
    s[seen] = MASK_VALUE
    ids, vals, lens = _kernels.masked_topn(s[None, :], np.array([0, seen.size]), seen, n)
    m = int(lens[0])
    return ScoredSlate(user=user, item_ids=ids[0, :m].copy(), scores=vals[0, :m].copy(), truncated=m < n)


def _block_size(n_items, budget):
    return max(1, int(budget // (8 * max(n_items, 1) * 4)))


def recommend(model, users, n=20, memory_budget=DEFAULT_MEMORY_BUDGET, seen=None):
    """Top-``n`` slates for ``users``, scored in memory-bounded blocks.

    ``seen`` is the interaction matrix whose rows are masked (defaults to
    the model's training matrix).
    """
    seen = seen if seen is not None else model.interactions
    users = np.asarray(users, dtype=np.int64)
    out = []
    step = _block_size(model.n_items, memory_budget)
    for lo in range(0, users.size, step):
        block = users[lo : lo + step]
        S = model.score_users(block)
        sp_, si = seen.seen_csr(block)
        for r in range(block.size):
            S[r, si[sp_[r] : sp_[r + 1]]] = MASK_VALUE
        ids, vals, lens = _kernels.masked_topn(S, sp_, si, n)
        for r, u in enumerate(block):
            m = int(lens[r])
            out.append(ScoredSlate(int(u), ids[r, :m].copy(), vals[r, :m].copy(), m < n))
    return out


# --------------------------------------------------------------------------
# persistence: spectral container + key=value manifest
# --------------------------------------------------------------------------


def manifest_path(path):
    return Path(str(path) + ".manifest")


def save_model(path, model, train_path=None):
    basis = model.basis if model.basis is not None else SpectralBasis(
        vectors=np.zeros((model.n_items, 0)), values=np.zeros(0)
    )
    save_basis(path, basis)
    lines = {
        "kind": model.kind.value,
        "alpha": repr(float(model.alpha)),
        "beta": ",".join(repr(b) for b in model.beta),
        "mu": repr(float(model.mu)),
        "dim": str(int(model.dim)),
        "normalized_input": str(bool(model.normalized_input)).lower(),
        "dense_cap": str(int(model.dense_cap)),
        "n_users": str(model.n_users),
        "n_items": str(model.n_items),
        "fingerprint": fingerprint(model.interactions),
    }
    if train_path is not None:
        lines["train"] = str(train_path)
    text = "".join(f"{k}={v}\n" for k, v in lines.items())
    manifest_path(path).write_text(text)


def read_manifest(path):
    p = manifest_path(path)
    try:
        text = p.read_text()
    except FileNotFoundError:
        raise InputError(f"{p}: no such file") from None
    out = {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ParseError("expected key=value", path=p, line=no)
        out[key.strip()] = val.strip()
    return out


def load_model(path, interactions):
    """Rebuild a saved model against its training matrix.

    The manifest's fingerprint must match ``interactions``; the autoencoder
    matrix is recomputed rather than stored.
    """
    meta = read_manifest(path)
    if fingerprint(interactions) != meta.get("fingerprint"):
        raise DimensionError(
            f"training data fingerprint {fingerprint(interactions)} does not match "
            f"the model's {meta.get('fingerprint')}"
        )
    basis = load_basis(path)
    kind = Kind(meta["kind"])
    return fit_model(
        kind,
        interactions,
        alpha=float(meta["alpha"]),
        beta=tuple(float(b) for b in meta["beta"].split(",")),
        mu=float(meta["mu"]),
        dim=int(meta["dim"]),
        normalized_input=meta.get("normalized_input") == "true",
        dense_cap=int(meta.get("dense_cap", DEFAULT_DENSE_CAP)),
        basis=basis if basis.k else None,
    )
