"""Monte-Carlo checks of the untrained-propagation and spectrum results.

Covers: pairwise ordering of a one-layer untrained light convolution under
random unit-sphere embeddings, mutual coherence of random embeddings,
convergence of finite-width untrained scores to the closed-form polynomial
score, and the eigenvalue ranges of ``P~`` and the bipartite ``A~``.

Each trial draws from ``default_rng((seed, trial))`` so serial and sharded
runs agree.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
from scipy.stats import rankdata

from .errors import DenseCapError, DimensionError, ValidationError
from .sparse import DEFAULT_DENSE_CAP, densify_item_graph, item_graph, normalize
from .spectral import dense_spectral_oracle

THEORY_CSV_HEADER = ["experiment", "d", "seed", "coherence", "bound", "success_rate", "correlation"]
DEFAULT_SIGMA = 0.1
SPECTRUM_TOL = 1e-9


# --------------------------------------------------------------------------
# embeddings and propagation
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    rows: np.ndarray
    distribution: str
    seed: object = None

    @property
    def d(self):
        return int(self.rows.shape[1])


def sample_embeddings(n_rows, d, distribution="unit-sphere", seed=0, sigma=DEFAULT_SIGMA):
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    X = rng.standard_normal((n_rows, d))
    if distribution == "unit-sphere":
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        X /= norms
    elif distribution == "gaussian":
        X *= sigma
    else:
        raise ValidationError(f"unknown embedding distribution {distribution!r}")
    return EmbeddingMatrix(X, distribution, None if isinstance(seed, np.random.Generator) else seed)


def _rows(E):
    return E.rows if isinstance(E, EmbeddingMatrix) else np.asarray(E, dtype=np.float64)


def propagate_light(embeddings, graph, layers, combo=None):
    """``sum_k combo[k] A~^k E0`` computed by alternating ``R~`` / ``R~^T``.

    Rows of ``E0`` are users first, then items. ``combo`` defaults to the
    uniform ``1 / (layers + 1)`` weights.
    """
    E0 = _rows(embeddings)
    nu, ni = graph.n_users, graph.n_items
    if E0.ndim != 2 or E0.shape[0] != nu + ni:
        raise DimensionError(f"expected {nu + ni} embedding rows, got {E0.shape}")
    if combo is None:
        combo = np.full(layers + 1, 1.0 / (layers + 1))
    combo = np.asarray(combo, dtype=np.float64)
    if combo.size != layers + 1:
        raise ValidationError(f"combo needs {layers + 1} weights, got {combo.size}")
    U, V = np.ascontiguousarray(E0[:nu]), np.ascontiguousarray(E0[nu:])
    out_u, out_v = combo[0] * U, combo[0] * V
    for k in range(1, layers + 1):
        U, V = graph.matmat(V), graph.rmatmat(U)
        out_u += combo[k] * U
        out_v += combo[k] * V
    return np.vstack([out_u, out_v])


def dense_bipartite(graph):
    """Dense normalized bipartite adjacency ``[[0, R~], [R~^T, 0]]``."""
    nu, ni = graph.n_users, graph.n_items
    R = graph.dense()
    A = np.zeros((nu + ni, nu + ni))
    A[:nu, nu:] = R
    A[nu:, :nu] = R.T
    return A


# --------------------------------------------------------------------------
# coherence and pairwise ordering
# --------------------------------------------------------------------------


def mutual_coherence(embeddings):
    """Largest ``|<x_i, x_j>|`` over distinct rows after normalizing each row."""
    X = _rows(embeddings)
    if X.shape[0] < 2:
        return 0.0
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    X = X / norms
    G = np.abs(X @ X.T)
    np.fill_diagonal(G, 0.0)
    return float(G.max())


def degree_extremes(interactions):
    deg = np.concatenate([interactions.user_degrees, interactions.item_degrees])
    if deg.size == 0:
        return 0, 0
    return int(deg.min()), int(deg.max())


def coherence_bound(n_min, n_max):
    """Coherence threshold ``sqrt(N_min / (2 N_max^3))`` from the ordering result."""
    if n_max == 0:
        return 0.0
    return math.sqrt(n_min / (2.0 * n_max**3))


def sufficient_coherence_bound(n_min, n_max):
    """Threshold under which the ordering event provably holds.

    Bounding the own-item term by ``1 - eps`` and every other neighbour by
    ``2 eps`` gives ``eps < sqrt(N_min) / ((2 N_max - 1) sqrt(N_max))``. For
    ``N_max >= 2`` this is slightly tighter than :func:`coherence_bound`.
    """
    if n_max == 0:
        return 0.0
    return math.sqrt(n_min) / ((2 * n_max - 1) * math.sqrt(n_max))


def one_layer_scores(graph, embeddings):
    """``e_u^(1) . e_i^(0)`` for every user/item pair."""
    E0 = _rows(embeddings)
    V0 = np.ascontiguousarray(E0[graph.n_users :])
    U1 = graph.matmat(V0)
    return U1 @ V0.T


def ordering_event(graph, embeddings, block=4096):
    """True when every observed item outscores every unobserved one for every user.

    Taking each user's min over positives against the max over negatives
    covers all (user, positive, negative) triples exactly.
    """
    E0 = _rows(embeddings)
    R = graph.base
    V0 = np.ascontiguousarray(E0[graph.n_users :])
    U1 = graph.matmat(V0)
    for lo in range(0, graph.n_users, block):
        users = np.arange(lo, min(lo + block, graph.n_users))
        S = U1[users] @ V0.T
        pos = R.row_block(users).astype(bool)
        n_pos = pos.sum(axis=1)
        live = (n_pos > 0) & (n_pos < graph.n_items)
        if not live.any():
            continue
        lo_pos = np.where(pos, S, np.inf).min(axis=1)
        hi_neg = np.where(pos, -np.inf, S).max(axis=1)
        if np.any(lo_pos[live] <= hi_neg[live]):
            return False
    return True


@dataclass(frozen=True)
class TrialOutcome:
    seed: tuple
    coherence: float
    event: bool


@dataclass
class TheoryReport:
    experiment: str
    d: int
    seed: int
    coherence: float = float("nan")
    coherence_bound: float = float("nan")
    ordering_success_rate: float = float("nan")
    n_max: int = 0
    n_min: int = 0
    score_correlation: float = float("nan")
    rel_frobenius: float = float("nan")
    implication_violations: int = 0
    trials: tuple = field(default=(), repr=False)

    def csv_row(self):
        return [
            self.experiment,
            str(self.d),
            str(self.seed),
            f"{self.coherence:.9g}",
            f"{self.coherence_bound:.9g}",
            f"{self.ordering_success_rate:.9g}",
            f"{self.score_correlation:.9g}",
        ]


def verify_theorem1(graph, d, trials=20, seed=0, distribution="unit-sphere"):
    """Fraction of trials in which the all-triples ordering event holds.

    ``implication_violations`` counts trials whose coherence was below
    :func:`coherence_bound` yet the event failed.
    """
    if d < 1 or trials < 1:
        raise ValidationError("d and trials must be >= 1")
    R = graph.base
    n_min, n_max = degree_extremes(R)
    bound = coherence_bound(n_min, n_max)
    outcomes = []
    for t in range(trials):
        rng = np.random.default_rng((seed, t))
        E = sample_embeddings(graph.n_users + graph.n_items, d, distribution, rng)
        outcomes.append(TrialOutcome((seed, t), mutual_coherence(E), ordering_event(graph, E)))
    hits = sum(o.event for o in outcomes)
    return TheoryReport(
        experiment="t1",
        d=d,
        seed=seed,
        coherence=float(np.median([o.coherence for o in outcomes])),
        coherence_bound=bound,
        ordering_success_rate=hits / trials,
        n_max=n_max,
        n_min=n_min,
        implication_violations=sum(1 for o in outcomes if o.coherence < bound and not o.event),
        trials=tuple(outcomes),
    )


def coherence_experiment(n, d, seeds=100, C=4.0, seed=0):
    """Fraction of draws whose coherence is at most ``C sqrt(log n / d)``."""
    limit = C * math.sqrt(math.log(n) / d)
    hits = 0
    values = []
    for t in range(seeds):
        M = mutual_coherence(sample_embeddings(n, d, "unit-sphere", np.random.default_rng((seed, t))))
        values.append(M)
        hits += M <= limit
    return hits / seeds, limit, np.array(values)


# --------------------------------------------------------------------------
# finite-width untrained scores vs the closed form
# --------------------------------------------------------------------------


def lgcn_ide_coefficients(combo):
    """Polynomial weights ``beta`` implied by layer weights ``combo``.

    The expected score matrix is the user-item block of ``F^2`` with
    ``F = sum_k combo[k] A~^k``; that block keeps the odd powers
    ``A~^(2k+1)``, whose user-item block is ``R~ P~^k``.
    """
    gamma = np.convolve(np.asarray(combo, dtype=np.float64), np.asarray(combo, dtype=np.float64))
    return gamma[1::2].copy()


def closed_form_scores(graph, beta):
    """Dense ``sum_k beta_k R~ P~^k`` for every user."""
    R = graph.dense()
    P = R.T @ R
    out = np.zeros_like(R)
    T = R.copy()
    for b in beta:
        out += b * T
        T = T @ P
    return out


def spearman_rows(A, B):
    """Spearman correlation of matching rows; rows constant in either input give nan."""
    ra = rankdata(A, axis=1)
    rb = rankdata(B, axis=1)
    ra -= ra.mean(axis=1, keepdims=True)
    rb -= rb.mean(axis=1, keepdims=True)
    den = np.sqrt((ra * ra).sum(axis=1) * (rb * rb).sum(axis=1))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, (ra * rb).sum(axis=1) / den, np.nan)


def verify_theorem2(graph, d_list, seed=0, layers=3, combo=None, distribution="gaussian", sigma=DEFAULT_SIGMA):
    """Mean per-user Spearman correlation between finite-``d`` untrained
    scores and the closed form, one report per ``d``.
    """
    if combo is None:
        combo = np.full(layers + 1, 1.0 / (layers + 1))
    beta = lgcn_ide_coefficients(combo)
    target = closed_form_scores(graph, beta)
    live = np.ptp(target, axis=1) > 0
    n = graph.n_users + graph.n_items
    out = []
    for d in d_list:
        rng = np.random.default_rng((seed, int(d)))
        E0 = sample_embeddings(n, int(d), distribution, rng, sigma)
        E = propagate_light(E0, graph, layers, combo)
        S = E[: graph.n_users] @ E[graph.n_users :].T
        # E[E0 E0^T] is I for unit-sphere rows and d sigma^2 I for gaussian rows
        approx = S if distribution == "unit-sphere" else S / (d * sigma**2)
        rho = spearman_rows(approx[live], target[live])
        rel = np.linalg.norm(approx - target) / max(np.linalg.norm(target), 1e-300)
        out.append(
            TheoryReport(
                experiment="t2",
                d=int(d),
                seed=seed,
                score_correlation=float(np.nanmean(rho)) if rho.size else float("nan"),
                rel_frobenius=float(rel),
            )
        )
    return out


# --------------------------------------------------------------------------
# spectrum bounds
# --------------------------------------------------------------------------


@dataclass
class SpectrumReport:
    item_eigenvalues: np.ndarray
    bipartite_eigenvalues: np.ndarray
    n_edges: int
    edge_components: int
    unit_multiplicity: int

    @property
    def item_in_range(self):
        v = self.item_eigenvalues
        return bool(v.size == 0 or (v.min() >= -SPECTRUM_TOL and v.max() <= 1 + SPECTRUM_TOL))

    @property
    def bipartite_in_range(self):
        v = self.bipartite_eigenvalues
        return bool(v.size == 0 or (v.min() >= -1 - SPECTRUM_TOL and v.max() <= 1 + SPECTRUM_TOL))

    @property
    def bipartite_max_ok(self):
        v = self.bipartite_eigenvalues
        if self.n_edges == 0:
            return bool(v.size == 0 or np.max(np.abs(v)) <= SPECTRUM_TOL)
        return abs(float(v.max()) - 1.0) <= SPECTRUM_TOL

    @property
    def ok(self):
        return self.item_in_range and self.bipartite_in_range and self.bipartite_max_ok


def verify_spectrum(graph, dense_cap=DEFAULT_DENSE_CAP):
    """Eigenvalues of ``P~`` and ``A~`` from the dense oracle."""
    n = graph.n_users + graph.n_items
    if n > dense_cap:
        raise DenseCapError(n, dense_cap)
    P = densify_item_graph(item_graph(graph, dense_cap))
    A = dense_bipartite(graph)
    p_eigs = dense_spectral_oracle(P, dense_cap).values
    a_eigs = dense_spectral_oracle(A, dense_cap).values
    R = graph.base
    if R.nnz:
        adj = sp.bmat([[None, R.to_scipy()], [R.to_scipy().T, None]]).tocsr()
        _, labels = csgraph.connected_components(adj, directed=False)
        deg = np.concatenate([R.user_degrees, R.item_degrees])
        comps = int(np.unique(labels[deg > 0]).size)
    else:
        comps = 0
    mult = int(np.count_nonzero(np.abs(a_eigs - 1.0) <= 1e-9))
    return SpectrumReport(p_eigs, a_eigs, R.nnz, comps, mult)


def spectrum_from_interactions(interactions, dense_cap=DEFAULT_DENSE_CAP):
    return verify_spectrum(normalize(interactions), dense_cap)


def theory_reports_to_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(THEORY_CSV_HEADER)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()
