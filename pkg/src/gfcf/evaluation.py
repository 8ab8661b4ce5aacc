"""Split loading, recall/ndcg at k, and the evaluation harness.

ndcg uses binary relevance with a ``log2(rank + 1)`` discount and an ideal
DCG truncated at ``min(k, |truth|)``. Averages run over users whose test set
is non-empty; everyone else is counted in ``users_skipped``.
"""

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, InputError, ParseError, ValidationError
from .recommend import recommend
from .sparse import build_interactions

# published statistics of the public splits: users, items, interactions, density
TABLE1 = {
    "gowalla": (29858, 40981, 1027370, 0.00084),
    "yelp2018": (31668, 38048, 1561406, 0.00130),
    "amazon-book": (52643, 91599, 2984108, 0.00062),
}

CSV_HEADER = ["dataset", "method", "k", "recall", "ndcg", "fit_seconds", "eval_seconds"]


@dataclass(frozen=True, eq=False)
class SplitDataset:
    train: object
    test: dict
    stats: dict = field(default_factory=dict)

    @property
    def n_users(self):
        return self.train.n_users

    @property
    def n_items(self):
        return self.train.n_items


def _read_lines(path):
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except IsADirectoryError:
        raise InputError(f"{path}: is a directory") from None
    rows = {}
    for no, line in enumerate(text.splitlines(), 1):
        toks = line.split()
        if not toks:
            continue
        try:
            ids = [int(t) for t in toks]
        except ValueError:
            bad = next(t for t in toks if not t.lstrip("-").isdigit())
            raise ParseError(f"malformed token {bad!r}", path=path, line=no) from None
        if min(ids) < 0:
            raise ParseError("negative id", path=path, line=no)
        rows.setdefault(ids[0], set()).update(ids[1:])
    return rows


def _stats(train, test, n_users, n_items):
    train_nnz = train.nnz
    test_nnz = sum(len(v) for v in test.values())
    cells = n_users * n_items
    return {
        "n_users": n_users,
        "n_items": n_items,
        "train_nnz": train_nnz,
        "test_nnz": test_nnz,
        "density": (train_nnz + test_nnz) / cells if cells else 0.0,
    }


def split_from_rows(train_rows, test_rows, n_users=None, n_items=None):
    """Assemble a :class:`SplitDataset` from ``user -> items`` mappings."""
    for u, items in test_rows.items():
        overlap = set(items) & set(train_rows.get(u, ()))
        if overlap:
            raise InputError(
                f"user {u} has items in both train and test (e.g. {min(overlap)})"
            )
    all_users = list(train_rows) + list(test_rows)
    all_items = [i for rows in (train_rows, test_rows) for v in rows.values() for i in v]
    if n_users is None:
        n_users = max(all_users, default=-1) + 1
    if n_items is None:
        n_items = max(all_items, default=-1) + 1
    pairs = [(u, i) for u, items in train_rows.items() for i in items]
    train = build_interactions(pairs, n_users, n_items)
    test = {int(u): frozenset(int(i) for i in v) for u, v in test_rows.items() if v}
    for u, v in test.items():
        if u >= n_users or (v and max(v) >= n_items):
            raise InputError(f"test ids of user {u} fall outside {n_users}x{n_items}")
    return SplitDataset(train=train, test=test, stats=_stats(train, test, n_users, n_items))


def load_split(train_path, test_path):
    """Read LightGCN-format files: each line is ``user item item ...``."""
    return split_from_rows(_read_lines(train_path), _read_lines(test_path))


def write_split_file(path, rows, n_users=None):
    users = range(n_users) if n_users is not None else sorted(rows)
    with open(path, "w") as fh:
        for u in users:
            items = sorted(rows.get(u, ()))
            fh.write(" ".join(str(x) for x in [u, *items]) + "\n")


def holdout_split(train, fraction=0.2, seed=0):
    """Move a seeded random ``fraction`` of each user's training items to a
    validation set. Users with fewer than two items keep everything.
    """
    if not 0 < fraction < 1:
        raise ValidationError(f"holdout fraction must lie in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    keep_rows, val_rows = {}, {}
    for u in range(train.n_users):
        items = np.array(train.row(u))
        if items.size >= 2:
            n_out = min(items.size - 1, max(1, int(round(fraction * items.size))))
            perm = rng.permutation(items.size)
            val_rows[u] = set(items[perm[:n_out]].tolist())
            keep_rows[u] = set(items[perm[n_out:]].tolist())
        elif items.size:
            keep_rows[u] = set(items.tolist())
    return split_from_rows(keep_rows, val_rows, train.n_users, train.n_items)


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


def _ids(slate):
    return np.asarray(getattr(slate, "item_ids", slate), dtype=np.int64)


def recall_at_k(slate, truth, k):
    if not truth:
        raise ValidationError("recall is undefined for an empty truth set")
    top = _ids(slate)[:k]
    hits = sum(1 for i in top.tolist() if i in truth)
    return hits / len(truth)


def ndcg_at_k(slate, truth, k):
    if not truth:
        raise ValidationError("ndcg is undefined for an empty truth set")
    top = _ids(slate)[:k].tolist()
    dcg = sum(1.0 / math.log2(p + 2) for p, i in enumerate(top) if i in truth)
    idcg = sum(1.0 / math.log2(p + 2) for p in range(min(k, len(truth))))
    return dcg / idcg


# --------------------------------------------------------------------------
# harness
# --------------------------------------------------------------------------


@dataclass
class EvalReport:
    k: int
    recall: float
    ndcg: float
    users_evaluated: int
    users_skipped: int
    wall_time_fit: float = 0.0
    wall_time_eval: float = 0.0
    dataset: str = ""
    method: str = ""

    def csv_row(self, timings=True):
        fmt = (lambda t: f"{t:.3f}") if timings else (lambda t: "")
        return [
            self.dataset,
            self.method,
            str(self.k),
            f"{self.recall:.6f}",
            f"{self.ndcg:.6f}",
            fmt(self.wall_time_fit),
            fmt(self.wall_time_eval),
        ]

    def to_dict(self, timings=True):
        d = asdict(self)
        if not timings:
            d["wall_time_fit"] = d["wall_time_eval"] = None
        return d


def evaluate_cutoffs(model, data, ks=(20,), dataset="", method=None, memory_budget=None):
    """Average recall@k and ndcg@k for every ``k`` in ``ks``.

    ``model`` needs ``score_users``, ``n_users`` and ``n_items``. Per-user
    values are summed with ``math.fsum`` so the result does not depend on
    user order.
    """
    ks = sorted({int(k) for k in ks})
    if not ks or ks[0] < 1:
        raise ValidationError("cutoffs must be positive")
    if (model.n_users, model.n_items) != (data.n_users, data.n_items):
        raise DimensionError(
            f"model is {model.n_users}x{model.n_items}, data is {data.n_users}x{data.n_items}"
        )
    users = np.array(sorted(u for u, v in data.test.items() if v), dtype=np.int64)
    kw = {} if memory_budget is None else {"memory_budget": memory_budget}
    t0 = time.perf_counter()
    slates = recommend(model, users, n=ks[-1], seen=data.train, **kw)
    recalls = {k: [] for k in ks}
    ndcgs = {k: [] for k in ks}
    for slate in slates:
        truth = data.test[slate.user]
        for k in ks:
            recalls[k].append(recall_at_k(slate, truth, k))
            ndcgs[k].append(ndcg_at_k(slate, truth, k))
    elapsed = time.perf_counter() - t0
    n_eval = int(users.size)
    method = method if method is not None else getattr(getattr(model, "kind", None), "value", "")
    return [
        EvalReport(
            k=k,
            recall=math.fsum(recalls[k]) / n_eval if n_eval else 0.0,
            ndcg=math.fsum(ndcgs[k]) / n_eval if n_eval else 0.0,
            users_evaluated=n_eval,
            users_skipped=data.n_users - n_eval,
            wall_time_fit=float(getattr(model, "fit_seconds", 0.0)),
            wall_time_eval=elapsed,
            dataset=dataset,
            method=method,
        )
        for k in ks
    ]


def evaluate(model, data, k=20, **kw):
    return evaluate_cutoffs(model, data, (k,), **kw)[0]


def reports_to_csv(reports, timings=True):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.csv_row(timings))
    return buf.getvalue()


def reports_to_json(reports, timings=True):
    return json.dumps([r.to_dict(timings) for r in reports], indent=2, sort_keys=True) + "\n"


def write_reports(reports, csv_path=None, json_path=None, timings=True):
    if csv_path:
        Path(csv_path).write_text(reports_to_csv(reports, timings))
    if json_path:
        Path(json_path).write_text(reports_to_json(reports, timings))
