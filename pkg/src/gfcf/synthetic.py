"""Seeded random interaction graphs for tests, benchmarks and the theory lab."""

import numpy as np

from .sparse import build_interactions


def random_interactions(n_users, n_items, density, seed=0, min_degree=0):
    """Bernoulli(``density``) bipartite graph.

    With ``min_degree=1`` every user and every item receives at least one
    edge (an extra uniformly drawn partner is added where needed).
    """
    rng = np.random.default_rng(seed)
    mask = rng.random((n_users, n_items)) < density
    if min_degree > 0 and n_users and n_items:
        for u in np.flatnonzero(mask.sum(axis=1) < min_degree):
            need = min_degree - int(mask[u].sum())
            free = np.flatnonzero(~mask[u])
            mask[u, rng.choice(free, size=min(need, free.size), replace=False)] = True
        for i in np.flatnonzero(mask.sum(axis=0) < min_degree):
            need = min_degree - int(mask[:, i].sum())
            free = np.flatnonzero(~mask[:, i])
            mask[rng.choice(free, size=min(need, free.size), replace=False), i] = True
    users, items = np.nonzero(mask)
    return build_interactions(np.column_stack([users, items]), n_users, n_items)


def random_split(n_users, n_items, density, test_fraction=0.2, seed=0):
    """A toy train/test split as ``(train_rows, test_rows)`` dicts."""
    rng = np.random.default_rng(seed)
    m = random_interactions(n_users, n_items, density, seed=seed, min_degree=1)
    train, test = {}, {}
    for u in range(n_users):
        items = np.array(m.row(u))
        perm = rng.permutation(items.size)
        n_test = int(round(test_fraction * items.size)) if items.size > 1 else 0
        test[u] = set(items[perm[:n_test]].tolist())
        train[u] = set(items[perm[n_test:]].tolist())
    return train, test
