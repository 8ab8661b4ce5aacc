import numpy as np
import pytest

from gfcf.errors import DimensionError, ValidationError
from gfcf.recommend import (
    Kind,
    fit_model,
    load_model,
    read_manifest,
    recommend,
    save_model,
    score_autoencoder,
    score_gfcf,
    score_ideal_lowpass,
    score_lgcn_ide,
    score_neighborhood,
    top_n,
)
from gfcf.sparse import build_interactions, densify_item_graph, item_graph, normalize
from gfcf.spectral import dense_spectral_oracle
from gfcf.synthetic import random_interactions

S2 = 1 / np.sqrt(2)


@pytest.fixture
def graph():
    return random_interactions(30, 50, 0.12, seed=21, min_degree=1)


def test_lgcn_ide_examples(toy):
    np.testing.assert_allclose(score_lgcn_ide(fit_model("lgcn-ide", toy, beta=[0, 1]), 0), [0.625, 0.5 * S2 + 0.5 * S2 * 0.5], atol=1e-12)
    np.testing.assert_allclose(score_lgcn_ide(fit_model("lgcn-ide", toy, beta=[1]), 0), [0.5, S2])
    a = score_lgcn_ide(fit_model("lgcn-ide", toy, beta=[1, 1]), 0)
    np.testing.assert_allclose(a, [0.5 + 0.625, S2 + 0.53033008588991], atol=1e-12)


def test_neighborhood_examples(toy):
    m = fit_model("neighborhood", toy)
    np.testing.assert_allclose(score_neighborhood(m, 1), [0.75, 0.5 * S2], atol=1e-12)
    empty = fit_model("neighborhood", build_interactions([(0, 0)], 2, 2))
    assert not score_neighborhood(empty, 1).any()


def test_ideal_examples(toy):
    m = fit_model("ideal-lowpass", toy, dim=1)
    np.testing.assert_allclose(score_ideal_lowpass(m, 0), [2 / 3, np.sqrt(2) / 3], atol=1e-8)
    full = fit_model("ideal-lowpass", toy, dim=2)
    np.testing.assert_allclose(score_ideal_lowpass(full, 0), [0.5, S2], atol=1e-8)


def test_gfcf_full_rank_alpha_one(toy):
    m = fit_model("gfcf", toy, alpha=1.0, dim=2)
    np.testing.assert_allclose(score_gfcf(m, 0), np.array([1.0, 1.0]) @ [[0.75, 0.5 * S2], [0.5 * S2, 0.5]] + [1, 1], atol=1e-8)


def test_gfcf_alpha_zero_is_neighborhood(graph):
    g = fit_model("gfcf", graph, alpha=0.0, dim=8)
    n = fit_model("neighborhood", graph)
    users = np.arange(graph.n_users)
    np.testing.assert_allclose(g.score_users(users), n.score_users(users), atol=1e-12)


def test_gfcf_linear_in_alpha(graph):
    m = fit_model("gfcf", graph, alpha=0.0, dim=8)
    users = np.arange(5)
    s0, s1, s2 = (m.with_params(alpha=a).score_users(users) for a in (0.0, 1.0, 2.0))
    np.testing.assert_allclose(s2 - s0, 2 * (s1 - s0), atol=1e-12)


def test_gfcf_normalized_input(graph):
    m = fit_model("gfcf", graph, alpha=0.0, dim=4, normalized_input=True)
    l = fit_model("lgcn-ide", graph, beta=[0, 1])
    np.testing.assert_allclose(m.score_users([0, 1]), l.score_users([0, 1]), atol=1e-12)


def test_autoencoder_spectrum(toy):
    m = fit_model("autoencoder", toy, mu=1.0)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(m.dense_B)), [0.2, 0.5], atol=1e-12)
    Rt = normalize(toy).dense()
    np.testing.assert_allclose(score_autoencoder(m, 0), Rt[0] @ m.dense_B)


def test_autoencoder_large_mu(graph):
    mu = 1e6
    m = fit_model("autoencoder", graph, mu=mu)
    P = densify_item_graph(item_graph(normalize(graph)))
    np.testing.assert_allclose(m.dense_B * mu, P, atol=1e-5)


def test_kind_mismatch_and_validation(toy):
    with pytest.raises(ValidationError):
        score_gfcf(fit_model("neighborhood", toy), 0)
    with pytest.raises(ValidationError):
        fit_model("gfcf", toy, alpha=-1)
    with pytest.raises(ValidationError):
        fit_model("autoencoder", toy, mu=0)
    with pytest.raises(ValueError):
        fit_model("svd", toy)
    with pytest.raises(DimensionError):
        fit_model("neighborhood", toy).score_users([2])


def test_top_n_examples():
    s = top_n([0.9, 0.5, 0.7], {0}, n=2)
    assert s.item_ids.tolist() == [2, 1] and not s.truncated
    s = top_n([0.9, 0.5], {0, 1}, n=2)
    assert len(s) == 0 and s.truncated
    assert top_n([1.0, 1.0, 1.0], set(), n=3).item_ids.tolist() == [0, 1, 2]


def test_recommend_masks_training(graph):
    m = fit_model("lgcn-ide", graph)
    slates = recommend(m, np.arange(graph.n_users), n=10, memory_budget=8 * 50 * 4 * 3)
    for s in slates:
        assert not set(s.item_ids.tolist()) & set(graph.row(s.user).tolist())
        assert np.all(np.diff(s.scores) <= 0)
    scores = m.score_users([3])[0]
    assert slates[3].item_ids.tolist() == top_n(scores, graph.row(3).tolist(), 10).item_ids.tolist()


@pytest.mark.parametrize("kind", list(Kind))
def test_persistence_roundtrip(tmp_path, graph, kind):
    m = fit_model(kind, graph, dim=6, alpha=0.4, beta=(1, 0.5), mu=2.0)
    save_model(tmp_path / "m.bin", m)
    meta = read_manifest(tmp_path / "m.bin")
    assert meta["kind"] == kind.value
    back = load_model(tmp_path / "m.bin", graph)
    users = np.arange(graph.n_users)
    assert np.array_equal(back.score_users(users), m.score_users(users))


def test_load_rejects_other_data(tmp_path, graph):
    save_model(tmp_path / "m.bin", fit_model("neighborhood", graph))
    with pytest.raises(DimensionError):
        load_model(tmp_path / "m.bin", random_interactions(30, 50, 0.12, seed=22))


def test_gfcf_ideal_term_matches_dense_basis(graph):
    P = densify_item_graph(item_graph(normalize(graph)))
    ref = dense_spectral_oracle(P)
    gap = ref.values[:-1] - ref.values[1:]
    d = int(np.argmax(gap[5:20] > 1e-4)) + 6
    m = fit_model("ideal-lowpass", graph, dim=d)
    U = ref.vectors[:, :d]
    Rt = normalize(graph).dense()
    np.testing.assert_allclose(m.score_users(np.arange(graph.n_users)), Rt @ U @ U.T, atol=1e-6)
