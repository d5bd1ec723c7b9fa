import numpy as np
import pytest

import localembed as le


def topic_text(n=240, d=40, labels=8, seed=0):
    rng = np.random.default_rng(seed)
    lines = [f"{n} {d} {labels}"]
    for _ in range(n):
        topic = rng.integers(4)
        feats = sorted(set(int(topic * 10 + f) for f in rng.integers(0, 10, size=5)))
        labs = sorted(set(int(topic * 2 + l) for l in rng.integers(0, 2, size=2)))
        lines.append(",".join(map(str, labs)) + " " + " ".join(f"{f}:1" for f in feats))
    return "\n".join(lines) + "\n"


def small_hyper():
    h = le.HyperParams()
    h.l_hat = 6
    h.n_bar = 5
    h.clusters = 2
    h.k_nn = 5
    h.svp_iters = 10
    h.admm_iters = 40
    return h


def test_parse_example():
    d = le.parse_dataset("2 3 2\n0 0:1.0 2:0.5\n1 1:2.0\n")
    assert (d.num_points, d.feature_dim, d.label_count) == (2, 3, 2)
    indptr, indices, values = d.features_csr()
    assert list(indptr) == [0, 2, 3]
    assert list(indices) == [0, 2, 1]
    assert list(values) == [1.0, 0.5, 2.0]
    assert d.label_rows() == [[0], [1]]


def test_parse_error_has_line():
    with pytest.raises(le.ParseError, match=":3"):
        le.parse_dataset("2 3 2\n0 0:1\n1 9:1\n")


def test_train_predict_evaluate_roundtrip(tmp_path):
    data = le.parse_dataset(topic_text())
    model = le.train(data, small_hyper(), seed=3)
    assert model.num_learners == 1
    report = model.evaluate(data, [1, 3])
    assert set(report) == {1, 3}
    assert report[1] > 0.5
    preds = model.predict(data, top=3)
    assert len(preds) == data.num_points
    scores = [s for _, s in preds[0]]
    assert scores == sorted(scores, reverse=True)

    path = tmp_path / "m.bin"
    model.save(path)
    loaded = le.load_model(path)
    assert loaded.predict(data, top=3) == preds
    assert le.model_from_bytes(model.to_bytes()).to_bytes() == model.to_bytes()
    with pytest.raises(le.ModelFormatError):
        le.model_from_bytes(model.to_bytes()[:-3])


def test_training_is_deterministic():
    data = le.parse_dataset(topic_text(seed=1))
    assert le.train(data, small_hyper(), 5).to_bytes() == le.train(data, small_hyper(), 5).to_bytes()


def test_from_csr_and_subset():
    d = le.Dataset.from_csr(3, 2, 2, [0, 1, 2, 3], [0, 1, 0], [1.0, 2.0, 3.0], [0, 1, 1, 3], [1, 0, 1])
    assert d.label_rows() == [[1], [], [0, 1]]
    s = d.subset([2, 0])
    assert s.label_rows() == [[0, 1], [1]]
    with pytest.raises(IndexError):
        d.subset([5])


def test_svp_matches_truncation():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((12, 3))
    g = a @ a.T
    z, trace = le.svp_complete_dense(g, 2, 1)
    w, v = np.linalg.eigh(g)
    best = (v[:, -2:] * w[-2:]) @ v[:, -2:].T
    assert np.linalg.norm(z.T @ z - best) < 1e-8
    assert trace[0] >= trace[-1]


def test_grid_and_diagnostics():
    data = le.parse_dataset(topic_text(seed=2))
    best, table = le.grid_search(data, small_hyper(), lambdas=[0.1, 1.0], mus=[0.0], k_nns=[3], n_bars=[5])
    assert len(table) == 2
    assert best.k_nn == 3
    err = le.approximation_error(data, 2, "global_svd")
    assert 0.0 <= err <= 1.0
    assert sum(le.label_frequencies(data)) == sum(len(r) for r in data.label_rows())


def test_invalid_hyper_rejected():
    h = small_hyper()
    h.k_nn = 0
    with pytest.raises(ValueError):
        h.validate()
    with pytest.raises(ValueError):
        h.metric = "cosine"
