import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from vqekit.estimators import (
    BradleyTerryRanker,
    Degrader,
    StageOneEnhancer,
    StageTwoRestorer,
    TwoStageEnhancer,
)
from vqekit.rand import seeded_rng
from vqekit.rank import PairCounts, VoteRecord
from vqekit.validation import ValidationError


def _frames(rng, n=4, size=16):
    return rng.uniform(0.1, 0.9, (n, size, size, 3))


def test_degrader_transform_deterministic():
    rng = seeded_rng(0)
    X = _frames(rng)
    d = Degrader(steps=[{"kind": "gauss_noise", "sigma_n": 0.05, "gray": False}],
                 seed=3)
    a = d.fit().transform(X)
    b = Degrader(steps=d.steps, seed=3).fit().transform(X)
    assert np.array_equal(a, b)
    assert a.shape == X.shape
    assert not np.array_equal(a, X)


def test_degrader_clone_and_params():
    d = Degrader(steps=[{"kind": "jpeg", "quality": 70}], seed=5)
    c = clone(d)
    assert c.get_params()["seed"] == 5
    c.set_params(seed=6)
    assert c.seed == 6


def test_stage_one_fit_transform_score():
    rng = seeded_rng(1)
    M = np.array([[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.15, 0.15, 0.6]])
    X = _frames(rng, n=6)
    y = np.clip(np.einsum("nhwc,dc->nhwd", X, M), 0, 1)
    est = StageOneEnhancer(iterations=150, batch=4, patch=16, lr=1e-2,
                           lut_n=9, bank_k=3, predictor_downsample=16, seed=0)
    est.fit(X, y)
    assert hasattr(est, "model_") and hasattr(est, "history_")
    out = est.transform(X)
    assert out.shape == X.shape
    # closer to the target than the input is
    assert est.score(X, y) > -float(np.sqrt(np.mean((X - y) ** 2)))


def test_stage_one_unfitted_raises():
    rng = seeded_rng(2)
    with pytest.raises(NotFittedError):
        StageOneEnhancer().transform(_frames(rng))


def test_stage_one_shape_mismatch():
    rng = seeded_rng(3)
    with pytest.raises(ValidationError, match="differ"):
        StageOneEnhancer(iterations=1).fit(_frames(rng, n=2), _frames(rng, n=3))


def test_stage_two_smoke():
    rng = seeded_rng(4)
    y = _frames(rng, n=3)
    X = np.clip(y + rng.normal(0, 0.05, y.shape), 0, 1)
    est = StageTwoRestorer(iterations=3, batch=2, patch=16, lr=1e-3, seed=0)
    est.fit(X, y)
    out = est.predict(X)
    assert out.shape == X.shape
    assert out.min() >= 0 and out.max() <= 1


def test_stage_two_edge_weight_param():
    est = StageTwoRestorer(edge_weight=0.0)
    cfg = est._config()
    assert cfg.weights.edge == 0.0
    assert clone(est).get_params()["edge_weight"] == 0.0


def test_two_stage_uses_prefitted_stages():
    rng = seeded_rng(5)
    y = _frames(rng, n=3)
    X = np.clip(y + rng.normal(0, 0.03, y.shape), 0, 1)
    s1 = StageOneEnhancer(iterations=5, batch=2, patch=16, lr=1e-3,
                          lut_n=5, bank_k=2, predictor_downsample=8, seed=0)
    s2 = StageTwoRestorer(iterations=2, batch=2, patch=16, lr=1e-4, seed=0)
    pipe = TwoStageEnhancer(stage1=s1, stage2=s2)
    pipe.fit(X, y)
    out = pipe.predict(X)
    assert out.shape == X.shape
    # stage estimators were fitted in place
    assert hasattr(s1, "model_") and hasattr(s2, "model_")


def test_two_stage_joint_finetune_runs():
    rng = seeded_rng(6)
    y = _frames(rng, n=2)
    X = np.clip(y + rng.normal(0, 0.03, y.shape), 0, 1)
    s1 = StageOneEnhancer(iterations=2, batch=2, patch=16, lr=1e-4,
                          lut_n=5, bank_k=2, predictor_downsample=8, seed=0)
    s2 = StageTwoRestorer(iterations=2, batch=2, patch=16, lr=1e-4, seed=0)
    pipe = TwoStageEnhancer(stage1=s1, stage2=s2, finetune_iterations=2, lr=1e-6)
    pipe.fit(X, y)
    assert hasattr(pipe, "history_")
    assert len(pipe.history_) >= 1


def test_bt_ranker_from_votes():
    votes = []
    k = 0
    for rating, n in ((1, 3), (5, 1)):
        for _ in range(n):
            votes.append(VoteRecord(vote_id=f"v{k}", rater_id=f"r{k}",
                                    pair_id="p", left_id="a", right_id="b",
                                    rating=rating))
            k += 1
    est = BradleyTerryRanker().fit(votes)
    assert est.scores_["a"] > est.scores_["b"]
    assert est.scores_["a"] - est.scores_["b"] == pytest.approx(np.log(3), abs=1e-8)
    p = est.predict_proba([("a", "b"), ("b", "a")])
    assert p[0] == pytest.approx(0.75, abs=1e-8)
    assert p[0] + p[1] == pytest.approx(1.0, abs=1e-12)
    assert list(est.predict([("a", "b"), ("b", "a")])) == ["a", "a"]


def test_bt_ranker_from_counts():
    c = PairCounts()
    c.add_win("x", "y", 2.0)
    c.add_win("y", "x", 2.0)
    est = BradleyTerryRanker().fit(c)
    assert est.scores_["x"] == pytest.approx(est.scores_["y"], abs=1e-9)
    with pytest.raises(ValidationError, match="unknown method"):
        est.predict_proba([("x", "zz")])


def test_bt_ranker_unfitted():
    with pytest.raises(NotFittedError):
        BradleyTerryRanker().predict_proba([("a", "b")])


def test_estimators_clone_contract():
    for est in (Degrader(), StageOneEnhancer(), StageTwoRestorer(),
                TwoStageEnhancer(), BradleyTerryRanker()):
        c = clone(est)
        assert c.get_params() == est.get_params()
