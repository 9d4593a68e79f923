"""Estimator-style wrappers over the functional core.

These follow the scikit-learn conventions (constructor stores hyperparameters
verbatim, fit returns self, fitted state in trailing-underscore attributes,
get_params/set_params work) so the enhancement stages and the ranker drop
into pipelines and grid searches. X is a batch of frames (n, h, w, 3) in
[0,1]; y the matching targets.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .degrade import DegradationRecipe, run_recipe_frame
from .enhance import LossWeights, TrainConfig, enhance_frame, finetune_joint, \
    train_stage1, train_stage2
from .rank import PairCounts, bt_fit, votes_to_counts
from .validation import ValidationError, check_frames_batch


def _make_pairs(X, y):
    X = check_frames_batch(X)
    y = check_frames_batch(y)
    if X.shape != y.shape:
        raise ValidationError(f"X and y shapes differ: {X.shape} vs {y.shape}")
    return [(X[i], y[i]) for i in range(X.shape[0])]


class Degrader(TransformerMixin, BaseEstimator):
    """Applies a fixed degradation recipe frame-wise; fit is a no-op."""

    def __init__(self, steps=(), seed=0):
        self.steps = steps
        self.seed = seed

    def fit(self, X=None, y=None):
        self.recipe_ = DegradationRecipe(self.seed, list(self.steps))
        return self

    def transform(self, X):
        if not hasattr(self, "recipe_"):
            self.fit()
        X = check_frames_batch(X)
        return np.stack([run_recipe_frame(X[i], self.recipe_, i)
                         for i in range(X.shape[0])])


class StageOneEnhancer(TransformerMixin, BaseEstimator):
    """LUT-bank color corrector trained with fit(X_degraded, y_target)."""

    def __init__(self, iterations=500, batch=8, patch=64, lr=1e-2,
                 halve_every=10_000, seed=0, bank_k=5, lut_n=17,
                 predictor_downsample=16, train_lattice=True,
                 bank_perturbation=0.02):
        self.iterations = iterations
        self.batch = batch
        self.patch = patch
        self.lr = lr
        self.halve_every = halve_every
        self.seed = seed
        self.bank_k = bank_k
        self.lut_n = lut_n
        self.predictor_downsample = predictor_downsample
        self.train_lattice = train_lattice
        self.bank_perturbation = bank_perturbation

    def _config(self) -> TrainConfig:
        return TrainConfig(
            iterations=self.iterations, batch=self.batch, patch=self.patch,
            lr=self.lr, halve_every=self.halve_every, seed=self.seed,
            bank_k=self.bank_k, lut_n=self.lut_n,
            predictor_downsample=self.predictor_downsample,
            train_lattice=self.train_lattice,
            bank_perturbation=self.bank_perturbation)

    def fit(self, X, y):
        pairs = _make_pairs(X, y)
        self.model_, self.history_ = train_stage1(pairs, self._config())
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_frames_batch(X)
        return np.stack([enhance_frame(self.model_, None, X[i])
                         for i in range(X.shape[0])])

    def predict(self, X):
        return self.transform(X)

    def score(self, X, y):
        """Negative RMSE, so larger is better."""
        y = check_frames_batch(y)
        pred = self.transform(X)
        return -float(np.sqrt(np.mean((pred - y) ** 2)))


class StageTwoRestorer(TransformerMixin, BaseEstimator):
    """Residual U-Net restorer with the same estimator surface."""

    def __init__(self, iterations=300, batch=4, patch=32, lr=1e-3,
                 halve_every=10_000, seed=0, restorer_preset="default",
                 edge_weight=0.25):
        self.iterations = iterations
        self.batch = batch
        self.patch = patch
        self.lr = lr
        self.halve_every = halve_every
        self.seed = seed
        self.restorer_preset = restorer_preset
        self.edge_weight = edge_weight

    def _config(self) -> TrainConfig:
        return TrainConfig(
            iterations=self.iterations, batch=self.batch, patch=self.patch,
            lr=self.lr, halve_every=self.halve_every, seed=self.seed,
            restorer_preset=self.restorer_preset,
            weights=LossWeights(edge=self.edge_weight))

    def fit(self, X, y):
        pairs = _make_pairs(X, y)
        self.model_, self.history_ = train_stage2(pairs, self._config())
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_frames_batch(X)
        return np.stack([enhance_frame(None, self.model_, X[i])
                         for i in range(X.shape[0])])

    def predict(self, X):
        return self.transform(X)

    def score(self, X, y):
        y = check_frames_batch(y)
        pred = self.transform(X)
        return -float(np.sqrt(np.mean((pred - y) ** 2)))


class TwoStageEnhancer(BaseEstimator):
    """Composes fitted stage-1 and stage-2 estimators and optionally joint
    finetunes them."""

    def __init__(self, stage1=None, stage2=None, finetune_iterations=0,
                 lr=1e-5, seed=0):
        self.stage1 = stage1
        self.stage2 = stage2
        self.finetune_iterations = finetune_iterations
        self.lr = lr
        self.seed = seed

    def fit(self, X, y):
        s1 = self.stage1 if self.stage1 is not None else StageOneEnhancer()
        s2 = self.stage2 if self.stage2 is not None else StageTwoRestorer()
        if not hasattr(s1, "model_"):
            s1.fit(X, y)
        if not hasattr(s2, "model_"):
            s2.fit(s1.transform(X), check_frames_batch(y))
        self.s1_ = s1.model_
        self.s2_ = s2.model_
        if self.finetune_iterations > 0:
            cfg = TrainConfig(iterations=self.finetune_iterations, lr=self.lr,
                              seed=self.seed, batch=min(4, len(X)),
                              patch=check_frames_batch(X).shape[1])
            pairs = _make_pairs(X, y)
            self.s1_, self.s2_, self.history_ = finetune_joint(self.s1_, self.s2_,
                                                               pairs, cfg)
        return self

    def predict(self, X):
        check_is_fitted(self, "s1_")
        X = check_frames_batch(X)
        return np.stack([enhance_frame(self.s1_, self.s2_, X[i])
                         for i in range(X.shape[0])])


class BradleyTerryRanker(BaseEstimator):
    """Fits BT scores from votes or prebuilt counts.

    fit(X) accepts a list of VoteRecord or a PairCounts; afterwards scores_
    maps method -> log score and predict_proba gives win probabilities.
    """

    def __init__(self, weighted=False):
        self.weighted = weighted

    def fit(self, X, y=None):
        counts = X if isinstance(X, PairCounts) else votes_to_counts(X, weighted=self.weighted)
        self.result_ = bt_fit(counts)
        self.scores_ = {e.method: e.bt_score for e in self.result_.entries}
        return self

    def predict_proba(self, pairs):
        """P(a beats b) for each (a, b) in pairs."""
        check_is_fitted(self, "scores_")
        out = []
        for a, b in pairs:
            if a not in self.scores_ or b not in self.scores_:
                raise ValidationError(f"unknown method in pair ({a!r}, {b!r})")
            d = self.scores_[a] - self.scores_[b]
            out.append(1.0 / (1.0 + np.exp(-d)))
        return np.asarray(out)

    def predict(self, pairs):
        """Winner of each pair by fitted score."""
        p = self.predict_proba(pairs)
        return np.asarray([a if pi >= 0.5 else b for (a, b), pi in zip(pairs, p)])
