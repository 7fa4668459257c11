"""Scikit-learn style estimators wrapping the fusion model and the
softmax-regression reference baseline.

Both estimators accept features as (n, 64, 64) grids or flattened (n, 4096)
arrays plus per-sample serving-sector ids; positions are train-time-only
supervision for the fusion model.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from sklearn.linear_model import LogisticRegression

from ..errors import DataError
from ..measurement import Dataset, DatasetSample
from ..rng import derive_seed, substream
from .nets import ModelConfig, predict as model_predict
from .train import TrainSchedule, train


def validate_features(X, input_shape=None):
    """Coerce X to (n, H, W) float64; accepts flattened rows too.

    When input_shape is None it is inferred: grids keep their own shape and
    flat rows are reshaped to a square (the RSRP feature maps are square).
    """
    X = np.asarray(X, dtype=np.float64)
    if input_shape is None:
        if X.ndim == 3:
            input_shape = X.shape[1:]
        elif X.ndim == 2:
            side = int(round(np.sqrt(X.shape[1])))
            if side * side != X.shape[1]:
                raise DataError(f"cannot infer a square grid from {X.shape[1]} columns")
            input_shape = (side, side)
        else:
            raise DataError("expected a (n, H, W) or (n, H*W) feature array")
    n_feat = int(np.prod(input_shape))
    if X.ndim == 2 and X.shape[1] == n_feat:
        X = X.reshape(-1, *input_shape)
    if X.ndim != 3 or X.shape[1:] != tuple(input_shape):
        raise DataError(f"expected features shaped (n, {input_shape[0]}, {input_shape[1]}) or (n, {n_feat})")
    if not np.all(np.isfinite(X)):
        raise DataError("features must be finite")
    return X


def validate_sectors(sectors, n):
    if sectors is None:
        return np.ones(n, dtype=np.int64)
    sectors = np.asarray(sectors, dtype=np.int64)
    if sectors.shape != (n,):
        raise DataError(f"sectors must be shaped ({n},)")
    if not np.all(np.isin(sectors, (1, 2, 3))):
        raise DataError("sector ids must lie in {1, 2, 3}")
    return sectors


class FusionBeamPredictor(BaseEstimator, ClassifierMixin):
    """Dual-branch fusion beam classifier with position-supervised training.

    Parameters mirror the model and schedule configuration; see
    ``ModelConfig`` and ``TrainSchedule``.  ``fit`` consumes optional
    ``positions`` (meters) and ``sectors`` keyword arrays; ``predict``
    needs only features and sectors.
    """

    def __init__(
        self,
        backbone="mlp",
        feature_dim=64,
        fusion="auto",
        fine_beam_count=64,
        lambda_pos=0.01,
        lambda_bm=0.99,
        lambda_adv=0.1,
        lambda_auto=0.1,
        epochs=30,
        batch_size=256,
        peak_lr=5e-4,
        weight_decay=1e-5,
        warmup_epochs=10,
        val_fraction=0.1,
        seed=0,
    ):
        self.backbone = backbone
        self.feature_dim = feature_dim
        self.fusion = fusion
        self.fine_beam_count = fine_beam_count
        self.lambda_pos = lambda_pos
        self.lambda_bm = lambda_bm
        self.lambda_adv = lambda_adv
        self.lambda_auto = lambda_auto
        self.epochs = epochs
        self.batch_size = batch_size
        self.peak_lr = peak_lr
        self.weight_decay = weight_decay
        self.warmup_epochs = warmup_epochs
        self.val_fraction = val_fraction
        self.seed = seed

    def _model_config(self, input_shape):
        return ModelConfig(
            backbone=self.backbone,
            feature_dim=self.feature_dim,
            fusion=self.fusion,
            fine_beam_count=self.fine_beam_count,
            lambda_pos=self.lambda_pos if self._has_positions else 0.0,
            lambda_bm=self.lambda_bm,
            lambda_adv=self.lambda_adv,
            lambda_auto=self.lambda_auto,
            input_shape=tuple(input_shape),
        )

    def fit(self, X, y, sectors=None, positions=None):
        X = validate_features(X)
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise DataError("y must be one beam label per sample")
        sectors = validate_sectors(sectors, X.shape[0])
        self._has_positions = positions is not None
        if positions is None:
            positions = np.zeros((X.shape[0], 3))
        positions = np.asarray(positions, dtype=np.float64)

        samples = [
            DatasetSample(
                features=X[i],
                label_fine_beam=int(y[i]),
                sector_id=int(sectors[i]),
                position=tuple(positions[i]),
                ue_id=i,
            )
            for i in range(X.shape[0])
        ]
        order = substream(self.seed, 21).permutation(len(samples))
        n_val = max(1, int(round(self.val_fraction * len(samples))))
        if n_val >= len(samples):
            raise DataError("not enough samples to carve a validation split")
        split = {
            "train": [int(i) for i in order[n_val:]],
            "val": [int(i) for i in order[:n_val]],
            "test": [],
        }
        dataset = Dataset(samples=samples, split=split, provenance={})
        schedule = TrainSchedule(
            epochs=self.epochs,
            batch_size=self.batch_size,
            peak_lr=self.peak_lr,
            weight_decay=self.weight_decay,
            warmup_epochs=self.warmup_epochs,
        )
        config = self._model_config(X.shape[1:])
        self.model_, self.history_ = train(dataset, config, schedule, seed=self.seed)
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit before predict")

    def predict(self, X, sectors=None):
        self._check_fitted()
        X = validate_features(X, self.model_.config.input_shape)
        sectors = validate_sectors(sectors, X.shape[0])
        beams, _ = model_predict(self.model_, X, sectors)
        return beams

    def predict_position(self, X):
        """Position estimates in meters (training supervision units)."""
        self._check_fitted()
        X = validate_features(X, self.model_.config.input_shape)
        _, pos = model_predict(self.model_, X, np.ones(X.shape[0], dtype=np.int64))
        return self.model_.pos_scaler.inverse(pos)

    def score(self, X, y, sectors=None):
        y = np.asarray(y, dtype=np.int64)
        return float(np.mean(self.predict(X, sectors=sectors) == y))


class SoftmaxRefClassifier(BaseEstimator, ClassifierMixin):
    """Reference baseline: one multinomial logistic regression per sector on
    flattened features (a single dense layer trained with softmax CE)."""

    def __init__(self, c=1.0, max_iter=200, seed=0):
        self.c = c
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X, y, sectors=None):
        X = validate_features(X)
        y = np.asarray(y, dtype=np.int64)
        sectors = validate_sectors(sectors, X.shape[0])
        flat = X.reshape(X.shape[0], -1)
        self.input_shape_ = X.shape[1:]
        self.models_ = {}
        self.fallback_ = {}
        for sector in (1, 2, 3):
            mask = sectors == sector
            if not np.any(mask):
                continue
            labels = y[mask]
            if len(np.unique(labels)) < 2:
                self.fallback_[sector] = int(labels[0])
                continue
            clf = LogisticRegression(
                C=self.c, max_iter=self.max_iter, random_state=derive_seed(self.seed, sector) % 2**32
            )
            clf.fit(flat[mask], labels)
            self.models_[sector] = clf
        if not self.models_ and not self.fallback_:
            raise DataError("no sector had any training data")
        return self

    def predict(self, X, sectors=None):
        if not hasattr(self, "models_"):
            raise NotFittedError("call fit before predict")
        X = validate_features(X, self.input_shape_)
        sectors = validate_sectors(sectors, X.shape[0])
        flat = X.reshape(X.shape[0], -1)
        out = np.zeros(X.shape[0], dtype=np.int64)
        for sector in (1, 2, 3):
            mask = sectors == sector
            if not np.any(mask):
                continue
            if sector in self.models_:
                out[mask] = self.models_[sector].predict(flat[mask])
            elif sector in self.fallback_:
                out[mask] = self.fallback_[sector]
            else:
                out[mask] = 0  # sector unseen at fit time
        return out

    def score(self, X, y, sectors=None):
        y = np.asarray(y, dtype=np.int64)
        return float(np.mean(self.predict(X, sectors=sectors) == y))
