"""Scikit-learn style front end for the forecaster.

HagenForecaster exposes the usual estimator surface: constructor arguments
are plain hyperparameters (so get_params/set_params/clone work), fit consumes
an occurrence tensor, and predict/predict_proba consume recent-history
windows.  Fitted state lives in trailing-underscore attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .config import AblationFlags, DataConfig, EvalConfig, ModelConfig, RunConfig, TrainConfig
from .data import CrimeTensor, chrono_split
from .exceptions import DataError
from .metrics import binarize
from .training import TrainingData, evaluate_range, train
from .validation import (
    check_graph_matrix,
    check_occurrence_tensor,
    check_region_features,
    check_window,
)


class HagenForecaster(BaseEstimator):
    """One-step-ahead crime occurrence forecaster over a learned region graph.

    Parameters mirror the training configuration.  fit(X) expects a binary
    occurrence tensor of shape (regions, categories, slots); the estimator
    splits it chronologically, trains with best-validation selection, and
    keeps the selected parameters.
    """

    def __init__(self, embed_dim=40, hidden_dim=64, rnn_layers=2, diffusion_steps=2,
                 top_k=50, alpha=3.0, decoder_layers=2, window=7, epochs=50,
                 batch_size=32, learning_rate=0.01, lr_decay=0.1,
                 lr_milestones=(20, 30, 40), homophily_weight=0.01, clip_norm=5.0,
                 train_frac=0.8125, val_frac=0.0625, threshold=0.5, seed=0,
                 disable_homophily=False, disable_dependency=False,
                 disable_graph_learning=False):
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.rnn_layers = rnn_layers
        self.diffusion_steps = diffusion_steps
        self.top_k = top_k
        self.alpha = alpha
        self.decoder_layers = decoder_layers
        self.window = window
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.lr_milestones = lr_milestones
        self.homophily_weight = homophily_weight
        self.clip_norm = clip_norm
        self.train_frac = train_frac
        self.val_frac = val_frac
        self.threshold = threshold
        self.seed = seed
        self.disable_homophily = disable_homophily
        self.disable_dependency = disable_dependency
        self.disable_graph_learning = disable_graph_learning

    def _run_config(self):
        return RunConfig(
            model=ModelConfig(
                embed_dim=self.embed_dim,
                hidden_dim=self.hidden_dim,
                rnn_layers=self.rnn_layers,
                diffusion_steps=self.diffusion_steps,
                top_k=self.top_k,
                alpha=self.alpha,
                decoder_layers=self.decoder_layers,
            ),
            train=TrainConfig(
                epochs=self.epochs,
                batch_size=self.batch_size,
                window=self.window,
                learning_rate=self.learning_rate,
                lr_decay=self.lr_decay,
                lr_milestones=tuple(self.lr_milestones),
                homophily_weight=self.homophily_weight,
                clip_norm=self.clip_norm,
                train_frac=self.train_frac,
                val_frac=self.val_frac,
                seed=self.seed,
                ablation=AblationFlags(
                    no_homophily=self.disable_homophily,
                    no_dependency=self.disable_dependency,
                    no_graph_learning=self.disable_graph_learning,
                ),
            ),
            eval=EvalConfig(threshold=self.threshold),
            data=DataConfig(graph="<in-memory>" if self.disable_graph_learning else None),
        )

    def fit(self, X, y=None, graph=None, region_embeddings=None):
        """Train on a binary occurrence tensor X of shape (N, C, T).

        graph: optional (N, N) weight matrix; required when graph learning is
        disabled.  region_embeddings: optional (N, D) pre-trained features
        feeding the embedding perceptron.  y is ignored (targets come from
        the tensor itself).
        """
        occ = check_occurrence_tensor(X)
        n = occ.shape[0]
        if graph is not None:
            graph = check_graph_matrix(graph, n)
        if region_embeddings is not None:
            region_embeddings = check_region_features(region_embeddings, n)

        cfg = self._run_config()
        tensor = CrimeTensor(occurrences=occ.astype(np.uint8), slot_duration_hours=24.0)
        result = train(cfg, TrainingData(
            tensor=tensor, graph=graph, pretrained=region_embeddings,
        ))

        self.n_regions_ = n
        self.n_categories_ = occ.shape[1]
        self.network_ = result.best.build_network()
        self.result_ = result
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.best_val_macro_f1_ = result.best_val_macro_f1
        self.learned_graph_ = self.network_.adjacency().data
        return self

    def _require_fitted(self):
        if not hasattr(self, "network_"):
            raise NotFittedError(
                "this HagenForecaster is not fitted yet; call fit first"
            )

    def predict_proba(self, X):
        """Occurrence probabilities for the slot after each window.

        X: (N, C, K) window or (B, N, C, K) batch; returns matching (N, C) or
        (B, N, C) probabilities.
        """
        self._require_fitted()
        arr = check_window(X, self.n_regions_, self.n_categories_)
        return self.network_.predict_proba(arr)

    def predict(self, X):
        """Hard 0/1 occurrence forecasts at the configured threshold."""
        return binarize(self.predict_proba(X), self.threshold)

    def score(self, X, y=None):
        """Micro-F1 of one-step-ahead forecasts over every window in X."""
        self._require_fitted()
        occ = check_occurrence_tensor(X)
        if occ.shape[0] != self.n_regions_ or occ.shape[1] != self.n_categories_:
            raise DataError(
                f"X has shape {occ.shape}, expected "
                f"({self.n_regions_}, {self.n_categories_}, T)"
            )
        tensor = CrimeTensor(occurrences=occ.astype(np.uint8), slot_duration_hours=24.0)
        report, _, _, _ = evaluate_range(
            self.network_, tensor, self.window, (0, occ.shape[2]),
            self.threshold, self.batch_size,
        )
        return report.micro_f1

    def evaluate_test_split(self, X):
        """MetricsReport over the test portion of a tensor, using the same
        chronological split rule as fit."""
        self._require_fitted()
        occ = check_occurrence_tensor(X)
        tensor = CrimeTensor(occurrences=occ.astype(np.uint8), slot_duration_hours=24.0)
        _, _, test_range = chrono_split(
            occ.shape[2], self.train_frac, self.val_frac, min_slots=self.window + 1
        )
        report, _, _, _ = evaluate_range(
            self.network_, tensor, self.window, test_range,
            self.threshold, self.batch_size,
        )
        return report
