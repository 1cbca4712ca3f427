"""Estimator-surface contract: sklearn conventions and fitted behavior."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hagen.data import SynthSpec, synth_generate
from hagen.estimator import HagenForecaster
from hagen.exceptions import DataError


def _forecaster(**kw):
    base = dict(
        embed_dim=4, hidden_dim=4, rnn_layers=1, diffusion_steps=1, top_k=3,
        window=7, epochs=2, batch_size=32, seed=0,
    )
    base.update(kw)
    return HagenForecaster(**base)


def _tensor(seed=0, slots=128):
    spec = SynthSpec(
        n_regions=6, n_categories=2, n_slots=slots, n_clusters=2,
        period=8, flip_prob=0.05, seed=seed,
    )
    return synth_generate(spec).tensor.occurrences


class TestSklearnConventions:
    def test_get_params_round_trip(self):
        est = _forecaster(homophily_weight=0.02)
        params = est.get_params()
        assert params["homophily_weight"] == 0.02
        assert params["embed_dim"] == 4
        again = HagenForecaster(**params)
        assert again.get_params() == params

    def test_set_params_returns_self(self):
        est = _forecaster()
        assert est.set_params(epochs=7) is est
        assert est.epochs == 7
        with pytest.raises(ValueError):
            est.set_params(not_a_parameter=1)

    def test_clone_preserves_hyperparameters(self):
        est = _forecaster(alpha=2.5, disable_homophily=True)
        copy = clone(est)
        assert copy.get_params() == est.get_params()
        assert copy is not est

    def test_defaults_match_training_defaults(self):
        est = HagenForecaster()
        assert est.embed_dim == 40
        assert est.hidden_dim == 64
        assert est.top_k == 50
        assert est.window == 7
        assert est.homophily_weight == 0.01
        assert est.lr_milestones == (20, 30, 40)


class TestUnfitted:
    def test_predict_proba_requires_fit(self):
        with pytest.raises(NotFittedError):
            _forecaster().predict_proba(np.zeros((6, 2, 7)))

    def test_predict_requires_fit(self):
        with pytest.raises(NotFittedError):
            _forecaster().predict(np.zeros((6, 2, 7)))

    def test_score_requires_fit(self):
        with pytest.raises(NotFittedError):
            _forecaster().score(np.zeros((6, 2, 30)))


@pytest.fixture(scope="module")
def fitted():
    occ = _tensor()
    est = _forecaster().fit(occ)
    return est, occ


class TestFitted:
    def test_fit_returns_self_and_sets_state(self, fitted):
        est, occ = fitted
        assert est.n_regions_ == 6
        assert est.n_categories_ == 2
        assert len(est.history_) == 2
        assert est.learned_graph_.shape == (6, 6)
        assert 0 <= est.best_epoch_ < 2

    def test_predict_proba_shapes(self, fitted):
        est, occ = fitted
        window = occ[:, :, -7:]
        probs = est.predict_proba(window)
        assert probs.shape == (6, 2)
        assert np.all((probs > 0) & (probs < 1))
        batch = np.stack([window, window])
        assert est.predict_proba(batch).shape == (2, 6, 2)

    def test_predict_is_thresholded_proba(self, fitted):
        est, occ = fitted
        window = occ[:, :, -7:]
        probs = est.predict_proba(window)
        hard = est.predict(window)
        assert hard.dtype == np.uint8
        assert np.array_equal(hard, (probs >= 0.5).astype(np.uint8))

    def test_predict_rejects_wrong_shapes(self, fitted):
        est, _ = fitted
        with pytest.raises(DataError):
            est.predict_proba(np.zeros((5, 2, 7)))  # wrong region count
        with pytest.raises(DataError):
            est.predict_proba(np.zeros((6, 2, 7, 1, 1)))

    def test_score_in_unit_interval(self, fitted):
        est, occ = fitted
        value = est.score(occ[:, :, -40:])
        assert 0.0 <= value <= 1.0

    def test_score_rejects_mismatched_tensor(self, fitted):
        est, _ = fitted
        with pytest.raises(DataError):
            est.score(np.zeros((5, 2, 40)))

    def test_evaluate_test_split_report(self, fitted):
        est, occ = fitted
        report = est.evaluate_test_split(occ)
        assert 0.0 <= report.micro_f1 <= 1.0
        assert 0.0 <= report.macro_f1 <= 1.0
        assert len(report.per_category) == 2

    def test_refit_with_same_seed_reproduces_graph(self, fitted):
        est, occ = fitted
        again = _forecaster().fit(occ)
        assert np.array_equal(again.learned_graph_, est.learned_graph_)


def test_fixed_graph_mode_requires_graph():
    occ = _tensor()
    est = _forecaster(disable_graph_learning=True)
    with pytest.raises(Exception):
        est.fit(occ)


def test_fixed_graph_mode_keeps_given_graph():
    spec = SynthSpec(
        n_regions=6, n_categories=2, n_slots=128, n_clusters=2,
        period=8, flip_prob=0.05, seed=1,
    )
    synth = synth_generate(spec)
    est = _forecaster(disable_graph_learning=True)
    est.fit(synth.tensor.occurrences, graph=synth.graph)
    expect = synth.graph.copy()
    np.fill_diagonal(expect, 0.0)
    assert np.array_equal(est.learned_graph_, expect)
