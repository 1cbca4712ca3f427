"""Finite-difference verification of analytic gradients, module by module.

Each scenario builds a tiny seeded instance of one model component, wraps a
scalar loss over its parameters, and compares backpropagated gradients with
central differences.  The full-network scenario runs the complete training
loss end to end.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor, check_gradients
from .config import ModelConfig
from .decoder import DecoderParams, bce_loss, decode
from .dependency import CrimeEmbedding, inter_dependency, weight_input
from .diffusion import DirectionWeights, diffusion_conv, filter_parameter, transition_matrices
from .graphlearn import compute_adjacency, embed_regions, sparsify_topk
from .homophily import homophily_loss
from .network import HagenNetwork
from .recurrent import DcgruParams, dcgru_cell, encode_sequence

DEFAULT_TOLERANCE = 1e-4


def _weighted_sum(out, rng):
    w = Tensor(rng.normal(0.0, 1.0, out.data.shape))
    return ad.tsum(ad.mul(out, w))


def _scenario_graph(seed):
    emb = embed_regions(5, 4, alpha=3.0, seed=seed)

    def loss():
        return _weighted_sum(compute_adjacency(emb), np.random.default_rng([seed, 12]))

    return loss, emb.parameters()


def _scenario_sparsify(seed):
    emb = embed_regions(5, 4, alpha=3.0, seed=seed)

    def loss():
        graph = sparsify_topk(compute_adjacency(emb), 2)
        return _weighted_sum(graph.weights, np.random.default_rng([seed, 13]))

    return loss, emb.parameters()


def _scenario_homophily(seed):
    rng = np.random.default_rng([seed, 21])
    emb = embed_regions(6, 4, alpha=3.0, seed=seed)
    windows = rng.integers(0, 2, size=(2, 6, 2, 3)).astype(np.float64)

    def loss():
        graph = sparsify_topk(compute_adjacency(emb), 3)
        return homophily_loss(graph.weights, windows)

    return loss, emb.parameters()


def _scenario_diffusion(seed):
    rng = np.random.default_rng([seed, 31])
    emb = embed_regions(4, 3, alpha=3.0, seed=seed)
    theta = filter_parameter("theta", 3, 2, 2, rng)
    dw = DirectionWeights(4)
    dw.raw.tensor.data[:] = rng.normal(0.0, 0.5, 4)
    x = rng.normal(0.0, 1.0, (4, 3))

    def loss():
        trans = transition_matrices(compute_adjacency(emb), 2)
        out = diffusion_conv(Tensor(x), trans, theta, dw)
        return _weighted_sum(out, np.random.default_rng([seed, 32]))

    return loss, emb.parameters() + [theta] + dw.parameters()


def _scenario_dcgru(seed):
    rng = np.random.default_rng([seed, 41])
    adj = np.abs(rng.normal(0.0, 1.0, (4, 4)))
    np.fill_diagonal(adj, 0.0)
    cell = DcgruParams.create(2, 3, 1, rng, "cell")
    dw = DirectionWeights(4)
    x = rng.normal(0.0, 1.0, (4, 2))
    h = rng.normal(0.0, 0.5, (4, 3))

    def loss():
        trans = transition_matrices(Tensor(adj), 1)
        out = dcgru_cell(Tensor(x), Tensor(h), cell, trans, dw)
        return _weighted_sum(out, np.random.default_rng([seed, 42]))

    return loss, cell.parameters() + dw.parameters()


def _scenario_encoder(seed):
    rng = np.random.default_rng([seed, 51])
    adj = np.abs(rng.normal(0.0, 1.0, (3, 3)))
    np.fill_diagonal(adj, 0.0)
    layers = [
        DcgruParams.create(2, 2, 1, rng, "enc.0"),
        DcgruParams.create(2, 2, 1, rng, "enc.1"),
    ]
    dw = DirectionWeights(3)
    steps = [rng.normal(0.0, 1.0, (3, 2)) for _ in range(2)]
    params = [p for layer in layers for p in layer.parameters()] + dw.parameters()

    def loss():
        trans = transition_matrices(Tensor(adj), 1)
        out = encode_sequence([Tensor(s) for s in steps], layers, trans, dw)
        return _weighted_sum(out, np.random.default_rng([seed, 52]))

    return loss, params


def _scenario_dependency(seed):
    rng = np.random.default_rng([seed, 61])
    emb = embed_regions(4, 3, alpha=3.0, seed=seed)
    crime = CrimeEmbedding(3, 3, seed=seed + 1)
    window = rng.integers(0, 2, size=(4, 3)).astype(np.float64)

    def loss():
        weights = inter_dependency(emb.base(), crime)
        out = weight_input(weights, window)
        return _weighted_sum(out, np.random.default_rng([seed, 62]))

    return loss, emb.parameters() + crime.parameters()


def _scenario_decoder(seed):
    rng = np.random.default_rng([seed, 71])
    adj = np.abs(rng.normal(0.0, 1.0, (3, 3)))
    np.fill_diagonal(adj, 0.0)
    dec = DecoderParams.create(3, 2, 2, 1, rng)
    dw = DirectionWeights(3)
    hidden = rng.normal(0.0, 1.0, (3, 3))
    targets = rng.integers(0, 2, size=(3, 2)).astype(np.float64)

    def loss():
        trans = transition_matrices(Tensor(adj), 1)
        probs = decode(Tensor(hidden), dec, trans, dw)
        return bce_loss(probs, targets)

    return loss, dec.parameters() + dw.parameters()


def _scenario_full_network(seed):
    rng = np.random.default_rng([seed, 81])
    cfg = ModelConfig(
        embed_dim=3, hidden_dim=3, rnn_layers=1, diffusion_steps=1,
        top_k=2, alpha=3.0, decoder_layers=1,
    )
    net = HagenNetwork(4, 2, cfg, seed=seed)
    windows = rng.integers(0, 2, size=(2, 4, 2, 2)).astype(np.float64)
    targets = rng.integers(0, 2, size=(2, 4, 2)).astype(np.float64)

    def loss():
        total, _, _, _ = net.loss(windows, targets, homophily_weight=0.01)
        return total

    return loss, net.parameters()


SCENARIOS = [
    ("graph_adjacency", _scenario_graph),
    ("graph_sparsify", _scenario_sparsify),
    ("homophily_loss", _scenario_homophily),
    ("diffusion_conv", _scenario_diffusion),
    ("dcgru_cell", _scenario_dcgru),
    ("recurrent_encoder", _scenario_encoder),
    ("dependency_weighting", _scenario_dependency),
    ("decoder_bce", _scenario_decoder),
    ("full_network", _scenario_full_network),
]


def run_suite(base_seed=0, n_seeds=10, eps=1e-5, tolerance=DEFAULT_TOLERANCE):
    """Check every scenario over n_seeds seeds.

    Returns a list of dicts {name, worst_gap, passed}; a scenario passes when
    its worst relative gradient gap over all seeds stays below tolerance.
    """
    results = []
    for name, build in SCENARIOS:
        worst = 0.0
        for s in range(n_seeds):
            loss, params = build(base_seed + s)
            gap = check_gradients(loss, params, eps=eps)
            worst = max(worst, gap)
        results.append({"name": name, "worst_gap": worst, "passed": worst < tolerance})
    return results
