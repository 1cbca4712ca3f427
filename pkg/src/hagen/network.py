"""Full forecasting network: graph learning, dependency weighting, recurrent
encoding over diffusion, and the probability decoder, wired for end-to-end
gradients.

Ablation switches degrade the architecture structurally: dependency weighting
can be dropped, and the learned graph can be replaced by a fixed one.  The
homophily term is controlled at loss time through its weight.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import AblationFlags, ModelConfig
from .decoder import DecoderParams, LossBreakdown, bce_loss, decode
from .dependency import CrimeEmbedding, inter_dependency
from .diffusion import DiffusionContext, DirectionWeights, transition_matrices
from .exceptions import ConfigError, DataError
from .graphlearn import compute_adjacency, effective_top_k, embed_regions, sparsify_topk
from .homophily import homophily_loss, homophily_loss_value
from .recurrent import DcgruParams, encode_sequence


class HagenNetwork:
    """Parameter container plus forward/loss passes.

    Construction is deterministic in (shapes, config, seed): the same seed
    always produces bitwise-identical initial parameters in the same
    registration order.
    """

    def __init__(self, n_regions, n_categories, model_cfg=None, seed=0,
                 pretrained=None, crime_init=None, fixed_graph=None, ablation=None):
        cfg = model_cfg or ModelConfig()
        cfg.validate()
        if n_regions < 2:
            raise ConfigError(f"need at least 2 regions, got {n_regions}")
        if n_categories < 1:
            raise ConfigError(f"need at least 1 category, got {n_categories}")
        self.n_regions = n_regions
        self.n_categories = n_categories
        self.config = cfg
        self.seed = seed
        self.ablation = ablation or AblationFlags()
        self.top_k = effective_top_k(cfg.top_k, n_regions)

        if self.ablation.no_graph_learning:
            if fixed_graph is None:
                raise ConfigError(
                    "disabling graph learning requires a fixed graph to diffuse over"
                )
        self.fixed_graph = None
        if fixed_graph is not None:
            fg = np.asarray(fixed_graph, dtype=np.float64)
            if fg.shape != (n_regions, n_regions):
                raise DataError(
                    f"fixed graph has shape {fg.shape}, expected ({n_regions}, {n_regions})"
                )
            if (fg < 0).any():
                raise DataError("fixed graph weights must be nonnegative")
            fg = fg.copy()
            np.fill_diagonal(fg, 0.0)
            self.fixed_graph = fg

        self.embeddings = embed_regions(
            n_regions, cfg.embed_dim, cfg.alpha,
            pretrained=pretrained, seed=np.random.default_rng([seed, 1]).integers(2**32),
        )
        self.direction = DirectionWeights(n_regions)
        self.crime = CrimeEmbedding(
            n_categories, cfg.embed_dim, init=crime_init,
            seed=np.random.default_rng([seed, 2]).integers(2**32),
        )
        enc_rng = np.random.default_rng([seed, 3])
        self.encoder = []
        in_dim = n_categories
        for i in range(cfg.rnn_layers):
            self.encoder.append(DcgruParams.create(
                in_dim, cfg.hidden_dim, cfg.diffusion_steps, enc_rng, f"encoder.{i}"
            ))
            in_dim = cfg.hidden_dim
        dec_rng = np.random.default_rng([seed, 4])
        self.decoder = DecoderParams.create(
            cfg.hidden_dim, n_categories, cfg.decoder_layers, cfg.diffusion_steps, dec_rng
        )

        self._params = []
        self._params.extend(self.embeddings.parameters())
        self._params.extend(self.direction.parameters())
        self._params.extend(self.crime.parameters())
        for layer in self.encoder:
            self._params.extend(layer.parameters())
        self._params.extend(self.decoder.parameters())
        names = [p.name for p in self._params]
        if len(set(names)) != len(names):
            raise ConfigError("internal: duplicate parameter names")

    def parameters(self):
        return list(self._params)

    def param_map(self):
        return {p.name: p for p in self._params}

    def zero_grad(self):
        for p in self._params:
            p.zero_grad()

    def adjacency(self):
        """Current region graph as a Tensor (sparsified if learned)."""
        if self.fixed_graph is not None and self.ablation.no_graph_learning:
            return Tensor(self.fixed_graph)
        dense = compute_adjacency(self.embeddings)
        return sparsify_topk(dense, self.top_k).weights

    def _check_windows(self, windows):
        w = np.asarray(windows, dtype=np.float64)
        if w.ndim == 3:
            w = w[np.newaxis]
        if w.ndim != 4:
            raise DataError(
                f"windows must be (regions, categories, slots) or batched, got {w.shape}"
            )
        if w.shape[1] != self.n_regions or w.shape[2] != self.n_categories:
            raise DataError(
                f"windows have shape {w.shape}, expected "
                f"(B, {self.n_regions}, {self.n_categories}, K)"
            )
        if w.shape[3] < 1:
            raise DataError("windows need at least one time slot")
        return w

    def forward(self, windows):
        """probs (B, N, C) Tensor and the adjacency Tensor used."""
        w = self._check_windows(windows)
        adj = self.adjacency()
        trans = transition_matrices(adj, self.config.diffusion_steps)
        ctx = DiffusionContext(trans, self.direction)

        weights = None
        if not self.ablation.no_dependency:
            weights = inter_dependency(self.embeddings.base(), self.crime)

        inputs = []
        for k in range(w.shape[3]):
            step = Tensor(np.ascontiguousarray(w[:, :, :, k]))
            if weights is not None:
                step = ad.mul_gate(step, weights)
            inputs.append(step)

        hidden = encode_sequence(inputs, self.encoder, ctx)
        probs = decode(hidden, self.decoder, ctx)
        return probs, adj

    def predict_proba(self, windows):
        """Probabilities as a plain array; batch axis mirrors the input."""
        w = np.asarray(windows)
        probs, _ = self.forward(windows)
        out = probs.data
        return out[0] if w.ndim == 3 else out

    def loss(self, windows, targets, homophily_weight):
        """Total training loss.

        Returns (total Tensor, LossBreakdown, probs Tensor, adjacency Tensor).
        With weight 0 the homophily term is still reported but kept out of the
        gradient graph entirely.
        """
        w = self._check_windows(windows)
        probs, adj = self.forward(w)
        y = np.asarray(targets, dtype=np.float64)
        if y.ndim == 2:
            y = y[np.newaxis]
        crime = bce_loss(probs, y)

        if self.ablation.no_homophily:
            homophily_weight = 0.0
        if homophily_weight > 0:
            homo = homophily_loss(adj, w)
            total = ad.add(crime, ad.mul(homo, homophily_weight))
            breakdown = LossBreakdown.combine(crime.item(), homo.item(), homophily_weight)
        else:
            homo_value = homophily_loss_value(adj.data, w)
            total = crime
            breakdown = LossBreakdown.combine(crime.item(), homo_value, 0.0)
        return total, breakdown, probs, adj
