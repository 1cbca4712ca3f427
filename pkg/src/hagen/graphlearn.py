"""Adaptive region-graph learning.

Builds a directed, nonnegative region weight matrix from learnable source and
target region embeddings.  The pre-activation similarity is antisymmetrized
before the final saturation+rectification, which makes the result exactly
unidirectional: at most one of (i, j) and (j, i) can be positive, and the
diagonal is exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .exceptions import ConfigError, DataError


class RegionEmbeddings:
    """Learnable region representation bundle.

    A shared base embedding (either a free table or a tanh perceptron over
    pre-trained rows) feeds two independent linear maps producing the source
    and target embeddings used for adjacency scoring.  `alpha` controls tanh
    saturation in the scoring.
    """

    def __init__(self, n_regions, embed_dim, alpha, pretrained=None, seed=0, prefix="graph"):
        if n_regions < 2:
            raise ConfigError(f"need at least 2 regions, got {n_regions}")
        if embed_dim < 1:
            raise ConfigError(f"embed_dim must be positive, got {embed_dim}")
        if alpha <= 0:
            raise ConfigError(f"saturation rate must be positive, got {alpha}")
        self.n_regions = n_regions
        self.embed_dim = embed_dim
        self.alpha = float(alpha)

        rng = np.random.default_rng(seed)
        if pretrained is not None:
            pretrained = np.asarray(pretrained, dtype=np.float64)
            if pretrained.ndim != 2 or pretrained.shape[0] != n_regions:
                raise DataError(
                    f"pretrained embeddings have shape {pretrained.shape}, "
                    f"expected ({n_regions}, D_pre)"
                )
            self.pretrained = Tensor(pretrained.copy())
            d_pre = pretrained.shape[1]
            self.mlp_w = Parameter(f"{prefix}.mlp_w", rng.normal(0.0, 0.1, (d_pre, embed_dim)))
            self.mlp_b = Parameter(f"{prefix}.mlp_b", np.zeros(embed_dim))
            self.base_table = None
        else:
            self.pretrained = None
            self.mlp_w = None
            self.mlp_b = None
            self.base_table = Parameter(
                f"{prefix}.base", rng.normal(0.0, 0.1, (n_regions, embed_dim))
            )
        self.map_source = Parameter(
            f"{prefix}.map_source", rng.normal(0.0, 0.1, (embed_dim, embed_dim))
        )
        self.map_target = Parameter(
            f"{prefix}.map_target", rng.normal(0.0, 0.1, (embed_dim, embed_dim))
        )
        self.mix_source = Parameter(
            f"{prefix}.mix_source", rng.normal(0.0, 0.1, (embed_dim, embed_dim))
        )
        self.mix_target = Parameter(
            f"{prefix}.mix_target", rng.normal(0.0, 0.1, (embed_dim, embed_dim))
        )

    def base(self):
        """Current shared base embedding, recomputed from parameters."""
        if self.base_table is not None:
            return self.base_table.tensor
        hidden = ad.add_bias(ad.matmul(self.pretrained, self.mlp_w.tensor), self.mlp_b.tensor)
        return ad.tanh(hidden)

    def source(self):
        return ad.matmul(self.base(), self.map_source.tensor)

    def target(self):
        return ad.matmul(self.base(), self.map_target.tensor)

    def parameters(self):
        params = []
        if self.base_table is not None:
            params.append(self.base_table)
        else:
            params.extend([self.mlp_w, self.mlp_b])
        params.extend([self.map_source, self.map_target, self.mix_source, self.mix_target])
        return params


@dataclass
class RegionGraph:
    """Sparse learned region graph: nonnegative weights with at most `top_k`
    outgoing entries per row and zero diagonal."""

    n_nodes: int
    weights: Tensor
    top_k: int
    keep_mask: np.ndarray = field(repr=False, default=None)


def embed_regions(n_regions, embed_dim, alpha, pretrained=None, seed=0):
    """Construct the learnable embedding bundle (seeded, deterministic)."""
    return RegionEmbeddings(n_regions, embed_dim, alpha, pretrained=pretrained, seed=seed)


def _as_tensor(x):
    if isinstance(x, Parameter):
        return x.tensor
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def direction_scores(e_s, e_t, theta1, theta2, alpha):
    """Antisymmetric pre-activation score matrix.

    e_s, e_t: (N, D) source/target embeddings; theta1, theta2: (D, D) mixing
    weights.  Computing the score as P - P^T (one product, subtracted from
    its own transpose) keeps the antisymmetry exact in floating point, which
    is what guarantees exact unidirectionality after rectification.
    """
    z_s = ad.tanh(ad.mul(ad.matmul(_as_tensor(e_s), _as_tensor(theta1)), alpha))
    z_t = ad.tanh(ad.mul(ad.matmul(_as_tensor(e_t), _as_tensor(theta2)), alpha))
    p = ad.matmul(z_s, ad.transpose(z_t))
    return ad.sub(p, ad.transpose(p))


def activate_scores(scores, alpha):
    """Final saturation + rectification stage; entries land in [0, 1)."""
    return ad.relu(ad.tanh(ad.mul(_as_tensor(scores), alpha)))


def adjacency_from_embeddings(e_s, e_t, theta1, theta2, alpha):
    """Dense adaptive weight matrix from explicit embedding matrices.

    Entries are in [0, 1), the diagonal is exactly zero and
    weights[i, j] * weights[j, i] == 0 exactly for all pairs.
    """
    return activate_scores(direction_scores(e_s, e_t, theta1, theta2, alpha), alpha)


def compute_adjacency(emb):
    """Dense adaptive weight matrix from the current embedding bundle."""
    return adjacency_from_embeddings(
        emb.source(), emb.target(), emb.mix_source, emb.mix_target, emb.alpha
    )


def sparsify_topk(adjacency, k):
    """Keep the k largest entries per row, zeroing the rest.

    Ties keep the smaller column index.  The diagonal is excluded from
    selection.  Zeroed entries receive zero gradient; retained entries pass
    gradients straight through.
    """
    adjacency = adjacency if isinstance(adjacency, Tensor) else Tensor(adjacency)
    n = adjacency.data.shape[0]
    if adjacency.data.ndim != 2 or adjacency.data.shape[1] != n:
        raise DataError(f"adjacency must be square, got {adjacency.data.shape}")
    if not 1 <= k <= n - 1:
        raise ConfigError(f"top_k must be in [1, {n - 1}] for {n} nodes, got {k}")

    scores = adjacency.data.copy()
    np.fill_diagonal(scores, -np.inf)
    # stable argsort of the negated row: equal values keep ascending column order
    order = np.argsort(-scores, axis=1, kind="stable")
    keep = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), k)
    keep[rows, order[:, :k].reshape(-1)] = True
    np.fill_diagonal(keep, False)

    sparse = ad.mul(adjacency, Tensor(keep.astype(np.float64)))
    return RegionGraph(n_nodes=n, weights=sparse, top_k=k, keep_mask=keep)


def effective_top_k(top_k, n_regions):
    """Clamp the configured subgraph size to the feasible range."""
    return max(1, min(top_k, n_regions - 1))
