"""Crime-category dependency encoding.

Each category gets a learnable embedding, initialized from the principal
components of its historical occurrence profile.  A bilinear form between
region and category embeddings, softmaxed per region, produces per-region
category weights that rescale the input window.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter
from .exceptions import ConfigError, DataError


class CrimeEmbedding:
    """Learnable per-category embedding plus the bilinear interaction map."""

    def __init__(self, n_categories, embed_dim, init=None, seed=0, prefix="crime"):
        if n_categories < 1:
            raise ConfigError(f"need at least one category, got {n_categories}")
        rng = np.random.default_rng(seed)
        if init is None:
            init = rng.normal(0.0, 0.1, (n_categories, embed_dim))
        else:
            init = np.asarray(init, dtype=np.float64)
            if init.shape != (n_categories, embed_dim):
                raise DataError(
                    f"crime embedding init has shape {init.shape}, "
                    f"expected ({n_categories}, {embed_dim})"
                )
        self.table = Parameter(f"{prefix}.table", init)
        self.interact = Parameter(
            f"{prefix}.interact", rng.normal(0.0, 0.1, (embed_dim, embed_dim))
        )

    def parameters(self):
        return [self.table, self.interact]


def init_crime_embedding_pca(history, embed_dim, seed=0, noise_scale=0.01):
    """Principal-component initialization of the category embedding table.

    history: (N, C, T) binary occurrence tensor restricted to training slots.
    Each category becomes one sample whose features are its (region, slot)
    occurrence profile.  Columns of the result are principal-component scores
    (component j scaled by sqrt of its variance); once components are
    exhausted the remaining columns are small seeded Gaussian noise.
    """
    hist = np.asarray(history, dtype=np.float64)
    if hist.ndim != 3:
        raise DataError(f"history must be (regions, categories, slots), got {hist.shape}")
    n, n_cat, t = hist.shape
    if t < 2:
        raise DataError(f"need at least 2 history slots for the PCA init, got {t}")
    if embed_dim < 1:
        raise ConfigError(f"embed_dim must be positive, got {embed_dim}")

    rng = np.random.default_rng(seed)
    x = hist.transpose(1, 0, 2).reshape(n_cat, n * t)
    xc = x - x.mean(axis=0, keepdims=True)
    gram = xc @ xc.T                        # (C, C), symmetric PSD

    out = np.empty((n_cat, embed_dim))
    floor = max(float(np.trace(gram)), 1.0) * 1e-12
    rank = 0
    g = gram.copy()
    for j in range(min(embed_dim, n_cat)):
        vec = rng.normal(0.0, 1.0, n_cat)
        vec /= np.linalg.norm(vec)
        for _ in range(200):
            nxt = g @ vec
            norm = np.linalg.norm(nxt)
            if norm <= floor:
                vec = None
                break
            nxt /= norm
            if np.linalg.norm(nxt - vec) < 1e-9:
                vec = nxt
                break
            vec = nxt
        if vec is None:
            break
        val = float(vec @ g @ vec)
        if val <= floor:
            break
        # deterministic sign: largest-magnitude component is positive
        if vec[np.argmax(np.abs(vec))] < 0:
            vec = -vec
        out[:, j] = np.sqrt(val) * vec
        g = g - val * np.outer(vec, vec)
        rank += 1
    if rank < embed_dim:
        out[:, rank:] = rng.normal(0.0, noise_scale, (n_cat, embed_dim - rank))
    return out


def inter_dependency(region_base, crime):
    """Per-region, per-category dependency weights.

    region_base: (N, D) Tensor of shared region embeddings; crime: the
    CrimeEmbedding bundle.  Scores regions against categories bilinearly and
    softmaxes each region's row, so every row sums to 1.
    """
    scores = ad.matmul(
        ad.matmul(region_base, crime.interact.tensor),
        ad.transpose(crime.table.tensor),
    )
    return ad.softmax_rows(scores)


def weight_input(weights, window_slice):
    """Rescale one time slice of the input by the dependency weights.

    weights: (N, C) Tensor; window_slice: (N, C) or (B, N, C) Tensor or
    array.  Broadcasts over any batch axis.
    """
    x = window_slice if isinstance(window_slice, ad.Tensor) else ad.Tensor(window_slice)
    return ad.mul_gate(x, weights)
