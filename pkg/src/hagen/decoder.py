"""Prediction head and training losses.

The decoder stacks diffusion convolutions on the final hidden state (ReLU
between layers, none on the last) and squashes a final convolution into
per-region, per-category occurrence probabilities.  The crime loss is binary
cross-entropy summed within a sample and averaged over the batch; the total
loss adds the weighted homophily penalty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .exceptions import ConfigError, DataError
from .diffusion import DiffusionContext, diffusion_conv, filter_parameter


@dataclass
class DecoderParams:
    """Hidden-layer and output filters of the prediction head."""

    layers: list          # [(filter Parameter, bias Parameter)], >= 1 entries
    out_filter: Parameter
    out_bias: Parameter

    @classmethod
    def create(cls, hidden_dim, n_categories, n_layers, max_step, rng, prefix="decoder"):
        if n_layers < 1:
            raise ConfigError(f"decoder needs at least one layer, got {n_layers}")
        layers = []
        for i in range(n_layers):
            f = filter_parameter(f"{prefix}.{i}.filter", hidden_dim, hidden_dim, max_step, rng)
            b = Parameter(f"{prefix}.{i}.bias", np.zeros(hidden_dim))
            layers.append((f, b))
        out_f = filter_parameter(f"{prefix}.out.filter", hidden_dim, n_categories, max_step, rng)
        out_b = Parameter(f"{prefix}.out.bias", np.zeros(n_categories))
        return cls(layers, out_f, out_b)

    def parameters(self):
        params = []
        for f, b in self.layers:
            params.extend([f, b])
        params.extend([self.out_filter, self.out_bias])
        return params


def decode(hidden, params, transitions, direction=None):
    """Map the final hidden state to occurrence probabilities in (0, 1).

    hidden: (..., N, H) Tensor.  Every layer is a diffusion convolution plus
    bias; inner layers apply ReLU, the last hidden layer is linear, and the
    output convolution is squashed by a sigmoid.
    """
    if not isinstance(transitions, DiffusionContext):
        transitions = DiffusionContext(transitions, direction)
    psi = hidden
    last = len(params.layers) - 1
    for i, (f, b) in enumerate(params.layers):
        pre = ad.add_bias(diffusion_conv(psi, transitions, f), b.tensor)
        psi = ad.relu(pre) if i < last else pre
    logits = ad.add_bias(
        diffusion_conv(psi, transitions, params.out_filter),
        params.out_bias.tensor,
    )
    return ad.sigmoid(logits)


def bce_loss(probs, targets, eps=1e-7):
    """Binary cross-entropy, summed per sample and averaged over the batch.

    probs: (N, C) or (B, N, C) Tensor of probabilities; targets: matching
    binary array.  Probabilities are clamped to [eps, 1-eps] before the logs,
    so the result is always finite.
    """
    p = probs if isinstance(probs, Tensor) else Tensor(probs)
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != p.data.shape:
        raise DataError(f"targets shape {y.shape} does not match predictions {p.data.shape}")
    if not np.isin(y, (0.0, 1.0)).all():
        raise DataError("targets must be binary 0/1")
    if not 0.0 < eps < 0.5:
        raise ConfigError(f"clamp epsilon must be in (0, 0.5), got {eps}")

    batch = p.data.shape[0] if p.data.ndim == 3 else 1
    clamped = ad.clip(p, eps, 1.0 - eps)
    yt = Tensor(y)
    yn = Tensor(1.0 - y)
    ll = ad.add(
        ad.mul(yt, ad.log(clamped)),
        ad.mul(yn, ad.log(ad.sub(1.0, clamped))),
    )
    total = ad.neg(ad.tsum(ll))
    return ad.mul(total, 1.0 / batch) if batch > 1 else total


@dataclass
class LossBreakdown:
    """Crime loss, homophily loss, and their weighted combination."""

    crime: float
    homophily: float
    weight: float
    total: float

    @classmethod
    def combine(cls, crime, homophily, weight):
        if weight < 0:
            raise ConfigError(f"homophily weight must be nonnegative, got {weight}")
        crime = float(crime)
        homophily = float(homophily)
        return cls(crime, homophily, float(weight), crime + weight * homophily)


def total_loss(crime, homophily, weight):
    """Combine the loss terms; total == crime + weight * homophily exactly."""
    return LossBreakdown.combine(crime, homophily, weight)
