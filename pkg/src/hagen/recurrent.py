"""Gated recurrent encoding over region-graph diffusion.

Each cell is a GRU whose dense affine maps are replaced by diffusion
convolutions over the current graph, so the hidden state of every region mixes
information from its graph neighborhood at every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .exceptions import ContractError
from .diffusion import DiffusionContext, apply_filter, diffuse, filter_parameter


@dataclass
class DcgruParams:
    """Filters and biases for one diffusion-convolutional GRU cell."""

    reset_filter: Parameter
    reset_bias: Parameter
    update_filter: Parameter
    update_bias: Parameter
    cand_filter: Parameter
    cand_bias: Parameter
    hidden_dim: int

    @classmethod
    def create(cls, in_dim, hidden_dim, max_step, rng, prefix):
        joint = in_dim + hidden_dim

        def pair(gate):
            f = filter_parameter(f"{prefix}.{gate}.filter", joint, hidden_dim, max_step, rng)
            b = Parameter(f"{prefix}.{gate}.bias", np.zeros(hidden_dim))
            return f, b

        rf, rb = pair("reset")
        uf, ub = pair("update")
        cf, cb = pair("cand")
        return cls(rf, rb, uf, ub, cf, cb, hidden_dim)

    def parameters(self):
        return [
            self.reset_filter, self.reset_bias,
            self.update_filter, self.update_bias,
            self.cand_filter, self.cand_bias,
        ]


def _as_context(transitions, direction):
    if isinstance(transitions, DiffusionContext):
        return transitions
    if direction is None:
        raise ContractError("need DirectionWeights when not passing a DiffusionContext")
    return DiffusionContext(transitions, direction)


def dcgru_cell(x, h_prev, params, transitions, direction=None):
    """One recurrent step.

    x: (..., N, F_in) input features; h_prev: (..., N, H) previous hidden
    state.  Reset and update gates are sigmoids of diffusion convolutions over
    the concatenated [input, hidden] (diffused once, contracted per gate); the
    candidate state tanh-convolves [input, reset * hidden]; the new state
    interpolates via the update gate.
    """
    ctx = _as_context(transitions, direction)
    joint = diffuse(ad.concat([x, h_prev], axis=-1), ctx)
    r = ad.sigmoid(ad.add_bias(
        apply_filter(joint, params.reset_filter), params.reset_bias.tensor
    ))
    u = ad.sigmoid(ad.add_bias(
        apply_filter(joint, params.update_filter), params.update_bias.tensor
    ))
    gated = diffuse(ad.concat([x, ad.mul(r, h_prev)], axis=-1), ctx)
    c = ad.tanh(ad.add_bias(
        apply_filter(gated, params.cand_filter), params.cand_bias.tensor
    ))
    return ad.add(ad.mul(u, h_prev), ad.mul(ad.sub(1.0, u), c))


def encode_sequence(inputs, layers, transitions, direction=None):
    """Run stacked recurrent layers over an input sequence.

    inputs: nonempty list of (..., N, F_in) tensors in time order; layers:
    list of DcgruParams, each consuming the hidden sequence of the previous
    layer.  Hidden states start at zero.  Returns the final hidden state of
    the last layer.
    """
    if not inputs:
        raise ContractError("encode_sequence needs at least one input step")
    if not layers:
        raise ContractError("encode_sequence needs at least one recurrent layer")

    ctx = _as_context(transitions, direction)
    sequence = inputs
    last_hidden = None
    for layer in layers:
        lead = sequence[0].data.shape[:-1]
        h = Tensor(np.zeros(lead + (layer.hidden_dim,)))
        outputs = []
        for x in sequence:
            h = dcgru_cell(x, h, layer, ctx)
            outputs.append(h)
        sequence = outputs
        last_hidden = h
    return last_hidden
