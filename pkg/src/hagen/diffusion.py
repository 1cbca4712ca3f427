"""Bidirectional diffusion over the region graph.

Random-walk transition matrices are built in both edge directions; the
convolution mixes features across diffusion steps with a learnable filter
tensor, and a per-region gate rescales the reverse-direction branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .exceptions import ConfigError, DataError


@dataclass
class TransitionSet:
    """Forward / reverse random-walk powers 0..max_step (step 0 is identity)."""

    forward: list
    backward: list
    max_step: int


def transition_matrices(adjacency, max_step):
    """Row-normalized walk powers in both directions.

    forward[m] = (D_out^+ A)^m, backward[m] = (D_in^+ A^T)^m, where D^+ is the
    pseudo-inverse degree: rows with zero degree become all-zero rows rather
    than dividing by zero.  Gradients flow through to the adjacency.
    """
    a = adjacency if isinstance(adjacency, Tensor) else Tensor(adjacency)
    n = a.data.shape[0]
    if a.data.ndim != 2 or a.data.shape[1] != n:
        raise DataError(f"adjacency must be square, got {a.data.shape}")
    if (a.data < 0.0).any():
        raise DataError("adjacency weights must be nonnegative")
    if max_step < 1:
        raise ConfigError(f"max diffusion step must be >= 1, got {max_step}")

    at = ad.transpose(a)
    ones = Tensor(np.ones((n, 1)))
    eye = Tensor(np.eye(n))

    def normalized(mat):
        deg = ad.matmul(mat, ones)                       # (N, 1) row sums
        alive = (deg.data > 0.0).astype(np.float64)
        inv = ad.div(Tensor(alive), ad.add(deg, Tensor(1.0 - alive)))
        return ad.matmul(ad.diag(inv), mat)

    fwd = [eye, normalized(a)]
    bwd = [eye, normalized(at)]
    for _ in range(2, max_step + 1):
        fwd.append(ad.matmul(fwd[-1], fwd[1]))
        bwd.append(ad.matmul(bwd[-1], bwd[1]))
    return TransitionSet(forward=fwd, backward=bwd, max_step=max_step)


class DirectionWeights:
    """Per-region gate on the reverse-diffusion branch.

    The raw parameter starts at zero, so every gate starts exactly at 0.5 and
    stays strictly inside (0, 1) through the sigmoid.
    """

    def __init__(self, n_regions, name="direction.raw"):
        self.n_regions = n_regions
        self.raw = Parameter(name, np.zeros(n_regions))

    def effective(self):
        return ad.sigmoid(self.raw.tensor)

    def parameters(self):
        return [self.raw]


def filter_parameter(name, in_dim, out_dim, max_step, rng, scale=None):
    """Filter tensor (in_dim, out_dim, max_step + 1, 2) with fan-in scaling."""
    if scale is None:
        scale = 1.0 / np.sqrt(in_dim * (max_step + 1) * 2)
    data = rng.normal(0.0, scale, (in_dim, out_dim, max_step + 1, 2))
    return Parameter(name, data)


class DiffusionContext:
    """Per-forward-pass cache of direction-gated walk matrices.

    The reverse-direction gate multiplies each backward power once here (cheap
    2D products) instead of once per convolution call; step 0 stays implicit
    so the identity never hits a matmul.
    """

    def __init__(self, transitions, direction):
        self.max_step = transitions.max_step
        gate = ad.diag(direction.effective())
        self.forward = [None] + transitions.forward[1:]
        self.backward = [gate] + [
            ad.matmul(gate, s) for s in transitions.backward[1:]
        ]


def diffuse(x, ctx):
    """All directed walk copies of x, concatenated along the feature axis in
    (step 0 fwd, step 0 rev, step 1 fwd, ...) order."""
    copies = []
    for m in range(ctx.max_step + 1):
        fwd = ctx.forward[m]
        copies.append(x if fwd is None else ad.matmul(fwd, x))
        copies.append(ad.matmul(ctx.backward[m], x))
    return ad.concat(copies, axis=-1)


def apply_filter(diffused, filters):
    """Contract concatenated diffused features with the filter bank.

    The filter pages are flattened to a single (2*(M+1)*F_in, F_out) matrix
    whose row order matches the concatenation order of `diffuse`, so the
    whole step-and-direction sum collapses into one product.
    """
    theta = filters.tensor if isinstance(filters, Parameter) else filters
    if theta.data.ndim != 4 or theta.data.shape[3] != 2:
        raise DataError(f"filter tensor must be (F_in, F_out, M+1, 2), got {theta.data.shape}")
    f_in, _, steps_p1, _ = theta.data.shape
    expected = 2 * steps_p1 * f_in
    if diffused.data.shape[-1] != expected:
        raise DataError(
            f"diffused features have {diffused.data.shape[-1]} channels, "
            f"filters expect {expected}"
        )
    return ad.matmul(diffused, ad.flatten_pages(theta))


def diffusion_conv(x, transitions, filters, direction=None):
    """Direction-aware diffusion convolution.

    x: (N, F) or (B, N, F) features; filters: Parameter or Tensor of shape
    (F, F_out, M + 1, 2) holding one (F, F_out) page per (step, direction);
    transitions: a TransitionSet plus a DirectionWeights, or a prebuilt
    DiffusionContext.  Returns features of shape (..., F_out).
    """
    xt = x if isinstance(x, Tensor) else Tensor(x)
    if isinstance(transitions, DiffusionContext):
        ctx = transitions
    else:
        if direction is None:
            raise DataError("diffusion_conv needs DirectionWeights with a TransitionSet")
        ctx = DiffusionContext(transitions, direction)
    return apply_filter(diffuse(xt, ctx), filters)
