"""Weighted homophily measurement and the regularization loss built on it.

The homophily ratio of a weighted directed graph under a binary labeling is
the average, over nodes with at least one in-neighbor, of the in-weight
fraction arriving from same-labeled neighbors.  The loss pushes the ratio
toward 1 for every (time slot, category) labeling of a window batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .exceptions import DataError


def _as_tensor(a):
    return a if isinstance(a, Tensor) else Tensor(np.asarray(a, dtype=np.float64))


def _check_binary(arr, what):
    vals = np.asarray(arr)
    if not np.isin(vals, (0, 1)).all():
        raise DataError(f"{what} must be binary 0/1")


def _ratio_columns(adjacency, labels):
    """Mean homophily ratio for each label column.

    adjacency: Tensor (N, N); labels: ndarray (N, P) with one binary labeling
    per column.  Returns (means Tensor (1, P), n_nonvacuous int).  Nodes with
    zero in-weight are excluded from the mean; if every node is vacuous the
    means are exact zeros.
    """
    n = labels.shape[0]
    lab = Tensor(labels)
    inv = Tensor(1.0 - labels)
    at = ad.transpose(adjacency)

    same_pos = ad.matmul(at, lab)      # in-weight from label-1 neighbors
    same_neg = ad.matmul(at, inv)      # in-weight from label-0 neighbors
    matched = ad.add(ad.mul(lab, same_pos), ad.mul(inv, same_neg))

    ones_col = Tensor(np.ones((n, 1)))
    in_weight = ad.matmul(at, ones_col)                  # (N, 1)
    alive = (in_weight.data > 0.0).astype(np.float64)    # constant by design
    n_alive = int(alive.sum())

    # vacuous rows: denominator forced to 1, ratio masked to 0
    pad = Tensor((1.0 - alive) @ np.ones((1, labels.shape[1])))
    alive_full = Tensor(alive @ np.ones((1, labels.shape[1])))
    total = ad.matmul(in_weight, Tensor(np.ones((1, labels.shape[1]))))
    ratios = ad.mul(ad.div(matched, ad.add(total, pad)), alive_full)

    scale = 1.0 / n_alive if n_alive else 0.0
    mean_row = ad.matmul(Tensor(alive.T * scale), ratios)  # (1, P)
    return mean_row, n_alive


def homophily_ratio(adjacency, labels, direction="in", return_vacuous=False):
    """Extended weighted homophily ratio for one binary labeling.

    adjacency: (N, N) Tensor or array with nonnegative weights.
    labels: length-N binary vector.  direction selects whether a node's
    neighborhood is its in-edges (default) or out-edges.  Returns a scalar
    Tensor; with return_vacuous=True, also the count of excluded nodes.
    """
    a = _as_tensor(adjacency)
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    if a.data.ndim != 2 or a.data.shape[0] != a.data.shape[1]:
        raise DataError(f"adjacency must be square, got {a.data.shape}")
    if labels.shape[0] != a.data.shape[0]:
        raise DataError(
            f"labels length {labels.shape[0]} does not match {a.data.shape[0]} nodes"
        )
    _check_binary(labels, "labels")
    if direction not in ("in", "out"):
        raise DataError(f"direction must be 'in' or 'out', got {direction!r}")
    if direction == "out":
        a = ad.transpose(a)

    mean_row, n_alive = _ratio_columns(a, labels.reshape(-1, 1))
    if n_alive == 0:
        # edgeless graph: neutral ratio 1 so the loss contribution vanishes
        value = ad.add(ad.mul(ad.tsum(a), 0.0), 1.0)
    else:
        value = ad.reshape(mean_row, ())
    if return_vacuous:
        return value, a.data.shape[0] - n_alive
    return value


def homophily_loss(adjacency, windows):
    """Squared deviation of the homophily ratio from 1, summed over every
    (slot, category) labeling and averaged over the batch.

    windows: (N, C, K) or (B, N, C, K) binary array.  Label pairs where the
    whole graph is vacuous contribute zero.  Returns a scalar Tensor wired for
    gradients with respect to the adjacency.
    """
    a = _as_tensor(adjacency)
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim == 3:
        w = w[np.newaxis]
    if w.ndim != 4:
        raise DataError(f"windows must have 3 or 4 axes, got shape {w.shape}")
    batch, n, n_cat, k = w.shape
    if n != a.data.shape[0]:
        raise DataError(f"windows have {n} regions but adjacency has {a.data.shape[0]}")
    _check_binary(w, "window labels")

    # columns: one labeling per (sample, slot, category)
    cols = w.transpose(1, 0, 3, 2).reshape(n, batch * k * n_cat)
    mean_row, n_alive = _ratio_columns(a, cols)
    if n_alive == 0:
        return ad.mul(ad.tsum(a), 0.0)
    dev = ad.sub(mean_row, 1.0)
    return ad.mul(ad.tsum(ad.mul(dev, dev)), 1.0 / batch)


@dataclass
class HomophilyReport:
    """Per-labeling homophily of a graph over one window of labels."""

    per_slot_category: np.ndarray  # (K, C) ratios
    mean: float
    loss: float
    vacuous_nodes: int

    def to_dict(self):
        return {
            "per_slot_category": [[float(v) for v in row] for row in self.per_slot_category],
            "mean": self.mean,
            "loss": self.loss,
            "vacuous_nodes": self.vacuous_nodes,
        }


def ratio_profile(adjacency, labels_matrix):
    """Plain-numpy homophily ratios for each label column (no gradients).

    adjacency: (N, N) array; labels_matrix: (N, P) binary.  Returns (ratios
    (P,), n_vacuous).  With an edgeless graph every node is vacuous and the
    ratios take the neutral value 1.
    """
    a = np.asarray(adjacency, dtype=np.float64)
    lab = np.asarray(labels_matrix, dtype=np.float64)
    at = a.T
    in_weight = at.sum(axis=1, keepdims=True)
    alive = in_weight[:, 0] > 0.0
    n_alive = int(alive.sum())
    if n_alive == 0:
        return np.ones(lab.shape[1]), a.shape[0]
    matched = lab * (at @ lab) + (1.0 - lab) * (at @ (1.0 - lab))
    ratios = np.zeros_like(matched)
    np.divide(matched, in_weight, out=ratios, where=in_weight > 0.0)
    return ratios[alive].mean(axis=0), a.shape[0] - n_alive


def homophily_loss_value(adjacency, windows):
    """Plain-numpy value of homophily_loss (no gradient graph)."""
    a = adjacency.data if isinstance(adjacency, Tensor) else np.asarray(adjacency, float)
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim == 3:
        w = w[np.newaxis]
    batch, n, n_cat, k = w.shape
    cols = w.transpose(1, 0, 3, 2).reshape(n, batch * k * n_cat)
    ratios, _ = ratio_profile(a, cols)
    return float(((ratios - 1.0) ** 2).sum() / batch)


def homophily_report(adjacency, window):
    """Summarize homophily of `adjacency` against one (N, C, K) label window."""
    a = adjacency.data if isinstance(adjacency, Tensor) else np.asarray(adjacency, float)
    w = np.asarray(window, dtype=np.float64)
    if w.ndim != 3:
        raise DataError(f"window must be (regions, categories, slots), got {w.shape}")
    n, n_cat, k = w.shape
    _check_binary(w, "window labels")
    cols = w.transpose(2, 1, 0).reshape(k * n_cat, n).T  # (N, K*C), slot-major
    ratios, vac = ratio_profile(a, cols)
    grid = ratios.reshape(k, n_cat)
    loss = float(((ratios - 1.0) ** 2).sum())
    return HomophilyReport(grid, float(ratios.mean()), loss, vac)
