"""Training engine: Adam, gradient clipping, the stepped learning-rate
schedule, the epoch loop with best-validation model selection, and JSON
checkpointing that round-trips parameters bitwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .config import RunConfig, config_from_dict, config_to_dict
from .data import CrimeTensor, chrono_split, window_dataset
from .dependency import init_crime_embedding_pca
from .exceptions import CheckpointError, ConfigError, DataError, NumericalError
from .homophily import ratio_profile
from .metrics import binarize, f1_scores
from .network import HagenNetwork

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_VERSION = 1

HISTORY_HEADER = "epoch,lr,crime_loss,homo_loss,val_micro_f1,val_macro_f1,mean_homophily"


class AdamState:
    """First/second moment accumulators keyed by parameter name."""

    def __init__(self, params):
        self.step_count = 0
        self.m = {p.name: np.zeros_like(p.data) for p in params}
        self.v = {p.name: np.zeros_like(p.data) for p in params}

    def matches(self, params):
        names = {p.name for p in params}
        return names == set(self.m) and all(
            self.m[p.name].shape == p.data.shape for p in params
        )


def adam_step(params, state, lr):
    """One Adam update from the gradients currently on the parameters.

    Gradients are left intact (callers zero them explicitly).  A non-finite
    gradient aborts with the offending parameter named.
    """
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - ADAM_BETA1 ** t
    bc2 = 1.0 - ADAM_BETA2 ** t
    for p in params:
        g = p.grad
        if g is None:
            continue
        if not np.isfinite(g).all():
            raise NumericalError(f"non-finite gradient in parameter '{p.name}'")
        m = state.m[p.name]
        v = state.v[p.name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * np.square(g)
        update = (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        p.tensor.data -= lr * update


def clip_gradients(params, max_norm):
    """Scale all gradients down when their global L2 norm exceeds max_norm.

    Returns the pre-clip norm.  A max_norm of None or 0 disables clipping.
    """
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.square(p.grad).sum())
    norm = float(np.sqrt(total))
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad[...] *= scale
    return norm


def lr_schedule(epoch, base_lr, decay, milestones):
    """Step decay: base_lr * decay^(number of milestones <= epoch)."""
    hits = sum(1 for m in milestones if m <= epoch)
    return base_lr * decay ** hits


@dataclass
class Checkpoint:
    """Self-contained snapshot: config, dataset constants, parameter arrays
    and optimizer state."""

    config: dict
    params: dict
    adam_t: int = 0
    adam_m: dict = field(default_factory=dict)
    adam_v: dict = field(default_factory=dict)

    @classmethod
    def capture(cls, network, run_config, adam=None, pretrained=None):
        cfg = config_to_dict(run_config) if isinstance(run_config, RunConfig) else dict(run_config)
        cfg = dict(cfg)
        cfg["dataset"] = {
            "num_regions": network.n_regions,
            "num_categories": network.n_categories,
            "seed": network.seed,
            "pretrained": None if pretrained is None else np.asarray(pretrained).tolist(),
            "fixed_graph": (
                None if network.fixed_graph is None else network.fixed_graph.tolist()
            ),
        }
        params = {p.name: p.data.copy() for p in network.parameters()}
        if adam is None:
            return cls(config=cfg, params=params)
        return cls(
            config=cfg,
            params=params,
            adam_t=adam.step_count,
            adam_m={k: v.copy() for k, v in adam.m.items()},
            adam_v={k: v.copy() for k, v in adam.v.items()},
        )

    def run_config(self):
        raw = {k: v for k, v in self.config.items() if k != "dataset"}
        return config_from_dict(raw)

    def build_network(self):
        """Reconstruct the network and load the stored parameters into it."""
        ds = self.config.get("dataset", {})
        run_cfg = self.run_config()
        pretrained = ds.get("pretrained")
        fixed_graph = ds.get("fixed_graph")
        network = HagenNetwork(
            n_regions=int(ds["num_regions"]),
            n_categories=int(ds["num_categories"]),
            model_cfg=run_cfg.model,
            seed=int(ds.get("seed", 0)),
            pretrained=None if pretrained is None else np.asarray(pretrained, dtype=np.float64),
            fixed_graph=None if fixed_graph is None else np.asarray(fixed_graph, dtype=np.float64),
            ablation=run_cfg.train.ablation,
        )
        load_parameters(network, self.params)
        return network


def load_parameters(network, arrays):
    """Copy named arrays into the network's parameters, shape-checked."""
    pmap = network.param_map()
    missing = set(pmap) - set(arrays)
    extra = set(arrays) - set(pmap)
    if missing or extra:
        raise CheckpointError(
            f"parameter names do not match network: missing={sorted(missing)} "
            f"unexpected={sorted(extra)}"
        )
    for name, param in pmap.items():
        arr = np.asarray(arrays[name], dtype=np.float64)
        if arr.shape != param.data.shape:
            raise CheckpointError(
                f"parameter '{name}' has shape {arr.shape}, expected {param.data.shape}"
            )
        param.tensor.data = arr.copy()


def _encode_array(arr):
    a = np.asarray(arr, dtype=np.float64)
    return {"shape": list(a.shape), "data": a.reshape(-1).tolist()}


def _decode_array(obj, what):
    if not isinstance(obj, dict) or "shape" not in obj or "data" not in obj:
        raise CheckpointError(f"malformed array entry for {what}")
    shape = tuple(int(s) for s in obj["shape"])
    data = np.asarray(obj["data"], dtype=np.float64)
    expected = int(np.prod(shape)) if shape else 1
    if data.size != expected:
        raise CheckpointError(
            f"array {what}: {data.size} values do not fill shape {shape}"
        )
    return data.reshape(shape)


def save_checkpoint(ckpt, path):
    """Write a checkpoint as JSON.  Float serialization uses shortest
    round-trip repr, so reloading reproduces every value bitwise."""
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "config": ckpt.config,
        "params": {name: _encode_array(arr) for name, arr in sorted(ckpt.params.items())},
        "adam": {
            "t": ckpt.adam_t,
            "m": {name: _encode_array(arr) for name, arr in sorted(ckpt.adam_m.items())},
            "v": {name: _encode_array(arr) for name, arr in sorted(ckpt.adam_v.items())},
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint {path}: unsupported format_version "
            f"{doc.get('format_version') if isinstance(doc, dict) else doc!r}"
        )
    for key in ("config", "params", "adam"):
        if key not in doc:
            raise CheckpointError(f"checkpoint {path} missing '{key}'")
    params = {
        name: _decode_array(obj, f"params.{name}") for name, obj in doc["params"].items()
    }
    adam = doc["adam"]
    return Checkpoint(
        config=doc["config"],
        params=params,
        adam_t=int(adam.get("t", 0)),
        adam_m={n: _decode_array(o, f"adam.m.{n}") for n, o in adam.get("m", {}).items()},
        adam_v={n: _decode_array(o, f"adam.v.{n}") for n, o in adam.get("v", {}).items()},
    )


@dataclass
class TrainingData:
    """In-memory inputs to a training run."""

    tensor: CrimeTensor
    graph: np.ndarray = None
    pretrained: np.ndarray = None


@dataclass
class TrainResult:
    best: Checkpoint
    last: Checkpoint
    history: list
    best_epoch: int
    best_val_macro_f1: float
    network: HagenNetwork


def history_row(epoch, lr, crime, homo, micro, macro, mean_h):
    return {
        "epoch": epoch,
        "lr": lr,
        "crime_loss": crime,
        "homo_loss": homo,
        "val_micro_f1": micro,
        "val_macro_f1": macro,
        "mean_homophily": mean_h,
    }


def write_history(history, path):
    """History CSV with full-precision floats; byte-stable for a given run."""
    with open(path, "w", newline="") as fh:
        fh.write(HISTORY_HEADER + "\n")
        for row in history:
            fh.write(
                f"{row['epoch']},{row['lr']!r},{row['crime_loss']!r},"
                f"{row['homo_loss']!r},{row['val_micro_f1']!r},"
                f"{row['val_macro_f1']!r},{row['mean_homophily']!r}\n"
            )


def predict_batches(network, inputs, batch_size):
    """Forward pass over (S, N, C, K) windows in batches; returns (S, N, C)."""
    if inputs.shape[0] == 0:
        return np.zeros((0, network.n_regions, network.n_categories))
    chunks = []
    for lo in range(0, inputs.shape[0], batch_size):
        probs, _ = network.forward(inputs[lo:lo + batch_size])
        chunks.append(probs.data)
    return np.concatenate(chunks, axis=0)


def range_labels(tensor, slot_range):
    """(N, S*C) label columns for every (slot, category) pair in the range."""
    occ = tensor.occurrences if isinstance(tensor, CrimeTensor) else np.asarray(tensor)
    start, stop = slot_range
    block = occ[:, :, start:stop].astype(np.float64)
    n = block.shape[0]
    return block.transpose(0, 2, 1).reshape(n, -1)


def mean_homophily(adjacency, tensor, slot_range):
    """Mean homophily ratio of a graph over all (slot, category) labelings in
    a slot range; 0.0 when the graph has no edges."""
    labels = range_labels(tensor, slot_range)
    adjacency = np.asarray(adjacency, dtype=np.float64)
    if labels.shape[1] == 0 or not np.count_nonzero(adjacency):
        return 0.0
    ratios, _ = ratio_profile(adjacency, labels)
    return float(np.mean(ratios))


def train(run_config, data):
    """Run the full training loop.

    run_config: RunConfig; data: TrainingData.  Deterministic for a fixed
    (config, data): parameter init, shuffling and therefore the whole history
    depend only on the seed.  Model selection keeps the epoch with the best
    validation Macro-F1 (earliest wins ties).
    """
    cfg = run_config.validate()
    tc = cfg.train
    tensor = data.tensor
    occ = tensor.occurrences
    n, c, t = occ.shape

    splits = chrono_split(t, tc.train_frac, tc.val_frac, min_slots=tc.window + 1)
    train_range, val_range, test_range = splits
    train_x, train_y = window_dataset(tensor, tc.window, train_range)
    val_x, val_y = window_dataset(tensor, tc.window, val_range)
    if train_x.shape[0] == 0:
        raise DataError("training split yields no windows")

    crime_init = init_crime_embedding_pca(
        occ[:, :, train_range[0]:train_range[1]], cfg.model.embed_dim, seed=tc.seed
    )
    fixed_graph = data.graph if tc.ablation.no_graph_learning else None
    if tc.ablation.no_graph_learning and data.graph is None:
        raise ConfigError("disabling graph learning requires a graph")

    network = HagenNetwork(
        n, c, cfg.model, seed=tc.seed,
        pretrained=data.pretrained,
        crime_init=crime_init,
        fixed_graph=fixed_graph,
        ablation=tc.ablation,
    )
    params = network.parameters()
    adam = AdamState(params)
    shuffle_rng = np.random.default_rng([tc.seed, 104729])

    history = []
    best_ckpt = Checkpoint.capture(network, cfg, adam, pretrained=data.pretrained)
    best_macro = -1.0
    best_epoch = -1

    for epoch in range(tc.epochs):
        lr = lr_schedule(epoch, tc.learning_rate, tc.lr_decay, tc.lr_milestones)
        order = shuffle_rng.permutation(train_x.shape[0])
        crime_sum = 0.0
        homo_sum = 0.0
        seen = 0
        for lo in range(0, order.size, tc.batch_size):
            idx = order[lo:lo + tc.batch_size]
            network.zero_grad()
            total, breakdown, _, _ = network.loss(
                train_x[idx], train_y[idx], tc.homophily_weight
            )
            if not np.isfinite(breakdown.total):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch} (crime={breakdown.crime}, "
                    f"homophily={breakdown.homophily})"
                )
            ad.backward(total)
            clip_gradients(params, tc.clip_norm)
            adam_step(params, adam, lr)
            crime_sum += breakdown.crime * idx.size
            homo_sum += breakdown.homophily * idx.size
            seen += idx.size

        val_micro = 0.0
        val_macro = 0.0
        if val_x.shape[0] > 0:
            val_probs = predict_batches(network, val_x, tc.batch_size)
            report = f1_scores(
                binarize(val_probs, cfg.eval.threshold),
                val_y.astype(np.uint8),
                category_axis=2,
            )
            val_micro = report.micro_f1
            val_macro = report.macro_f1
        adj = network.adjacency().data
        mean_h = mean_homophily(adj, tensor, val_range)
        history.append(history_row(
            epoch, lr, crime_sum / seen, homo_sum / seen, val_micro, val_macro, mean_h
        ))

        if val_macro > best_macro:
            best_macro = val_macro
            best_epoch = epoch
            best_ckpt = Checkpoint.capture(network, cfg, adam, pretrained=data.pretrained)

    last_ckpt = Checkpoint.capture(network, cfg, adam, pretrained=data.pretrained)
    if best_epoch < 0:
        best_ckpt = last_ckpt
    return TrainResult(
        best=best_ckpt,
        last=last_ckpt,
        history=history,
        best_epoch=best_epoch,
        best_val_macro_f1=max(best_macro, 0.0),
        network=network,
    )


def evaluate_range(network, tensor, window, slot_range, threshold, batch_size=32):
    """Windowed one-step-ahead evaluation over a slot range.

    Returns (MetricsReport, probs (S, N, C), targets (S, N, C), target_slots).
    """
    inputs, targets = window_dataset(tensor, window, slot_range)
    if inputs.shape[0] == 0:
        raise DataError(
            f"slot range {slot_range} with window {window} yields no evaluation samples"
        )
    probs = predict_batches(network, inputs, batch_size)
    report = f1_scores(
        binarize(probs, threshold), targets.astype(np.uint8), category_axis=2
    )
    target_slots = np.arange(slot_range[0] + window, slot_range[1])
    return report, probs, targets, target_slots
