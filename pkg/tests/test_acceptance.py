"""Package acceptance gate.

Ten numbered criteria, one test each, covering gradient integrity, structural
invariants, oracle equivalences, scaled-down training experiments, generator
statistics, reproducibility, and the external-data hook.  Every test prints a
single "criterion N PASS/FAIL" line before asserting, so the verdict survives
in captured output either way.
"""

import json
import time

import numpy as np
import pytest

from hagen.autodiff import Tensor
from hagen.cli import main as cli_main
from hagen.config import ModelConfig, RunConfig, TrainConfig
from hagen.data import SynthSpec, chrono_split, synth_generate
from hagen.diffusion import DirectionWeights, diffusion_conv, transition_matrices
from hagen.gradcheck import run_suite
from hagen.graphlearn import compute_adjacency, embed_regions, sparsify_topk
from hagen.homophily import homophily_loss_value, homophily_ratio, ratio_profile
from hagen.metrics import f1_scores
from hagen.training import (
    TrainingData, evaluate_range, load_checkpoint, mean_homophily,
    save_checkpoint, train, write_history,
)


def _verdict(number, ok, detail):
    print(f"criterion {number} {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


def test_criterion_01_gradient_integrity():
    t0 = time.monotonic()
    results = run_suite(base_seed=0, n_seeds=10)
    elapsed = time.monotonic() - t0
    worst = max(r["worst_gap"] for r in results)
    ok = all(r["passed"] for r in results) and worst < 1e-4 and elapsed < 60.0
    assert _verdict(1, ok, f"{len(results)} module losses, worst gap {worst:.3e}, "
                           f"{elapsed:.1f}s"), (results, elapsed)


def test_criterion_02_structural_invariants():
    worst_entry = 0.0
    for draw in range(100):
        rng = np.random.default_rng(1000 + draw)
        n = int(rng.integers(4, 13))
        emb = embed_regions(n, 4, alpha=3.0, seed=1000 + draw)
        a = compute_adjacency(emb).data
        assert np.array_equal(a * a.T, np.zeros((n, n))), "unidirectionality"
        assert np.array_equal(np.diag(a), np.zeros(n)), "diagonal"
        assert np.all(a >= 0.0) and np.all(a < 1.0), "range"
        k = int(rng.integers(1, n))
        sparse = sparsify_topk(compute_adjacency(emb), k).weights.data
        assert np.count_nonzero(sparse, axis=1).max() <= k, "row budget"
        worst_entry = max(worst_entry, float(a.max(initial=0.0)))
    assert _verdict(2, True, f"100 draws, max entry {worst_entry:.4f} < 1")


def test_criterion_03_homophily_oracle():
    def brute(a, labels):
        per_node = []
        for v in range(a.shape[0]):
            total = a[:, v].sum()
            if total <= 0.0:
                continue
            same = sum(a[u, v] for u in range(a.shape[0]) if labels[u] == labels[v])
            per_node.append(same / total)
        return sum(per_node) / len(per_node) if per_node else 1.0

    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(2000 + seed)
        n = int(rng.integers(3, 21))
        a = rng.uniform(0.1, 2.0, (n, n)) * (rng.random((n, n)) < 0.35)
        np.fill_diagonal(a, 0.0)
        labels = rng.integers(0, 2, n)
        got = homophily_ratio(a, labels).item()
        worst = max(worst, abs(got - brute(a, labels)))
        for c in (1e-6, 3.7, 1e6):
            assert abs(homophily_ratio(c * a, labels).item() - got) < 1e-12, "scale"
    assert worst < 1e-10, worst

    # loss is zero exactly when every non-vacuous labeling ratio is 1
    rng = np.random.default_rng(7)
    a = rng.uniform(0.2, 1.0, (6, 6)) * (rng.random((6, 6)) < 0.5)
    np.fill_diagonal(a, 0.0)
    perfect = np.ones((6, 2, 3))          # constant labels: every ratio 1
    assert homophily_loss_value(a, perfect[np.newaxis]) == 0.0
    mixed = perfect.copy()
    mixed[0, 0, 0] = 0.0
    cols = mixed[np.newaxis].transpose(1, 0, 3, 2).reshape(6, -1)
    ratios, _ = ratio_profile(a, cols)
    loss = homophily_loss_value(a, mixed[np.newaxis])
    assert (loss == 0.0) == bool(np.all(ratios == 1.0))
    assert _verdict(3, True, f"100 seeds, worst enumeration gap {worst:.2e}")


def test_criterion_04_diffusion_correctness():
    worst_row = worst_sum = worst_lin = 0.0
    for seed in range(20):
        rng = np.random.default_rng(3000 + seed)
        n = int(rng.integers(3, 7))
        a = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < 0.6)
        np.fill_diagonal(a, 0.0)
        ts = transition_matrices(a, max_step=2)
        assert np.array_equal(ts.forward[0].data, np.eye(n)), "S_0"
        assert np.array_equal(ts.backward[0].data, np.eye(n)), "S_0"
        for i in range(n):
            if a[i].sum() > 0:
                worst_row = max(worst_row, abs(ts.forward[1].data[i].sum() - 1.0))
            if a[:, i].sum() > 0:
                worst_row = max(worst_row, abs(ts.backward[1].data[i].sum() - 1.0))

        dw = DirectionWeights(n)
        dw.raw.data = rng.normal(size=n)
        theta = rng.normal(size=(3, 2, 3, 2))
        x1 = rng.normal(size=(n, 3))
        x2 = rng.normal(size=(n, 3))
        f = lambda x: diffusion_conv(Tensor(x), ts, Tensor(theta), direction=dw).data

        gate = dw.effective().data
        expected = np.zeros((n, 2))
        for m in range(3):
            expected += ts.forward[m].data @ x1 @ theta[:, :, m, 0]
            expected += np.diag(gate) @ ts.backward[m].data @ x1 @ theta[:, :, m, 1]
        worst_sum = max(worst_sum, float(np.max(np.abs(f(x1) - expected))))
        combo = f(1.7 * x1 - 0.4 * x2) - (1.7 * f(x1) - 0.4 * f(x2))
        worst_lin = max(worst_lin, float(np.max(np.abs(combo))))
    ok = worst_row < 1e-10 and worst_sum < 1e-10 and worst_lin < 1e-9
    assert _verdict(4, ok, f"row-sum {worst_row:.2e}, summation {worst_sum:.2e}, "
                           f"linearity {worst_lin:.2e}"), (worst_row, worst_sum, worst_lin)


def test_criterion_05_metric_oracle():
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(4000 + seed)
        n, c, t = int(rng.integers(2, 7)), int(rng.integers(1, 5)), int(rng.integers(2, 9))
        pred = (rng.random((n, c, t)) < 0.5).astype(np.uint8)
        truth = (rng.random((n, c, t)) < 0.5).astype(np.uint8)
        report = f1_scores(pred, truth, category_axis=1)

        f1s, tps, fps, fns = [], 0, 0, 0
        for cat in range(c):
            tp = int((pred[:, cat] & truth[:, cat]).sum())
            fp = int((pred[:, cat] & (1 - truth[:, cat])).sum())
            fn = int(((1 - pred[:, cat]) & truth[:, cat]).sum())
            denom = 2 * tp + fp + fn
            f1s.append(2 * tp / denom if denom else 0.0)
            tps, fps, fns = tps + tp, fps + fp, fns + fn
        micro = 2 * tps / (2 * tps + fps + fns) if 2 * tps + fps + fns else 0.0
        worst = max(worst, abs(report.micro_f1 - micro),
                    abs(report.macro_f1 - float(np.mean(f1s))))

        perfect = f1_scores(truth, truth, category_axis=1)
        assert perfect.micro_f1 == 1.0 or truth.sum() == 0
        flipped = f1_scores(1 - truth, truth, category_axis=1)
        assert flipped.micro_f1 == 0.0
    assert worst < 1e-12, worst
    assert _verdict(5, True, f"100 instances, worst counting gap {worst:.2e}")


@pytest.mark.slow
def test_criterion_06_overfit():
    spec = SynthSpec(n_regions=10, n_categories=3, n_slots=200, n_clusters=2,
                     period=8, flip_prob=0.0, seed=0)
    synth = synth_generate(spec)
    cfg = RunConfig(train=TrainConfig(epochs=200, window=7, seed=0))
    t0 = time.monotonic()
    result = train(cfg, TrainingData(tensor=synth.tensor))
    elapsed = time.monotonic() - t0

    first = result.history[0]["crime_loss"]
    last = result.history[-1]["crime_loss"]
    train_range, _, _ = chrono_split(200, 0.8125, 0.0625, min_slots=8)
    report, _, _, _ = evaluate_range(result.network, synth.tensor, 7, train_range, 0.5)
    ok = last < 0.25 * first and report.micro_f1 >= 0.95 and elapsed < 600.0
    assert _verdict(6, ok, f"BCE {first:.3f} -> {last:.5f} "
                           f"({100 * last / first:.2f}% of epoch 1), train Micro-F1 "
                           f"{report.micro_f1:.4f}, {elapsed / 60:.1f} min"), \
        (first, last, report.micro_f1, elapsed)


@pytest.mark.slow
def test_criterion_07_homophily_constraint_efficacy():
    n, clusters, t_slots = 20, 4, 400
    spec_seedless = dict(n_regions=n, n_categories=3, n_slots=t_slots,
                         n_clusters=clusters, period=8, flip_prob=0.1)
    # a mismatched prior: ring-distance features, while clusters are round-robin,
    # so feature-similar regions are almost never cluster-mates
    ring = np.minimum(np.abs(np.arange(n)[:, None] - np.arange(n)[None, :]),
                      n - np.abs(np.arange(n)[:, None] - np.arange(n)[None, :]))
    prior = 3.0 * np.exp(-ring / 1.5)
    model = ModelConfig(embed_dim=10, hidden_dim=16, rnn_layers=2,
                        diffusion_steps=2, top_k=10, alpha=3.0, decoder_layers=2)
    _, _, test_range = chrono_split(t_slots, 0.8125, 0.0625, min_slots=8)

    t0 = time.monotonic()
    gaps, f1_pairs = [], []
    for seed in range(5):
        synth = synth_generate(SynthSpec(seed=seed, **spec_seedless))
        scores = {}
        for lam in (0.01, 0.0):
            cfg = RunConfig(model=model, train=TrainConfig(
                epochs=30, lr_milestones=(25,), seed=seed, homophily_weight=lam))
            result = train(cfg, TrainingData(tensor=synth.tensor, pretrained=prior))
            ratio = mean_homophily(result.network.adjacency().data,
                                   synth.tensor, test_range)
            best = result.best.build_network()
            report, _, _, _ = evaluate_range(best, synth.tensor, 7, test_range, 0.5)
            scores[lam] = (ratio, report.micro_f1)
        gaps.append(scores[0.01][0] - scores[0.0][0])
        f1_pairs.append((scores[0.01][1], scores[0.0][1]))
    elapsed = time.monotonic() - t0

    gap = float(np.median(gaps))
    f1_with = float(np.median([p[0] for p in f1_pairs]))
    f1_without = float(np.median([p[1] for p in f1_pairs]))
    # known shortfall at weight 0.01: the ratio gradient is scale-invariant,
    # so it starves as the crime loss inflates total adjacency mass, and the
    # measured per-seed gaps stay under ~0.03.  The target is asserted as
    # stated rather than loosened to a reachable number; at weight 1.0 the
    # same wiring moves the ratio well past the target.
    ok = gap >= 0.10 and f1_with >= f1_without - 0.01 and elapsed < 1800.0
    assert _verdict(7, ok, f"median ratio gap {gap:+.4f} (need >= 0.10), "
                           f"Micro-F1 {f1_with:.4f} vs {f1_without:.4f}, "
                           f"{elapsed / 60:.1f} min"), (gaps, f1_pairs, elapsed)


def test_criterion_08_generator_statistics():
    spec = SynthSpec(n_regions=20, n_categories=3, n_slots=400, n_clusters=4,
                     period=8, flip_prob=0.1, seed=0)
    synth = synth_generate(spec)
    ratio = mean_homophily(synth.graph, synth.tensor, (0, 400))
    ok = abs(ratio - 0.82) <= 0.05
    assert _verdict(8, ok, f"planted-graph mean homophily {ratio:.4f} "
                           f"(target 0.82 +/- 0.05)"), ratio


def test_criterion_09_determinism_and_persistence(tmp_path):
    spec = SynthSpec(n_regions=6, n_categories=2, n_slots=128, n_clusters=2,
                     period=8, flip_prob=0.05, seed=0)
    synth = synth_generate(spec)
    model = ModelConfig(embed_dim=4, hidden_dim=4, rnn_layers=1,
                        diffusion_steps=1, top_k=3, alpha=3.0, decoder_layers=2)
    cfg = RunConfig(model=model, train=TrainConfig(epochs=2, window=7, seed=5))

    histories = []
    results = []
    for run in range(2):
        result = train(cfg, TrainingData(tensor=synth.tensor))
        path = tmp_path / f"history_{run}.csv"
        write_history(result.history, path)
        histories.append(path.read_bytes())
        results.append(result)
    byte_identical = histories[0] == histories[1]

    ckpt_path = tmp_path / "best.json"
    save_checkpoint(results[0].best, ckpt_path)
    rebuilt = load_checkpoint(ckpt_path).build_network()
    occ = synth.tensor.occurrences.astype(np.float64)
    w = occ[np.newaxis, :, :, -8:-1]
    y = occ[np.newaxis, :, :, -1]
    original = results[0].best.build_network()
    _, bd_a, _, _ = original.loss(w, y, homophily_weight=0.01)
    _, bd_b, _, _ = rebuilt.loss(w, y, homophily_weight=0.01)
    exact = (bd_a.total == bd_b.total and bd_a.crime == bd_b.crime
             and bd_a.homophily == bd_b.homophily)
    ok = byte_identical and exact
    assert _verdict(9, ok, f"history byte-identical: {byte_identical}; "
                           f"round-trip loss exact: {exact}"), (byte_identical, exact)


def test_criterion_10_benchmark_hook(tmp_path, capsys):
    # externally supplied data uses the documented events.csv/meta.json layout;
    # a dataset spanning several calendar months exercises the per-month report
    data = tmp_path / "city"
    code = cli_main([
        "synth", "--out", str(data), "--regions", "6", "--categories", "2",
        "--slots", "128", "--clusters", "2", "--period", "8",
        "--flip-prob", "0.05", "--seed", "0",
    ])
    assert code == 0
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({
        "model": {"embed_dim": 4, "hidden_dim": 4, "rnn_layers": 1,
                  "diffusion_steps": 1, "top_k": 3},
        "train": {"epochs": 1, "window": 7, "seed": 0},
    }))
    run = tmp_path / "run"
    assert cli_main(["train", "--config", str(cfg), "--data", str(data),
                     "--out", str(run)]) == 0
    out = tmp_path / "eval"
    assert cli_main(["eval", "--checkpoint", str(run / "best.ckpt.json"),
                     "--data", str(data), "--split", "test",
                     "--out", str(out)]) == 0
    capsys.readouterr()

    doc = json.loads((out / "metrics.json").read_text())
    months = doc.get("per_month", [])
    ok = (len(months) >= 1
          and all(0.0 <= row["micro_f1"] <= 1.0 and 0.0 <= row["macro_f1"] <= 1.0
                  for row in months))
    assert _verdict(10, ok, f"end-to-end run reported {len(months)} test month(s)"), doc
