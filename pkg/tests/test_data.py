"""Event ingestion, splitting, windowing, graph files, and the synthetic generator."""

import numpy as np
import pytest

from hagen.data import (
    DatasetMeta,
    SynthSpec,
    chrono_split,
    ingest_events,
    load_clusters,
    load_graph,
    load_meta,
    save_events,
    save_graph,
    save_meta,
    synth_generate,
    window_dataset,
)
from hagen.exceptions import ConfigError, DataError
from hagen.homophily import ratio_profile


def _meta(n=3, c=2, t=5):
    return DatasetMeta(
        num_regions=n,
        num_categories=c,
        num_slots=t,
        slot_duration_hours=24.0,
        region_names=[f"r{i}" for i in range(n)],
        category_names=[f"c{i}" for i in range(c)],
    )


def _write(path, text):
    path.write_text(text)
    return path


# -- ingestion ----------------------------------------------------------------


def test_single_event(tmp_path):
    p = _write(tmp_path / "e.csv", "time_slot,region_id,category_id\n2,1,0\n")
    tensor = ingest_events(p, _meta())
    assert tensor.occurrences.sum() == 1
    assert tensor.occurrences[1, 0, 2] == 1


def test_duplicate_rows_idempotent(tmp_path):
    once = _write(tmp_path / "a.csv", "time_slot,region_id,category_id\n2,1,0\n")
    twice = _write(tmp_path / "b.csv", "time_slot,region_id,category_id\n2,1,0\n2,1,0\n")
    assert np.array_equal(
        ingest_events(once, _meta()).occurrences,
        ingest_events(twice, _meta()).occurrences,
    )


def test_empty_events_file(tmp_path):
    p = _write(tmp_path / "e.csv", "time_slot,region_id,category_id\n")
    assert ingest_events(p, _meta()).occurrences.sum() == 0


def test_out_of_range_names_line_number(tmp_path):
    p = _write(tmp_path / "e.csv", "time_slot,region_id,category_id\n0,0,0\n9,0,0\n")
    with pytest.raises(DataError) as err:
        ingest_events(p, _meta())
    assert ":3:" in str(err.value)  # second data row is file line 3
    assert "time_slot 9" in str(err.value)


def test_malformed_row_names_line_number(tmp_path):
    p = _write(tmp_path / "e.csv", "time_slot,region_id,category_id\n0,zero,0\n")
    with pytest.raises(DataError) as err:
        ingest_events(p, _meta())
    assert ":2:" in str(err.value)


def test_wrong_header_rejected(tmp_path):
    p = _write(tmp_path / "e.csv", "slot,region,cat\n0,0,0\n")
    with pytest.raises(DataError):
        ingest_events(p, _meta())


def test_events_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    occ = (rng.random((4, 3, 6)) < 0.3).astype(np.uint8)
    meta = _meta(4, 3, 6)
    save_events(occ, tmp_path / "e.csv")
    back = ingest_events(tmp_path / "e.csv", meta)
    assert np.array_equal(back.occurrences, occ)


# -- metadata -----------------------------------------------------------------


def test_meta_round_trip(tmp_path):
    meta = _meta()
    save_meta(meta, tmp_path / "meta.json")
    loaded = load_meta(tmp_path / "meta.json")
    assert loaded == meta


def test_meta_missing_and_unknown_keys(tmp_path):
    _write(tmp_path / "m1.json", '{"num_regions": 2}')
    with pytest.raises(DataError) as err:
        load_meta(tmp_path / "m1.json")
    assert "missing" in str(err.value)

    good = _meta().to_dict()
    good["surprise"] = 1
    import json

    _write(tmp_path / "m2.json", json.dumps(good))
    with pytest.raises(DataError) as err:
        load_meta(tmp_path / "m2.json")
    assert "surprise" in str(err.value)


def test_meta_name_length_validation():
    with pytest.raises(DataError):
        DatasetMeta(2, 2, 5, 24.0, ["only_one"], ["a", "b"]).validate()


# -- chronological split ------------------------------------------------------


def test_split_mirrors_month_fractions():
    assert chrono_split(160, 0.8125, 0.0625) == ((0, 130), (130, 140), (140, 160))


def test_split_small_case():
    assert chrono_split(8, 0.5, 0.25) == ((0, 4), (4, 6), (6, 8))


def test_split_rejects_full_coverage():
    with pytest.raises(ConfigError):
        chrono_split(100, 0.8, 0.2)


def test_split_enforces_min_slots():
    with pytest.raises(DataError):
        chrono_split(20, 0.8, 0.1, min_slots=3)  # val gets 2 slots


def test_split_partitions_prefix():
    (a0, a1), (b0, b1), (c0, c1) = chrono_split(97, 0.61, 0.13)
    assert a0 == 0 and a1 == b0 and b1 == c0 and c1 == 97


# -- windowing ----------------------------------------------------------------


def test_window_count():
    occ = np.zeros((2, 2, 12), dtype=np.uint8)
    x, y = window_dataset(occ, 3, (0, 10))
    assert x.shape == (7, 2, 2, 3)
    assert y.shape == (7, 2, 2)


def test_window_single_sample():
    occ = np.zeros((2, 2, 10), dtype=np.uint8)
    x, y = window_dataset(occ, 9, (0, 10))
    assert x.shape[0] == 1


def test_window_targets_reconstruct_slots():
    rng = np.random.default_rng(1)
    occ = (rng.random((3, 2, 15)) < 0.4).astype(np.uint8)
    x, y = window_dataset(occ, 4, (2, 13))
    for s in range(x.shape[0]):
        assert np.array_equal(x[s], occ[:, :, 2 + s:2 + s + 4])
        assert np.array_equal(y[s], occ[:, :, 2 + s + 4])


def test_window_range_too_short():
    occ = np.zeros((2, 2, 10), dtype=np.uint8)
    with pytest.raises(DataError):
        window_dataset(occ, 5, (0, 5))


# -- graph files --------------------------------------------------------------


def test_graph_empty_file(tmp_path):
    p = _write(tmp_path / "g.csv", "src,dst,weight\n")
    assert np.array_equal(load_graph(p, 3), np.zeros((3, 3)))


def test_graph_single_edge(tmp_path):
    p = _write(tmp_path / "g.csv", "src,dst,weight\n0,1,0.5\n")
    a = load_graph(p, 3)
    assert a[0, 1] == 0.5
    assert np.count_nonzero(a) == 1


def test_graph_duplicate_last_wins_with_warning(tmp_path, caplog):
    p = _write(tmp_path / "g.csv", "src,dst,weight\n0,1,0.5\n0,1,0.9\n")
    with caplog.at_level("WARNING"):
        a = load_graph(p, 2)
    assert a[0, 1] == 0.9
    assert any("duplicate" in r.message for r in caplog.records)


def test_graph_self_loop_dropped_with_warning(tmp_path, caplog):
    p = _write(tmp_path / "g.csv", "src,dst,weight\n1,1,2.0\n0,1,1.0\n")
    with caplog.at_level("WARNING"):
        a = load_graph(p, 2)
    assert a[1, 1] == 0.0
    assert a[0, 1] == 1.0
    assert any("self-loop" in r.message for r in caplog.records)


def test_graph_negative_weight_rejected(tmp_path):
    p = _write(tmp_path / "g.csv", "src,dst,weight\n0,1,-0.5\n")
    with pytest.raises(DataError):
        load_graph(p, 2)


def test_graph_out_of_range_id(tmp_path):
    p = _write(tmp_path / "g.csv", "src,dst,weight\n0,7,1.0\n")
    with pytest.raises(DataError) as err:
        load_graph(p, 3)
    assert "dst 7" in str(err.value)


def test_graph_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    a = rng.uniform(0, 1, (5, 5)) * (rng.random((5, 5)) < 0.4)
    np.fill_diagonal(a, 0.0)
    save_graph(a, tmp_path / "g.csv")
    assert np.array_equal(load_graph(tmp_path / "g.csv", 5), a)


# -- synthetic generator ------------------------------------------------------


def test_synth_noiseless_clusters_are_identical():
    res = synth_generate(SynthSpec(n_regions=6, n_clusters=2, flip_prob=0.0, seed=3))
    occ = res.tensor.occurrences
    for b in range(2):
        members = np.nonzero(res.clusters == b)[0]
        for m in members[1:]:
            assert np.array_equal(occ[m], occ[members[0]])
    # planted graph is perfectly homophilous in every slot and category
    n, c, t = occ.shape
    cols = occ.transpose(0, 1, 2).reshape(n, c * t)
    ratios, _ = ratio_profile(res.graph, cols)
    assert np.max(np.abs(ratios - 1.0)) < 1e-12


def test_synth_singleton_clusters_have_no_edges():
    res = synth_generate(SynthSpec(n_regions=5, n_clusters=5, seed=1))
    assert res.graph.sum() == 0.0


def test_synth_homophily_matches_agreement_probability():
    spec = SynthSpec(n_regions=20, n_clusters=4, n_slots=400, flip_prob=0.1, seed=0)
    res = synth_generate(spec)
    occ = res.tensor.occurrences
    n, c, t = occ.shape
    cols = occ.reshape(n, c * t)
    ratios, _ = ratio_profile(res.graph, cols)
    expected = (1.0 - 0.1) ** 2 + 0.1 ** 2
    assert abs(ratios.mean() - expected) < 0.05


def test_synth_graph_unidirectional_within_clusters():
    res = synth_generate(SynthSpec(n_regions=9, n_clusters=3, seed=5))
    g = res.graph
    assert np.array_equal(g * g.T, np.zeros_like(g))
    for i, j in zip(*np.nonzero(g)):
        assert res.clusters[i] == res.clusters[j]
        assert i < j  # orientation rule: low index feeds high index


def test_synth_round_trip_through_files(tmp_path):
    spec = SynthSpec(n_regions=6, n_clusters=2, n_slots=30, seed=7)
    res = synth_generate(spec, out_dir=tmp_path)
    meta = load_meta(tmp_path / "meta.json")
    tensor = ingest_events(tmp_path / "events.csv", meta)
    assert np.array_equal(tensor.occurrences, res.tensor.occurrences)
    assert np.array_equal(load_graph(tmp_path / "graph.csv", 6), res.graph)
    assert np.array_equal(load_clusters(tmp_path / "clusters.csv", 6), res.clusters)


def test_synth_deterministic():
    a = synth_generate(SynthSpec(seed=11))
    b = synth_generate(SynthSpec(seed=11))
    assert np.array_equal(a.tensor.occurrences, b.tensor.occurrences)


def test_synth_spec_validation():
    with pytest.raises(ConfigError):
        SynthSpec(flip_prob=0.5).validate()
    with pytest.raises(ConfigError):
        SynthSpec(n_clusters=11, n_regions=10).validate()
