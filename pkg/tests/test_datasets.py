"""Dataset construction: normal pool, intrusion clusters, incremental sets."""

import numpy as np
import pytest

from bspnn import datasets as ds_mod
from bspnn.datasets import (
    build_clusters,
    build_incremental,
    filter_normal,
    load_cluster_table,
    load_labeled_dataset,
    subsample,
    summarize,
    write_dataset,
)
from bspnn.errors import IndexOutOfRange, UncoveredAttackName, ValidationError
from bspnn.ingest import default_asset, load_category_map

from conftest import TRAIN_SPEC, write_synthetic_kdd


@pytest.fixture(scope="module")
def category_map():
    return load_category_map(default_asset("attack_categories.csv"))


@pytest.fixture(scope="module")
def cluster_table():
    return load_cluster_table(default_asset("intrusion_clusters.txt"))


@pytest.fixture(scope="module")
def source(synth_dir, category_map):
    return load_labeled_dataset(synth_dir["train"], category_map, provenance="src")


class TestClusterTableAsset:
    def test_thirteen_disjoint_clusters(self, cluster_table):
        assert len(cluster_table.clusters) == 13
        flat = [n for names in cluster_table.clusters for n in names]
        assert len(flat) == len(set(flat)) == 22

    def test_clusters_as_printed(self, cluster_table):
        assert cluster_table.clusters[0] == ("back",)
        assert cluster_table.clusters[1] == (
            "buffer_overflow", "loadmodule", "perl", "rootkit",
        )
        assert cluster_table.clusters[3] == ("guess_passwd",)
        assert cluster_table.clusters[12] == ("spy", "smurf")

    def test_overlapping_table_rejected(self, tmp_path):
        path = tmp_path / "overlap.txt"
        lines = [f"C{i}: a{i}" for i in range(1, 14)]
        lines[5] = "C6: a1"  # repeats cluster 1's name
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValidationError):
            load_cluster_table(str(path))


class TestFilterNormal:
    def test_keeps_exactly_normals_in_order(self, source):
        norm = filter_normal(source)
        assert len(norm) == TRAIN_SPEC["normal"]
        assert np.all(norm.categories == 0)
        positions = [i for i, c in enumerate(source.categories) if c == 0]
        assert norm.lines == [source.lines[i] for i in positions]

    def test_no_normals_gives_empty(self, synth_dir, category_map, tmp_path):
        path = write_synthetic_kdd(tmp_path / "attacks.csv", {"smurf": 5}, seed=2)
        ds = load_labeled_dataset(path, category_map)
        assert len(filter_normal(ds)) == 0

    def test_all_normal_is_identity(self, category_map, tmp_path):
        path = write_synthetic_kdd(tmp_path / "norm.csv", {"normal": 7}, seed=2)
        ds = load_labeled_dataset(path, category_map)
        assert filter_normal(ds).lines == ds.lines


class TestBuildClusters:
    def test_membership_by_attack_name(self, source, cluster_table):
        clusters = build_clusters(source, cluster_table)
        assert len(clusters) == 13
        assert all(n == "back" for n in clusters[0].attack_names)
        assert len(clusters[0]) == TRAIN_SPEC["back"]
        assert all(n == "guess_passwd" for n in clusters[3].attack_names)
        assert len(clusters[3]) == TRAIN_SPEC["guess_passwd"]

    def test_union_is_attack_subset(self, source, cluster_table):
        clusters = build_clusters(source, cluster_table)
        total_attack = summarize(source).total_attack
        assert sum(len(c) for c in clusters) == total_attack
        all_lines = [line for c in clusters for line in c.lines]
        assert len(all_lines) == len(set(all_lines) & set(all_lines))
        attack_lines = {
            line for line, cat in zip(source.lines, source.categories) if cat != 0
        }
        assert set(all_lines) == attack_lines

    def test_uncovered_attack_rejected(self, category_map, cluster_table, tmp_path):
        # mscan is a valid category-map name but no training cluster holds it
        path = write_synthetic_kdd(tmp_path / "odd.csv", {"normal": 3}, seed=3)
        ds = load_labeled_dataset(path, category_map)
        ds.attack_names[0] = "mscan"
        ds.categories[0] = 1
        with pytest.raises(UncoveredAttackName):
            build_clusters(ds, cluster_table)


class TestIncremental:
    def test_first_stage_is_norm_plus_first_cluster(self, source, cluster_table):
        norm = filter_normal(source)
        clusters = build_clusters(source, cluster_table)
        d1 = build_incremental(norm, clusters, 1)
        assert d1.lines == norm.lines + clusters[0].lines
        assert d1.provenance == "D1"

    def test_stages_nest_and_grow(self, source, cluster_table):
        norm = filter_normal(source)
        clusters = build_clusters(source, cluster_table)
        sizes = []
        previous_lines: list[str] = []
        for k in range(1, 14):
            dk = build_incremental(norm, clusters, k)
            sizes.append(len(dk))
            assert dk.lines[: len(previous_lines)] == previous_lines or k == 1
            previous_lines = dk.lines
            assert summarize(dk).total_normal == len(norm)
        assert sizes == sorted(sizes)
        d13 = build_incremental(norm, clusters, 13)
        assert len(d13) == len(norm) + summarize(source).total_attack

    def test_bad_stage_rejected(self, source, cluster_table):
        norm = filter_normal(source)
        clusters = build_clusters(source, cluster_table)
        with pytest.raises(IndexOutOfRange):
            build_incremental(norm, clusters, 0)
        with pytest.raises(IndexOutOfRange):
            build_incremental(norm, clusters, 14)


class TestSummarize:
    def test_counts_match_generator_spec(self, source):
        s = summarize(source)
        assert s.counts[0] == TRAIN_SPEC["normal"]
        dos = TRAIN_SPEC["back"] + TRAIN_SPEC["smurf"] + TRAIN_SPEC["neptune"]
        probe = (
            TRAIN_SPEC["satan"] + TRAIN_SPEC["portsweep"] + TRAIN_SPEC["ipsweep"]
        )
        u2r = TRAIN_SPEC["buffer_overflow"] + TRAIN_SPEC["rootkit"]
        r2l = TRAIN_SPEC["guess_passwd"] + TRAIN_SPEC["warezclient"]
        assert s.counts[2] == dos
        assert s.counts[1] == probe
        assert s.counts[3] == u2r
        assert s.counts[4] == r2l
        assert s.total_attack == dos + probe + u2r + r2l

    def test_empty_dataset_all_zeros(self):
        empty = ds_mod.LabeledDataset([], [], np.empty(0, dtype=np.int8), "empty")
        s = summarize(empty)
        assert s.counts == (0, 0, 0, 0, 0)
        assert s.total == 0

    def test_streaming_summary_matches(self, synth_dir, category_map, source):
        streamed = ds_mod.summarize_file(synth_dir["train"], category_map)
        assert streamed.counts == summarize(source).counts


class TestSubsample:
    def test_zero_caps_give_empty(self, source):
        assert len(subsample(source, [0] * 5, seed=1)) == 0

    def test_generous_caps_are_identity(self, source):
        sampled = subsample(source, [10**6] * 5, seed=1)
        assert sampled.lines == source.lines

    def test_fixed_seed_reproducible(self, source):
        a = subsample(source, [50, 10, 20, 5, 5], seed=42)
        b = subsample(source, [50, 10, 20, 5, 5], seed=42)
        assert a.lines == b.lines
        counts = summarize(a).counts
        assert counts == (50, 10, 20, 5, 5)

    def test_negative_cap_rejected(self, source):
        with pytest.raises(ValidationError):
            subsample(source, [1, 1, 1, 1, -1], seed=0)


class TestRoundTrip:
    def test_write_then_load_preserves_bytes(self, source, category_map, tmp_path):
        path = str(tmp_path / "copy.csv.gz")
        write_dataset(source, path)
        back = load_labeled_dataset(path, category_map)
        assert back.lines == source.lines
        assert np.array_equal(back.categories, source.categories)

    def test_gzip_writes_are_deterministic(self, source, tmp_path):
        p1, p2 = str(tmp_path / "a.csv.gz"), str(tmp_path / "b.csv.gz")
        write_dataset(source, p1)
        write_dataset(source, p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_shuffle_is_seeded_permutation(self, source):
        a = ds_mod.shuffle_dataset(source, 7)
        b = ds_mod.shuffle_dataset(source, 7)
        assert a.lines == b.lines
        assert sorted(a.lines) == sorted(source.lines)
        assert a.lines != source.lines
