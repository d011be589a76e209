"""Parsing, label mapping, and feature encoding."""

import numpy as np
import pytest

from bspnn import ingest
from bspnn.errors import (
    EmptyDataset,
    FieldCountMismatch,
    MalformedNumeric,
    UnknownAttackName,
    ValidationError,
)
from bspnn.ingest import (
    CATEGORY_INDEX,
    Encoder,
    RawRecord,
    default_asset,
    fit_encoder,
    load_category_map,
    load_schema,
    map_label,
    parse_kdd_record,
)

from conftest import synthetic_records


@pytest.fixture(scope="module")
def schema():
    return load_schema(default_asset("kdd_schema.txt"))


@pytest.fixture(scope="module")
def category_map():
    return load_category_map(default_asset("attack_categories.csv"))


class TestParse:
    def test_normal_label_stripped(self, schema):
        line = synthetic_records({"normal": 1}, seed=1)[0]
        record = parse_kdd_record(line, schema)
        assert record.label == "normal"
        assert len(record.features) == 41

    def test_attack_label_stripped(self, schema):
        line = synthetic_records({"smurf": 1}, seed=1)[0]
        assert parse_kdd_record(line, schema).label == "smurf"

    def test_41_fields_rejected(self, schema):
        line = synthetic_records({"normal": 1}, seed=1)[0]
        short = line.rsplit(",", 1)[0]  # drop the label -> 41 fields
        with pytest.raises(FieldCountMismatch):
            parse_kdd_record(short, schema)

    def test_malformed_numeric_reports_column(self, schema):
        line = synthetic_records({"normal": 1}, seed=1)[0]
        fields = line.split(",")
        fields[4] = "not-a-number"
        with pytest.raises(MalformedNumeric, match="column 4"):
            parse_kdd_record(",".join(fields), schema)


class TestMapLabel:
    def test_normal(self, category_map):
        assert map_label("normal", category_map).category == CATEGORY_INDEX["normal"]

    def test_training_probe_attack(self, category_map):
        assert map_label("ipsweep", category_map).category == CATEGORY_INDEX["probe"]

    def test_test_only_probe_attack(self, category_map):
        assert map_label("mscan", category_map).category == CATEGORY_INDEX["probe"]

    def test_unknown_name_strict(self, category_map):
        with pytest.raises(UnknownAttackName):
            map_label("definitely_new_attack", category_map)

    def test_unknown_name_drop_policy(self, category_map):
        assert map_label("definitely_new_attack", category_map, policy="drop") is None


def _mini_records(rows):
    return [RawRecord(features=tuple(row), label="normal") for row in rows]


class TestFitEncoder:
    def test_vocabulary_first_seen_order(self):
        schema = ["symbolic", "continuous"]
        records = _mini_records([("tcp", "1"), ("udp", "2"), ("tcp", "3")])
        enc = fit_encoder(records, schema)
        assert list(enc.vocabularies[0]) == ["tcp", "udp"]
        assert enc.output_dim == 3  # one-hot width 2 + one continuous slot

    def test_constant_column_encodes_to_zero(self):
        schema = ["continuous"]
        records = _mini_records([("7.5",), ("7.5",), ("7.5",)])
        enc = fit_encoder(records, schema)
        assert enc.sds[0] == 0.0
        assert enc.encode(records[0])[0] == 0.0

    def test_population_sd_convention(self):
        # values {0, 2}: mean 1, population sd 1, so encodings are -1 and +1
        schema = ["continuous"]
        records = _mini_records([("0",), ("2",)])
        enc = fit_encoder(records, schema)
        assert enc.means[0] == 1.0
        assert enc.sds[0] == 1.0
        assert enc.encode(records[0])[0] == -1.0
        assert enc.encode(records[1])[0] == +1.0

    def test_empty_dataset_rejected(self):
        with pytest.raises(EmptyDataset):
            fit_encoder([], ["continuous"])


class TestEncode:
    def test_mean_value_encodes_to_zero(self):
        schema = ["continuous"]
        records = _mini_records([("1",), ("3",)])
        enc = fit_encoder(records, schema)
        at_mean = _mini_records([("2",)])[0]
        assert enc.encode(at_mean)[0] == 0.0

    def test_unseen_symbolic_zero_block(self):
        schema = ["symbolic"]
        records = _mini_records([("tcp",), ("udp",)])
        enc = fit_encoder(records, schema)
        unseen = _mini_records([("icmp",)])[0]
        assert np.all(enc.encode(unseen) == 0.0)

    def test_fit_set_roundtrip_is_finite(self, schema):
        lines = synthetic_records({"normal": 20, "smurf": 10}, seed=5)
        records = [parse_kdd_record(line, schema) for line in lines]
        enc = fit_encoder(records, schema)
        X = enc.encode_many(records)
        assert np.all(np.isfinite(X))
        assert X.shape == (30, enc.output_dim)

    def test_encode_deterministic_bit_for_bit(self, schema):
        lines = synthetic_records({"normal": 5}, seed=9)
        records = [parse_kdd_record(line, schema) for line in lines]
        enc = fit_encoder(records, schema)
        a = enc.encode_many(records)
        b = enc.encode_many(records)
        assert np.array_equal(a, b)
        single = np.stack([enc.encode(r) for r in records])
        assert np.array_equal(a, single)

    def test_one_hot_blocks_sum_to_zero_or_one(self, schema):
        train = synthetic_records({"normal": 15, "satan": 10}, seed=3)
        records = [parse_kdd_record(line, schema) for line in train]
        enc = fit_encoder(records, schema)
        X = enc.encode_many(records)
        offset = 0
        for j, kind in enumerate(schema):
            width = len(enc.vocabularies[j]) if kind == "symbolic" else 1
            if kind == "symbolic":
                sums = X[:, offset : offset + width].sum(axis=1)
                assert np.all((sums == 0.0) | (sums == 1.0))
            offset += width
        assert offset == enc.output_dim

    def test_serialization_roundtrip(self, schema):
        lines = synthetic_records({"normal": 8, "back": 4}, seed=7)
        records = [parse_kdd_record(line, schema) for line in lines]
        enc = fit_encoder(records, schema)
        clone = Encoder.from_dict(enc.to_dict())
        assert np.array_equal(enc.encode_many(records), clone.encode_many(records))


class TestReadFile:
    def test_reads_gzip_by_extension(self, schema, tmp_path):
        from bspnn.ingest import open_maybe_gzip, read_kdd_file

        lines = synthetic_records({"normal": 6, "back": 3}, seed=21)
        path = str(tmp_path / "mini.csv.gz")
        with open_maybe_gzip(path, "wt") as fh:
            fh.write("\n".join(lines) + "\n")
        records = read_kdd_file(path, schema)
        assert len(records) == 9
        assert {r.label for r in records} == {"normal", "back"}

    def test_numeric_validation_locates_bad_value(self, schema, tmp_path):
        from bspnn.ingest import read_kdd_file

        lines = synthetic_records({"normal": 3}, seed=22)
        fields = lines[1].split(",")
        fields[5] = "oops"
        lines[1] = ",".join(fields)
        path = tmp_path / "bad.csv"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(MalformedNumeric, match="column 5"):
            read_kdd_file(str(path), schema)


class TestAssets:
    def test_schema_has_41_columns(self, schema):
        assert len(schema) == 41
        assert schema[1] == schema[2] == schema[3] == "symbolic"

    def test_category_map_covers_standard_names(self, category_map):
        # 39 attack names plus normal
        assert len(category_map) == 40
        for name in ("smurf", "mscan", "httptunnel", "udpstorm", "xterm"):
            assert name in category_map

    def test_bad_category_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("normal,normal\nfoo,exotic\n")
        with pytest.raises(ValidationError):
            load_category_map(str(path))
