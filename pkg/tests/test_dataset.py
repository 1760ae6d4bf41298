from __future__ import annotations

import pytest

from kddvae.dataset import map_attack_category, parse_nslkdd, split_dataset
from kddvae.errors import DataError, ParseError, UnknownLabelError
from kddvae.schema import (
    ATTACK_CATEGORIES,
    CONTINUOUS_FEATURES,
    DOS_ATTACKS,
    EXTRA_R2L_ATTACKS,
    FEATURE_COLUMNS,
    PROBE_ATTACKS,
    R2L_ATTACKS,
    U2R_ATTACKS,
    AttackCategory,
)
from synthdata import count_labels


def make_line(label="normal", n_fields=43, protocol="tcp", service="http", flag="SF"):
    fields = []
    for name in FEATURE_COLUMNS:
        if name == "protocol_type":
            fields.append(protocol)
        elif name == "service":
            fields.append(service)
        elif name == "flag":
            fields.append(flag)
        elif name in ("land", "logged_in", "is_guest_login", "is_host_login"):
            fields.append("0")
        else:
            fields.append("1.5")
    fields.append(label)
    fields.append("15")
    line = ",".join(fields)
    assert len(fields) == 43
    if n_fields < 43:
        line = ",".join(fields[:n_fields])
    return line


class TestParse:
    def test_basic_line(self, tmp_path):
        path = tmp_path / "one.txt"
        path.write_text(make_line(label="neptune") + "\n")
        records = parse_nslkdd(path)
        assert len(records) == 1
        r = records[0]
        assert r.label == "neptune"
        assert r.protocol_type == "tcp"
        assert r.service == "http"
        assert r.flag == "SF"
        assert len(r.continuous) == len(CONTINUOUS_FEATURES)
        assert not hasattr(r, "difficulty")

    def test_wrong_field_count_names_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text(make_line() + "\n" + make_line(n_fields=42) + "\n")
        with pytest.raises(ParseError, match="line 2"):
            parse_nslkdd(path)

    def test_non_numeric_continuous_names_line(self, tmp_path):
        line = make_line().split(",")
        line[FEATURE_COLUMNS.index("src_bytes")] = "oops"
        path = tmp_path / "bad.txt"
        path.write_text(",".join(line) + "\n")
        with pytest.raises(ParseError, match="line 1.*src_bytes"):
            parse_nslkdd(path)

    def test_bad_boolean_rejected(self, tmp_path):
        line = make_line().split(",")
        line[FEATURE_COLUMNS.index("logged_in")] = "2"
        path = tmp_path / "bad.txt"
        path.write_text(",".join(line) + "\n")
        with pytest.raises(ParseError, match="logged_in"):
            parse_nslkdd(path)

    def test_record_count_matches_line_count(self, synthetic_dir):
        for name in ("KDDTrain+.txt", "KDDTest+.txt"):
            path = synthetic_dir / name
            n_lines = sum(1 for l in path.read_text().splitlines() if l.strip())
            assert len(parse_nslkdd(path)) == n_lines

    def test_labels_lowercased(self, tmp_path):
        path = tmp_path / "case.txt"
        path.write_text(make_line(label="Neptune") + "\n")
        assert parse_nslkdd(path)[0].label == "neptune"


class TestAttackCategories:
    def test_category_spot_values(self):
        assert map_attack_category("smurf") is AttackCategory.DOS
        assert map_attack_category("httptunnel") is AttackCategory.U2R
        assert map_attack_category("normal") is AttackCategory.NORMAL

    def test_unknown_label_is_hard_error(self):
        with pytest.raises(UnknownLabelError):
            map_attack_category("not_an_attack")
        with pytest.raises(UnknownLabelError):
            map_attack_category("")

    def test_table_is_total_and_disjoint(self):
        groups = {
            AttackCategory.DOS: DOS_ATTACKS,
            AttackCategory.PROBE: PROBE_ATTACKS,
            AttackCategory.U2R: U2R_ATTACKS,
            AttackCategory.R2L: R2L_ATTACKS + EXTRA_R2L_ATTACKS,
        }
        seen = set()
        for category, names in groups.items():
            for name in names:
                assert name not in seen, f"{name} appears in two categories"
                seen.add(name)
                assert map_attack_category(name) is category
        assert seen == set(ATTACK_CATEGORIES)

    def test_category_counts(self):
        # 11 + 6 + 8 + 12 from the main table, plus the two test-file-only
        # R2L names.
        assert len(DOS_ATTACKS) == 11
        assert len(PROBE_ATTACKS) == 6
        assert len(U2R_ATTACKS) == 8
        assert len(R2L_ATTACKS) == 12
        assert len(ATTACK_CATEGORIES) == 37 + len(EXTRA_R2L_ATTACKS)


class TestSplit:
    def test_small_partition(self, tmp_path):
        train = tmp_path / "tr.txt"
        test = tmp_path / "te.txt"
        train.write_text(make_line("normal") + "\n" + make_line("neptune") + "\n")
        test.write_text(make_line("normal") + "\n" + make_line("smurf") + "\n")
        split = split_dataset(parse_nslkdd(train), parse_nslkdd(test))
        assert len(split.x_train) == 1
        assert len(split.x_test) == 1
        assert len(split.x_attack) == 2
        assert split.attack_sources == ("train", "test")

    def test_all_normal_inputs(self, tmp_path):
        train = tmp_path / "tr.txt"
        test = tmp_path / "te.txt"
        train.write_text(make_line("normal") + "\n")
        test.write_text(make_line("normal") + "\n")
        split = split_dataset(parse_nslkdd(train), parse_nslkdd(test))
        assert split.x_attack == ()

    def test_empty_train_is_error(self, tmp_path):
        train = tmp_path / "tr.txt"
        test = tmp_path / "te.txt"
        train.write_text(make_line("neptune") + "\n")
        test.write_text(make_line("normal") + "\n")
        with pytest.raises(DataError):
            split_dataset(parse_nslkdd(train), parse_nslkdd(test))

    def test_partition_is_exact(self, parsed_records, split):
        train, test = parsed_records
        assert split.total == len(train) + len(test)
        assert all(r.is_normal for r in split.x_train)
        assert all(r.is_normal for r in split.x_test)
        assert not any(r.is_normal for r in split.x_attack)

    def test_sizes_match_independent_label_counts(self, synthetic_dir, split):
        train_counts = count_labels(synthetic_dir / "KDDTrain+.txt")
        test_counts = count_labels(synthetic_dir / "KDDTest+.txt")
        assert len(split.x_train) == train_counts["normal"]
        assert len(split.x_test) == test_counts["normal"]
        n_attacks = sum(v for k, v in train_counts.items() if k != "normal")
        n_attacks += sum(v for k, v in test_counts.items() if k != "normal")
        assert len(split.x_attack) == n_attacks

    def test_attack_provenance_and_ids(self, split):
        assert len(split.attack_ids) == len(split.x_attack)
        for rid, source in zip(split.attack_ids, split.attack_sources):
            assert rid.startswith(source + ":")

    def test_attack_categories_total(self, split):
        cats = split.attack_categories()
        assert len(cats) == len(split.x_attack)
        assert AttackCategory.NORMAL not in cats
