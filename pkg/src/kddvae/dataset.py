"""Parse NSL-KDD files, map attack labels, and partition records into the
normal-only train/test splits plus the pooled attack set."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError, ParseError, UnknownLabelError
from .schema import (
    ATTACK_CATEGORIES,
    BOOLEAN_FEATURES,
    CATEGORICAL_FEATURES,
    CONTINUOUS_FEATURES,
    FEATURE_COLUMNS,
    NORMAL_LABEL,
    AttackCategory,
)

_CONTINUOUS_SET = frozenset(CONTINUOUS_FEATURES)


@dataclass(frozen=True, slots=True)
class Record:
    """One NSL-KDD connection record (difficulty column already dropped).

    `continuous` holds the remaining numeric features in schema order, see
    ``schema.CONTINUOUS_FEATURES``.
    """

    protocol_type: str
    service: str
    flag: str
    land: int
    logged_in: int
    is_guest_login: int
    is_host_login: int
    continuous: tuple[float, ...]
    label: str

    @property
    def is_normal(self) -> bool:
        return self.label == NORMAL_LABEL

    def boolean_values(self) -> tuple[int, int, int, int]:
        """The boolean features in the fixed encoding order."""
        return (self.land, self.logged_in, self.is_guest_login, self.is_host_login)


def parse_nslkdd(
    path: str | Path,
    schema: Sequence[str] = FEATURE_COLUMNS,
) -> list[Record]:
    """Read a comma-separated NSL-KDD file into records.

    Expects ``len(schema) + 2`` fields per line (features, label, difficulty);
    the difficulty column is discarded. Blank lines are skipped. Raises
    ParseError naming the line on a wrong field count or a malformed value.
    """
    schema = tuple(schema)
    expected = len(schema) + 2
    col_index = {name: i for i, name in enumerate(schema)}
    for required in CATEGORICAL_FEATURES + BOOLEAN_FEATURES:
        if required not in col_index:
            raise ParseError(f"schema is missing required column {required!r}")
    cont_positions = [col_index[name] for name in schema if name in _CONTINUOUS_SET]
    cont_names = [name for name in schema if name in _CONTINUOUS_SET]

    records: list[Record] = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read dataset file {path}: {exc}") from exc
    with fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            fields = [f.strip() for f in stripped.split(",")]
            if len(fields) != expected:
                raise ParseError(
                    f"{path}: line {line_no}: expected {expected} fields, got {len(fields)}"
                )
            bools = {}
            for name in BOOLEAN_FEATURES:
                token = fields[col_index[name]]
                if token not in ("0", "1"):
                    raise ParseError(
                        f"{path}: line {line_no}: boolean feature {name!r} must be 0 or 1, got {token!r}"
                    )
                bools[name] = int(token)
            cont = []
            for name, pos in zip(cont_names, cont_positions):
                token = fields[pos]
                try:
                    cont.append(float(token))
                except ValueError:
                    raise ParseError(
                        f"{path}: line {line_no}: non-numeric value {token!r} for feature {name!r}"
                    ) from None
            records.append(
                Record(
                    protocol_type=fields[col_index["protocol_type"]],
                    service=fields[col_index["service"]],
                    flag=fields[col_index["flag"]],
                    land=bools["land"],
                    logged_in=bools["logged_in"],
                    is_guest_login=bools["is_guest_login"],
                    is_host_login=bools["is_host_login"],
                    continuous=tuple(cont),
                    label=fields[len(schema)].lower(),
                )
            )
    return records


def map_attack_category(label: str) -> AttackCategory:
    """Category for an attack name, or Normal for the normal label.

    Unknown labels are a hard error; nothing is ever silently treated as
    normal traffic.
    """
    if label == NORMAL_LABEL:
        return AttackCategory.NORMAL
    try:
        return ATTACK_CATEGORIES[label]
    except KeyError:
        raise UnknownLabelError(f"unknown attack label {label!r}") from None


@dataclass(frozen=True)
class DatasetSplit:
    """Normal-only train/test records plus all attacks from both files.

    Ids are ``<source>:<n>`` where n is the record's 1-based position among
    the parsed records of that file, so every score row can be traced back.
    """

    x_train: tuple[Record, ...]
    x_test: tuple[Record, ...]
    x_attack: tuple[Record, ...]
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    attack_ids: tuple[str, ...]
    attack_sources: tuple[str, ...]

    def __post_init__(self) -> None:
        if not (len(self.x_attack) == len(self.attack_sources) == len(self.attack_ids)):
            raise DataError("attack provenance arrays out of sync")

    @property
    def total(self) -> int:
        return len(self.x_train) + len(self.x_test) + len(self.x_attack)

    def all_records(self) -> tuple[Record, ...]:
        return self.x_train + self.x_test + self.x_attack

    def attack_categories(self) -> tuple[AttackCategory, ...]:
        return tuple(map_attack_category(r.label) for r in self.x_attack)


def split_dataset(
    train_records: Iterable[Record],
    test_records: Iterable[Record],
) -> DatasetSplit:
    """Partition parsed records into x_train / x_test / x_attack.

    x_train and x_test keep only normal records from their respective files;
    x_attack pools every attack from both, preserving which file each came
    from. An empty x_train is an error (nothing to train on).
    """
    x_train, x_test, x_attack = [], [], []
    train_ids, test_ids, attack_ids, attack_sources = [], [], [], []
    for source, records, normal_sink, normal_ids in (
        ("train", train_records, x_train, train_ids),
        ("test", test_records, x_test, test_ids),
    ):
        for i, record in enumerate(records, start=1):
            rid = f"{source}:{i:06d}"
            if record.is_normal:
                normal_sink.append(record)
                normal_ids.append(rid)
            else:
                x_attack.append(record)
                attack_ids.append(rid)
                attack_sources.append(source)
    if not x_train:
        raise DataError("no normal records in the training file; cannot train")
    return DatasetSplit(
        x_train=tuple(x_train),
        x_test=tuple(x_test),
        x_attack=tuple(x_attack),
        train_ids=tuple(train_ids),
        test_ids=tuple(test_ids),
        attack_ids=tuple(attack_ids),
        attack_sources=tuple(attack_sources),
    )
