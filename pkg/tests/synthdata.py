"""Synthetic NSL-KDD-shaped files for tests: same 43-column format, same
label conventions, small enough to train on in seconds. Attack rows shift a
fixed subset of continuous columns so both detectors have signal."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from kddvae.schema import CONTINUOUS_FEATURES, FEATURE_COLUMNS

PROTOCOLS = ("icmp", "tcp", "udp")
FLAGS = ("REJ", "RSTR", "S0", "SF")
NORMAL_SERVICES = ("domain_u", "ftp_data", "http", "smtp")
ATTACK_SERVICES = ("eco_i", "private")
TEST_ONLY_SERVICE = "uucp_path"

TRAIN_ATTACKS = ("neptune", "smurf", "satan", "ipsweep", "buffer_overflow", "guess_passwd")
TEST_ONLY_ATTACKS = ("apache2", "httptunnel", "snmpguess", "mscan", "named")

# Continuous columns given a mean shift on attack rows.
SHIFTED = ("src_bytes", "dst_bytes", "count", "srv_count", "serror_rate",
           "dst_host_count", "hot", "duration")
SHIFT = 2.5

# Constant in both files, like num_outbound_cmds in the real data; exercises
# the zero-variance floor.
CONSTANT_ZERO = ("num_outbound_cmds",)


def _row(rng: np.random.Generator, label: str, service_pool: tuple[str, ...]) -> str:
    is_attack = label != "normal"
    values: dict[str, str] = {}
    values["protocol_type"] = rng.choice(PROTOCOLS)
    values["service"] = rng.choice(service_pool if not is_attack else ATTACK_SERVICES + service_pool[:1])
    values["flag"] = rng.choice(FLAGS if not is_attack else FLAGS[:3])
    values["land"] = "1" if rng.random() < 0.02 else "0"
    values["logged_in"] = "1" if rng.random() < (0.15 if is_attack else 0.7) else "0"
    values["is_guest_login"] = "1" if rng.random() < 0.05 else "0"
    values["is_host_login"] = "1" if rng.random() < 0.01 else "0"
    for name in CONTINUOUS_FEATURES:
        if name in CONSTANT_ZERO:
            values[name] = "0"
            continue
        v = rng.normal(0.0, 1.0)
        if is_attack and name in SHIFTED:
            v += SHIFT
        values[name] = f"{v:.4f}"
    fields = [values[name] for name in FEATURE_COLUMNS]
    fields.append(label)
    fields.append(str(rng.integers(0, 22)))  # difficulty, discarded by the parser
    return ",".join(fields)


def write_synthetic_nslkdd(
    dir_path: Path,
    seed: int = 7,
    n_train_normal: int = 300,
    n_train_attack: int = 80,
    n_test_normal: int = 140,
    n_test_attack: int = 80,
) -> tuple[Path, Path]:
    """Write KDDTrain+.txt / KDDTest+.txt lookalikes; returns their paths."""
    rng = np.random.default_rng(seed)
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)

    train_lines = [_row(rng, "normal", NORMAL_SERVICES) for _ in range(n_train_normal)]
    train_lines += [
        _row(rng, TRAIN_ATTACKS[i % len(TRAIN_ATTACKS)], NORMAL_SERVICES)
        for i in range(n_train_attack)
    ]
    rng.shuffle(train_lines)

    test_services = NORMAL_SERVICES + (TEST_ONLY_SERVICE,)
    test_attacks = TRAIN_ATTACKS + TEST_ONLY_ATTACKS
    test_lines = [_row(rng, "normal", test_services) for _ in range(n_test_normal)]
    test_lines += [
        _row(rng, test_attacks[i % len(test_attacks)], test_services)
        for i in range(n_test_attack)
    ]
    rng.shuffle(test_lines)

    train_path = dir_path / "KDDTrain+.txt"
    test_path = dir_path / "KDDTest+.txt"
    train_path.write_text("\n".join(train_lines) + "\n")
    test_path.write_text("\n".join(test_lines) + "\n")
    return train_path, test_path


def count_labels(path: Path) -> dict[str, int]:
    """Label histogram computed with raw string ops (parser-independent)."""
    counts: dict[str, int] = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        label = line.split(",")[41].strip().lower()
        counts[label] = counts.get(label, 0) + 1
    return counts
