from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from kddvae.archive import build_encoded_split, save_archive
from kddvae.dataset import parse_nslkdd, split_dataset
from kddvae.layout import FeatureLayout
from kddvae.model import BetaVae
from kddvae.preprocess import KddPreprocessor

from synthdata import write_synthetic_nslkdd


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory) -> Path:
    d = tmp_path_factory.mktemp("synthetic_nslkdd")
    write_synthetic_nslkdd(d)
    return d


@pytest.fixture(scope="session")
def parsed_records(synthetic_dir):
    train = parse_nslkdd(synthetic_dir / "KDDTrain+.txt")
    test = parse_nslkdd(synthetic_dir / "KDDTest+.txt")
    return train, test


@pytest.fixture(scope="session")
def split(parsed_records):
    train, test = parsed_records
    return split_dataset(train, test)


@pytest.fixture(scope="session")
def preprocessor(split):
    return KddPreprocessor().fit(split.x_train, vocab_records=split.all_records())


@pytest.fixture(scope="session")
def encoded(split, preprocessor):
    return build_encoded_split(split, preprocessor)


@pytest.fixture(scope="session")
def archive_path(encoded, tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("archive") / "encoded.npz"
    save_archive(encoded, path)
    return path


# Small layout matching the gradient-check setting: two categorical groups
# (widths 3 and 2), three booleans, four continuous -> width 12.
@pytest.fixture()
def tiny_layout() -> FeatureLayout:
    return FeatureLayout(
        groups=(("cat0", 3), ("cat1", 2)),
        bool_names=("b0", "b1", "b2"),
        cont_names=("c0", "c1", "c2", "c3"),
    )


def random_encoded_batch(layout: FeatureLayout, n: int, rng: np.random.Generator,
                         zero_block_rows: int = 0) -> np.ndarray:
    """Valid encoded rows for an arbitrary layout: one-hot categorical blocks
    (optionally a few all-zero ones), 0/1 booleans, Gaussian continuous."""
    x = np.zeros((n, layout.width))
    for sl, size in zip(layout.group_slices, layout.group_sizes):
        choice = rng.integers(0, size, n)
        x[np.arange(n), sl.start + choice] = 1.0
    for row in range(min(zero_block_rows, n)):
        x[row, layout.group_slices[row % len(layout.group_slices)]] = 0.0
    x[:, layout.bool_slice] = rng.integers(0, 2, (n, layout.n_bool))
    x[:, layout.cont_slice] = rng.standard_normal((n, layout.n_cont))
    return x


@pytest.fixture(scope="session")
def small_model(encoded):
    """One shared quick-trained model over the synthetic archive."""
    model = BetaVae(
        layout=encoded.layout,
        beta=1e-4,
        latent_dim=3,
        encoder_hidden=(16, 8),
        decoder_hidden=(8, 16),
        batch_size=128,
        epochs=8,
        seed=11,
    )
    return model.fit(encoded.x_train)


def nslkdd_real_dir() -> Path | None:
    env = os.environ.get("NSLKDD_DIR")
    if not env:
        return None
    d = Path(env)
    if (d / "KDDTrain+.txt").exists() and (d / "KDDTest+.txt").exists():
        return d
    return None


# Criterion verdict lines from test_acceptance.py, echoed after the test
# summary so they are visible without -s.
_acceptance_lines: list[str] = []


def record_acceptance_line(line: str) -> None:
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
