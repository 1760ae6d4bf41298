"""Encoded split archive: the preprocessed matrices plus labels, categories,
and provenance, stored as a single .npz with a versioned JSON header."""

from __future__ import annotations

import hashlib
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import DatasetSplit
from .errors import ArchiveError
from .layout import FeatureLayout
from .preprocess import KddPreprocessor

ARCHIVE_VERSION = 1
ARCHIVE_KIND = "kddvae-encoded-split"


@dataclass(frozen=True)
class EncodedSplit:
    """In-memory form of the archive."""

    layout: FeatureLayout
    x_train: np.ndarray
    x_test: np.ndarray
    x_attack: np.ndarray
    train_ids: np.ndarray
    test_ids: np.ndarray
    attack_ids: np.ndarray
    attack_labels: np.ndarray
    attack_categories: np.ndarray
    attack_sources: np.ndarray
    digest: str

    @property
    def n_train(self) -> int:
        return self.x_train.shape[0]


def _content_digest(
    layout: FeatureLayout,
    x_train: np.ndarray,
    x_test: np.ndarray,
    x_attack: np.ndarray,
    attack_labels: np.ndarray,
) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(layout.to_dict(), sort_keys=True).encode())
    for arr in (x_train, x_test, x_attack):
        h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    h.update("\x00".join(str(s) for s in attack_labels).encode())
    return h.hexdigest()


def build_encoded_split(split: DatasetSplit, preprocessor: KddPreprocessor) -> EncodedSplit:
    """Encode all three partitions with a fitted preprocessor."""
    layout = preprocessor.layout_
    x_train = preprocessor.transform(split.x_train)
    x_test = preprocessor.transform(split.x_test)
    x_attack = preprocessor.transform(split.x_attack)
    attack_labels = np.array([r.label for r in split.x_attack], dtype=np.str_)
    attack_categories = np.array(
        [c.value for c in split.attack_categories()], dtype=np.str_
    )
    digest = _content_digest(layout, x_train, x_test, x_attack, attack_labels)
    return EncodedSplit(
        layout=layout,
        x_train=x_train,
        x_test=x_test,
        x_attack=x_attack,
        train_ids=np.array(split.train_ids, dtype=np.str_),
        test_ids=np.array(split.test_ids, dtype=np.str_),
        attack_ids=np.array(split.attack_ids, dtype=np.str_),
        attack_labels=attack_labels,
        attack_categories=attack_categories,
        attack_sources=np.array(split.attack_sources, dtype=np.str_),
        digest=digest,
    )


def save_archive(encoded: EncodedSplit, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": ARCHIVE_VERSION,
        "kind": ARCHIVE_KIND,
        "layout": encoded.layout.to_dict(),
        "digest": encoded.digest,
        "counts": {
            "train": int(encoded.x_train.shape[0]),
            "test": int(encoded.x_test.shape[0]),
            "attack": int(encoded.x_attack.shape[0]),
        },
    }
    np.savez_compressed(
        path,
        meta=np.array(json.dumps(meta, sort_keys=True)),
        x_train=encoded.x_train,
        x_test=encoded.x_test,
        x_attack=encoded.x_attack,
        train_ids=encoded.train_ids,
        test_ids=encoded.test_ids,
        attack_ids=encoded.attack_ids,
        attack_labels=encoded.attack_labels,
        attack_categories=encoded.attack_categories,
        attack_sources=encoded.attack_sources,
    )


def load_archive(path: str | Path) -> EncodedSplit:
    """Load and verify an encoded split archive.

    Recomputes the content digest so silent corruption is caught rather than
    propagated into training runs.
    """
    path = Path(path)
    if not path.exists():
        raise ArchiveError(f"archive not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            try:
                meta = json.loads(str(data["meta"]))
            except (KeyError, json.JSONDecodeError) as exc:
                raise ArchiveError(f"{path}: missing or malformed archive header") from exc
            if meta.get("kind") != ARCHIVE_KIND:
                raise ArchiveError(f"{path}: not an encoded split archive")
            if meta.get("format_version") != ARCHIVE_VERSION:
                raise ArchiveError(
                    f"{path}: unsupported archive version {meta.get('format_version')!r}"
                )
            layout = FeatureLayout.from_dict(meta["layout"])
            encoded = EncodedSplit(
                layout=layout,
                x_train=np.asarray(data["x_train"], dtype=np.float64),
                x_test=np.asarray(data["x_test"], dtype=np.float64),
                x_attack=np.asarray(data["x_attack"], dtype=np.float64),
                train_ids=data["train_ids"],
                test_ids=data["test_ids"],
                attack_ids=data["attack_ids"],
                attack_labels=data["attack_labels"],
                attack_categories=data["attack_categories"],
                attack_sources=data["attack_sources"],
                digest=str(meta["digest"]),
            )
    except (OSError, ValueError, EOFError, zipfile.BadZipFile) as exc:
        raise ArchiveError(f"{path}: unreadable archive: {exc}") from exc
    recomputed = _content_digest(
        encoded.layout,
        encoded.x_train,
        encoded.x_test,
        encoded.x_attack,
        encoded.attack_labels,
    )
    if recomputed != encoded.digest:
        raise ArchiveError(f"{path}: content digest mismatch; archive is corrupt")
    for arr in (encoded.x_train, encoded.x_test, encoded.x_attack):
        if arr.ndim != 2 or arr.shape[1] != layout.width:
            raise ArchiveError(f"{path}: matrix width does not match layout")
    return encoded
