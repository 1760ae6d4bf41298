"""Feature encoding: one-hot categoricals, raw booleans, standardized
continuous values. sklearn-compatible transformer over parsed records."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .dataset import Record
from .errors import DataError
from .layout import FeatureLayout
from .schema import BOOLEAN_FEATURES, CATEGORICAL_FEATURES, CONTINUOUS_FEATURES

# Floor on stored standard deviations; constant columns transform to 0.
EPS_STD = 1e-8

MANIFEST_VERSION = 1


class KddPreprocessor(BaseEstimator, TransformerMixin):
    """Fit the encoding on training records, then map records to vectors.

    Categorical vocabularies are collected from `vocab_records` (pass the
    union of train and test records so the encoded width is stable across
    splits); tokens outside the vocabulary encode as an all-zero block.
    Means and standard deviations come from the fit records only.
    """

    def __init__(self, eps_std: float = EPS_STD):
        self.eps_std = eps_std

    def fit(self, records: Sequence[Record], y=None, vocab_records: Sequence[Record] | None = None):
        records = list(records)
        if not records:
            raise DataError("cannot fit preprocessor on zero records")
        vocab_source = list(vocab_records) if vocab_records is not None else records

        self.vocab_ = {}
        for feature in CATEGORICAL_FEATURES:
            tokens = sorted({getattr(r, feature) for r in vocab_source})
            self.vocab_[feature] = {tok: i for i, tok in enumerate(tokens)}
            if vocab_records is not None:
                missing = {getattr(r, feature) for r in records} - set(tokens)
                if missing:
                    raise DataError(
                        f"vocab_records must cover the fit records; {feature} is "
                        f"missing {sorted(missing)}"
                    )

        cont = np.array([r.continuous for r in records], dtype=np.float64)
        if cont.shape[1] != len(CONTINUOUS_FEATURES):
            raise DataError(
                f"records carry {cont.shape[1]} continuous values, expected {len(CONTINUOUS_FEATURES)}"
            )
        self.means_ = cont.mean(axis=0)
        self.stds_ = np.maximum(cont.std(axis=0), self.eps_std)

        self.layout_ = FeatureLayout(
            groups=tuple((f, len(self.vocab_[f])) for f in CATEGORICAL_FEATURES),
            bool_names=BOOLEAN_FEATURES,
            cont_names=CONTINUOUS_FEATURES,
        )
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "layout_"):
            raise NotFittedError("KddPreprocessor is not fitted")

    def transform(self, records: Sequence[Record]) -> np.ndarray:
        """Encode records into an (n, width) float64 matrix."""
        self._check_fitted()
        records = list(records)
        layout = self.layout_
        out = np.zeros((len(records), layout.width), dtype=np.float64)
        for sl, (feature, _) in zip(layout.group_slices, layout.groups):
            mapping = self.vocab_[feature]
            idx = np.array([mapping.get(getattr(r, feature), -1) for r in records])
            known = idx >= 0
            out[np.flatnonzero(known), sl.start + idx[known]] = 1.0
        out[:, layout.bool_slice] = np.array(
            [r.boolean_values() for r in records], dtype=np.float64
        ).reshape(len(records), layout.n_bool)
        cont = np.array([r.continuous for r in records], dtype=np.float64).reshape(
            len(records), layout.n_cont
        )
        out[:, layout.cont_slice] = (cont - self.means_) / self.stds_
        return out

    def transform_record(self, record: Record) -> np.ndarray:
        """Encode a single record into a (width,) vector."""
        return self.transform([record])[0]

    def decode_tokens(self, vector: np.ndarray) -> dict[str, str | None]:
        """Argmax-decode the categorical blocks (None for all-zero blocks)."""
        self._check_fitted()
        result: dict[str, str | None] = {}
        for sl, (feature, _) in zip(self.layout_.group_slices, self.layout_.groups):
            block = np.asarray(vector)[..., sl]
            if block.sum() == 0:
                result[feature] = None
            else:
                inverse = {i: tok for tok, i in self.vocab_[feature].items()}
                result[feature] = inverse[int(np.argmax(block))]
        return result

    # --- manifest (audit) ---------------------------------------------------

    def to_manifest(self) -> dict:
        self._check_fitted()
        return {
            "format_version": MANIFEST_VERSION,
            "kind": "kddvae-preprocessor",
            "eps_std": self.eps_std,
            "vocabularies": {
                f: [tok for tok, _ in sorted(v.items(), key=lambda kv: kv[1])]
                for f, v in self.vocab_.items()
            },
            "boolean_features": list(BOOLEAN_FEATURES),
            "continuous_features": list(CONTINUOUS_FEATURES),
            "means": self.means_.tolist(),
            "stds": self.stds_.tolist(),
            "layout": self.layout_.to_dict(),
        }

    @classmethod
    def from_manifest(cls, manifest: dict) -> "KddPreprocessor":
        if manifest.get("kind") != "kddvae-preprocessor":
            raise DataError("not a preprocessor manifest")
        if manifest.get("format_version") != MANIFEST_VERSION:
            raise DataError(
                f"unsupported preprocessor manifest version {manifest.get('format_version')!r}"
            )
        pre = cls(eps_std=float(manifest["eps_std"]))
        pre.vocab_ = {
            f: {tok: i for i, tok in enumerate(tokens)}
            for f, tokens in manifest["vocabularies"].items()
        }
        pre.means_ = np.asarray(manifest["means"], dtype=np.float64)
        pre.stds_ = np.asarray(manifest["stds"], dtype=np.float64)
        pre.layout_ = FeatureLayout.from_dict(manifest["layout"])
        return pre

    def save_manifest(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_manifest(), indent=2, sort_keys=True))

    @classmethod
    def load_manifest(cls, path: str | Path) -> "KddPreprocessor":
        return cls.from_manifest(json.loads(Path(path).read_text()))


def fit_preprocessor(
    x_train: Sequence[Record],
    all_records: Sequence[Record] | None = None,
    eps_std: float = EPS_STD,
) -> KddPreprocessor:
    """Convenience wrapper: vocabularies from `all_records`, statistics from
    `x_train` only."""
    return KddPreprocessor(eps_std=eps_std).fit(x_train, vocab_records=all_records)
