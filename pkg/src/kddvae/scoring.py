"""The two anomaly detectors over a trained model: per-sample reconstruction
error, and mean Euclidean distance to the k nearest training projections in
latent space."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import ConfigError, DataError
from .model import BetaVae
from .nn import EPS_LOG

DEFAULT_K_VALUES = (1, 100, 150, 200, 250, 300, 400, 500, 1000, 2000, 3000, 4000, 5000)

PROJECTION_MODES = ("mean", "sampled")

SCORES_FORMAT_VERSION = 1


@dataclass(frozen=True)
class DetectorConfig:
    """Scoring options: neighbor counts, optional threshold, projection mode."""

    ks: tuple[int, ...] = DEFAULT_K_VALUES
    threshold: float | None = None
    projection: str = "mean"

    def validate(self, n_index_rows: int | None = None) -> None:
        if not self.ks:
            raise ConfigError("k list must be non-empty")
        if any(k < 1 for k in self.ks):
            raise ConfigError("k values must be positive")
        if list(self.ks) != sorted(set(self.ks)):
            raise ConfigError("k values must be strictly increasing")
        if n_index_rows is not None and max(self.ks) > n_index_rows:
            raise ConfigError(
                f"largest k ({max(self.ks)}) exceeds index size ({n_index_rows})"
            )
        if self.projection not in PROJECTION_MODES:
            raise ConfigError(f"projection must be one of {PROJECTION_MODES}")


def project_latent(
    model: BetaVae, X: np.ndarray, projection: str = "mean", noise_seed: int = 0
) -> np.ndarray:
    """Latent vectors for X: the posterior mean, or a seeded stochastic draw."""
    if projection not in PROJECTION_MODES:
        raise ConfigError(f"projection must be one of {PROJECTION_MODES}")
    g = model.encode(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    if projection == "mean":
        return g.mu
    rng = np.random.default_rng(np.random.SeedSequence(noise_seed))
    return g.mu + g.sigma * rng.standard_normal(g.mu.shape)


class LatentIndex:
    """Projected training latents with exact nearest-neighbor queries.

    Row order follows the training input; queries are read-only, so a built
    index can be shared freely.
    """

    backend = "bruteforce-exact"

    def __init__(self, z: np.ndarray, mode: str = "mean"):
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 2 or z.shape[0] == 0:
            raise DataError("latent index needs a non-empty 2-D matrix")
        if not np.all(np.isfinite(z)):
            raise DataError("latent index entries must be finite")
        self.z = z
        self.mode = mode
        self._sq_norms = np.einsum("ij,ij->i", z, z)
        self._max_sq_norm = float(self._sq_norms.max())

    def __len__(self) -> int:
        return self.z.shape[0]

    @property
    def dim(self) -> int:
        return self.z.shape[1]

    @classmethod
    def build(
        cls,
        model: BetaVae,
        x_train: np.ndarray,
        projection: str = "mean",
        noise_seed: int = 0,
    ) -> "LatentIndex":
        return cls(project_latent(model, x_train, projection, noise_seed), mode=projection)


def knn_query(
    index: LatentIndex,
    queries: np.ndarray,
    k_max: int,
    block_size: int = 256,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest neighbors for each query row.

    Returns (distances, row_indices), each (n_queries, k_max), distances
    ascending with ties broken by index row order. A BLAS inner-product pass
    preselects candidates; survivors are re-scored with the direct
    subtract-square-sum formula, so returned distances are bit-identical to
    a naive brute-force scan.
    """
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if Q.shape[1] != index.dim:
        raise ValueError(f"query dim {Q.shape[1]} != index dim {index.dim}")
    n_rows = len(index)
    if not 1 <= k_max <= n_rows:
        raise ValueError(f"k_max must be in [1, {n_rows}], got {k_max}")
    nq = Q.shape[0]
    dists = np.empty((nq, k_max))
    rows = np.empty((nq, k_max), dtype=np.int64)
    # Padding absorbs everything inside the error margin; ties overflowing the
    # pad fall back to a full scan of the row.
    take = min(k_max + 64, n_rows)
    for start in range(0, nq, block_size):
        qb = Q[start : start + block_size]
        b = qb.shape[0]
        qq = np.einsum("ij,ij->i", qb, qb)
        # Approximate squared distances; only used to pick candidates.
        d2 = qq[:, None] + index._sq_norms[None, :] - 2.0 * (qb @ index.z.T)
        if take < n_rows:
            cand_idx = np.argpartition(d2, take - 1, axis=1)[:, :take]
        else:
            cand_idx = np.broadcast_to(np.arange(n_rows), (b, n_rows)).copy()
        cand_d2 = np.take_along_axis(d2, cand_idx, axis=1)
        kth = np.partition(cand_d2, k_max - 1, axis=1)[:, k_max - 1]
        # Margin dwarfs the inner-product rounding error, so everything at or
        # below the cut provably includes the true k nearest.
        cut = kth + 1e-9 * (1.0 + qq + index._max_sq_norm)
        complete = (take == n_rows) | (cand_d2.max(axis=1) > cut)

        diff = index.z[cand_idx] - qb[:, None, :]
        flat = diff.reshape(-1, index.dim)
        exact = np.sqrt(np.einsum("ij,ij->i", flat, flat)).reshape(b, take)
        beyond = cand_d2 > cut[:, None]
        exact[beyond] = np.inf
        tie_key = np.where(beyond, n_rows, cand_idx)
        # (distance, row) order via two stable sorts: rows first, then distance.
        by_row = np.argsort(tie_key, axis=1, kind="stable")
        exact = np.take_along_axis(exact, by_row, axis=1)
        cand_sorted = np.take_along_axis(cand_idx, by_row, axis=1)
        by_dist = np.argsort(exact, axis=1, kind="stable")[:, :k_max]
        dists[start : start + b] = np.take_along_axis(exact, by_dist, axis=1)
        rows[start : start + b] = np.take_along_axis(cand_sorted, by_dist, axis=1)

        for i in np.flatnonzero(~complete):
            # Tie pileup at the cut: rescore the whole row.
            cand = np.flatnonzero(d2[i] <= cut[i])
            diff_row = index.z[cand] - qb[i]
            exact_row = np.sqrt(np.einsum("ij,ij->i", diff_row, diff_row))
            order = np.lexsort((cand, exact_row))[:k_max]
            dists[start + i] = exact_row[order]
            rows[start + i] = cand[order]
    return dists, rows


def knn_distances(index: LatentIndex, z: np.ndarray, k_max: int) -> np.ndarray:
    """Sorted ascending distances from one latent vector to its k_max nearest
    index rows."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise ValueError("knn_distances expects a single latent vector")
    d, _ = knn_query(index, z[None, :], k_max)
    return d[0]


def latent_knn_scores(
    index: LatentIndex, z: np.ndarray, ks: Sequence[int] = DEFAULT_K_VALUES
) -> dict[int, float]:
    """Mean distance to the k nearest index rows, for every k, from a single
    query at k_max = max(ks)."""
    ks = tuple(ks)
    DetectorConfig(ks=ks).validate(len(index))
    d = knn_distances(index, z, max(ks))
    return {k: float(d[:k].sum() / k) for k in ks}


def latent_knn_table(
    index: LatentIndex,
    queries: np.ndarray,
    ks: Sequence[int] = DEFAULT_K_VALUES,
    block_size: int = 256,
) -> np.ndarray:
    """(n_queries, len(ks)) matrix of mean k-nearest distances."""
    ks = tuple(ks)
    DetectorConfig(ks=ks).validate(len(index))
    d, _ = knn_query(index, queries, max(ks), block_size=block_size)
    return np.column_stack([d[:, :k].sum(axis=1) / k for k in ks])


def reconstruction_errors(
    model: BetaVae,
    X: np.ndarray,
    projection: str = "mean",
    noise_seed: int = 0,
    z: np.ndarray | None = None,
) -> np.ndarray:
    """Per-sample reconstruction error (single-row loss: cross-entropies and
    squared error summed over features).

    Pass `z` to reuse an existing latent projection of X instead of
    projecting again.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    layout = model.layout
    if z is None:
        z = project_latent(model, X, projection, noise_seed)
    recon = model.decode(z)
    t_cat = X[:, layout.cat_slice]
    p_cat = np.maximum(recon[:, layout.cat_slice], EPS_LOG)
    l_cat = -(t_cat * np.log(p_cat)).sum(axis=1)
    t_bool = X[:, layout.bool_slice]
    p_bool = np.clip(recon[:, layout.bool_slice], EPS_LOG, 1.0 - EPS_LOG)
    l_bool = -(t_bool * np.log(p_bool) + (1.0 - t_bool) * np.log1p(-p_bool)).sum(axis=1)
    diff = X[:, layout.cont_slice] - recon[:, layout.cont_slice]
    l_cont = (diff * diff).sum(axis=1)
    return l_cat + l_bool + l_cont


def reconstruction_error(
    model: BetaVae, x: np.ndarray, projection: str = "mean", noise_seed: int = 0
) -> float:
    """Reconstruction-error score of a single encoded sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("reconstruction_error expects a single vector")
    return float(reconstruction_errors(model, x[None, :], projection, noise_seed)[0])


def classify(score: float, threshold: float) -> str:
    """'anomaly' iff score is strictly above the threshold, else 'normal'."""
    return "anomaly" if score > threshold else "normal"


def is_anomaly(scores: np.ndarray, threshold: float) -> np.ndarray:
    """Vectorized strict-threshold decision."""
    return np.asarray(scores, dtype=np.float64) > threshold


# --- sklearn-style detector wrappers -------------------------------------------


class ReconstructionScorer(BaseEstimator):
    """Anomaly detector scoring samples by reconstruction error.

    Higher scores mean more anomalous; predict() applies the strict
    threshold and returns a boolean array (True = anomaly).
    """

    def __init__(
        self,
        model: BetaVae | None = None,
        projection: str = "mean",
        noise_seed: int = 0,
        threshold: float | None = None,
    ):
        self.model = model
        self.projection = projection
        self.noise_seed = noise_seed
        self.threshold = threshold

    def fit(self, X=None, y=None):
        if self.model is None:
            raise ConfigError("ReconstructionScorer needs a fitted BetaVae")
        self.fitted_ = True
        return self

    def score_samples(self, X: np.ndarray) -> np.ndarray:
        if not getattr(self, "fitted_", False):
            raise NotFittedError("call fit() first")
        return reconstruction_errors(self.model, X, self.projection, self.noise_seed)

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.threshold is None:
            raise ConfigError("predict() needs a threshold")
        return is_anomaly(self.score_samples(X), self.threshold)


class LatentKnnScorer(BaseEstimator):
    """Anomaly detector scoring samples by mean latent distance to the k
    nearest training projections.

    fit(X) projects the encoded training rows into latent space and builds
    the reference index; higher scores mean more anomalous.
    """

    def __init__(
        self,
        model: BetaVae | None = None,
        k: int = 5000,
        projection: str = "mean",
        noise_seed: int = 0,
        threshold: float | None = None,
    ):
        self.model = model
        self.k = k
        self.projection = projection
        self.noise_seed = noise_seed
        self.threshold = threshold

    def fit(self, X: np.ndarray, y=None):
        if self.model is None:
            raise ConfigError("LatentKnnScorer needs a fitted BetaVae")
        if self.k < 1:
            raise ConfigError("k must be positive")
        self.index_ = LatentIndex.build(self.model, X, self.projection, self.noise_seed)
        if self.k > len(self.index_):
            raise ConfigError(f"k ({self.k}) exceeds training size ({len(self.index_)})")
        return self

    def score_samples(self, X: np.ndarray) -> np.ndarray:
        index = getattr(self, "index_", None)
        if index is None:
            raise NotFittedError("call fit() first")
        z = project_latent(self.model, X, self.projection, self.noise_seed)
        return latent_knn_table(index, z, ks=(self.k,))[:, 0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.threshold is None:
            raise ConfigError("predict() needs a threshold")
        return is_anomaly(self.score_samples(X), self.threshold)


# --- scores file -----------------------------------------------------------------


def write_scores(
    path: str | Path,
    metadata: dict,
    ids: Sequence[str],
    sources: Sequence[str],
    labels: Sequence[str],
    categories: Sequence[str],
    rec_scores: np.ndarray,
    knn_scores: np.ndarray,
    ks: Sequence[int],
) -> None:
    """One row per scored sample; floats use repr so a re-read reproduces the
    in-memory values exactly. Metadata rides in '#' header lines."""
    knn_scores = np.atleast_2d(knn_scores)
    n = len(ids)
    if not (len(sources) == len(labels) == len(categories) == len(rec_scores) == n):
        raise ValueError("scores columns disagree on length")
    if knn_scores.shape != (n, len(ks)):
        raise ValueError("knn score table shape mismatch")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# kddvae-scores format={SCORES_FORMAT_VERSION}\n")
        for key in sorted(metadata):
            fh.write(f"# {key}={metadata[key]}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["sample_id", "source", "label", "category", "recon_error"]
            + [f"knn_{k}" for k in ks]
        )
        for i in range(n):
            writer.writerow(
                [ids[i], sources[i], labels[i], categories[i], repr(float(rec_scores[i]))]
                + [repr(float(v)) for v in knn_scores[i]]
            )


def read_scores(path: str | Path) -> tuple[dict, dict]:
    """Parse a scores file back into (metadata, columns)."""
    path = Path(path)
    metadata: dict[str, str] = {}
    rows: list[list[str]] = []
    header: list[str] | None = None
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read scores file {path}: {exc}") from exc
    with fh:
        data_lines = []
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    metadata[key.strip()] = value.strip()
                continue
            data_lines.append(line)
        reader = csv.reader(data_lines)
        for row in reader:
            if not row:
                continue
            if header is None:
                header = row
            else:
                rows.append(row)
    if header is None or metadata.get("kddvae-scores format") != str(SCORES_FORMAT_VERSION):
        raise DataError(f"{path}: not a kddvae scores file")
    ks = [int(h.removeprefix("knn_")) for h in header if h.startswith("knn_")]
    columns = {
        "sample_id": np.array([r[0] for r in rows]),
        "source": np.array([r[1] for r in rows]),
        "label": np.array([r[2] for r in rows]),
        "category": np.array([r[3] for r in rows]),
        "recon_error": np.array([float(r[4]) for r in rows]),
        "knn": np.array([[float(v) for v in r[5:]] for r in rows]).reshape(len(rows), len(ks)),
        "ks": ks,
    }
    return metadata, columns
