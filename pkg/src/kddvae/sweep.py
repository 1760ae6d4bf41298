"""Sweep harness: train one model per (beta, seed), score both detectors over
every configured k, aggregate seed means per beta, and cache each cell under a
content-addressed key so reruns never retrain finished work."""

from __future__ import annotations

import hashlib
import json
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .archive import EncodedSplit, load_archive
from .errors import ConfigError
from .metrics import LabeledScores, auroc
from .model import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_DECODER_HIDDEN,
    DEFAULT_ENCODER_HIDDEN,
    DEFAULT_EPOCHS,
    DEFAULT_LATENT_DIM,
    DEFAULT_LEARNING_RATE,
    BetaVae,
    save_checkpoint,
)
from .nn import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, EPS_LOG
from .preprocess import EPS_STD
from .scoring import (
    DEFAULT_K_VALUES,
    LatentIndex,
    latent_knn_table,
    project_latent,
    reconstruction_errors,
    write_scores,
)

DEFAULT_BETAS = (0.0, 1e-5, 1e-4, 1e-3, 1e-2, 0.1, 0.5)
DEFAULT_SEEDS = (1, 2, 3, 4)

RESULT_FORMAT_VERSION = 1

# Everything that silently changes numbers if it changes; part of every cell
# cache key so stale cells can never be mixed into a result.
CONVENTIONS = {
    "loss": "mean-over-batch,sum-over-features,unit-weights",
    "eps_log": EPS_LOG,
    "eps_std": EPS_STD,
    "hidden_activation": "relu",
    "adam": [ADAM_BETA1, ADAM_BETA2, ADAM_EPS],
    "cell_format": 1,
}


@dataclass(frozen=True)
class SweepConfig:
    archive: str
    out_dir: str
    betas: tuple[float, ...] = DEFAULT_BETAS
    ks: tuple[int, ...] = DEFAULT_K_VALUES
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    learning_rate: float = DEFAULT_LEARNING_RATE
    latent_dim: int = DEFAULT_LATENT_DIM
    encoder_hidden: tuple[int, ...] = DEFAULT_ENCODER_HIDDEN
    decoder_hidden: tuple[int, ...] = DEFAULT_DECODER_HIDDEN
    projection: str = "mean"
    keep_scores: bool = True
    workers: int = 1

    def validate(self) -> None:
        if not self.betas:
            raise ConfigError("beta list must be non-empty")
        if any(b < 0 for b in self.betas):
            raise ConfigError("beta values must be >= 0")
        if not self.seeds:
            raise ConfigError("seed list must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if not self.ks or any(k < 1 for k in self.ks):
            raise ConfigError("k values must be positive")
        if list(self.ks) != sorted(set(self.ks)):
            raise ConfigError("k values must be strictly increasing")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.projection not in ("mean", "sampled"):
            raise ConfigError("projection must be 'mean' or 'sampled'")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown sweep config keys: {sorted(unknown)}")
        if "archive" not in d or "out_dir" not in d:
            raise ConfigError("sweep config needs 'archive' and 'out_dir'")
        kwargs = dict(d)
        for key in ("betas", "seeds", "ks", "encoder_hidden", "decoder_hidden"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_json_file(cls, path: str | Path) -> "SweepConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read sweep config {path}: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "archive": self.archive,
            "out_dir": self.out_dir,
            "betas": list(self.betas),
            "ks": list(self.ks),
            "seeds": list(self.seeds),
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "latent_dim": self.latent_dim,
            "encoder_hidden": list(self.encoder_hidden),
            "decoder_hidden": list(self.decoder_hidden),
            "projection": self.projection,
            "keep_scores": self.keep_scores,
            "workers": self.workers,
        }


def cell_key(config: SweepConfig, dataset_digest: str, beta: float, seed: int) -> str:
    """Content hash identifying one (beta, seed) cell; any change to the data,
    the model settings, or the numeric conventions yields a new key."""
    payload = {
        "dataset_digest": dataset_digest,
        "beta": beta,
        "seed": seed,
        "ks": list(config.ks),
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "latent_dim": config.latent_dim,
        "encoder_hidden": list(config.encoder_hidden),
        "decoder_hidden": list(config.decoder_hidden),
        "projection": config.projection,
        "conventions": CONVENTIONS,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class CellResult:
    beta: float
    seed: int
    key: str
    status: str  # "ok" | "failed"
    auroc_rec: float | None = None
    auroc_knn: dict[int, float] = field(default_factory=dict)
    checkpoint_digest: str | None = None
    error: str | None = None
    wall_clock_s: float | None = None
    cached: bool = False

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "seed": self.seed,
            "key": self.key,
            "status": self.status,
            "auroc_rec": self.auroc_rec,
            "auroc_knn": {str(k): v for k, v in self.auroc_knn.items()},
            "checkpoint_digest": self.checkpoint_digest,
            "error": self.error,
            "wall_clock_s": self.wall_clock_s,
        }

    @classmethod
    def from_dict(cls, d: dict, cached: bool = False) -> "CellResult":
        return cls(
            beta=float(d["beta"]),
            seed=int(d["seed"]),
            key=str(d["key"]),
            status=str(d["status"]),
            auroc_rec=d.get("auroc_rec"),
            auroc_knn={int(k): float(v) for k, v in (d.get("auroc_knn") or {}).items()},
            checkpoint_digest=d.get("checkpoint_digest"),
            error=d.get("error"),
            wall_clock_s=d.get("wall_clock_s"),
            cached=cached,
        )


@dataclass(frozen=True)
class BetaMean:
    beta: float
    n_seeds_ok: int
    complete: bool
    auroc_rec: float | None
    auroc_knn: dict[int, float]

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "n_seeds_ok": self.n_seeds_ok,
            "complete": self.complete,
            "auroc_rec": self.auroc_rec,
            "auroc_knn": {str(k): v for k, v in self.auroc_knn.items()},
        }


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    dataset_digest: str
    cells: tuple[CellResult, ...]
    means: tuple[BetaMean, ...]
    trained_this_run: int

    def cell(self, beta: float, seed: int) -> CellResult:
        for c in self.cells:
            if c.beta == beta and c.seed == seed:
                return c
        raise KeyError(f"no cell for beta={beta}, seed={seed}")

    def mean_for(self, beta: float) -> BetaMean:
        for m in self.means:
            if m.beta == beta:
                return m
        raise KeyError(f"no mean row for beta={beta}")

    def markers(self) -> list[dict]:
        """Per-beta best column and which k columns beat the reconstruction
        detector, derived from the stored means."""
        rows = []
        for m in self.means:
            columns: dict[str, float] = {}
            for k, v in m.auroc_knn.items():
                columns[f"knn_{k}"] = v
            if m.auroc_rec is not None:
                columns["rec"] = m.auroc_rec
            if not columns:
                rows.append({"beta": m.beta, "best": [], "knn_beats_rec": []})
                continue
            best_value = max(columns.values())
            best = sorted(name for name, v in columns.items() if v == best_value)
            beats = (
                sorted(
                    (k for k, v in m.auroc_knn.items() if v > m.auroc_rec),
                )
                if m.auroc_rec is not None
                else []
            )
            rows.append({"beta": m.beta, "best": best, "knn_beats_rec": beats})
        return rows

    def to_dict(self) -> dict:
        return {
            "format_version": RESULT_FORMAT_VERSION,
            "kind": "kddvae-sweep-result",
            "config": self.config.to_dict(),
            "dataset_digest": self.dataset_digest,
            "cells": [c.to_dict() for c in self.cells],
            "means": [m.to_dict() for m in self.means],
            "markers": self.markers(),
            "trained_this_run": self.trained_this_run,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepResult":
        if d.get("kind") != "kddvae-sweep-result":
            raise ConfigError("not a sweep result document")
        cfg = SweepConfig.from_dict(d["config"])
        means = tuple(
            BetaMean(
                beta=float(m["beta"]),
                n_seeds_ok=int(m["n_seeds_ok"]),
                complete=bool(m["complete"]),
                auroc_rec=m.get("auroc_rec"),
                auroc_knn={int(k): float(v) for k, v in (m.get("auroc_knn") or {}).items()},
            )
            for m in d["means"]
        )
        return cls(
            config=cfg,
            dataset_digest=str(d["dataset_digest"]),
            cells=tuple(CellResult.from_dict(c) for c in d["cells"]),
            means=means,
            trained_this_run=int(d.get("trained_this_run", 0)),
        )

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "SweepResult":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read sweep result {path}: {exc}") from exc


# --- cell execution ---------------------------------------------------------------

_ARCHIVE_CACHE: dict[str, EncodedSplit] = {}


def _archive_for(path: str) -> EncodedSplit:
    if path not in _ARCHIVE_CACHE:
        _ARCHIVE_CACHE.clear()  # one archive per process is plenty
        _ARCHIVE_CACHE[path] = load_archive(path)
    return _ARCHIVE_CACHE[path]


def score_split(
    model: BetaVae, encoded: EncodedSplit, ks: Sequence[int], projection: str
) -> dict:
    """Score X_test followed by X_attack with both detectors; one k-NN query
    at the largest k serves every configured k.

    In sampled mode the index gets its own noise stream while both detectors
    share one draw per query sample.
    """
    index = LatentIndex.build(model, encoded.x_train, projection, noise_seed=1)
    queries = np.vstack([encoded.x_test, encoded.x_attack])
    z_queries = project_latent(model, queries, projection, noise_seed=2)
    rec = reconstruction_errors(model, queries, z=z_queries)
    knn = latent_knn_table(index, z_queries, ks)
    is_attack = np.concatenate(
        [np.zeros(len(encoded.x_test), dtype=bool), np.ones(len(encoded.x_attack), dtype=bool)]
    )
    return {"rec": rec, "knn": knn, "is_attack": is_attack}


def _execute_cell(archive_path: str, cfg_dict: dict, beta: float, seed: int, cell_dir: str) -> dict:
    """Run one (beta, seed) cell and persist its artifacts; returns the cell
    record. Top-level so it can cross a process boundary."""
    config = SweepConfig.from_dict(cfg_dict)
    t0 = time.monotonic()
    cell_path = Path(cell_dir)
    cell_path.mkdir(parents=True, exist_ok=True)
    encoded = _archive_for(archive_path)
    key = cell_key(config, encoded.digest, beta, seed)
    try:
        model = BetaVae(
            layout=encoded.layout,
            beta=beta,
            latent_dim=config.latent_dim,
            encoder_hidden=config.encoder_hidden,
            decoder_hidden=config.decoder_hidden,
            learning_rate=config.learning_rate,
            batch_size=config.batch_size,
            epochs=config.epochs,
            seed=seed,
        ).fit(encoded.x_train)
        ckpt_digest = save_checkpoint(model, cell_path / "checkpoint.bvae")
        scored = score_split(model, encoded, config.ks, config.projection)
        if config.keep_scores:
            ids = np.concatenate([encoded.test_ids, encoded.attack_ids])
            sources = np.concatenate(
                [np.full(len(encoded.test_ids), "test"), encoded.attack_sources]
            )
            labels = np.concatenate(
                [np.full(len(encoded.test_ids), "normal"), encoded.attack_labels]
            )
            categories = np.concatenate(
                [np.full(len(encoded.test_ids), "Normal"), encoded.attack_categories]
            )
            write_scores(
                cell_path / "scores.csv",
                {
                    "beta": beta,
                    "seed": seed,
                    "projection": config.projection,
                    "checkpoint": ckpt_digest,
                    "dataset_digest": encoded.digest,
                },
                ids,
                sources,
                labels,
                categories,
                scored["rec"],
                scored["knn"],
                config.ks,
            )
        ls_rec = LabeledScores(scores=scored["rec"], is_anomaly=scored["is_attack"])
        record = {
            "beta": beta,
            "seed": seed,
            "key": key,
            "status": "ok",
            "auroc_rec": auroc(ls_rec),
            "auroc_knn": {
                str(k): auroc(
                    LabeledScores(scores=scored["knn"][:, j], is_anomaly=scored["is_attack"])
                )
                for j, k in enumerate(config.ks)
            },
            "checkpoint_digest": ckpt_digest,
            "error": None,
            "wall_clock_s": time.monotonic() - t0,
        }
    except Exception as exc:  # cell failures are recorded, not fatal
        record = {
            "beta": beta,
            "seed": seed,
            "key": key,
            "status": "failed",
            "auroc_rec": None,
            "auroc_knn": {},
            "checkpoint_digest": None,
            "error": f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}",
            "wall_clock_s": time.monotonic() - t0,
        }
    (cell_path / "cell.json").write_text(json.dumps(record, indent=2, sort_keys=True))
    return record


def _load_cached_cell(cell_dir: Path, key: str) -> CellResult | None:
    cell_file = cell_dir / "cell.json"
    if not cell_file.exists():
        return None
    try:
        record = json.loads(cell_file.read_text())
    except json.JSONDecodeError:
        return None
    if record.get("key") != key or record.get("status") != "ok":
        return None  # failed or stale cells are re-run
    return CellResult.from_dict(record, cached=True)


def aggregate_means(
    config: SweepConfig, cells: Sequence[CellResult]
) -> tuple[BetaMean, ...]:
    means = []
    for beta in config.betas:
        ok = [c for c in cells if c.beta == beta and c.status == "ok"]
        if not ok:
            means.append(
                BetaMean(beta=beta, n_seeds_ok=0, complete=False, auroc_rec=None, auroc_knn={})
            )
            continue
        rec_mean = float(np.mean([c.auroc_rec for c in ok]))
        knn_mean = {
            k: float(np.mean([c.auroc_knn[k] for c in ok])) for k in config.ks
        }
        means.append(
            BetaMean(
                beta=beta,
                n_seeds_ok=len(ok),
                complete=len(ok) == len(config.seeds),
                auroc_rec=rec_mean,
                auroc_knn=knn_mean,
            )
        )
    return tuple(means)


def run_sweep(config: SweepConfig, progress: bool = False) -> SweepResult:
    """Execute the full (beta x seed) grid with per-cell caching.

    A finished cell is keyed by (dataset digest, cell settings, numeric
    conventions); reruns load it instead of retraining. Failed cells are
    recorded, skipped in the means, and retried on the next run.
    """
    config.validate()
    encoded = load_archive(config.archive)
    if max(config.ks) > encoded.n_train:
        raise ConfigError(
            f"largest k ({max(config.ks)}) exceeds training rows ({encoded.n_train})"
        )
    out_dir = Path(config.out_dir)
    cells_dir = out_dir / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)

    grid = [(beta, seed) for beta in config.betas for seed in config.seeds]
    keys = {
        (beta, seed): cell_key(config, encoded.digest, beta, seed) for beta, seed in grid
    }
    results: dict[tuple[float, int], CellResult] = {}
    pending: list[tuple[float, int]] = []
    for beta, seed in grid:
        cached = _load_cached_cell(cells_dir / keys[(beta, seed)][:16], keys[(beta, seed)])
        if cached is not None:
            results[(beta, seed)] = cached
        else:
            pending.append((beta, seed))

    def cell_args(beta: float, seed: int) -> tuple:
        return (
            config.archive,
            config.to_dict(),
            beta,
            seed,
            str(cells_dir / keys[(beta, seed)][:16]),
        )

    if pending and config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = {
                pool.submit(_execute_cell, *cell_args(beta, seed)): (beta, seed)
                for beta, seed in pending
            }
            for future, (beta, seed) in futures.items():
                results[(beta, seed)] = CellResult.from_dict(future.result())
                if progress:
                    _print_cell(results[(beta, seed)])
    else:
        for beta, seed in pending:
            results[(beta, seed)] = CellResult.from_dict(_execute_cell(*cell_args(beta, seed)))
            if progress:
                _print_cell(results[(beta, seed)])

    ordered = tuple(results[(beta, seed)] for beta, seed in grid)
    trained = sum(1 for c in ordered if not c.cached and c.status == "ok")
    result = SweepResult(
        config=config,
        dataset_digest=encoded.digest,
        cells=ordered,
        means=aggregate_means(config, ordered),
        trained_this_run=trained,
    )
    result.save(out_dir / "sweep_result.json")
    return result


def _print_cell(cell: CellResult) -> None:
    if cell.status == "ok":
        best_k = max(cell.auroc_knn, key=cell.auroc_knn.get)
        print(
            f"[cell] beta={cell.beta:g} seed={cell.seed} rec={cell.auroc_rec:.4f} "
            f"knn[{best_k}]={cell.auroc_knn[best_k]:.4f} ({cell.wall_clock_s:.1f}s)"
        )
    else:
        print(f"[cell] beta={cell.beta:g} seed={cell.seed} FAILED")
