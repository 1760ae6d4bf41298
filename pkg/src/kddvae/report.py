"""Render a sweep result: fixed-width summary table, long-format delimited
files (cells, means, heatmap triples), or plain JSON."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable

from .errors import ConfigError
from .sweep import SweepResult

REPORT_FORMATS = ("table-text", "delimited", "json")


def emit_report(
    result: SweepResult, formats: Iterable[str], out_dir: str | Path
) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for fmt in formats:
        if fmt == "table-text":
            written.append(_emit_table(result, out_dir / "table.txt"))
        elif fmt == "delimited":
            written.extend(_emit_delimited(result, out_dir))
        elif fmt == "json":
            path = out_dir / "report.json"
            path.write_text(json.dumps(result.to_dict(), indent=2, sort_keys=True))
            written.append(path)
        else:
            raise ConfigError(f"unknown report format {fmt!r}; choose from {REPORT_FORMATS}")
    return written


def _column_names(result: SweepResult) -> list[str]:
    return [f"knn_{k}" for k in result.config.ks] + ["rec"]


def _emit_table(result: SweepResult, path: Path) -> Path:
    """Mean AUROC grid, one row per beta. '*' marks the best column of the
    row; '^' marks latent-kNN columns whose mean beats the reconstruction
    detector for that beta."""
    markers = {m["beta"]: m for m in result.markers()}
    names = _column_names(result)
    headers = ["beta"] + [n.replace("knn_", "k=") for n in names]
    rows = []
    for mean in result.means:
        mk = markers[mean.beta]
        row = [f"{mean.beta:g}"]
        for name in names:
            if name == "rec":
                value = mean.auroc_rec
            else:
                value = mean.auroc_knn.get(int(name.removeprefix("knn_")))
            if value is None:
                row.append("---")
                continue
            cell = f"{100.0 * value:.2f}"
            if name in mk["best"]:
                cell += "*"
            if name.startswith("knn_") and int(name.removeprefix("knn_")) in mk["knn_beats_rec"]:
                cell += "^"
            row.append(cell)
        if not mean.complete:
            row[0] += "!"
        rows.append(row)
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = [
        f"Mean AUROC (%) over seeds {list(result.config.seeds)}",
        f"dataset digest: {result.dataset_digest[:16]}...",
        "markers: * best column per beta; ^ latent-kNN mean above the reconstruction mean;"
        " ! incomplete row (failed cells skipped)",
        "",
        "  ".join(h.rjust(w) for h, w in zip(headers, widths)),
    ]
    for row in rows:
        lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
    path.write_text("\n".join(lines) + "\n")
    return path


def _emit_delimited(result: SweepResult, out_dir: Path) -> list[Path]:
    cells_path = out_dir / "cells.csv"
    with open(cells_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beta", "seed", "detector", "k", "auroc", "status", "checkpoint_digest"])
        for cell in result.cells:
            if cell.status != "ok":
                writer.writerow([repr(cell.beta), cell.seed, "", "", "", cell.status, ""])
                continue
            writer.writerow(
                [repr(cell.beta), cell.seed, "rec", "", repr(cell.auroc_rec), "ok",
                 cell.checkpoint_digest]
            )
            for k in result.config.ks:
                writer.writerow(
                    [repr(cell.beta), cell.seed, "knn", k, repr(cell.auroc_knn[k]), "ok",
                     cell.checkpoint_digest]
                )

    markers = {m["beta"]: m for m in result.markers()}
    means_path = out_dir / "means.csv"
    with open(means_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["beta", "detector", "k", "n_seeds_ok", "complete", "mean_auroc", "is_best",
             "beats_rec"]
        )
        for mean in result.means:
            mk = markers[mean.beta]
            if mean.auroc_rec is not None:
                writer.writerow(
                    [repr(mean.beta), "rec", "", mean.n_seeds_ok, int(mean.complete),
                     repr(mean.auroc_rec), int("rec" in mk["best"]), ""]
                )
            for k in result.config.ks:
                if k not in mean.auroc_knn:
                    continue
                writer.writerow(
                    [repr(mean.beta), "knn", k, mean.n_seeds_ok, int(mean.complete),
                     repr(mean.auroc_knn[k]), int(f"knn_{k}" in mk["best"]),
                     int(k in mk["knn_beats_rec"])]
                )

    heatmap_path = out_dir / "heatmap.csv"
    with open(heatmap_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beta", "k", "mean_auroc"])
        for mean in result.means:
            for k in result.config.ks:
                if k in mean.auroc_knn:
                    writer.writerow([repr(mean.beta), k, repr(mean.auroc_knn[k])])
            if mean.auroc_rec is not None:
                writer.writerow([repr(mean.beta), "rec", repr(mean.auroc_rec)])

    return [cells_path, means_path, heatmap_path]
