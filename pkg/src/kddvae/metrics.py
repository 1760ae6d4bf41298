"""Threshold-free evaluation: ROC curves and AUROC, globally and per attack
category. AUROC is computed from ranks (Mann-Whitney with tie correction);
the stored curve carries integer counts so the trapezoidal area can be
cross-checked, in exact arithmetic if needed."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EvalError
from .schema import AttackCategory

EVAL_CATEGORIES = (
    AttackCategory.DOS,
    AttackCategory.PROBE,
    AttackCategory.U2R,
    AttackCategory.R2L,
)


@dataclass(frozen=True)
class LabeledScores:
    """Parallel score / anomaly-flag arrays, optionally with categories."""

    scores: np.ndarray
    is_anomaly: np.ndarray
    categories: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", np.asarray(self.scores, dtype=np.float64))
        object.__setattr__(self, "is_anomaly", np.asarray(self.is_anomaly, dtype=bool))
        if self.scores.ndim != 1 or self.scores.shape != self.is_anomaly.shape:
            raise EvalError("scores and labels must be 1-D and the same length")
        if not np.all(np.isfinite(self.scores)):
            raise EvalError("scores must be finite")
        if self.categories is not None:
            cats = np.asarray(self.categories)
            if cats.shape != self.scores.shape:
                raise EvalError("categories must align with scores")
            object.__setattr__(self, "categories", cats)

    @property
    def n_pos(self) -> int:
        return int(self.is_anomaly.sum())

    @property
    def n_neg(self) -> int:
        return int((~self.is_anomaly).sum())

    def _require_both_classes(self) -> None:
        if self.n_pos == 0 or self.n_neg == 0:
            raise EvalError(
                f"need at least one anomaly and one normal (got {self.n_pos} / {self.n_neg})"
            )


@dataclass(frozen=True)
class RocCurve:
    """Operating points from (0,0) to (1,1), ordered by decreasing threshold.

    Point i is the outcome of predicting anomaly iff score > thresholds[i];
    `tp` / `fp` are the raw counts behind each point. `auroc` is the
    trapezoidal area of the stored points.
    """

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    n_pos: int
    n_neg: int
    auroc: float

    @property
    def n_points(self) -> int:
        return len(self.fpr)


def trapezoid_area(fpr: np.ndarray, tpr: np.ndarray) -> float:
    """Exactly-rounded trapezoidal integral of tpr over fpr."""
    fpr = np.asarray(fpr, dtype=np.float64)
    tpr = np.asarray(tpr, dtype=np.float64)
    terms = (fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) * 0.5
    return math.fsum(terms.tolist())


def roc_curve(ls: LabeledScores) -> RocCurve:
    """One point per distinct score threshold; tied scores collapse."""
    ls._require_both_classes()
    order = np.argsort(-ls.scores, kind="stable")
    s = ls.scores[order]
    y = ls.is_anomaly[order]
    # Last position of each tie group.
    boundaries = np.flatnonzero(np.diff(s))
    ends = np.concatenate([boundaries, [len(s) - 1]])
    tp_cum = np.cumsum(y)[ends]
    fp_cum = (ends + 1) - tp_cum
    tp = np.concatenate([[0], tp_cum]).astype(np.int64)
    fp = np.concatenate([[0], fp_cum]).astype(np.int64)
    P, N = ls.n_pos, ls.n_neg
    tpr = tp / P
    fpr = fp / N
    thresholds = np.concatenate([[s[0]], s[ends[:-1] + 1], [-np.inf]])
    return RocCurve(
        fpr=fpr,
        tpr=tpr,
        thresholds=thresholds,
        tp=tp,
        fp=fp,
        n_pos=P,
        n_neg=N,
        auroc=trapezoid_area(fpr, tpr),
    )


def average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing their average rank."""
    values = np.asarray(values)
    order = np.argsort(values, kind="stable")
    s = values[order]
    n = len(s)
    boundaries = np.flatnonzero(np.diff(s))
    ends = np.concatenate([boundaries, [n - 1]])
    starts = np.concatenate([[0], boundaries + 1])
    group_rank = (starts + ends) / 2.0 + 1.0
    gid = np.zeros(n, dtype=np.int64)
    gid[starts[1:]] = 1
    gid = np.cumsum(gid)
    ranks = np.empty(n)
    ranks[order] = group_rank[gid]
    return ranks


def auroc(ls: LabeledScores) -> float:
    """Probability a random anomaly outscores a random normal, ties counted
    half: (concordant + ties/2) / (P*N), computed from rank sums."""
    ls._require_both_classes()
    ranks = average_ranks(ls.scores)
    P, N = ls.n_pos, ls.n_neg
    u = ranks[ls.is_anomaly].sum() - P * (P + 1) / 2.0
    return float(u / (P * N))


def per_category_eval(ls: LabeledScores) -> dict[AttackCategory, RocCurve]:
    """Per-category ROC: positives are that category's attacks, negatives are
    all normals in `ls`; the other categories are excluded. Categories with
    no attacks present are omitted with a warning."""
    if ls.categories is None:
        raise EvalError("per-category evaluation needs category labels")
    out: dict[AttackCategory, RocCurve] = {}
    normal_mask = ~ls.is_anomaly
    for cat in EVAL_CATEGORIES:
        pos_mask = ls.is_anomaly & (ls.categories == cat.value)
        if not pos_mask.any():
            warnings.warn(f"no {cat.value} attacks present; omitting its curve")
            continue
        keep = normal_mask | pos_mask
        out[cat] = roc_curve(
            LabeledScores(scores=ls.scores[keep], is_anomaly=ls.is_anomaly[keep])
        )
    return out


# --- artifact emission -----------------------------------------------------------


def write_roc_points(curve: RocCurve, path: str | Path) -> None:
    """Delimited curve dump, one point per line, plottable by anything."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("fpr,tpr,threshold,tp,fp\n")
        for i in range(curve.n_points):
            fh.write(
                f"{float(curve.fpr[i])!r},{float(curve.tpr[i])!r},"
                f"{float(curve.thresholds[i])!r},{int(curve.tp[i])},{int(curve.fp[i])}\n"
            )


def write_metrics_json(metrics: dict, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(metrics, indent=2, sort_keys=True))
