"""Command-line interface.

Subcommands mirror the pipeline stages: preprocess -> train -> score -> eval,
plus sweep (the full grid with caching) and report (render a sweep result).
Exit codes: 0 success, 2 configuration/usage, 3 data/artifact problems,
4 training failure, 5 scoring/evaluation failure, 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .archive import build_encoded_split, load_archive, save_archive
from .dataset import parse_nslkdd, split_dataset
from .errors import ConfigError, EvalError, KddVaeError
from .metrics import (
    LabeledScores,
    auroc,
    per_category_eval,
    roc_curve,
    write_metrics_json,
    write_roc_points,
)
from .model import BetaVae, load_checkpoint, save_checkpoint
from .preprocess import KddPreprocessor
from .report import REPORT_FORMATS, emit_report
from .scoring import (
    DEFAULT_K_VALUES,
    read_scores,
    write_scores,
)
from .sweep import SweepConfig, SweepResult, run_sweep, score_split


def _cmd_preprocess(args: argparse.Namespace) -> int:
    train_records = parse_nslkdd(args.train)
    test_records = parse_nslkdd(args.test)
    split = split_dataset(train_records, test_records)
    pre = KddPreprocessor().fit(split.x_train, vocab_records=split.all_records())
    encoded = build_encoded_split(split, pre)
    save_archive(encoded, args.out_archive)
    pre.save_manifest(args.out_manifest)
    print(
        f"encoded {encoded.x_train.shape[0]} train / {encoded.x_test.shape[0]} test normals, "
        f"{encoded.x_attack.shape[0]} attacks; width={encoded.layout.width}; "
        f"digest={encoded.digest[:16]}..."
    )
    return 0


def _parse_sizes(text: str, flag: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from None
    if not sizes:
        raise ConfigError(f"{flag} must name at least one layer")
    return sizes


def _cmd_train(args: argparse.Namespace) -> int:
    encoded = load_archive(args.archive)
    model = BetaVae(
        layout=encoded.layout,
        beta=args.beta,
        seed=args.seed,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        latent_dim=args.latent_dim,
        encoder_hidden=_parse_sizes(args.encoder_hidden, "--encoder-hidden"),
        decoder_hidden=_parse_sizes(args.decoder_hidden, "--decoder-hidden"),
    ).fit(encoded.x_train)
    digest = save_checkpoint(model, args.out)
    report = model.report_
    first = report.epoch_losses[0].total if report.epoch_losses else float("nan")
    last = report.epoch_losses[-1].total if report.epoch_losses else float("nan")
    print(
        f"trained beta={args.beta:g} seed={args.seed} epochs={args.epochs}: "
        f"loss {first:.5f} -> {last:.5f} in {report.wall_clock_s:.1f}s; "
        f"checkpoint digest {digest[:16]}..."
    )
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    model, _, config = load_checkpoint(args.checkpoint)
    encoded = load_archive(args.archive)
    if encoded.layout != model.layout:
        raise ConfigError("archive layout does not match checkpoint layout")
    ks = tuple(args.k) if args.k else DEFAULT_K_VALUES
    if max(ks) > encoded.n_train:
        raise ConfigError(f"largest k ({max(ks)}) exceeds training rows ({encoded.n_train})")
    scored = score_split(model, encoded, ks, args.projection)
    ids = np.concatenate([encoded.test_ids, encoded.attack_ids])
    sources = np.concatenate([np.full(len(encoded.test_ids), "test"), encoded.attack_sources])
    labels = np.concatenate([np.full(len(encoded.test_ids), "normal"), encoded.attack_labels])
    categories = np.concatenate(
        [np.full(len(encoded.test_ids), "Normal"), encoded.attack_categories]
    )
    write_scores(
        args.out,
        {
            "beta": config["beta"],
            "seed": config["seed"],
            "projection": args.projection,
            "dataset_digest": encoded.digest,
        },
        ids,
        sources,
        labels,
        categories,
        scored["rec"],
        scored["knn"],
        ks,
    )
    print(f"scored {len(ids)} samples ({len(encoded.attack_ids)} attacks) -> {args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    metadata, columns = read_scores(args.scores)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    is_attack = columns["label"] != "normal"
    ks = columns["ks"]
    detectors = {"rec": columns["recon_error"]}
    for j, k in enumerate(ks):
        detectors[f"knn_{k}"] = columns["knn"][:, j]

    metrics: dict = {
        "metadata": metadata,
        "global": {},
        "per_category": {},
        "counts": {},
        "roc_points": {},
    }
    metrics["counts"] = {
        "normals": int((~is_attack).sum()),
        "attacks": int(is_attack.sum()),
    }
    for name, scores in detectors.items():
        ls = LabeledScores(scores=scores, is_anomaly=is_attack, categories=columns["category"])
        global_curve = roc_curve(ls)
        metrics["global"][name] = auroc(ls)
        per_cat = per_category_eval(ls)
        metrics["per_category"][name] = {c.value: cur.auroc for c, cur in per_cat.items()}
        metrics["roc_points"][name] = {
            "global": global_curve.n_points,
            **{c.value: cur.n_points for c, cur in per_cat.items()},
        }
        if args.roc_files:
            write_roc_points(global_curve, out_dir / f"roc_global_{name}.csv")
            for cat, curve in per_cat.items():
                write_roc_points(curve, out_dir / f"roc_{cat.value.lower()}_{name}.csv")
    if args.joint:
        top_k = ks[-1]
        joint = out_dir / "joint_scores.csv"
        with open(joint, "w", encoding="utf-8") as fh:
            fh.write(f"sample_id,category,recon_error,knn_{top_k}\n")
            for i in range(len(columns["sample_id"])):
                fh.write(
                    f"{columns['sample_id'][i]},{columns['category'][i]},"
                    f"{float(columns['recon_error'][i])!r},{float(columns['knn'][i, -1])!r}\n"
                )
    write_metrics_json(metrics, out_dir / "metrics.json")
    print(f"global AUROC: " + ", ".join(f"{n}={v:.4f}" for n, v in metrics["global"].items()))
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg_dict = {}
    if args.config:
        cfg_dict = json.loads(Path(args.config).read_text())
    if args.archive:
        cfg_dict["archive"] = args.archive
    if args.out_dir:
        cfg_dict["out_dir"] = args.out_dir
    config = SweepConfig.from_dict(cfg_dict)
    result = run_sweep(config, progress=True)
    ok = sum(1 for c in result.cells if c.status == "ok")
    print(
        f"sweep done: {ok}/{len(result.cells)} cells ok, "
        f"{result.trained_this_run} trained this run -> "
        f"{Path(config.out_dir) / 'sweep_result.json'}"
    )
    if ok < len(result.cells):
        return EvalError.exit_code
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    result = SweepResult.load(args.result)
    formats = [f.strip() for f in args.format.split(",") if f.strip()]
    written = emit_report(result, formats, args.out_dir)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kddvae",
        description=(
            "Train a beta-VAE on normal NSL-KDD traffic and detect anomalies via "
            "reconstruction error or latent k-NN distance."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="encode raw NSL-KDD files into a split archive")
    p.add_argument("--train", required=True, help="KDDTrain+.txt path")
    p.add_argument("--test", required=True, help="KDDTest+.txt path")
    p.add_argument("--out-archive", required=True, help="output .npz archive")
    p.add_argument("--out-manifest", required=True, help="output preprocessor manifest JSON")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("train", help="train one model from an encoded archive")
    p.add_argument("--archive", required=True)
    p.add_argument("--beta", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=2048)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--latent-dim", type=int, default=8)
    p.add_argument("--encoder-hidden", default="64,32,16", help="comma-separated layer sizes")
    p.add_argument("--decoder-hidden", default="16,32,64", help="comma-separated layer sizes")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("score", help="score X_test and X_attack with both detectors")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--archive", required=True)
    p.add_argument("--out", required=True, help="output scores CSV")
    p.add_argument("--projection", choices=("mean", "sampled"), default="mean")
    p.add_argument("-k", type=int, action="append", help="neighbor count (repeatable)")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("eval", help="ROC/AUROC metrics from a scores file")
    p.add_argument("--scores", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--roc-files", action="store_true", help="also dump ROC point files")
    p.add_argument("--joint", action="store_true", help="dump per-sample joint score triples")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="run the full beta x seed grid with caching")
    p.add_argument("--config", help="sweep config JSON")
    p.add_argument("--archive", help="override archive path")
    p.add_argument("--out-dir", help="override output directory")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="render a sweep result")
    p.add_argument("--result", required=True, help="sweep_result.json path")
    p.add_argument(
        "--format",
        default="table-text",
        help=f"comma-separated subset of {','.join(REPORT_FORMATS)}",
    )
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KddVaeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
