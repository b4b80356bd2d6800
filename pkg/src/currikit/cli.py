"""Command-line pipeline: ingest -> score -> schedule -> train -> report.

Stages communicate only through files, so any stage can be replaced by
an external tool (externally computed model-loss scores slot in at the
score stage). Commands are idempotent for identical inputs and flags;
timestamps appear only in the run manifest.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import __version__  # noqa: E402
from .corpus import (  # noqa: E402
    CorpusFormatError,
    TokenizerConfig,
    build_stats,
    load_corpus,
    load_stats,
    save_stats,
)
from .metrics import (  # noqa: E402
    INTERNAL_METRICS,
    ScoreFileError,
    compute_scores,
    load_external_scores,
    read_scores,
    write_scores,
)
from .samplers import (  # noqa: E402
    SAMPLER_KINDS,
    IncompatibleMetricError,
    SamplerConfig,
    make_schedule,
)
from .schedule_io import ScheduleFormatError, load_schedule, write_schedule  # noqa: E402
from .trainer import (  # noqa: E402
    BASELINE_LABEL,
    MatrixResult,
    TrainerConfig,
    TrainerError,
    matrix_table,
    read_runs_csv,
    run_matrix,
    train,
    train_split_size,
    write_curve_csv,
    write_runs_csv,
)

SEED_ENV_VAR = "CURRIKIT_SEED"

# deterministic SVG output: fixed hash salt, no embedded creation date
plt.rcParams["svg.hashsalt"] = "currikit"


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV_VAR, "0"))


def _tokenizer_config(args: argparse.Namespace) -> TokenizerConfig:
    return TokenizerConfig(
        lowercase=not args.no_lowercase, max_tokens=args.max_tokens
    )


def _load(args: argparse.Namespace):
    return load_corpus(args.input, args.format, _tokenizer_config(args))


def _write_manifest(out_dir: Path, args: argparse.Namespace, outputs: list[Path]) -> None:
    manifest = {
        "tool": "currikit",
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "command": vars(args)["command"],
        "config": {
            k: (str(v) if isinstance(v, Path) else v)
            for k, v in sorted(vars(args).items())
            if k not in ("func", "command")
        },
        "outputs": sorted(str(p.relative_to(out_dir)) for p in outputs),
    }
    for path in outputs:
        if not path.exists():
            raise OSError(f"manifest lists missing output {path}")
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )


def _save_curve_plot(labeled_curves: list[tuple[str, list[tuple[int, float]]]],
                     path: Path, title: str) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, points in labeled_curves:
        steps = [s for s, _ in points]
        accs = [a for _, a in points]
        style = {"linestyle": "--", "color": "black"} if label == BASELINE_LABEL else {}
        ax.plot(steps, accs, label=label, **style)
    ax.set_xlabel("training steps")
    ax.set_ylabel("held-out accuracy")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_ingest(args: argparse.Namespace) -> int:
    corpus = _load(args)
    stats = build_stats(corpus)
    save_stats(stats, args.out, corpus.content_hash)
    print(f"docs={len(corpus)} vocab={stats.vocab_size}")
    if corpus.num_skipped:
        print(f"skipped={corpus.num_skipped}", file=sys.stderr)
    return 0


def _stats_for(args: argparse.Namespace, corpus):
    if getattr(args, "stats", None):
        stats, cached_hash = load_stats(args.stats)
        if cached_hash != corpus.content_hash:
            raise ScoreFileError(
                f"stats cache {args.stats} was built for a different corpus"
            )
        return stats
    return build_stats(corpus)


def cmd_score(args: argparse.Namespace) -> int:
    corpus = _load(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    wanted = list(INTERNAL_METRICS) if args.metric == "all" else [args.metric]
    needs_stats = any(m not in ("length", "external") for m in wanted)
    stats = _stats_for(args, corpus) if needs_stats else None
    outputs = []
    for metric in wanted:
        if metric == "external":
            if not args.scores:
                raise ScoreFileError("--scores is required for the external metric")
            scores = load_external_scores(args.scores, corpus)
        else:
            scores = compute_scores(
                corpus, stats, metric, max_positions=args.max_positions
            )
        path = out_dir / f"{metric}.jsonl"
        write_scores(scores, path, corpus.content_hash)
        outputs.append(path)
        print(f"wrote {path}")
    _write_manifest(out_dir, args, outputs)
    return 0


def cmd_schedule(args: argparse.Namespace) -> int:
    corpus = _load(args)
    config = SamplerConfig(
        kind=args.sampler,
        batch_size=args.batch_size,
        total_steps=args.steps,
        c0=args.c0,
        num_buckets=args.buckets,
        seed=args.seed,
    )
    ids = None
    if args.holdout_fraction > 0:
        ids = list(range(train_split_size(len(corpus), args.holdout_fraction)))
    scores = None
    if args.sampler != "random":
        if not args.metric:
            raise IncompatibleMetricError(
                f"sampler {args.sampler!r} needs --metric naming a score file"
            )
        score_path = Path(args.scores_dir) / f"{args.metric}.jsonl"
        scores, score_hash = read_scores(score_path)
        if score_hash != corpus.content_hash:
            raise ScoreFileError(
                f"{score_path} was computed for a different corpus"
            )
    schedule = make_schedule(config, corpus=corpus, scores=scores, ids=ids)
    write_schedule(schedule, args.out)
    print(f"wrote {args.out} ({len(schedule.batches)} batches)")
    return 0


def _parse_lr_list(args: argparse.Namespace) -> list[float]:
    if args.sweep_lr:
        return [float(x) for x in args.sweep_lr.split(",") if x]
    return [args.lr]


def _trainer_config(args: argparse.Namespace, lr: float) -> TrainerConfig:
    return TrainerConfig(
        feature_dim=args.feature_dim,
        learning_rate=lr,
        l2=args.l2,
        eval_every=args.eval_every,
        eval_fraction=args.eval_fraction,
        seed=args.seed,
    )


def cmd_train(args: argparse.Namespace) -> int:
    corpus = _load(args)
    schedule = load_schedule(args.schedule, corpus_size=len(corpus))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for lr in _parse_lr_list(args):
        curve = train(corpus, schedule, _trainer_config(args, lr))
        csv_path = out_dir / f"curve_lr{lr:g}.csv"
        write_curve_csv(curve, csv_path)
        plot_path = out_dir / f"curve_lr{lr:g}.svg"
        _save_curve_plot(
            [(schedule.meta.sampler, curve.points)], plot_path, f"lr={lr:g}"
        )
        outputs += [csv_path, plot_path]
        print(f"lr={lr:g} final_accuracy={curve.points[-1][1]:.4f}")
    _write_manifest(out_dir, args, outputs)
    return 0


def _emit_report(result: MatrixResult, out_dir: Path) -> list[Path]:
    outputs = []
    for lr in result.lrs:
        table = matrix_table(result, lr)
        path = out_dir / f"report_lr{lr:g}.csv"
        with path.open("w", encoding="utf-8", newline="") as handle:
            if lr in result.thresholds:
                handle.write(
                    f"# lr={lr:g} threshold={result.thresholds[lr]:.6f}"
                    " aggregation=mean_over_seeds\n"
                )
            for row in table:
                handle.write(",".join(row) + "\n")
        outputs.append(path)
    return outputs


def _emit_plots(result: MatrixResult, out_dir: Path) -> list[Path]:
    outputs = []
    for lr in result.lrs:
        for sampler in result.samplers:
            labeled = []
            base = result.curves.get((BASELINE_LABEL, "random", lr, result.seeds[0]))
            if base is not None:
                labeled.append((BASELINE_LABEL, base.points))
            for metric in result.metrics:
                curve = result.curves.get((metric, sampler, lr, result.seeds[0]))
                if curve is not None:
                    labeled.append((metric, curve.points))
            if len(labeled) < 2:
                continue
            path = out_dir / f"plot_lr{lr:g}__{sampler}.svg"
            _save_curve_plot(labeled, path, f"{sampler}, lr={lr:g}")
            outputs.append(path)
    return outputs


def cmd_matrix(args: argparse.Namespace) -> int:
    corpus = _load(args)
    metrics = [m for m in args.metrics.split(",") if m]
    samplers = [s for s in args.samplers.split(",") if s]
    seeds = [int(s) for s in args.seeds.split(",") if s]
    lrs = _parse_lr_list(args)
    result = run_matrix(
        corpus,
        metrics,
        samplers,
        seeds,
        _trainer_config(args, lrs[0]),
        lrs,
        batch_size=args.batch_size,
        total_steps=args.steps,
        c0=args.c0,
        num_buckets=args.buckets,
        threshold_ratio=args.threshold_ratio,
        tail_window=args.tail_window,
    )
    out_dir = Path(args.out)
    curves_dir = out_dir / "curves"
    curves_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    runs_path = out_dir / "runs.csv"
    write_runs_csv(result.runs, runs_path)
    outputs.append(runs_path)
    for (metric, sampler, lr, seed), curve in result.curves.items():
        path = curves_dir / f"{metric}__{sampler}__lr{lr:g}__seed{seed}.csv"
        write_curve_csv(curve, path)
        outputs.append(path)
    outputs += _emit_report(result, out_dir)
    outputs += _emit_plots(result, out_dir)
    _write_manifest(out_dir, args, outputs)
    failed = [r for r in result.runs if r.error is not None]
    for run in failed:
        print(
            f"cell failed: {run.metric}/{run.sampler} lr={run.lr:g} seed={run.seed}: {run.error}",
            file=sys.stderr,
        )
    print(f"wrote {runs_path} ({len(result.runs)} runs)")
    return 1 if failed else 0


def _curves_from_dir(curves_dir: Path) -> dict[tuple[str, str, float, int], list[tuple[int, float]]]:
    curves = {}
    for path in sorted(curves_dir.glob("*.csv")):
        parts = path.stem.split("__")
        if len(parts) != 4:
            continue
        metric, sampler, lr_part, seed_part = parts
        key = (metric, sampler, float(lr_part[2:]), int(seed_part[4:]))
        points = []
        with path.open(encoding="utf-8") as handle:
            next(handle)
            for line in handle:
                step, acc = line.strip().split(",")
                points.append((int(step), float(acc)))
        curves[key] = points
    return curves


def cmd_report(args: argparse.Namespace) -> int:
    runs_dir = Path(args.runs)
    runs_path = runs_dir / "runs.csv"
    if not runs_path.exists():
        raise ScheduleFormatError(f"{runs_path}: no runs.csv in --runs directory")
    runs = read_runs_csv(runs_path)
    lrs = sorted({r.lr for r in runs})
    metrics = sorted({r.metric for r in runs if r.metric != BASELINE_LABEL})
    samplers = sorted({r.sampler for r in runs if r.sampler != "random"})
    seeds = sorted({r.seed for r in runs})
    result = MatrixResult(
        runs=runs,
        curves={},
        thresholds={},
        metrics=metrics,
        samplers=samplers,
        seeds=seeds,
        lrs=lrs,
    )
    out_dir = Path(args.out) if args.out else runs_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = _emit_report(result, out_dir)
    curves_dir = runs_dir / "curves"
    if curves_dir.is_dir():
        points_by_key = _curves_from_dir(curves_dir)
        for lr in lrs:
            for sampler in samplers:
                labeled = []
                base = points_by_key.get((BASELINE_LABEL, "random", lr, seeds[0]))
                if base:
                    labeled.append((BASELINE_LABEL, base))
                for metric in metrics:
                    pts = points_by_key.get((metric, sampler, lr, seeds[0]))
                    if pts:
                        labeled.append((metric, pts))
                if len(labeled) < 2:
                    continue
                path = out_dir / f"plot_lr{lr:g}__{sampler}.svg"
                _save_curve_plot(labeled, path, f"{sampler}, lr={lr:g}")
                outputs.append(path)
    _write_manifest(out_dir, args, outputs)
    for path in outputs:
        print(f"wrote {path}")
    return 0


def _add_corpus_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", required=True, help="corpus file")
    parser.add_argument(
        "--format", required=True, choices=["lines", "tsv", "jsonl"], help="corpus format"
    )
    parser.add_argument("--no-lowercase", action="store_true")
    parser.add_argument("--max-tokens", type=int, default=None)


def _add_trainer_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lr", type=float, default=0.1)
    parser.add_argument("--sweep-lr", default=None, help="comma-separated learning rates")
    parser.add_argument("--feature-dim", type=int, default=2**18)
    parser.add_argument("--l2", type=float, default=1e-6)
    parser.add_argument("--eval-every", type=int, default=50)
    parser.add_argument("--eval-fraction", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="currikit",
        description="corpus complexity scoring, curriculum schedules, convergence runs",
    )
    parser.add_argument("--version", action="version", version=f"currikit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="tokenize a corpus and cache its statistics")
    _add_corpus_flags(p)
    p.add_argument("--out", required=True, help="stats cache path")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("score", help="write per-document complexity scores")
    _add_corpus_flags(p)
    p.add_argument(
        "--metric",
        required=True,
        choices=list(INTERNAL_METRICS) + ["external", "all"],
    )
    p.add_argument("--scores", default=None, help="external score file (metric=external)")
    p.add_argument("--stats", default=None, help="optional stats cache from ingest")
    p.add_argument("--max-positions", type=int, default=128)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("schedule", help="generate a batch schedule")
    _add_corpus_flags(p)
    p.add_argument("--sampler", required=True, choices=list(SAMPLER_KINDS))
    p.add_argument("--metric", default=None, help="metric whose score file to order by")
    p.add_argument("--scores-dir", default=".", help="directory holding <metric>.jsonl")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--c0", type=float, default=0.01)
    p.add_argument("--buckets", type=int, default=10)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument(
        "--holdout-fraction",
        type=float,
        default=0.0,
        help="restrict scheduling to the training split (match train --eval-fraction)",
    )
    p.add_argument("--out", required=True, help="schedule file path")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("train", help="train on a schedule and emit curves")
    _add_corpus_flags(p)
    p.add_argument("--schedule", required=True)
    _add_trainer_flags(p)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("matrix", help="run the full metric x sampler sweep")
    _add_corpus_flags(p)
    p.add_argument("--metrics", default="length,tfidf,max_word_rank")
    p.add_argument("--samplers", default="cb,db,hyp,ss,sm")
    p.add_argument("--seeds", default="0,1,2")
    _add_trainer_flags(p)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--c0", type=float, default=0.01)
    p.add_argument("--buckets", type=int, default=10)
    p.add_argument("--threshold-ratio", type=float, default=0.9)
    p.add_argument("--tail-window", type=int, default=10)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True, help="run directory")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("report", help="aggregate a run directory into tables and plots")
    p.add_argument("--runs", required=True, help="directory containing runs.csv")
    p.add_argument("--out", default=None, help="output directory (default: --runs)")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        CorpusFormatError,
        ScoreFileError,
        ScheduleFormatError,
        IncompatibleMetricError,
        TrainerError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
