"""Desk-scale trainer and the steps-to-threshold harness.

The model is deliberately small: binary logistic regression over hashed
token counts, trained with plain SGD, one schedule batch per step. It is
fully deterministic given its inputs, so convergence-speed comparisons
between schedules are exact rather than statistical. The held-out split
is the last fraction of documents by id and is never visible to
schedules.

Convergence is measured the same way for every run of a sweep: a run's
steps-to-threshold is the first evaluation step whose held-out accuracy
reaches ratio * saturation, where saturation defaults to the tail mean
of the run's own curve but is shared across a sweep (derived from the
baseline runs) inside run_matrix. Runs that never reach the shared
threshold are reported as unreached and rendered as an infinity sign.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
from collections.abc import Sequence
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.special import expit

from .corpus import Corpus, CorpusStats, build_stats
from .metrics import ComplexityScores, compute_scores
from .samplers import (
    SamplerConfig,
    Schedule,
    make_schedule,
    metric_compatible,
)

#: Sentinel for runs that never reach the threshold; renders as infinity.
UNREACHED = math.inf

BASELINE_LABEL = "baseline"


class TrainerError(ValueError):
    """Configuration or input rejected by the trainer."""


@dataclass(frozen=True)
class TrainerConfig:
    feature_dim: int = 2**18
    learning_rate: float = 0.1
    l2: float = 1e-6
    eval_every: int = 50
    eval_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if self.eval_every < 1:
            raise ValueError("eval_every must be positive")
        if not 0.0 < self.eval_fraction <= 0.5:
            raise ValueError("eval_fraction must lie in (0, 0.5]")


@dataclass
class TrainingCurve:
    """Held-out accuracy over training steps, plus per-step batch loss."""

    points: list[tuple[int, float]]
    sampler: str
    metric: str | None
    seed: int
    losses: list[float]

    def steps(self) -> np.ndarray:
        return np.array([s for s, _ in self.points], dtype=np.int64)

    def accuracies(self) -> np.ndarray:
        return np.array([a for _, a in self.points], dtype=np.float64)


def train_split_size(n_docs: int, eval_fraction: float) -> int:
    """Documents available for training; the rest (at least one) is held out."""
    holdout = max(1, int(n_docs * eval_fraction))
    size = n_docs - holdout
    if size < 1:
        raise TrainerError(f"corpus of {n_docs} documents leaves no training split")
    return size


def _token_bucket(token: str, dim: int, cache: dict[str, int]) -> int:
    bucket = cache.get(token)
    if bucket is None:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        bucket = int.from_bytes(digest, "little") % dim
        cache[token] = bucket
    return bucket


def build_features(corpus: Corpus, feature_dim: int) -> sparse.csr_matrix:
    """Hashed token-count features, one CSR row per document.

    The hash is a keyless blake2b of the token bytes, so feature layout
    is stable across runs and processes.
    """
    cache: dict[str, int] = {}
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for doc in corpus:
        counts: dict[int, float] = {}
        for token in doc.tokens:
            bucket = _token_bucket(token, feature_dim, cache)
            counts[bucket] = counts.get(bucket, 0.0) + 1.0
        for bucket in sorted(counts):
            indices.append(bucket)
            data.append(counts[bucket])
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(corpus), feature_dim),
    )


def logistic_loss_and_grad(
    w: np.ndarray, X, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray]:
    """Mean logistic loss with L2 penalty, and its exact gradient.

    Works for dense or CSR feature matrices. The loss uses the
    log-sum-exp form, stable for any margin.
    """
    z = np.asarray(X @ w).ravel()
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * float(w @ w))
    residual = expit(z) - y
    grad = np.asarray(X.T @ residual).ravel() / len(y) + l2 * w
    return loss, grad


def _accuracy(w: np.ndarray, X, y: np.ndarray) -> float:
    margins = np.asarray(X @ w).ravel()
    return float(np.mean((margins >= 0.0) == (y == 1.0)))


def train(
    corpus: Corpus,
    schedule: Schedule,
    config: TrainerConfig,
    features: sparse.csr_matrix | None = None,
) -> TrainingCurve:
    """SGD over the schedule's batches, evaluating on the held-out tail.

    The curve always contains a pre-training evaluation at step 0, one
    every eval_every steps, and one after the final step. Identical
    inputs produce bit-identical curves.
    """
    if schedule.meta.corpus_hash and schedule.meta.corpus_hash != corpus.content_hash:
        raise TrainerError(
            "schedule was generated for a different corpus "
            f"({schedule.meta.corpus_hash} vs {corpus.content_hash})"
        )
    n = len(corpus)
    train_size = train_split_size(n, config.eval_fraction)
    X = features if features is not None else build_features(corpus, config.feature_dim)
    if X.shape[0] != n:
        raise TrainerError("feature matrix does not cover the corpus")

    y = np.full(n, -1.0)
    for doc in corpus:
        if doc.label in (0, 1):
            y[doc.id] = float(doc.label)
    for doc_id in range(train_size, n):
        if y[doc_id] < 0:
            raise TrainerError(f"unlabeled document {doc_id} in held-out split")
    for batch in schedule.batches:
        for doc_id in batch:
            if doc_id >= train_size:
                raise TrainerError(
                    f"schedule references held-out document {doc_id} "
                    f"(training split is 0..{train_size - 1})"
                )
            if y[doc_id] < 0:
                raise TrainerError(f"unlabeled document {doc_id} in schedule")

    X_hold = X[train_size:]
    y_hold = y[train_size:]
    w = np.zeros(X.shape[1])
    points = [(0, _accuracy(w, X_hold, y_hold))]
    losses: list[float] = []
    step = 0
    for batch in schedule.batches:
        loss, grad = logistic_loss_and_grad(w, X[batch], y[batch], config.l2)
        losses.append(loss)
        w -= config.learning_rate * grad
        step += 1
        if step % config.eval_every == 0:
            points.append((step, _accuracy(w, X_hold, y_hold)))
    if step > 0 and step % config.eval_every != 0:
        points.append((step, _accuracy(w, X_hold, y_hold)))
    return TrainingCurve(
        points=points,
        sampler=schedule.meta.sampler,
        metric=schedule.meta.metric,
        seed=schedule.meta.seed,
        losses=losses,
    )


def saturation_value(curve: TrainingCurve, tail_window: int = 10) -> float:
    """Mean accuracy over the last tail_window evaluations."""
    if tail_window < 1:
        raise ValueError("tail_window must be positive")
    if len(curve.points) < tail_window:
        raise ValueError(
            f"curve has {len(curve.points)} points, need at least {tail_window}"
        )
    return float(np.mean([acc for _, acc in curve.points[-tail_window:]]))


def steps_to_threshold(
    curve: TrainingCurve,
    ratio: float = 0.9,
    saturation: float | None = None,
    tail_window: int = 10,
) -> float:
    """First evaluation step whose accuracy reaches ratio * saturation.

    Saturation defaults to the curve's own tail mean; passing a shared
    value (for example the baseline's saturation) makes runs of a sweep
    comparable and allows UNREACHED outcomes.
    """
    if saturation is None:
        saturation = saturation_value(curve, tail_window)
    threshold = ratio * saturation
    for step, acc in curve.points:
        if acc >= threshold:
            return step
    return UNREACHED


@dataclass(frozen=True)
class RunResult:
    metric: str
    sampler: str
    lr: float
    seed: int
    steps: float
    final_accuracy: float
    saturation: float
    error: str | None = None


@dataclass
class MatrixResult:
    runs: list[RunResult]
    curves: dict[tuple[str, str, float, int], TrainingCurve]
    thresholds: dict[float, float]
    metrics: list[str]
    samplers: list[str]
    seeds: list[int]
    lrs: list[float]


def run_matrix(
    corpus: Corpus,
    metrics: Sequence[str],
    samplers: Sequence[str],
    seeds: Sequence[int],
    config: TrainerConfig,
    lrs: Sequence[float],
    *,
    batch_size: int = 32,
    total_steps: int = 200,
    c0: float = 0.01,
    num_buckets: int = 10,
    threshold_ratio: float = 0.9,
    tail_window: int = 10,
    stats: CorpusStats | None = None,
    scores_by_metric: dict[str, ComplexityScores] | None = None,
) -> MatrixResult:
    """Full metric x sampler x seed sweep per learning rate.

    Baseline (random sampler) runs come first for every learning rate;
    their mean saturation fixes the shared threshold for every other
    run at the same rate. Incompatible metric/sampler cells are skipped
    (rendered "-" by matrix_table); a failing run is recorded with its
    error instead of aborting the sweep.
    """
    if not (metrics and samplers and seeds and lrs):
        raise ValueError("metrics, samplers, seeds, and lrs must be non-empty")
    stats = stats if stats is not None else build_stats(corpus)
    scores: dict[str, ComplexityScores] = dict(scores_by_metric or {})
    for metric in metrics:
        if metric not in scores:
            scores[metric] = compute_scores(corpus, stats, metric)
    features = build_features(corpus, config.feature_dim)
    train_ids = list(range(train_split_size(len(corpus), config.eval_fraction)))

    runs: list[RunResult] = []
    curves: dict[tuple[str, str, float, int], TrainingCurve] = {}
    thresholds: dict[float, float] = {}
    for lr in lrs:
        cfg = replace(config, learning_rate=lr)
        baseline_curves: list[tuple[int, TrainingCurve]] = []
        for seed in seeds:
            sampler_cfg = SamplerConfig(
                kind="random",
                batch_size=batch_size,
                total_steps=total_steps,
                c0=c0,
                num_buckets=num_buckets,
                seed=seed,
            )
            schedule = make_schedule(sampler_cfg, corpus=corpus, ids=train_ids)
            baseline_curves.append((seed, train(corpus, schedule, cfg, features)))
        shared_saturation = float(
            np.mean([saturation_value(c, tail_window) for _, c in baseline_curves])
        )
        thresholds[lr] = threshold_ratio * shared_saturation
        for seed, curve in baseline_curves:
            runs.append(
                RunResult(
                    metric=BASELINE_LABEL,
                    sampler="random",
                    lr=lr,
                    seed=seed,
                    steps=steps_to_threshold(
                        curve, threshold_ratio, saturation=shared_saturation
                    ),
                    final_accuracy=curve.points[-1][1],
                    saturation=saturation_value(curve, tail_window),
                )
            )
            curves[(BASELINE_LABEL, "random", lr, seed)] = curve

        for metric in metrics:
            for sampler in samplers:
                if not metric_compatible(sampler, metric):
                    continue  # rendered "-" in the result table
                for seed in seeds:
                    try:
                        sampler_cfg = SamplerConfig(
                            kind=sampler,
                            batch_size=batch_size,
                            total_steps=total_steps,
                            c0=c0,
                            num_buckets=num_buckets,
                            seed=seed,
                        )
                        schedule = make_schedule(
                            sampler_cfg,
                            corpus=corpus,
                            scores=scores[metric],
                            ids=train_ids,
                        )
                        curve = train(corpus, schedule, cfg, features)
                        runs.append(
                            RunResult(
                                metric=metric,
                                sampler=sampler,
                                lr=lr,
                                seed=seed,
                                steps=steps_to_threshold(
                                    curve, threshold_ratio, saturation=shared_saturation
                                ),
                                final_accuracy=curve.points[-1][1],
                                saturation=saturation_value(curve, tail_window),
                            )
                        )
                        curves[(metric, sampler, lr, seed)] = curve
                    except Exception as exc:  # noqa: BLE001 - cell isolation
                        runs.append(
                            RunResult(
                                metric=metric,
                                sampler=sampler,
                                lr=lr,
                                seed=seed,
                                steps=math.nan,
                                final_accuracy=math.nan,
                                saturation=math.nan,
                                error=str(exc),
                            )
                        )
    return MatrixResult(
        runs=runs,
        curves=curves,
        thresholds=thresholds,
        metrics=list(metrics),
        samplers=list(samplers),
        seeds=list(seeds),
        lrs=list(lrs),
    )


def _format_steps_cell(cell_runs: list[RunResult]) -> str:
    ok = [r for r in cell_runs if r.error is None]
    if not ok:
        return "err"
    if any(r.steps == UNREACHED for r in ok):
        return "∞"
    mean = float(np.mean([r.steps for r in ok]))
    deviation = float(max(abs(r.steps - mean) for r in ok))
    return f"{mean:.0f}±{deviation:.0f}"


def matrix_table(result: MatrixResult, lr: float) -> list[list[str]]:
    """Steps-to-threshold pivot for one learning rate.

    One row per metric, one column per sampler, a single baseline row
    first. Cells show mean steps over seeds with the maximal deviation,
    an infinity sign when any seed never reached the threshold, and "-"
    for incompatible metric/sampler pairs.
    """
    rows = [["metric", "accuracy"] + list(result.samplers)]
    by_cell: dict[tuple[str, str], list[RunResult]] = {}
    for run in result.runs:
        if run.lr == lr:
            by_cell.setdefault((run.metric, run.sampler), []).append(run)

    baseline_runs = by_cell.get((BASELINE_LABEL, "random"), [])
    if baseline_runs:
        accuracy = float(np.mean([r.final_accuracy for r in baseline_runs]))
        row = [BASELINE_LABEL, f"{accuracy:.3f}", _format_steps_cell(baseline_runs)]
        row += [""] * (len(result.samplers) - 1)
        rows.append(row)
    for metric in result.metrics:
        metric_runs = [
            r
            for (m, _), cell in by_cell.items()
            if m == metric
            for r in cell
            if r.error is None
        ]
        accuracy = (
            f"{float(np.mean([r.final_accuracy for r in metric_runs])):.3f}"
            if metric_runs
            else "err"
        )
        row = [metric, accuracy]
        for sampler in result.samplers:
            if not metric_compatible(sampler, metric):
                row.append("-")
            else:
                row.append(_format_steps_cell(by_cell.get((metric, sampler), [])))
        rows.append(row)
    return rows


def write_runs_csv(runs: Sequence[RunResult], path: str | os.PathLike[str]) -> None:
    """Per-run results: metric,sampler,lr,seed,steps_to_threshold,final_accuracy,saturation."""
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["metric", "sampler", "lr", "seed", "steps_to_threshold", "final_accuracy", "saturation"]
        )
        for run in runs:
            steps = "inf" if run.steps == UNREACHED else (
                "nan" if math.isnan(run.steps) else f"{run.steps:.0f}"
            )
            writer.writerow(
                [
                    run.metric,
                    run.sampler,
                    repr(run.lr),
                    run.seed,
                    steps,
                    "nan" if math.isnan(run.final_accuracy) else f"{run.final_accuracy:.6f}",
                    "nan" if math.isnan(run.saturation) else f"{run.saturation:.6f}",
                ]
            )


def read_runs_csv(path: str | os.PathLike[str]) -> list[RunResult]:
    runs = []
    with Path(path).open(encoding="utf-8", newline="") as handle:
        for row in csv.DictReader(handle):
            steps = float(row["steps_to_threshold"])
            runs.append(
                RunResult(
                    metric=row["metric"],
                    sampler=row["sampler"],
                    lr=float(row["lr"]),
                    seed=int(row["seed"]),
                    steps=steps,
                    final_accuracy=float(row["final_accuracy"]),
                    saturation=float(row["saturation"]),
                    error="recorded failure" if math.isnan(steps) else None,
                )
            )
    return runs


def write_curve_csv(curve: TrainingCurve, path: str | os.PathLike[str]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step", "accuracy"])
        for step, acc in curve.points:
            writer.writerow([step, f"{acc:.6f}"])
