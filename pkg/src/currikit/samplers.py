"""Curriculum batch schedulers.

Five curricula plus a uniform-random baseline:

    cb      competence based: uniform draws from a growing easy prefix
    db      difficulty based: uniform draws from a shrinking hard suffix
    hyp     hyperbolic: bucket draws weighted by distance to the epoch
    ss      sort-shuffle: random partition, batches ordered by mean rank
    sm      sort-merge: length-stratified buckets merged in rank order
    random  uniform baseline

All samplers consume only the complexity ORDER of documents, never raw
score magnitudes, so any strictly increasing rescoring yields an
identical schedule. Each schedule draws from a single seeded generator
consumed sequentially, making output reproducible byte for byte. Within
a batch, draws are without replacement; across steps, cb/db/hyp/random
may repeat documents while ss/sm cover each document exactly once.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .metrics import ComplexityScores, sort_by_complexity

SAMPLER_KINDS = ("cb", "db", "hyp", "ss", "sm", "random")

# guards ceil() against floating-point spill when fraction * n is integral
_CEIL_EPS = 1e-9


class IncompatibleMetricError(ValueError):
    """The metric/sampler pair is not defined (length with ss or sm)."""


def metric_compatible(kind: str, metric_id: str | None) -> bool:
    """Sorting-based samplers already stratify by length, so pairing them
    with the length metric is rejected rather than silently degenerate."""
    return not (kind in ("ss", "sm") and metric_id == "length")


@dataclass(frozen=True)
class SamplerConfig:
    kind: str
    batch_size: int
    total_steps: int
    c0: float = 0.01
    num_buckets: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in SAMPLER_KINDS:
            raise ValueError(f"unknown sampler kind: {self.kind!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.total_steps < 1:
            raise ValueError("total_steps must be positive")
        if not 0.0 < self.c0 < 1.0:
            raise ValueError("c0 must lie in (0, 1)")
        if self.kind == "hyp":
            if self.num_buckets < 2:
                raise ValueError("hyp needs at least 2 buckets")
            if self.total_steps < self.num_buckets:
                raise ValueError("hyp needs total_steps >= num_buckets")


@dataclass(frozen=True)
class ScheduleMeta:
    sampler: str
    metric: str | None
    batch_size: int
    total_steps: int
    seed: int
    corpus_hash: str


@dataclass
class Schedule:
    """Ordered batches of document ids plus generation metadata."""

    meta: ScheduleMeta
    batches: list[list[int]]


def competence(t: int | float, total_steps: int, c0: float) -> float:
    """Prefix fraction sqrt(t * (1 - c0^2) / T + c0^2), capped at 1.

    The endpoints are returned exactly: c(0) = c0 and c(T) = 1.
    """
    if not 0.0 < c0 < 1.0:
        raise ValueError("c0 must lie in (0, 1)")
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    if t < 0 or t > total_steps:
        raise ValueError(f"step {t} outside [0, {total_steps}]")
    if t == 0:
        return c0
    if t == total_steps:
        return 1.0
    value = math.sqrt((t / total_steps) * (1.0 - c0 * c0) + c0 * c0)
    return min(1.0, value)


def _pool_size(fraction: float, n_docs: int, batch_size: int) -> int:
    size = math.ceil(fraction * n_docs - _CEIL_EPS)
    return max(batch_size, min(n_docs, size))


def _check_pool(config: SamplerConfig, n_docs: int) -> None:
    if n_docs < 1:
        raise ValueError("no documents to schedule")
    if config.batch_size > n_docs:
        raise ValueError(
            f"batch_size {config.batch_size} exceeds document count {n_docs}"
        )


def _require_kind(config: SamplerConfig, kind: str) -> None:
    if config.kind != kind:
        raise ValueError(f"config kind is {config.kind!r}, expected {kind!r}")


def _meta(config: SamplerConfig, metric: str | None, corpus_hash: str) -> ScheduleMeta:
    return ScheduleMeta(
        sampler=config.kind,
        metric=metric,
        batch_size=config.batch_size,
        total_steps=config.total_steps,
        seed=config.seed,
        corpus_hash=corpus_hash,
    )


def make_cb_schedule(
    order: Sequence[int],
    config: SamplerConfig,
    *,
    metric: str | None = None,
    corpus_hash: str = "",
) -> Schedule:
    """Competence-based schedule over an ascending-complexity order.

    At step t the available pool is the first
    max(batch_size, ceil(c(t) * N)) documents of the order; the batch is
    a uniform draw without replacement from that prefix.
    """
    _require_kind(config, "cb")
    n = len(order)
    _check_pool(config, n)
    order_arr = np.asarray(order, dtype=np.int64)
    rng = np.random.default_rng(config.seed)
    batches = []
    for t in range(config.total_steps):
        prefix = _pool_size(competence(t, config.total_steps, config.c0), n, config.batch_size)
        pick = rng.choice(prefix, size=config.batch_size, replace=False)
        batches.append([int(order_arr[j]) for j in pick])
    return Schedule(_meta(config, metric, corpus_hash), batches)


def make_db_schedule(
    order: Sequence[int],
    config: SamplerConfig,
    *,
    metric: str | None = None,
    corpus_hash: str = "",
) -> Schedule:
    """Difficulty-based schedule: the mirror of cb.

    The pool at step t is the hardest max(batch_size, ceil(s(t) * N))
    documents, where the suffix fraction s(t) = max(c0, 1 - t/T) starts
    at the whole dataset and shrinks linearly to the c0 floor.
    """
    _require_kind(config, "db")
    n = len(order)
    _check_pool(config, n)
    order_arr = np.asarray(order, dtype=np.int64)
    rng = np.random.default_rng(config.seed)
    batches = []
    for t in range(config.total_steps):
        fraction = max(config.c0, 1.0 - t / config.total_steps)
        size = _pool_size(fraction, n, config.batch_size)
        pick = rng.choice(size, size=config.batch_size, replace=False)
        batches.append([int(order_arr[n - size + j]) for j in pick])
    return Schedule(_meta(config, metric, corpus_hash), batches)


def hyp_bucket_probs(epoch: int, num_buckets: int) -> np.ndarray:
    """Bucket distribution for one epoch.

    Bucket j gets weight (|j - i| + 1)^(-1/2) on epoch i (the unit shift
    keeps the weight finite at j = i), normalized to sum to one.
    """
    if num_buckets < 1:
        raise ValueError("num_buckets must be positive")
    if not 1 <= epoch <= num_buckets:
        raise ValueError(f"epoch {epoch} outside 1..{num_buckets}")
    j = np.arange(1, num_buckets + 1, dtype=np.float64)
    weights = 1.0 / np.sqrt(np.abs(j - epoch) + 1.0)
    return weights / weights.sum()


def split_buckets(items: Sequence[int], num_buckets: int) -> list[list[int]]:
    """Contiguous near-equal buckets; the remainder goes to the first ones."""
    n = len(items)
    base, rem = divmod(n, num_buckets)
    buckets = []
    start = 0
    for b in range(num_buckets):
        size = base + (1 if b < rem else 0)
        buckets.append(list(items[start : start + size]))
        start += size
    return buckets


def epoch_of_step(t: int, total_steps: int, num_buckets: int) -> int:
    """1-based epoch index; equal epochs with the remainder in the last."""
    width = total_steps // num_buckets
    return min(num_buckets, t // width + 1)


def make_hyp_schedule(
    order: Sequence[int],
    config: SamplerConfig,
    *,
    metric: str | None = None,
    corpus_hash: str = "",
) -> Schedule:
    """Hyperbolic schedule.

    The order is split into num_buckets contiguous complexity buckets
    and training time into as many epochs. Every draw picks a bucket
    from the epoch's distance-weighted distribution, then an element
    uniformly inside it; duplicates within a batch are redrawn.
    """
    _require_kind(config, "hyp")
    n = len(order)
    _check_pool(config, n)
    if n < config.num_buckets:
        raise ValueError("need at least one document per bucket")
    buckets = split_buckets(order, config.num_buckets)
    probs = {
        e: hyp_bucket_probs(e, config.num_buckets)
        for e in range(1, config.num_buckets + 1)
    }
    rng = np.random.default_rng(config.seed)
    batches = []
    for t in range(config.total_steps):
        pr = probs[epoch_of_step(t, config.total_steps, config.num_buckets)]
        batch: list[int] = []
        chosen: set[int] = set()
        while len(batch) < config.batch_size:
            j = int(rng.choice(config.num_buckets, p=pr))
            bucket = buckets[j]
            doc = bucket[int(rng.integers(len(bucket)))]
            if doc in chosen:
                continue
            chosen.add(doc)
            batch.append(doc)
        batches.append(batch)
    return Schedule(_meta(config, metric, corpus_hash), batches)


def make_ss_schedule(
    scores: ComplexityScores,
    config: SamplerConfig,
    *,
    ids: Sequence[int] | None = None,
    corpus_hash: str = "",
) -> Schedule:
    """Sort-shuffle schedule: exactly-once coverage, easy batches first.

    A seeded permutation is chopped into contiguous batches (the last
    may be short), then batches are reordered by ascending mean position
    in the complexity order, ties broken by the first document id.
    Ordering by rank position rather than raw score keeps the schedule
    invariant under monotone rescoring.
    """
    _require_kind(config, "ss")
    if not metric_compatible("ss", scores.metric_id):
        raise IncompatibleMetricError("ss is incompatible with the length metric")
    pool = list(range(len(scores))) if ids is None else list(ids)
    _check_pool(config, len(pool))
    rank_position = {doc: pos for pos, doc in enumerate(sort_by_complexity(scores, pool))}
    rng = np.random.default_rng(config.seed)
    perm = [pool[j] for j in rng.permutation(len(pool))]
    batches = [
        perm[start : start + config.batch_size]
        for start in range(0, len(perm), config.batch_size)
    ]
    batches.sort(key=lambda b: (sum(rank_position[d] for d in b) / len(b), b[0]))
    return Schedule(_meta(config, scores.metric_id, corpus_hash), batches)


def make_sm_schedule(
    scores: ComplexityScores,
    corpus: Corpus,
    config: SamplerConfig,
    *,
    ids: Sequence[int] | None = None,
) -> Schedule:
    """Sort-merge schedule: exactly-once coverage with stable batch lengths.

    Documents are sorted by token length, split into batch_size
    contiguous length strata, each stratum sorted by complexity, and
    batch i takes the i-th element of every stratum that still has one.
    """
    _require_kind(config, "sm")
    if not metric_compatible("sm", scores.metric_id):
        raise IncompatibleMetricError("sm is incompatible with the length metric")
    pool = list(range(len(scores))) if ids is None else list(ids)
    _check_pool(config, len(pool))
    by_length = sorted(pool, key=lambda d: (len(corpus[d].tokens), d))
    strata = split_buckets(by_length, config.batch_size)
    values = scores.scores
    for stratum in strata:
        stratum.sort(key=lambda d: (values[d], d))
    batches = []
    depth = 0
    while True:
        batch = [stratum[depth] for stratum in strata if depth < len(stratum)]
        if not batch:
            break
        batches.append(batch)
        depth += 1
    return Schedule(_meta(config, scores.metric_id, corpus.content_hash), batches)


def make_random_schedule(
    corpus: Corpus,
    config: SamplerConfig,
    *,
    ids: Sequence[int] | None = None,
) -> Schedule:
    """Uniform baseline: every batch drawn without replacement from the pool."""
    _require_kind(config, "random")
    pool = np.asarray(
        list(range(len(corpus))) if ids is None else list(ids), dtype=np.int64
    )
    _check_pool(config, len(pool))
    rng = np.random.default_rng(config.seed)
    batches = []
    for _ in range(config.total_steps):
        pick = rng.choice(len(pool), size=config.batch_size, replace=False)
        batches.append([int(pool[j]) for j in pick])
    return Schedule(_meta(config, None, corpus.content_hash), batches)


def make_schedule(
    config: SamplerConfig,
    *,
    corpus: Corpus,
    scores: ComplexityScores | None = None,
    ids: Sequence[int] | None = None,
) -> Schedule:
    """Build a schedule of config.kind, wiring order and metadata.

    Non-random samplers need complexity scores; `ids` restricts
    scheduling to a document subset (for example the training split).
    """
    if config.kind == "random":
        return make_random_schedule(corpus, config, ids=ids)
    if scores is None:
        raise ValueError(f"sampler {config.kind!r} needs complexity scores")
    if not metric_compatible(config.kind, scores.metric_id):
        raise IncompatibleMetricError(
            f"sampler {config.kind!r} is incompatible with metric {scores.metric_id!r}"
        )
    if len(scores) != len(corpus):
        raise ValueError("scores do not cover the corpus")
    if config.kind == "ss":
        return make_ss_schedule(
            scores, config, ids=ids, corpus_hash=corpus.content_hash
        )
    if config.kind == "sm":
        return make_sm_schedule(scores, corpus, config, ids=ids)
    order = sort_by_complexity(scores, ids)
    maker = {"cb": make_cb_schedule, "db": make_db_schedule, "hyp": make_hyp_schedule}[
        config.kind
    ]
    return maker(
        order, config, metric=scores.metric_id, corpus_hash=corpus.content_hash
    )
