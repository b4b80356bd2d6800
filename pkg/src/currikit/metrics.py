"""Per-document complexity scores.

Every metric follows a single convention: higher score means more
complex. The likelihood metric is therefore stored as a negative
log-likelihood (a monotone transform of the raw token-probability
product, which underflows for long texts), and TF-IDF aggregates token
weights with max. Scores are dense float arrays indexed by document id.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, CorpusStats

DIRECTION = "higher_more_complex"

#: Every valid metric identifier.
METRIC_IDS = ("length", "max_word_rank", "likelihood_nll", "tfidf", "external", "tse", "ee")

#: Metrics computable from the corpus alone (the `--metric all` set).
INTERNAL_METRICS = ("length", "max_word_rank", "likelihood_nll", "tfidf", "tse", "ee")


class ScoreFileError(ValueError):
    """A score file is malformed or does not cover the corpus."""


@dataclass
class ComplexityScores:
    """Named per-document scores, one finite value per document id."""

    metric_id: str
    scores: np.ndarray
    direction: str = DIRECTION

    def __post_init__(self) -> None:
        if self.metric_id not in METRIC_IDS:
            raise ValueError(f"unknown metric id: {self.metric_id!r}")
        arr = np.asarray(self.scores, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("scores must be a non-empty 1-D array")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise ValueError(f"non-finite score for document {bad}")
        self.scores = arr

    def __len__(self) -> int:
        return int(self.scores.size)


def doc_length(tokens: Sequence[str]) -> float:
    return float(len(tokens))


def doc_max_word_rank(tokens: Sequence[str], stats: CorpusStats) -> float:
    """Highest frequency rank among the document's tokens.

    Tokens missing from the stats get rank vocab_size + 1, one worse
    than the rarest known token.
    """
    oov = stats.vocab_size + 1
    return float(max(stats.rank.get(tok, oov) for tok in tokens))


def doc_neg_log_likelihood(tokens: Sequence[str], stats: CorpusStats) -> float:
    """Negative log unigram likelihood, in nats.

    Out-of-stats tokens use the add-one-smoothed probability
    1 / (total_tokens + vocab_size + 1).
    """
    oov_prob = 1.0 / (stats.total_tokens + stats.vocab_size + 1)
    return -sum(math.log(stats.unigram_prob.get(tok, oov_prob)) for tok in tokens)


def doc_tfidf(tokens: Sequence[str], stats: CorpusStats) -> float:
    """Max over distinct tokens of tf * idf.

    tf is the in-document frequency; idf is the smoothed form
    ln((1 + N) / (1 + df)) + 1, finite and positive for any df.
    """
    n = len(tokens)
    best = 0.0
    for tok, count in Counter(tokens).items():
        tf = count / n
        idf = math.log((1 + stats.total_docs) / (1 + stats.doc_freq.get(tok, 0))) + 1.0
        best = max(best, tf * idf)
    return best


def score_length(corpus: Corpus) -> ComplexityScores:
    return ComplexityScores("length", np.array([doc_length(d.tokens) for d in corpus]))


def score_max_word_rank(corpus: Corpus, stats: CorpusStats) -> ComplexityScores:
    return ComplexityScores(
        "max_word_rank", np.array([doc_max_word_rank(d.tokens, stats) for d in corpus])
    )


def score_likelihood(corpus: Corpus, stats: CorpusStats) -> ComplexityScores:
    return ComplexityScores(
        "likelihood_nll",
        np.array([doc_neg_log_likelihood(d.tokens, stats) for d in corpus]),
    )


def score_tfidf(corpus: Corpus, stats: CorpusStats) -> ComplexityScores:
    return ComplexityScores("tfidf", np.array([doc_tfidf(d.tokens, stats) for d in corpus]))


def sort_by_complexity(
    scores: ComplexityScores, ids: Sequence[int] | None = None
) -> list[int]:
    """Document ids in ascending score order, ties broken by ascending id.

    When `ids` is given, only that subset is ordered.
    """
    values = scores.scores
    pool = range(len(values)) if ids is None else ids
    return sorted(pool, key=lambda i: (values[i], i))


def load_external_scores(path: str | os.PathLike[str], corpus: Corpus) -> ComplexityScores:
    """Read externally computed scores (for example model losses).

    The file is JSON Lines, one {"id": int, "score": float} object per
    line, and must cover every document id exactly once with a finite
    value.
    """
    values = _read_records(Path(path), len(corpus), allow_header=False)
    return ComplexityScores("external", values)


def write_scores(
    scores: ComplexityScores, path: str | os.PathLike[str], corpus_hash: str
) -> None:
    """Persist scores as JSON Lines with a metric/corpus-hash header."""
    path = Path(path)
    lines = [json.dumps({"metric": scores.metric_id, "corpus_hash": corpus_hash})]
    for i, value in enumerate(scores.scores):
        lines.append(json.dumps({"id": i, "score": float(value)}))
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_scores(path: str | os.PathLike[str]) -> tuple[ComplexityScores, str]:
    """Load a score file written by write_scores.

    Returns the scores plus the corpus hash recorded in the header.
    """
    path = Path(path)
    with path.open(encoding="utf-8") as handle:
        first = handle.readline()
    if not first.strip():
        raise ScoreFileError(f"{path}: empty score file")
    header = _parse_json_line(first, 1, path)
    if "metric" not in header or "corpus_hash" not in header:
        raise ScoreFileError(f"{path}: missing metric/corpus_hash header")
    values = _read_records(path, expected=None, allow_header=True)
    return ComplexityScores(str(header["metric"]), values), str(header["corpus_hash"])


def _parse_json_line(line: str, lineno: int, path: Path) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ScoreFileError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise ScoreFileError(f"{path}: line {lineno}: expected a JSON object")
    return obj


def _read_records(path: Path, expected: int | None, allow_header: bool) -> np.ndarray:
    """Collect {"id", "score"} records, enforcing dense unique coverage."""
    seen: dict[int, float] = {}
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            if lineno == 1 and allow_header:
                continue
            obj = _parse_json_line(raw, lineno, path)
            doc_id = obj.get("id")
            if isinstance(doc_id, bool) or not isinstance(doc_id, int):
                raise ScoreFileError(f"{path}: line {lineno}: missing integer 'id'")
            value = obj.get("score")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ScoreFileError(
                    f"{path}: line {lineno}: missing numeric score for document {doc_id}"
                )
            value = float(value)
            if not math.isfinite(value):
                raise ScoreFileError(
                    f"{path}: line {lineno}: non-finite score for document {doc_id}"
                )
            if doc_id in seen:
                raise ScoreFileError(
                    f"{path}: line {lineno}: duplicate score for document {doc_id}"
                )
            if doc_id < 0 or (expected is not None and doc_id >= expected):
                raise ScoreFileError(
                    f"{path}: line {lineno}: unknown document id {doc_id}"
                )
            seen[doc_id] = value
    size = expected if expected is not None else (max(seen) + 1 if seen else 0)
    if size == 0:
        raise ScoreFileError(f"{path}: no score records")
    for doc_id in range(size):
        if doc_id not in seen:
            raise ScoreFileError(f"{path}: missing score for document {doc_id}")
    return np.array([seen[i] for i in range(size)], dtype=np.float64)


def compute_scores(
    corpus: Corpus,
    stats: CorpusStats,
    metric_id: str,
    *,
    max_positions: int | None = 128,
) -> ComplexityScores:
    """Dispatch to the named internal metric."""
    if metric_id == "length":
        return score_length(corpus)
    if metric_id == "max_word_rank":
        return score_max_word_rank(corpus, stats)
    if metric_id == "likelihood_nll":
        return score_likelihood(corpus, stats)
    if metric_id == "tfidf":
        return score_tfidf(corpus, stats)
    if metric_id in ("tse", "ee"):
        from .infotheory import score_infotheoretic

        return score_infotheoretic(corpus, stats, metric_id, max_positions=max_positions)
    raise ValueError(f"cannot compute metric {metric_id!r} internally")
