"""Corpus loading, deterministic tokenization, and corpus-level statistics.

Everything downstream consumes the tables built here: corpus frequency
ranks, document frequencies, unigram probabilities, and the positional
match tables. The positional table answers two queries for a corpus of
N documents:

    p(i, tok)      fraction of all N documents whose token at position i
                   equals tok
    q(i, a, b)     fraction of all N documents carrying token a at
                   position i-1 and token b at position i

Documents shorter than a position count as non-matching, so the
denominator is always N.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
from collections import Counter
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

SPLIT_WORD_PUNCT = "word_punct"

# a token is a maximal run of word characters or a single punctuation mark
_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

STATS_CACHE_VERSION = 1


class CorpusFormatError(ValueError):
    """An input file does not match its declared format."""


@dataclass(frozen=True)
class TokenizerConfig:
    """Tokenizer settings. Identical config and text give identical tokens."""

    lowercase: bool = True
    split_rule: str = SPLIT_WORD_PUNCT
    max_tokens: int | None = None

    def __post_init__(self) -> None:
        if self.split_rule != SPLIT_WORD_PUNCT:
            raise ValueError(f"unsupported split rule: {self.split_rule!r}")
        if self.max_tokens is not None and self.max_tokens < 1:
            raise ValueError("max_tokens must be positive when set")

    def canonical(self) -> str:
        """Stable JSON form, used for content hashing and cache keys."""
        return json.dumps(
            {
                "lowercase": self.lowercase,
                "split_rule": self.split_rule,
                "max_tokens": self.max_tokens,
            },
            sort_keys=True,
        )


def tokenize(text: str, config: TokenizerConfig = TokenizerConfig()) -> list[str]:
    """Split text into word and punctuation tokens.

    Punctuation marks are detached from adjacent words and kept as
    separate tokens; runs of whitespace collapse. Lowercases and
    truncates according to the config.
    """
    if config.lowercase:
        text = text.lower()
    tokens = _TOKEN_RE.findall(text)
    if config.max_tokens is not None:
        tokens = tokens[: config.max_tokens]
    return tokens


@dataclass(frozen=True)
class Document:
    """One tokenized text with a dense id and an optional class label."""

    id: int
    tokens: tuple[str, ...]
    label: int | None = None
    raw_len: int = 0

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError("document id must be non-negative")
        if not self.tokens:
            raise ValueError("document has no tokens")


class Corpus:
    """Immutable document collection with dense ids 0..N-1."""

    def __init__(
        self,
        documents: Sequence[Document],
        config: TokenizerConfig = TokenizerConfig(),
        num_skipped: int = 0,
    ) -> None:
        docs = tuple(documents)
        if not docs:
            raise ValueError("corpus is empty")
        for position, doc in enumerate(docs):
            if doc.id != position:
                raise ValueError(
                    f"document ids must be dense 0..N-1, got id {doc.id} at index {position}"
                )
        self.documents = docs
        self.config = config
        self.num_skipped = num_skipped
        self._hash: str | None = None

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __getitem__(self, doc_id: int) -> Document:
        return self.documents[doc_id]

    @property
    def content_hash(self) -> str:
        """Hex digest over tokenizer config plus every document's content."""
        if self._hash is None:
            digest = hashlib.sha256()
            digest.update(self.config.canonical().encode("utf-8"))
            for doc in self.documents:
                label = b"-" if doc.label is None else str(doc.label).encode("ascii")
                digest.update(b"\x1e" + label + b"\x1d")
                digest.update("\x1f".join(doc.tokens).encode("utf-8"))
            self._hash = digest.hexdigest()[:16]
        return self._hash


def corpus_from_texts(
    texts: Iterable[str],
    config: TokenizerConfig = TokenizerConfig(),
    labels: Sequence[int | None] | None = None,
) -> Corpus:
    """Build a corpus from in-memory strings, skipping empty tokenizations."""
    docs: list[Document] = []
    skipped = 0
    for position, text in enumerate(texts):
        tokens = tokenize(text, config)
        if not tokens:
            skipped += 1
            continue
        label = labels[position] if labels is not None else None
        docs.append(
            Document(id=len(docs), tokens=tuple(tokens), label=label, raw_len=len(text))
        )
    return Corpus(docs, config, num_skipped=skipped)


def _parse_record(line: str, lineno: int, fmt: str) -> tuple[str, int | None]:
    if fmt == "lines":
        return line, None
    if fmt == "tsv":
        if "\t" not in line:
            raise CorpusFormatError(f"line {lineno}: expected 'label<TAB>text'")
        raw_label, text = line.split("\t", 1)
        try:
            return text, int(raw_label)
        except ValueError:
            raise CorpusFormatError(
                f"line {lineno}: label {raw_label!r} is not an integer"
            ) from None
    # jsonl
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict) or not isinstance(obj.get("text"), str):
        raise CorpusFormatError(f"line {lineno}: object must contain a string 'text'")
    label = obj.get("label")
    if label is not None and (isinstance(label, bool) or not isinstance(label, int)):
        raise CorpusFormatError(f"line {lineno}: label must be an integer")
    return obj["text"], label


def load_corpus(
    path: str | os.PathLike[str],
    fmt: str,
    config: TokenizerConfig = TokenizerConfig(),
) -> Corpus:
    """Load a corpus file in `lines`, `tsv`, or `jsonl` format.

    Documents are kept in file order with dense ids. Lines that tokenize
    to nothing are skipped and counted; malformed records raise
    CorpusFormatError naming the line.
    """
    if fmt not in ("lines", "tsv", "jsonl"):
        raise CorpusFormatError(f"unknown format: {fmt!r}")
    path = Path(path)
    docs: list[Document] = []
    skipped = 0
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\r\n")
            text, label = _parse_record(line, lineno, fmt)
            tokens = tokenize(text, config)
            if not tokens:
                skipped += 1
                continue
            docs.append(
                Document(id=len(docs), tokens=tuple(tokens), label=label, raw_len=len(text))
            )
    if skipped:
        logger.info("skipped %d empty document(s) while loading %s", skipped, path)
    if not docs:
        raise CorpusFormatError(f"{path}: no non-empty documents")
    return Corpus(docs, config, num_skipped=skipped)


@dataclass(frozen=True)
class CorpusStats:
    """Vocabulary and positional statistics for one corpus.

    Ranks are 1-based, most frequent first, ties broken by lexicographic
    token order. Positional tables are sparse: absent keys mean zero
    matches.
    """

    total_docs: int
    total_tokens: int
    token_count: Mapping[str, int]
    rank: Mapping[str, int]
    doc_freq: Mapping[str, int]
    unigram_prob: Mapping[str, float]
    max_len: int
    pos_counts: Mapping[tuple[int, str], int]
    pair_counts: Mapping[tuple[int, str, str], int]

    @property
    def vocab_size(self) -> int:
        return len(self.token_count)

    def p(self, i: int, tok: str) -> float:
        """Fraction of documents whose token at position i equals tok."""
        if i < 0:
            raise ValueError("position must be non-negative")
        return self.pos_counts.get((i, tok), 0) / self.total_docs

    def q(self, i: int, tok_a: str, tok_b: str) -> float:
        """Fraction of documents with tok_a at i-1 and tok_b at i."""
        if i < 1:
            raise ValueError("pair position must be >= 1")
        return self.pair_counts.get((i, tok_a, tok_b), 0) / self.total_docs


def build_stats(corpus: Corpus) -> CorpusStats:
    """Single pass over the corpus producing all statistics tables.

    Count merging is associative, so document order cannot change the
    result; the returned object is immutable.
    """
    if len(corpus) == 0:
        raise ValueError("cannot build stats for an empty corpus")
    token_count: Counter[str] = Counter()
    doc_freq: Counter[str] = Counter()
    pos_counts: Counter[tuple[int, str]] = Counter()
    pair_counts: Counter[tuple[int, str, str]] = Counter()
    max_len = 0
    for doc in corpus:
        tokens = doc.tokens
        token_count.update(tokens)
        doc_freq.update(set(tokens))
        max_len = max(max_len, len(tokens))
        prev = None
        for i, tok in enumerate(tokens):
            pos_counts[(i, tok)] += 1
            if prev is not None:
                pair_counts[(i, prev, tok)] += 1
            prev = tok
    total_tokens = sum(token_count.values())
    by_freq = sorted(token_count.items(), key=lambda item: (-item[1], item[0]))
    rank = {tok: r for r, (tok, _) in enumerate(by_freq, start=1)}
    unigram_prob = {tok: count / total_tokens for tok, count in token_count.items()}
    return CorpusStats(
        total_docs=len(corpus),
        total_tokens=total_tokens,
        token_count=dict(token_count),
        rank=rank,
        doc_freq=dict(doc_freq),
        unigram_prob=unigram_prob,
        max_len=max_len,
        pos_counts=dict(pos_counts),
        pair_counts=dict(pair_counts),
    )


def stats_to_json(stats: CorpusStats, corpus_hash: str) -> str:
    """Canonical JSON encoding of a stats table (sorted, byte-stable)."""
    payload = {
        "version": STATS_CACHE_VERSION,
        "corpus_hash": corpus_hash,
        "total_docs": stats.total_docs,
        "total_tokens": stats.total_tokens,
        "max_len": stats.max_len,
        "token_count": sorted(stats.token_count.items()),
        "doc_freq": sorted(stats.doc_freq.items()),
        "pos_counts": sorted([i, tok, c] for (i, tok), c in stats.pos_counts.items()),
        "pair_counts": sorted(
            [i, a, b, c] for (i, a, b), c in stats.pair_counts.items()
        ),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def stats_from_json(text: str) -> tuple[CorpusStats, str]:
    """Inverse of stats_to_json. Returns the stats and the corpus hash."""
    payload = json.loads(text)
    version = payload.get("version")
    if version != STATS_CACHE_VERSION:
        raise ValueError(f"unsupported stats cache version: {version!r}")
    token_count = {tok: c for tok, c in payload["token_count"]}
    total_tokens = payload["total_tokens"]
    by_freq = sorted(token_count.items(), key=lambda item: (-item[1], item[0]))
    stats = CorpusStats(
        total_docs=payload["total_docs"],
        total_tokens=total_tokens,
        token_count=token_count,
        rank={tok: r for r, (tok, _) in enumerate(by_freq, start=1)},
        doc_freq={tok: c for tok, c in payload["doc_freq"]},
        unigram_prob={tok: c / total_tokens for tok, c in token_count.items()},
        max_len=payload["max_len"],
        pos_counts={(i, tok): c for i, tok, c in payload["pos_counts"]},
        pair_counts={(i, a, b): c for i, a, b, c in payload["pair_counts"]},
    )
    return stats, payload["corpus_hash"]


def save_stats(stats: CorpusStats, path: str | os.PathLike[str], corpus_hash: str) -> None:
    """Write the stats cache atomically (temp file then rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(stats_to_json(stats, corpus_hash), encoding="utf-8")
    os.replace(tmp, path)


def load_stats(path: str | os.PathLike[str]) -> tuple[CorpusStats, str]:
    return stats_from_json(Path(path).read_text(encoding="utf-8"))
