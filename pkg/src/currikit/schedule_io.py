"""Schedule serialization as JSON Lines.

Line 1 is a header carrying the generation metadata; every following
line is one batch record {"step": t, "ids": [...]} with steps counting
up from 0. Writes are atomic (temp file, then rename) and byte-stable,
so identical schedules produce identical files. This format is the
cross-component contract consumed by external training loops.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

from .corpus import Corpus
from .metrics import ComplexityScores, sort_by_complexity
from .samplers import Schedule, ScheduleMeta

HEADER_FIELDS = ("sampler", "metric", "batch_size", "total_steps", "seed", "corpus_hash")

#: Sampler kinds whose schedules must cover each document at most once.
EXACTLY_ONCE_KINDS = ("ss", "sm")


class ScheduleFormatError(ValueError):
    """A schedule file is missing, malformed, or violates an invariant."""


def write_schedule(schedule: Schedule, path: str | os.PathLike[str]) -> None:
    """Serialize a schedule; refuses to write an empty one."""
    if not schedule.batches:
        raise ValueError("refusing to write a schedule with no batches")
    meta = schedule.meta
    header = {
        "sampler": meta.sampler,
        "metric": meta.metric,
        "batch_size": meta.batch_size,
        "total_steps": meta.total_steps,
        "seed": meta.seed,
        "corpus_hash": meta.corpus_hash,
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    for step, ids in enumerate(schedule.batches):
        record = {"step": step, "ids": [int(i) for i in ids]}
        lines.append(json.dumps(record, separators=(",", ":")))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write schedule to {path}: {exc}") from exc


def _parse_line(raw: str, lineno: int, path: Path) -> dict:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ScheduleFormatError(
            f"{path}: line {lineno}: invalid JSON ({exc.msg})"
        ) from None
    if not isinstance(obj, dict):
        raise ScheduleFormatError(f"{path}: line {lineno}: expected a JSON object")
    return obj


def load_schedule(
    path: str | os.PathLike[str], corpus_size: int | None = None
) -> Schedule:
    """Parse and re-validate a schedule file.

    Checks the header, step contiguity from 0, id validity (range
    checked when corpus_size is given), the exactly-once property for
    ss/sm, and the batch count for the step-indexed samplers.
    """
    path = Path(path)
    with path.open(encoding="utf-8") as handle:
        first = handle.readline()
        if not first.strip():
            raise ScheduleFormatError(f"{path}: missing header")
        header = _parse_line(first, 1, path)
        missing = [f for f in HEADER_FIELDS if f not in header]
        if "step" in header or missing:
            raise ScheduleFormatError(
                f"{path}: missing header (first line must carry {', '.join(HEADER_FIELDS)})"
            )
        meta = ScheduleMeta(
            sampler=str(header["sampler"]),
            metric=None if header["metric"] is None else str(header["metric"]),
            batch_size=int(header["batch_size"]),
            total_steps=int(header["total_steps"]),
            seed=int(header["seed"]),
            corpus_hash=str(header["corpus_hash"]),
        )
        batches: list[list[int]] = []
        for lineno, raw in enumerate(handle, start=2):
            if not raw.strip():
                continue
            record = _parse_line(raw, lineno, path)
            if record.get("step") != len(batches):
                raise ScheduleFormatError(
                    f"{path}: line {lineno}: non-contiguous step "
                    f"(expected {len(batches)}, got {record.get('step')!r})"
                )
            ids = record.get("ids")
            if not isinstance(ids, list) or not ids:
                raise ScheduleFormatError(
                    f"{path}: line {lineno}: 'ids' must be a non-empty list"
                )
            for value in ids:
                if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                    raise ScheduleFormatError(
                        f"{path}: line {lineno}: invalid document id {value!r}"
                    )
                if corpus_size is not None and value >= corpus_size:
                    raise ScheduleFormatError(
                        f"{path}: line {lineno}: id {value} >= corpus size {corpus_size}"
                    )
            batches.append([int(v) for v in ids])
    if not batches:
        raise ScheduleFormatError(f"{path}: schedule has no batches")
    schedule = Schedule(meta, batches)
    _validate(schedule, path)
    return schedule


def _validate(schedule: Schedule, path: Path) -> None:
    meta = schedule.meta
    if meta.sampler in EXACTLY_ONCE_KINDS:
        seen: set[int] = set()
        for batch in schedule.batches:
            for doc in batch:
                if doc in seen:
                    raise ScheduleFormatError(
                        f"{path}: document {doc} scheduled twice by {meta.sampler}"
                    )
                seen.add(doc)
    elif len(schedule.batches) != meta.total_steps:
        raise ScheduleFormatError(
            f"{path}: expected {meta.total_steps} batches for {meta.sampler}, "
            f"found {len(schedule.batches)}"
        )


def schedule_stats(
    schedule: Schedule,
    scores: ComplexityScores,
    corpus: Corpus,
    path: str | os.PathLike[str] | None = None,
) -> list[dict]:
    """Per-batch summary table: complexity and length profile over steps.

    mean_complexity is the mean position of the batch's documents in the
    ascending complexity order (the quantity the samplers act on), so it
    is comparable across metrics and invariant under rescoring. Rows are
    also written as CSV when a path is given.
    """
    if schedule.meta.corpus_hash and schedule.meta.corpus_hash != corpus.content_hash:
        raise ScheduleFormatError(
            "schedule/corpus hash mismatch: "
            f"{schedule.meta.corpus_hash} vs {corpus.content_hash}"
        )
    if len(scores) != len(corpus):
        raise ValueError("scores do not cover the corpus")
    position = {doc: pos for pos, doc in enumerate(sort_by_complexity(scores))}
    rows = []
    for step, batch in enumerate(schedule.batches):
        rows.append(
            {
                "step": step,
                "mean_complexity": sum(position[d] for d in batch) / len(batch),
                "mean_length": sum(len(corpus[d].tokens) for d in batch) / len(batch),
                "batch_count": len(batch),
            }
        )
    if path is not None:
        path = Path(path)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.DictWriter(
                handle, fieldnames=["step", "mean_complexity", "mean_length", "batch_count"]
            )
            writer.writeheader()
            writer.writerows(rows)
    return rows
