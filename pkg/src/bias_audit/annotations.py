"""Human annotation handling.

Annotations arrive as a flat CSV keyed by paragraph, annotator, task, and
variant. Loading is strict: a malformed row aborts with its row number
rather than being skipped, since silently dropped votes would shift every
agreement number downstream.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import AnnotationError, EmptyVotes

HEADER = ("paragraph_id", "annotator_id", "task", "variant", "value")

TASK_BIAS = "bias"
TASK_SIMILARITY = "similarity"

VARIANT_ORIGINAL = "original"
VARIANTS = ("original", "level1", "level2", "level3")

_TASK_RANGES = {
    TASK_BIAS: frozenset({0, 1, 2}),
    TASK_SIMILARITY: frozenset({-2, -1, 0, 1, 2}),
}


@dataclass(frozen=True)
class AnnotationRecord:
    paragraph_id: str
    annotator_id: str
    task: str
    variant: str
    value: int


@dataclass(frozen=True)
class MajorityLabel:
    value: int
    n_votes: int
    tie_broken: bool


def load_annotations(path) -> list[AnnotationRecord]:
    """Read an annotation CSV, validating header, task, variant, value
    range, and vote uniqueness. Row numbers in errors count the header as
    row 1."""
    path = Path(path)
    records: list[AnnotationRecord] = []
    seen: set[tuple[str, str, str, str]] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise AnnotationError(1, "file is empty") from None
        if tuple(header) != HEADER:
            raise AnnotationError(1, f"header must be {','.join(HEADER)}")
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(HEADER):
                raise AnnotationError(row_no, f"expected {len(HEADER)} fields, got {len(row)}")
            paragraph_id, annotator_id, task, variant, raw_value = (f.strip() for f in row)
            if not paragraph_id or not annotator_id:
                raise AnnotationError(row_no, "paragraph_id and annotator_id must be non-empty")
            if task not in _TASK_RANGES:
                raise AnnotationError(row_no, f"unknown task {task!r}")
            if variant not in VARIANTS:
                raise AnnotationError(row_no, f"unknown variant {variant!r}")
            try:
                value = int(raw_value)
            except ValueError:
                raise AnnotationError(row_no, f"value {raw_value!r} is not an integer") from None
            if value not in _TASK_RANGES[task]:
                raise AnnotationError(
                    row_no, f"value {value} outside range for task {task!r}")
            key = (paragraph_id, annotator_id, task, variant)
            if key in seen:
                raise AnnotationError(row_no, f"duplicate vote for {key}")
            seen.add(key)
            records.append(AnnotationRecord(paragraph_id, annotator_id, task, variant, value))
    return records


def write_annotations(path, records: list[AnnotationRecord]) -> None:
    from .storage import write_csv

    rows = [
        (r.paragraph_id, r.annotator_id, r.task, r.variant, r.value)
        for r in sorted(records, key=lambda r: (r.paragraph_id, r.task, r.variant, r.annotator_id))
    ]
    write_csv(path, HEADER, rows)


def majority_vote(values) -> MajorityLabel:
    """Modal value of the votes; ties resolve to the highest tied value so
    disagreement never understates severity."""
    votes = list(values)
    if not votes:
        raise EmptyVotes()
    counts: dict[int, int] = {}
    for v in votes:
        counts[v] = counts.get(v, 0) + 1
    best = max(counts.values())
    tied = [v for v, c in counts.items() if c == best]
    return MajorityLabel(value=max(tied), n_votes=len(votes), tie_broken=len(tied) > 1)


def votes_by_paragraph(
    records: list[AnnotationRecord],
    task: str,
    variant: str,
) -> dict[str, list[int]]:
    """Votes for one task/variant keyed by paragraph, each list ordered by
    annotator id for determinism."""
    grouped: dict[str, list[tuple[str, int]]] = {}
    for r in records:
        if r.task == task and r.variant == variant:
            grouped.setdefault(r.paragraph_id, []).append((r.annotator_id, r.value))
    return {
        pid: [v for _, v in sorted(pairs)]
        for pid, pairs in sorted(grouped.items())
    }


def build_ground_truth(
    records: list[AnnotationRecord],
    task: str = TASK_BIAS,
    variant: str = VARIANT_ORIGINAL,
) -> dict[str, MajorityLabel]:
    return {
        pid: majority_vote(votes)
        for pid, votes in votes_by_paragraph(records, task, variant).items()
    }


def synthesize_mock_annotations(
    detect_records: list[dict],
    debias_records: list[dict],
    annotators: tuple[str, ...] = ("rater-1", "rater-2", "rater-3"),
) -> list[AnnotationRecord]:
    """Stand-in for human raters when exercising the pipeline offline.

    Bias votes repeat the deterministic mock score of the text under
    judgment; similarity votes map the mock-embedding cosine onto the
    -2..2 scale. Every rater votes identically, which keeps the files
    valid and reproducible without pretending to model disagreement.
    """
    from .metrics import cosine_similarity
    from .mock_provider import mock_embed, mock_score

    out: list[AnnotationRecord] = []

    def emit(paragraph_id: str, task: str, variant: str, value: int) -> None:
        for annotator in annotators:
            out.append(AnnotationRecord(paragraph_id, annotator, task, variant, value))

    for record in detect_records:
        if record.get("status") != "ok":
            continue
        emit(record["paragraph_id"], TASK_BIAS, VARIANT_ORIGINAL, mock_score(record["text"]))

    for record in debias_records:
        if record.get("status") != "ok":
            continue
        variant = f"level{record['prompt_level']}"
        emit(record["paragraph_id"], TASK_BIAS, variant, mock_score(record["rewritten_text"]))
        cos = cosine_similarity(
            mock_embed(record["original_text"]), mock_embed(record["rewritten_text"]))
        rating = max(-2, min(2, round(4.0 * cos - 2.0)))
        emit(record["paragraph_id"], TASK_SIMILARITY, variant, rating)

    return out
