"""Graded rewriting of flagged paragraphs and reassessment of the rewrites.

Rewrites run at one of three instruction levels of increasing strictness.
Each rewritten paragraph is then scored again with the unmodified detection
prompt, so pre/post score pairs stay comparable. Soft quality checks
(summary length, invented quotes) are recorded as flags, never used to
reject a rewrite.
"""

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .corpus import Paragraph, normalize_whitespace
from .errors import (
    DebiasFailed,
    MalformedJson,
    NoJsonFound,
    SchemaError,
    ScoreUnparseable,
)
from .gateway import ChatRequest, LlmGateway, extract_json, response_digest
from .prompts import DEBIAS_PROMPTS, RETRY_SUFFIX, wrap_paragraph

logger = logging.getLogger(__name__)

SUMMARY_TOO_LONG = "SUMMARY_TOO_LONG"
QUOTE_INTEGRITY = "QUOTE_INTEGRITY"

_FIELD_REWRITE = "Rewritten Full Paragraph"
_FIELD_SUMMARY = "Transformation Summary"
_FIELD_PRESERVATION = "Preservation Analysis"
_FIELD_CITED = "Contain Cited Materials"

_SUMMARY_WORD_LIMIT = 5
_QUOTE_SPAN = re.compile(r'"([^"]+)"')
_MIN_QUOTE_WORDS = 5


@dataclass(frozen=True)
class DebiasResult:
    paragraph_id: str
    model_id: str
    prompt_level: int
    pre_score: int
    original_text: str
    rewritten_text: str
    transformation_summary: str
    preservation_analysis: str
    contains_cited: bool | None
    flags: frozenset[str]
    raw_response_digest: str

    def to_doc(self) -> dict:
        return {
            "paragraph_id": self.paragraph_id,
            "model_id": self.model_id,
            "prompt_level": self.prompt_level,
            "pre_score": self.pre_score,
            "original_text": self.original_text,
            "rewritten_text": self.rewritten_text,
            "transformation_summary": self.transformation_summary,
            "preservation_analysis": self.preservation_analysis,
            "contains_cited": self.contains_cited,
            "flags": sorted(self.flags),
            "raw_response_digest": self.raw_response_digest,
        }


def select_flagged(detect_records: list[dict]) -> list[dict]:
    """Keep the detection records eligible for rewriting: successfully
    assessed and scored above zero."""
    return [r for r in detect_records if r.get("status") == "ok" and r.get("score", 0) > 0]


def build_debias_prompt(level: int, paragraph_text: str) -> str:
    if level not in DEBIAS_PROMPTS:
        raise ValueError(f"prompt level must be one of {sorted(DEBIAS_PROMPTS)}, got {level}")
    return wrap_paragraph(DEBIAS_PROMPTS[level], paragraph_text)


def _parse_cited(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        low = value.strip().lower()
        if low in ("yes", "true", "y"):
            return True
        if low in ("no", "false", "n"):
            return False
    raise SchemaError(_FIELD_CITED)


def _quote_flags(original: str, rewritten: str) -> set[str]:
    """Flag rewrites that introduce long quoted spans absent from the
    original: quoted material must never be fabricated."""
    flags = set()
    source = normalize_whitespace(original)
    for span in _QUOTE_SPAN.findall(rewritten):
        if len(span.split()) >= _MIN_QUOTE_WORDS and normalize_whitespace(span) not in source:
            flags.add(QUOTE_INTEGRITY)
            break
    return flags


def parse_rewrite(
    raw_text: str,
    paragraph_id: str,
    original_text: str,
    level: int,
    pre_score: int,
    model_id: str,
) -> DebiasResult:
    """Normalize one rewrite reply. The rewritten paragraph is mandatory;
    the cited-material answer is mandatory at level 3 and ignored below it.
    """
    doc = extract_json(raw_text)
    if _FIELD_REWRITE not in doc or not str(doc[_FIELD_REWRITE]).strip():
        raise SchemaError(_FIELD_REWRITE)
    rewritten = str(doc[_FIELD_REWRITE]).strip()

    contains_cited = None
    if level == 3:
        if _FIELD_CITED not in doc:
            raise SchemaError(_FIELD_CITED)
        contains_cited = _parse_cited(doc[_FIELD_CITED])

    summary = str(doc.get(_FIELD_SUMMARY, "")).strip()
    flags = set()
    if len(summary.split()) > _SUMMARY_WORD_LIMIT:
        flags.add(SUMMARY_TOO_LONG)
    flags |= _quote_flags(original_text, rewritten)

    return DebiasResult(
        paragraph_id=paragraph_id,
        model_id=model_id,
        prompt_level=level,
        pre_score=pre_score,
        original_text=original_text,
        rewritten_text=rewritten,
        transformation_summary=summary,
        preservation_analysis=str(doc.get(_FIELD_PRESERVATION, "")).strip(),
        contains_cited=contains_cited,
        flags=frozenset(flags),
        raw_response_digest=response_digest(raw_text),
    )


def debias_paragraph(
    gateway: LlmGateway,
    paragraph_id: str,
    text: str,
    level: int,
    pre_score: int,
) -> DebiasResult:
    """Rewrite one paragraph at the given level, retrying once with a
    stricter instruction when the reply does not parse."""
    prompt = build_debias_prompt(level, text)
    model_id = gateway.cfg.model_id
    try:
        reply = gateway.complete(ChatRequest(prompt_text=prompt, model_id=model_id,
                                             temperature=gateway.cfg.temperature))
    except Exception as exc:
        raise DebiasFailed(paragraph_id, exc) from exc
    try:
        return parse_rewrite(reply.raw_text, paragraph_id, text, level, pre_score, model_id)
    except (NoJsonFound, MalformedJson, SchemaError, ScoreUnparseable) as first:
        logger.warning("retrying unparseable rewrite for %s: %s", paragraph_id, first)
        try:
            retry = gateway.complete(
                ChatRequest(prompt_text=prompt + "\n\n" + RETRY_SUFFIX,
                            model_id=model_id, temperature=gateway.cfg.temperature))
            return parse_rewrite(retry.raw_text, paragraph_id, text, level, pre_score, model_id)
        except Exception as exc:
            raise DebiasFailed(paragraph_id, exc) from exc


def debias_flagged(
    gateway: LlmGateway,
    flagged_records: list[dict],
    level: int,
    max_concurrency: int | None = None,
) -> list[dict]:
    """Rewrite every flagged detection record at one level.

    Returns one record per input in (article_id, index) order with status
    "ok" or "failed"; failures never abort the batch.
    """
    workers = max_concurrency or gateway.cfg.max_concurrency
    ordered = sorted(flagged_records, key=lambda r: (r["article_id"], r["index"]))

    def run(record: dict):
        try:
            return debias_paragraph(
                gateway,
                paragraph_id=record["paragraph_id"],
                text=record["text"],
                level=level,
                pre_score=record["score"],
            )
        except DebiasFailed as exc:
            return exc

    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(run, ordered))

    records = []
    for source, outcome in zip(ordered, outcomes):
        base = {
            "paragraph_id": source["paragraph_id"],
            "article_id": source["article_id"],
            "index": source["index"],
            "prompt_level": level,
            "pre_score": source["score"],
        }
        if isinstance(outcome, DebiasFailed):
            base["status"] = "failed"
            base["error"] = str(outcome.cause)
            base["error_kind"] = type(outcome.cause).__name__
        else:
            base["status"] = "ok"
            base.update(outcome.to_doc())
        records.append(base)
    return records


def reassess(
    gateway: LlmGateway,
    debias_records: list[dict],
    max_concurrency: int | None = None,
) -> list[dict]:
    """Score each successful rewrite with the unchanged detection prompt.

    Failed rewrites pass through as failed reassessments so downstream
    joins see one record per attempted paragraph.
    """
    from .detection import assess_paragraph

    workers = max_concurrency or gateway.cfg.max_concurrency
    ordered = sorted(debias_records, key=lambda r: (r["article_id"], r["index"]))

    def run(record: dict):
        if record.get("status") != "ok":
            return None
        paragraph = Paragraph(
            paragraph_id=record["paragraph_id"],
            article_id=record["article_id"],
            index=record["index"],
            text=record["rewritten_text"],
        )
        try:
            return assess_paragraph(gateway, paragraph)
        except Exception as exc:
            return exc

    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(run, ordered))

    records = []
    for source, outcome in zip(ordered, outcomes):
        base = {
            "paragraph_id": source["paragraph_id"],
            "article_id": source["article_id"],
            "index": source["index"],
            "prompt_level": source["prompt_level"],
            "pre_score": source["pre_score"],
        }
        if outcome is None:
            base["status"] = "failed"
            base["error"] = "rewrite unavailable"
            base["error_kind"] = "DebiasFailed"
        elif isinstance(outcome, Exception):
            base["status"] = "failed"
            cause = getattr(outcome, "cause", outcome)
            base["error"] = str(cause)
            base["error_kind"] = type(cause).__name__
        else:
            base["status"] = "ok"
            base["post_score"] = outcome.score
            base["post_bias_detected"] = outcome.bias_detected
            base["consistency_flags"] = sorted(outcome.consistency_flags)
            base["model_id"] = outcome.model_id
            base["raw_response_digest"] = outcome.raw_response_digest
        records.append(base)
    return records


def residual_bias_rates(reassess_records: list[dict]) -> dict[tuple[int, int], dict]:
    """Fraction of rewrites scoring 0 on reassessment, per (level,
    pre_score) cell. Cells with no observations are absent rather than
    zero.
    """
    cells: dict[tuple[int, int], dict] = {}
    for record in reassess_records:
        if record.get("status") != "ok":
            continue
        key = (record["prompt_level"], record["pre_score"])
        cell = cells.setdefault(key, {"num": 0, "den": 0})
        cell["den"] += 1
        if record["post_score"] == 0:
            cell["num"] += 1
    for cell in cells.values():
        cell["fraction"] = cell["num"] / cell["den"]
    return dict(sorted(cells.items()))
