"""Paragraph-level bias scoring.

Sends each paragraph through the detection prompt, parses the JSON reply
into a normalized assessment, and cross-checks the model's own claims
(score vs detected flag, evidence lists, verbatim quotes). The numeric
score is authoritative; everything else is recorded as consistency flags
rather than rejected.
"""

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .corpus import Paragraph, normalize_whitespace
from .errors import (
    AssessmentFailed,
    MalformedJson,
    NoJsonFound,
    SchemaError,
    ScoreUnparseable,
)
from .gateway import ChatRequest, LlmGateway, extract_json, response_digest
from .prompts import DETECTION_PROMPT, RETRY_SUFFIX, wrap_paragraph

logger = logging.getLogger(__name__)

# Consistency flags attached by parse_assessment.
DETECTED_SCORE_MISMATCH = "DETECTED_SCORE_MISMATCH"
EVIDENCE_NOT_VERBATIM = "EVIDENCE_NOT_VERBATIM"
COUNT_MISMATCH = "COUNT_MISMATCH"
SCORE_CLAMPED = "SCORE_CLAMPED"

_FIELD_MAIN_TOPIC = "Main Topic"
_FIELD_DETECTED = "Bias Detected"
_FIELD_SCORE = "Bias Score"
_FIELD_SENTENCES = "Biased Sentences"
_FIELD_JUSTIFICATIONS = "Bias Justification"
_FIELD_SUMMARY = "Bias Summary"
_FIELD_REMOVAL = "Bias Removal"

_YES = ("yes", "true", "y")
_NO = ("no", "false", "n", "none")


@dataclass(frozen=True)
class BiasAssessment:
    paragraph_id: str
    model_id: str
    main_topic: str
    bias_detected: bool
    score: int
    biased_sentences: tuple[str, ...]
    justifications: tuple[str, ...]
    summary: str
    removal_hint: str
    consistency_flags: frozenset[str]
    raw_response_digest: str

    @property
    def flagged(self) -> bool:
        return self.score > 0

    def to_doc(self) -> dict:
        return {
            "paragraph_id": self.paragraph_id,
            "model_id": self.model_id,
            "main_topic": self.main_topic,
            "bias_detected": self.bias_detected,
            "score": self.score,
            "biased_sentences": list(self.biased_sentences),
            "justifications": list(self.justifications),
            "summary": self.summary,
            "removal_hint": self.removal_hint,
            "consistency_flags": sorted(self.consistency_flags),
            "raw_response_digest": self.raw_response_digest,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "BiasAssessment":
        return cls(
            paragraph_id=doc["paragraph_id"],
            model_id=doc["model_id"],
            main_topic=doc["main_topic"],
            bias_detected=doc["bias_detected"],
            score=doc["score"],
            biased_sentences=tuple(doc["biased_sentences"]),
            justifications=tuple(doc["justifications"]),
            summary=doc["summary"],
            removal_hint=doc["removal_hint"],
            consistency_flags=frozenset(doc["consistency_flags"]),
            raw_response_digest=doc["raw_response_digest"],
        )


def build_detection_prompt(paragraph_text: str) -> str:
    return wrap_paragraph(DETECTION_PROMPT, paragraph_text)


def _parse_bool(value) -> bool | None:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        low = value.strip().lower()
        if low in _YES:
            return True
        if low in _NO:
            return False
    return None


def _parse_score(value) -> tuple[int, bool]:
    """Normalize a score to int 0..2; second element marks clamping."""
    if isinstance(value, bool):
        raise ScoreUnparseable(value)
    if isinstance(value, str):
        value = value.strip()
    try:
        num = float(value)
    except (TypeError, ValueError):
        raise ScoreUnparseable(value) from None
    if num != num:
        raise ScoreUnparseable(value)
    score = int(round(num))
    clamped = score < 0 or score > 2
    return min(max(score, 0), 2), clamped


def _as_items(value) -> tuple[str, ...]:
    """Evidence fields arrive either as a single '&'-joined string or a list."""
    if value is None:
        return ()
    if isinstance(value, list):
        items = [str(v).strip() for v in value]
    else:
        text = str(value).strip()
        if not text or text.lower() in ("none", "n/a"):
            return ()
        items = [part.strip() for part in re.split(r"\s*&\s*", text)]
    return tuple(item for item in items if item)


def parse_assessment(
    raw_text: str,
    paragraph: Paragraph,
    model_id: str,
) -> BiasAssessment:
    """Normalize one raw model reply against its source paragraph.

    Raises SchemaError when the score field is absent, ScoreUnparseable
    when it cannot be read as a number; softer problems become flags.
    """
    doc = extract_json(raw_text)
    if _FIELD_SCORE not in doc:
        raise SchemaError(_FIELD_SCORE)

    flags = set()
    score, clamped = _parse_score(doc[_FIELD_SCORE])
    if clamped:
        flags.add(SCORE_CLAMPED)

    detected_claim = _parse_bool(doc.get(_FIELD_DETECTED))
    bias_detected = score > 0
    if detected_claim is not None and detected_claim != bias_detected:
        flags.add(DETECTED_SCORE_MISMATCH)

    sentences = _as_items(doc.get(_FIELD_SENTENCES))
    justifications = _as_items(doc.get(_FIELD_JUSTIFICATIONS))
    if len(sentences) != len(justifications):
        flags.add(COUNT_MISMATCH)
    if score > 0 and not sentences:
        flags.add(COUNT_MISMATCH)

    normalized_body = normalize_whitespace(paragraph.text)
    for sentence in sentences:
        if normalize_whitespace(sentence) not in normalized_body:
            flags.add(EVIDENCE_NOT_VERBATIM)
            break

    return BiasAssessment(
        paragraph_id=paragraph.paragraph_id,
        model_id=model_id,
        main_topic=str(doc.get(_FIELD_MAIN_TOPIC, "")).strip(),
        bias_detected=bias_detected,
        score=score,
        biased_sentences=sentences,
        justifications=justifications,
        summary=str(doc.get(_FIELD_SUMMARY, "")).strip(),
        removal_hint=str(doc.get(_FIELD_REMOVAL, "")).strip(),
        consistency_flags=frozenset(flags),
        raw_response_digest=response_digest(raw_text),
    )


def assess_paragraph(gateway: LlmGateway, paragraph: Paragraph) -> BiasAssessment:
    """Score one paragraph, retrying once with a stricter instruction when
    the reply does not parse. A second parse failure or a provider failure
    raises AssessmentFailed.
    """
    prompt = build_detection_prompt(paragraph.text)
    model_id = gateway.cfg.model_id
    try:
        reply = gateway.complete(ChatRequest(prompt_text=prompt, model_id=model_id,
                                             temperature=gateway.cfg.temperature))
    except Exception as exc:
        raise AssessmentFailed(paragraph.paragraph_id, exc) from exc
    try:
        return parse_assessment(reply.raw_text, paragraph, model_id)
    except (NoJsonFound, MalformedJson, SchemaError, ScoreUnparseable) as first:
        logger.warning("retrying unparseable reply for %s: %s", paragraph.paragraph_id, first)
        try:
            retry = gateway.complete(
                ChatRequest(prompt_text=prompt + "\n\n" + RETRY_SUFFIX,
                            model_id=model_id, temperature=gateway.cfg.temperature))
            return parse_assessment(retry.raw_text, paragraph, model_id)
        except Exception as exc:
            raise AssessmentFailed(paragraph.paragraph_id, exc) from exc


def assess_corpus(
    gateway: LlmGateway,
    paragraphs: list[Paragraph],
    max_concurrency: int | None = None,
) -> list[dict]:
    """Score every paragraph, fanning out across a thread pool.

    Returns one record per paragraph in (article_id, index) order, each a
    plain dict with status "ok" (assessment fields) or "failed" (error).
    Failures never abort the batch.
    """
    workers = max_concurrency or gateway.cfg.max_concurrency
    by_key = {p.paragraph_id: p for p in paragraphs}

    def run(paragraph: Paragraph):
        try:
            return assess_paragraph(gateway, paragraph)
        except AssessmentFailed as exc:
            return exc

    ordered = sorted(paragraphs, key=lambda p: (p.article_id, p.index))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(run, ordered))

    records = []
    for paragraph, outcome in zip(ordered, outcomes):
        base = {
            "paragraph_id": paragraph.paragraph_id,
            "article_id": paragraph.article_id,
            "index": paragraph.index,
            "text": paragraph.text,
        }
        if isinstance(outcome, AssessmentFailed):
            base["status"] = "failed"
            base["error"] = str(outcome.cause)
            base["error_kind"] = type(outcome.cause).__name__
        else:
            base["status"] = "ok"
            base.update(outcome.to_doc())
        records.append(base)
    assert len(records) == len(by_key)
    return records
