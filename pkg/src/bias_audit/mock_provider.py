"""Deterministic offline provider for end-to-end testing.

Mock rules, version 1:

* Chat, detection prompts: score 2 if the paragraph contains any phrase
  from the extreme lexicon (whole-word, case-insensitive), 1 if any from
  the moderate lexicon, else 0. Flagged sentences are returned verbatim,
  joined by ' & ', with one justification each.
* Chat, rewrite prompts: the paragraph with every lexicon phrase replaced
  by a neutral placeholder; level 3 answers "Contain Cited Materials"
  with yes iff the original contains a double-quote character.
* Embeddings: a 16-dimension, L2-normalized vector of character-trigram
  hash counts. Deterministic and order-sensitive.
* Fault injection: any prompt or embedding input containing the token
  ``FAULTINJECT`` raises TransportError on every attempt, which lets
  tests exercise permanent-failure handling end to end.

The provider is a pure function of (prompt, model_id); concurrency and
call order cannot change its output.
"""

import json
import math
import re
import zlib

from . import prompts
from .errors import TransportError

MOCK_RULES_VERSION = 1
MOCK_EMBED_DIM = 16
FAULT_MARKER = "FAULTINJECT"
NEUTRAL_PLACEHOLDER = "[neutral wording]"

# Loaded-language markers used only by the mock; whole-word matched.
MODERATE_LEXICON = (
    "thug",
    "thugs",
    "gang-ridden",
    "crime-infested",
    "those people",
    "inner-city youths",
    "no angel",
)
EXTREME_LEXICON = (
    "savages",
    "vermin",
    "invaders",
    "menace to society",
    "animals roaming the streets",
)

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def _phrase_pattern(phrase: str) -> re.Pattern:
    return re.compile(r"\b" + re.escape(phrase) + r"\b", re.IGNORECASE)

_MODERATE_PATTERNS = tuple((p, _phrase_pattern(p)) for p in MODERATE_LEXICON)
_EXTREME_PATTERNS = tuple((p, _phrase_pattern(p)) for p in EXTREME_LEXICON)
_ALL_PATTERNS = _EXTREME_PATTERNS + _MODERATE_PATTERNS


def mock_score(text: str) -> int:
    """The mock's three-tier rating of a paragraph."""
    if any(pat.search(text) for _, pat in _EXTREME_PATTERNS):
        return 2
    if any(pat.search(text) for _, pat in _MODERATE_PATTERNS):
        return 1
    return 0


def _flagged_sentences(text: str) -> list[tuple[str, str]]:
    """(sentence, first matching phrase) for each sentence with a lexicon hit."""
    hits = []
    for sentence in _SENTENCE_SPLIT.split(text):
        if not sentence.strip():
            continue
        for phrase, pat in _ALL_PATTERNS:
            if pat.search(sentence):
                hits.append((sentence, phrase))
                break
    return hits


def neutralize(text: str) -> str:
    """Replace every lexicon phrase with the neutral placeholder."""
    out = text
    for _, pat in _ALL_PATTERNS:
        out = pat.sub(NEUTRAL_PLACEHOLDER, out)
    return out


def _detection_response(paragraph: str) -> str:
    score = mock_score(paragraph)
    hits = _flagged_sentences(paragraph)
    sentences = " & ".join(s for s, _ in hits)
    justifications = " & ".join(f"uses the loaded phrase '{p}'" for _, p in hits)
    doc = {
        "Main Topic": "crime",
        "Bias Detected": "yes" if score > 0 else "no",
        "Bias Score": str(score),
        "Biased Sentences": sentences,
        "Bias Justification": justifications,
        "Bias Summary": "loaded language" if score > 0 else "no bias found",
        "Bias Removal": "replace loaded phrases" if score > 0 else "none needed",
    }
    return json.dumps(doc, sort_keys=True, ensure_ascii=False)


def _rewrite_response(paragraph: str, level: int) -> str:
    doc = {
        "Rewritten Full Paragraph": neutralize(paragraph),
        "Transformation Summary": "replaced loaded phrases",
        "Preservation Analysis": "facts, actors, and sequence preserved; only loaded phrases were replaced",
    }
    if level == 3:
        doc["Contain Cited Materials"] = "yes" if '"' in paragraph else "no"
    return json.dumps(doc, sort_keys=True, ensure_ascii=False)


def _classify_prompt(prompt: str) -> tuple[str, int]:
    if "Bias Scoring: Rate the level of bias" in prompt:
        return "detect", 0
    if '"Contain Cited Materials"' in prompt:
        return "rewrite", 3
    if "Quote and Citied Material" in prompt:
        return "rewrite", 2
    if "Rewritten Full Paragraph" in prompt:
        return "rewrite", 1
    return "detect", 0


def mock_complete(prompt: str) -> str:
    """Deterministic chat response for a detection or rewrite prompt."""
    if FAULT_MARKER in prompt:
        raise TransportError("injected fault (FAULTINJECT marker present)")
    paragraph = prompts.extract_wrapped_paragraph(prompt)
    if paragraph is None:
        paragraph = prompt
    kind, level = _classify_prompt(prompt)
    if kind == "rewrite":
        return _rewrite_response(paragraph, level)
    return _detection_response(paragraph)


def mock_embed(text: str) -> list[float]:
    """16-dim normalized character-trigram hash counts."""
    if FAULT_MARKER in text:
        raise TransportError("injected fault (FAULTINJECT marker present)")
    if len(text) < 3:
        trigrams = [text]
    else:
        trigrams = [text[i : i + 3] for i in range(len(text) - 2)]
    counts = [0.0] * MOCK_EMBED_DIM
    for gram in trigrams:
        counts[zlib.crc32(gram.encode("utf-8")) % MOCK_EMBED_DIM] += 1.0
    norm = math.sqrt(sum(c * c for c in counts))
    if norm == 0.0:
        counts[0] = 1.0
        norm = 1.0
    return [c / norm for c in counts]
