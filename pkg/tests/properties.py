"""Invariant checks shared by the unit suite and the acceptance gate.

Every function here is self-contained (no pytest fixtures) so the
acceptance test can execute the whole registry directly. Hypothesis
functions run their full search when called.
"""

import datetime as dt
import json
import os
import random
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from pathlib import Path

from hypothesis import given, settings, strategies as st

from bias_audit import metrics
from bias_audit.analytics import (
    JoinedScore,
    StateTag,
    publisher_year_table,
    state_year_table,
)
from bias_audit.annotations import majority_vote
from bias_audit.cache import ResponseCache, cache_key
from bias_audit.corpus import (
    Article,
    Paragraph,
    corpus_stats,
    normalize_whitespace,
    paragraph_key,
    segment_paragraphs,
)
from bias_audit.debias import residual_bias_rates, select_flagged
from bias_audit.detection import (
    EVIDENCE_NOT_VERBATIM,
    assess_corpus,
    build_detection_prompt,
    parse_assessment,
)
from bias_audit.errors import InsufficientData, ZeroVector
from bias_audit.gateway import (
    ChatRequest,
    LlmGateway,
    ProviderConfig,
    SlidingWindowRateLimiter,
    extract_json,
)
from bias_audit.mock_provider import mock_embed, mock_score, neutralize

from .oracles import alpha_brute, publisher_year_brute, state_year_brute

_SETTINGS = settings(max_examples=80, deadline=None)


def _article(body: str) -> Article:
    return Article(
        article_id="art-0001",
        publisher="Testwire",
        url="https://example.org/a",
        publish_date=dt.date(2015, 6, 1),
        authors=(),
        title="segmentation probe",
        body_text=body,
    )


# -- corpus ------------------------------------------------------------------

@_SETTINGS
@given(st.text(alphabet=st.sampled_from("ab c.\n\t"), max_size=300))
def segmentation_idempotent(body):
    first = [p.text for p in segment_paragraphs(_article(body or "x"))]
    if not first:
        return
    rejoined = "\n\n".join(first)
    second = [p.text for p in segment_paragraphs(_article(rejoined))]
    assert second == first


@_SETTINGS
@given(
    st.lists(
        st.tuples(st.sampled_from(("P1", "P2", "P3")), st.integers(1, 4)),
        min_size=1,
        max_size=12,
    )
)
def stats_conserve_paragraph_counts(plan):
    articles = []
    for i, (publisher, n_paragraphs) in enumerate(plan):
        body = "\n\n".join(f"Paragraph {k} of article {i}." for k in range(n_paragraphs))
        articles.append(
            Article(
                article_id=f"a{i:03d}", publisher=publisher, url="",
                publish_date=dt.date(2016, 1, 1), authors=(), title=f"t{i}",
                body_text=body,
            )
        )
    stats = corpus_stats(articles)
    assert stats.paragraph_count == sum(p for _, p in stats.per_publisher_counts.values())
    assert stats.article_count == sum(a for a, _ in stats.per_publisher_counts.values())
    assert stats.paragraph_count == sum(len(segment_paragraphs(a)) for a in articles)


# -- gateway -----------------------------------------------------------------

_PROBE_TEXTS = (
    "Officials released the report on Monday.",
    "The shameless cover-up outraged residents.",
    "A radical thug was arrested near the plaza.",
    "Benign update with no charged wording at all.",
)


def mock_gateway_is_pure():
    """Any run order and any concurrency give identical raw replies."""
    prompts = [build_detection_prompt(t) for t in _PROBE_TEXTS] * 3
    reference: dict = {}
    rng = random.Random(7)
    for concurrency in (1, 8):
        for _ in range(3):
            order = prompts[:]
            rng.shuffle(order)
            with tempfile.TemporaryDirectory() as tmp:
                gw = LlmGateway(ProviderConfig(), cache=ResponseCache(Path(tmp)))
                with ThreadPoolExecutor(max_workers=concurrency) as pool:
                    replies = list(pool.map(
                        lambda p: gw.complete(ChatRequest(p, "mock-model", 0.0)).raw_text,
                        order,
                    ))
            for prompt, reply in zip(order, replies):
                assert reference.setdefault(prompt, reply) == reply


def rate_limit_window_respected():
    """Under a simulated clock, starts never exceed the per-minute cap in
    any sliding 60s window, and blocked acquires resume exactly on expiry."""

    class FakeClock:
        def __init__(self):
            self.now = 0.0

        def __call__(self):
            return self.now

        def sleep(self, seconds):
            assert seconds >= 0
            self.now += seconds

    clock = FakeClock()
    limiter = SlidingWindowRateLimiter(3, clock=clock, sleep=clock.sleep)
    starts = []
    for _ in range(8):
        limiter.acquire()
        starts.append(clock.now)
    assert starts == [0.0, 0.0, 0.0, 60.0, 60.0, 60.0, 120.0, 120.0]
    for i, start in enumerate(starts):
        in_window = sum(1 for s in starts[i:] if s < start + 60.0)
        assert in_window <= 3


def concurrency_cap_respected():
    """In-flight remote requests never exceed max_concurrency."""
    lock = threading.Lock()
    state = {"in_flight": 0, "peak": 0}

    def transport(url, headers, payload, timeout_s):
        with lock:
            state["in_flight"] += 1
            state["peak"] = max(state["peak"], state["in_flight"])
        threading.Event().wait(0.005)
        with lock:
            state["in_flight"] -= 1
        body = {"choices": [{"message": {"content": payload["messages"][0]["content"]}}]}
        return 200, json.dumps(body)

    os.environ["PROP_TEST_KEY"] = "k"
    try:
        cfg = ProviderConfig(
            provider_kind="remote_chat", model_id="m", base_url="https://api.example",
            api_key_env="PROP_TEST_KEY", max_concurrency=2, requests_per_minute=10_000,
        )
        with tempfile.TemporaryDirectory() as tmp:
            gw = LlmGateway(cfg, cache=ResponseCache(Path(tmp)), transport=transport)
            with ThreadPoolExecutor(max_workers=8) as pool:
                list(pool.map(
                    lambda i: gw.complete(ChatRequest(f"prompt {i}", "m", 0.0)),
                    range(16),
                ))
    finally:
        del os.environ["PROP_TEST_KEY"]
    assert state["peak"] <= 2


@_SETTINGS
@given(st.text(min_size=1, max_size=200))
def cache_round_trip(payload):
    with tempfile.TemporaryDirectory() as tmp:
        cache = ResponseCache(Path(tmp))
        key = cache_key("m", 0.0, "chat", payload)
        assert cache.load(key) is None
        cache.store(key, payload)
        assert cache.load(key) == payload


@_SETTINGS
@given(st.tuples(st.text(max_size=30), st.text(max_size=30)))
def cache_keys_distinct(pair):
    a, b = pair
    same = cache_key("m", 0.0, "chat", a) == cache_key("m", 0.0, "chat", b)
    assert same == (a == b)
    assert cache_key("m", 0.0, "chat", a) != cache_key("m", 0.0, "embed", a)


_JSON_VALUES = st.recursive(
    st.none() | st.booleans() | st.integers(-10**6, 10**6) | st.text(max_size=40),
    lambda inner: st.lists(inner, max_size=4)
    | st.dictionaries(st.text(max_size=10), inner, max_size=4),
    max_leaves=12,
)


@_SETTINGS
@given(st.dictionaries(st.text(max_size=10), _JSON_VALUES, max_size=6))
def extract_json_round_trips(doc):
    assert extract_json(json.dumps(doc)) == doc


# -- detection ---------------------------------------------------------------

_WORDS = st.lists(
    st.sampled_from("the quick officials said riot calm protest shameless city".split()),
    min_size=3,
    max_size=12,
)


@_SETTINGS
@given(
    words=_WORDS,
    score=st.sampled_from((0, 1, 2, "0", "1", "2")),
    detected=st.sampled_from(("yes", "no", None)),
    use_real_evidence=st.booleans(),
)
def assessment_normalization_invariants(words, score, detected, use_real_evidence):
    text = " ".join(words) + "."
    paragraph = Paragraph("a#p0000", "a", 0, text)
    evidence = text if use_real_evidence else "entirely fabricated quote"
    doc = {"Bias Score": score, "Biased Sentences": evidence, "Bias Justification": "j"}
    if detected is not None:
        doc["Bias Detected"] = detected
    got = parse_assessment(json.dumps(doc), paragraph, "m")
    assert got.bias_detected == (got.score > 0)
    assert 0 <= got.score <= 2
    if EVIDENCE_NOT_VERBATIM not in got.consistency_flags:
        body = normalize_whitespace(paragraph.text)
        for sentence in got.biased_sentences:
            assert normalize_whitespace(sentence) in body


def assess_corpus_conserves_and_ignores_order():
    texts = [
        "Officials published the schedule.",
        "The vicious smear campaign disgusted voters.",
        "Residents praised the calm response.",
        "A shameless stunt, critics said.",
        "Totally neutral logistics note.",
    ]
    paragraphs = [
        Paragraph(paragraph_key("art", i), "art", i, t) for i, t in enumerate(texts)
    ]
    with tempfile.TemporaryDirectory() as tmp:
        gw = LlmGateway(ProviderConfig(), cache=ResponseCache(Path(tmp)))
        base = assess_corpus(gw, paragraphs)
        assert len(base) == len(paragraphs)
        rng = random.Random(3)
        for _ in range(4):
            shuffled = paragraphs[:]
            rng.shuffle(shuffled)
            again = assess_corpus(gw, shuffled, max_concurrency=4)
            assert again == base


# -- debias ------------------------------------------------------------------

def select_flagged_is_a_filter():
    records = [
        {"status": "ok", "score": 0, "paragraph_id": "a"},
        {"status": "ok", "score": 1, "paragraph_id": "b"},
        {"status": "failed", "paragraph_id": "c"},
        {"status": "ok", "score": 2, "paragraph_id": "d"},
    ]
    picked = select_flagged(records)
    assert [r["paragraph_id"] for r in picked] == ["b", "d"]
    assert all(r["score"] > 0 for r in picked)


@_SETTINGS
@given(
    st.lists(
        st.tuples(st.sampled_from((1, 2, 3)), st.sampled_from((1, 2)), st.sampled_from((0, 1, 2))),
        min_size=1,
        max_size=40,
    )
)
def residual_rates_are_fractions(cells):
    records = [
        {"status": "ok", "prompt_level": lvl, "pre_score": pre, "post_score": post}
        for lvl, pre, post in cells
    ]
    rates = residual_bias_rates(records)
    for cell in rates.values():
        assert 0 <= cell["num"] <= cell["den"]
        assert 0.0 <= cell["fraction"] <= 1.0
    for level in {lvl for lvl, _, _ in cells}:
        den_sum = sum(c["den"] for (lvl, _), c in rates.items() if lvl == level)
        assert den_sum == sum(1 for lvl, _, _ in cells if lvl == level)


@_SETTINGS
@given(st.lists(st.sampled_from(
    ("the mayor spoke", "a shameless stunt", "radical thugs swarmed", "plain note")),
    min_size=1, max_size=6))
def mock_rewrite_never_raises_score(fragments):
    text = ". ".join(fragments) + "."
    pre = mock_score(text)
    post = mock_score(neutralize(text))
    assert post <= pre
    assert post == 0


# -- metrics -----------------------------------------------------------------

@_SETTINGS
@given(st.lists(st.sampled_from((0, 1, 2)), min_size=1, max_size=15), st.randoms())
def majority_vote_permutation_invariant(votes, rng):
    shuffled = votes[:]
    rng.shuffle(shuffled)
    assert majority_vote(shuffled) == majority_vote(votes)


@_SETTINGS
@given(st.lists(st.sampled_from((0, 1, 2)), min_size=2, max_size=30))
def self_agreement_is_perfect(labels):
    assert metrics.exact_match_rate(labels, labels) == 1.0
    if any(v > 0 for v in labels):
        assert metrics.fbeta(labels, labels) == 1.0
    if len(set(labels)) >= 2:
        for weighting in ("none", "linear", "quadratic"):
            assert abs(metrics.cohen_kappa(labels, labels, weighting) - 1.0) < 1e-12


def alpha_matches_oracle_exhaustively():
    """Two raters, no missing data, nominal level: implementation equals the
    brute-force oracle on every labeling of up to 4 items."""
    for n_items in (1, 2, 3, 4):
        for labeling in product((0, 1, 2), repeat=2 * n_items):
            units = [list(labeling[2 * i: 2 * i + 2]) for i in range(n_items)]
            try:
                want = alpha_brute(units, "nominal")
            except InsufficientData:
                want = None
            try:
                got = metrics.krippendorff_alpha(units, "nominal")
            except InsufficientData:
                got = None
            if want is None or got is None:
                assert want is None and got is None
            else:
                assert abs(got - want) <= 1e-9


@_SETTINGS
@given(
    st.lists(
        st.lists(st.sampled_from((0, 1, 2, None)), min_size=1, max_size=5),
        min_size=2,
        max_size=8,
    ),
    st.randoms(),
    st.sampled_from(("nominal", "ordinal", "interval")),
)
def alpha_order_invariant(units, rng, level):
    try:
        base = metrics.krippendorff_alpha(units, level)
    except InsufficientData:
        return
    shuffled = [unit[:] for unit in units]
    rng.shuffle(shuffled)
    for unit in shuffled:
        rng.shuffle(unit)
    assert abs(metrics.krippendorff_alpha(shuffled, level) - base) <= 1e-9


_EXACT_COMPONENTS = st.lists(st.integers(-50, 50).map(float), min_size=2, max_size=8)


@_SETTINGS
@given(_EXACT_COMPONENTS, _EXACT_COMPONENTS, st.sampled_from((0.25, 0.5, 2.0, 4.0)))
def cosine_properties(a, b, scale):
    if len(a) != len(b):
        b = (b + a)[: len(a)]
    try:
        base = metrics.cosine_similarity(a, b)
    except ZeroVector:
        return
    assert abs(base) <= 1.0 + 1e-12
    assert metrics.cosine_similarity(b, a) == base
    # power-of-two scales keep every product exact, so the quotient is bitwise stable
    scaled = [scale * x for x in a]
    assert abs(metrics.cosine_similarity(scaled, b) - base) <= 1e-12


@_SETTINGS
@given(
    st.lists(st.sampled_from((0, 1, 2)), min_size=1, max_size=20),
    st.lists(st.sampled_from((0, 1, 2)), min_size=1, max_size=20),
)
def fbeta_and_exact_match_bounded(a, b):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    assert 0.0 <= metrics.fbeta(a, b) <= 1.0
    assert 0.0 <= metrics.exact_match_rate(a, b) <= 1.0


# -- analytics ---------------------------------------------------------------

_JOINED = st.lists(
    st.tuples(
        st.sampled_from(("Alpha Post", "Beta Wire", "Gamma Sun")),
        st.integers(2014, 2019),
        st.integers(0, 9),
        st.sampled_from((0, 1, 2)),
    ),
    min_size=1,
    max_size=40,
)


def _as_joined(rows):
    joined = []
    for k, (publisher, year, art, score) in enumerate(rows):
        article_id = f"{publisher[:2]}-{art}-{year}"
        joined.append(JoinedScore(
            paragraph_id=f"{article_id}#p{k:04d}",
            article_id=article_id,
            publisher=publisher,
            year=year,
            score=score,
        ))
    return joined


@_SETTINGS
@given(_JOINED, st.randoms())
def publisher_table_order_invariant_and_exact(rows, rng):
    joined = _as_joined(rows)
    table = publisher_year_table(joined)
    shuffled = joined[:]
    rng.shuffle(shuffled)
    assert publisher_year_table(shuffled) == table

    oracle = publisher_year_brute(
        [(j.publisher, j.year, j.article_id, j.score) for j in joined]
    )
    assert len(table) == len(oracle)
    for row in table:
        want = oracle[(row["publisher"], row["year"])]
        assert row["n_articles"] == want["n_articles"]
        assert row["n_paragraphs"] == want["n_paragraphs"]
        assert row["pct_articles_biased"] == want["pct_articles_biased"]
        # integer scores sum exactly, so the means agree bit for bit
        assert row["mean_paragraph_score"] == want["mean_paragraph_score"]


@_SETTINGS
@given(_JOINED, st.randoms())
def state_table_conserves_articles(rows, rng):
    joined = _as_joined(rows)
    states = ("Ohio", "Georgia", None)
    tags = {
        j.article_id: StateTag(
            article_id=j.article_id,
            state=states[sum(map(ord, j.article_id)) % 3],
            match_source="body",
            match_count=1,
        )
        for j in joined
    }
    table, untagged = state_year_table(joined, tags)
    shuffled = joined[:]
    rng.shuffle(shuffled)
    assert state_year_table(shuffled, tags) == (table, untagged)

    oracle, oracle_untagged = state_year_brute(
        [(tags[j.article_id].state, j.year, j.article_id, j.score) for j in joined]
    )
    assert set(untagged) == oracle_untagged
    assert len(table) == len(oracle)
    for row in table:
        want = oracle[(row["state"], row["year"])]
        assert row["n_articles"] == want["n_articles"]
        assert row["n_biased_articles"] == want["n_biased_articles"]
        assert row["pct_paragraphs_biased"] == want["pct_paragraphs_biased"]

    # every article lands in exactly one cell or in the untagged list
    assert sum(r["n_articles"] for r in table) + len(untagged) == len(
        {j.article_id for j in joined}
    )


@_SETTINGS
@given(
    st.lists(st.integers(0, 2).map(float), min_size=2, max_size=12),
    st.lists(st.integers(0, 2).map(float), min_size=2, max_size=12),
)
def welch_antisymmetric(a, b):
    fwd = metrics.welch_t_test(a, b)
    rev = metrics.welch_t_test(b, a)
    assert fwd.p_value == rev.p_value
    assert fwd.t_stat == -rev.t_stat or (fwd.t_stat == 0.0 and rev.t_stat == 0.0)


def embedding_is_deterministic():
    for text in _PROBE_TEXTS:
        first = mock_embed(text)
        assert len(first) == 16
        assert mock_embed(text) == first


PROPERTY_CHECKS = [
    ("segmentation_idempotent", segmentation_idempotent),
    ("stats_conserve_paragraph_counts", stats_conserve_paragraph_counts),
    ("mock_gateway_is_pure", mock_gateway_is_pure),
    ("rate_limit_window_respected", rate_limit_window_respected),
    ("concurrency_cap_respected", concurrency_cap_respected),
    ("cache_round_trip", cache_round_trip),
    ("cache_keys_distinct", cache_keys_distinct),
    ("extract_json_round_trips", extract_json_round_trips),
    ("assessment_normalization_invariants", assessment_normalization_invariants),
    ("assess_corpus_conserves_and_ignores_order", assess_corpus_conserves_and_ignores_order),
    ("select_flagged_is_a_filter", select_flagged_is_a_filter),
    ("residual_rates_are_fractions", residual_rates_are_fractions),
    ("mock_rewrite_never_raises_score", mock_rewrite_never_raises_score),
    ("majority_vote_permutation_invariant", majority_vote_permutation_invariant),
    ("self_agreement_is_perfect", self_agreement_is_perfect),
    ("alpha_matches_oracle_exhaustively", alpha_matches_oracle_exhaustively),
    ("alpha_order_invariant", alpha_order_invariant),
    ("cosine_properties", cosine_properties),
    ("fbeta_and_exact_match_bounded", fbeta_and_exact_match_bounded),
    ("publisher_table_order_invariant_and_exact", publisher_table_order_invariant_and_exact),
    ("state_table_conserves_articles", state_table_conserves_articles),
    ("welch_antisymmetric", welch_antisymmetric),
    ("embedding_is_deterministic", embedding_is_deterministic),
]
