"""Publisher, temporal, and geographic aggregation of assessments.

Joins paragraph scores back to article metadata and produces three views:
publisher by year (mean paragraph score, share of articles with any biased
paragraph), state by year (share of biased paragraphs, article counts),
and pairwise publisher comparisons (Welch's t-test on paragraph scores).
State attribution is lexicon-based with publisher-name strings excluded
from matching, so an outlet mentioning itself never tags its own state.
"""

import logging
import re
import statistics
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .corpus import Article
from .errors import JoinGap
from .metrics import welch_t_test
from .storage import write_csv, write_json

logger = logging.getLogger(__name__)

# Outlet names stripped before state matching, covering common spellings.
# The article's own publisher field is always excluded as well.
PUBLISHER_NAME_VARIANTS = (
    "The Daily Beast",
    "Daily Beast",
    "DailyBeast",
    "CNN",
    "Newsweek",
    "The Washington Times",
    "Washington Times",
    "Fox News",
)

MATCH_SOURCE_TITLE = "title"
MATCH_SOURCE_BODY = "body"


@dataclass(frozen=True)
class StateTag:
    article_id: str
    state: str | None
    match_source: str | None
    match_count: int


@dataclass(frozen=True)
class JoinedScore:
    paragraph_id: str
    article_id: str
    publisher: str
    year: int
    score: int


def load_gazetteer(path=None) -> dict[str, tuple[str, ...]]:
    """State lexicon: one state per line, optional |-separated aliases,
    blank lines and #-comments ignored. Defaults to the bundled file."""
    if path is None:
        text = resources.files("bias_audit").joinpath("data/us_states.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    gazetteer: dict[str, tuple[str, ...]] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("|") if p.strip()]
        gazetteer[parts[0]] = tuple(parts)
    return gazetteer


def _word_pattern(phrase: str) -> re.Pattern:
    return re.compile(r"(?<!\w)" + re.escape(phrase) + r"(?!\w)", re.IGNORECASE)


def _strip_publisher_names(text: str, publisher: str) -> str:
    names = sorted(set(PUBLISHER_NAME_VARIANTS) | {publisher}, key=len, reverse=True)
    for name in names:
        if name:
            text = _word_pattern(name).sub(" ", text)
    return text


def tag_state(article: Article, gazetteer: dict[str, tuple[str, ...]]) -> StateTag:
    """Assign the article to the state it mentions most.

    Counting is whole-word and case-insensitive over title and body after
    publisher-name strings are removed. Ties prefer the state with more
    title mentions, then the alphabetically first name. No mention at all
    leaves the tag empty.
    """
    title = _strip_publisher_names(article.title, article.publisher)
    body = _strip_publisher_names(article.body_text, article.publisher)

    counts: list[tuple[int, int, str]] = []
    for state in sorted(gazetteer):
        in_title = in_body = 0
        for alias in gazetteer[state]:
            pat = _word_pattern(alias)
            in_title += len(pat.findall(title))
            in_body += len(pat.findall(body))
        total = in_title + in_body
        if total:
            counts.append((total, in_title, state))
    if not counts:
        return StateTag(article.article_id, None, None, 0)
    counts.sort(key=lambda c: (-c[0], -c[1], c[2]))
    total, in_title, state = counts[0]
    source = MATCH_SOURCE_TITLE if in_title else MATCH_SOURCE_BODY
    logger.debug("state tag %s -> %s (%d matches, %s)",
                 article.article_id, state, total, source)
    return StateTag(article.article_id, state, source, total)


def tag_corpus(articles: list[Article], gazetteer=None) -> dict[str, StateTag]:
    if gazetteer is None:
        gazetteer = load_gazetteer()
    return {a.article_id: tag_state(a, gazetteer) for a in articles}


def join_scores(articles: list[Article], detect_records: list[dict]) -> list[JoinedScore]:
    """Attach publisher and year to every successful assessment.

    Records pointing at unknown articles abort with their paragraph ids:
    a silent drop here would skew every aggregate downstream.
    """
    by_id = {a.article_id: a for a in articles}
    joined = []
    orphans = []
    for record in detect_records:
        if record.get("status") != "ok":
            continue
        article = by_id.get(record["article_id"])
        if article is None:
            orphans.append(record["paragraph_id"])
            continue
        joined.append(JoinedScore(
            paragraph_id=record["paragraph_id"],
            article_id=article.article_id,
            publisher=article.publisher,
            year=article.publish_date.year,
            score=record["score"],
        ))
    if orphans:
        raise JoinGap(sorted(orphans))
    return sorted(joined, key=lambda j: j.paragraph_id)


def _cell(scores_by_article: dict[str, list[int]]) -> dict:
    scores = [s for group in scores_by_article.values() for s in group]
    biased_articles = sum(1 for group in scores_by_article.values() if any(s > 0 for s in group))
    return {
        "mean_paragraph_score": statistics.fmean(scores),
        "pct_articles_biased": 100.0 * biased_articles / len(scores_by_article),
        "n_articles": len(scores_by_article),
        "n_paragraphs": len(scores),
    }


def publisher_year_table(joined: list[JoinedScore]) -> list[dict]:
    """One row per (publisher, year) plus an overall row per publisher,
    ordered by publisher, then years ascending, then the overall row.
    Cells exist only where at least one scored paragraph exists.
    """
    per_year: dict[tuple[str, int], dict[str, list[int]]] = {}
    per_pub: dict[str, dict[str, list[int]]] = {}
    for j in joined:
        per_year.setdefault((j.publisher, j.year), {}).setdefault(j.article_id, []).append(j.score)
        per_pub.setdefault(j.publisher, {}).setdefault(j.article_id, []).append(j.score)

    rows = []
    for publisher in sorted(per_pub):
        years = sorted(y for (p, y) in per_year if p == publisher)
        for year in years:
            rows.append({"publisher": publisher, "year": year,
                         **_cell(per_year[(publisher, year)])})
        rows.append({"publisher": publisher, "year": None, **_cell(per_pub[publisher])})
    return rows


def state_year_table(
    joined: list[JoinedScore],
    tags: dict[str, StateTag],
) -> tuple[list[dict], list[str]]:
    """Per (state, year): share of biased paragraphs and article counts.

    Returns the rows plus the ids of assessed articles that carry no state
    tag; those articles contribute to no cell, so cell article counts plus
    the untagged count always equal the assessed-article total.
    """
    cells: dict[tuple[str, int], dict[str, list[int]]] = {}
    untagged: set[str] = set()
    for j in joined:
        tag = tags.get(j.article_id)
        if tag is None or tag.state is None:
            untagged.add(j.article_id)
            continue
        cells.setdefault((tag.state, j.year), {}).setdefault(j.article_id, []).append(j.score)

    rows = []
    for state, year in sorted(cells):
        by_article = cells[(state, year)]
        scores = [s for group in by_article.values() for s in group]
        rows.append({
            "state": state,
            "year": year,
            "pct_paragraphs_biased": 100.0 * sum(1 for s in scores if s > 0) / len(scores),
            "n_biased_articles": sum(
                1 for group in by_article.values() if any(s > 0 for s in group)),
            "n_articles": len(by_article),
        })
    return rows, sorted(untagged)


def pairwise_publisher_tests(joined: list[JoinedScore]) -> list[dict]:
    """Welch's t-test on per-paragraph scores for every publisher pair
    with at least two scores on each side. Pairs are emitted once,
    alphabetically ordered within and across rows.
    """
    scores: dict[str, list[int]] = {}
    for j in joined:
        scores.setdefault(j.publisher, []).append(j.score)
    publishers = sorted(p for p, s in scores.items() if len(s) >= 2)

    rows = []
    for i, pub_a in enumerate(publishers):
        for pub_b in publishers[i + 1:]:
            result = welch_t_test(scores[pub_a], scores[pub_b])
            rows.append({
                "publisher_a": pub_a,
                "publisher_b": pub_b,
                "n_a": len(scores[pub_a]),
                "n_b": len(scores[pub_b]),
                **result.to_doc(),
            })
    return rows


# -- file emission -----------------------------------------------------------

PUBLISHER_YEAR_HEADER = (
    "publisher", "year", "mean_paragraph_score", "pct_articles_biased",
    "n_articles", "n_paragraphs",
)
STATE_YEAR_HEADER = (
    "state", "year", "pct_paragraphs_biased", "n_biased_articles", "n_articles",
)
PAIRWISE_HEADER = (
    "publisher_a", "publisher_b", "n_a", "n_b", "t_stat", "df", "p_value",
    "mean_a", "mean_b", "degenerate",
)


def _year_label(year) -> str:
    return "overall" if year is None else str(year)


def emit_report(
    out_dir,
    joined: list[JoinedScore],
    tags: dict[str, StateTag],
    charts: bool = False,
) -> list[Path]:
    """Write the three tables (CSV and JSON each) plus the untagged-article
    listing; with ``charts`` also render the SVG chart set. Returns the
    written paths in a deterministic order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    pub_rows = publisher_year_table(joined)
    state_rows, untagged = state_year_table(joined, tags)
    pair_rows = pairwise_publisher_tests(joined)

    def emit_pair(stem: str, header, rows, docs):
        csv_path = out_dir / f"{stem}.csv"
        json_path = out_dir / f"{stem}.json"
        write_csv(csv_path, header, rows)
        write_json(json_path, docs)
        written.extend([csv_path, json_path])

    emit_pair(
        "publisher_year",
        PUBLISHER_YEAR_HEADER,
        [
            (r["publisher"], _year_label(r["year"]), r["mean_paragraph_score"],
             r["pct_articles_biased"], r["n_articles"], r["n_paragraphs"])
            for r in pub_rows
        ],
        pub_rows,
    )
    emit_pair(
        "state_year",
        STATE_YEAR_HEADER,
        [
            (r["state"], r["year"], r["pct_paragraphs_biased"],
             r["n_biased_articles"], r["n_articles"])
            for r in state_rows
        ],
        state_rows,
    )
    emit_pair(
        "pairwise_tests",
        PAIRWISE_HEADER,
        [tuple(r[k] for k in PAIRWISE_HEADER) for r in pair_rows],
        pair_rows,
    )

    untagged_csv = out_dir / "untagged.csv"
    untagged_json = out_dir / "untagged.json"
    write_csv(untagged_csv, ("article_id",), [(a,) for a in untagged])
    write_json(untagged_json, {"n_untagged": len(untagged), "article_ids": untagged})
    written.extend([untagged_csv, untagged_json])

    if charts:
        from . import charts as charts_mod

        chart_dir = out_dir / "charts"
        written.extend(charts_mod.render_publisher_charts(chart_dir, pub_rows))
        written.append(charts_mod.render_state_heatmap(chart_dir, state_rows))
    return written
