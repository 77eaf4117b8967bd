"""Article corpus: loading, validation, and paragraph segmentation.

On-disk layout is one JSON document per article at
``<root>/<publisher>/<file>.json`` with required keys ``publisher``,
``date``, ``title``, ``text`` and optional ``id``, ``url``, ``authors``.
Articles and paragraphs are immutable values; everything downstream keys
off ``article_id`` and the derived ``paragraph_id``.
"""

import datetime as dt
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .errors import EmptyBody, InvalidDate, MissingField, RootNotFound

logger = logging.getLogger(__name__)

REQUIRED_FIELDS = ("publisher", "date", "title", "text")

DEFAULT_MIN_DATE = dt.date(1990, 1, 1)

# Accepted date formats, tried in order after ISO-8601. Anything else is
# InvalidDate; no permissive guessing.
_DATE_FORMATS = (
    "%Y/%m/%d",      # 2014/08/15
    "%B %d, %Y",     # August 15, 2014
    "%b %d, %Y",     # Aug 15, 2014
    "%d %B %Y",      # 15 August 2014
    "%d %b %Y",      # 15 Aug 2014
)


@dataclass(frozen=True)
class Article:
    article_id: str
    publisher: str
    url: str
    publish_date: dt.date
    authors: tuple[str, ...]
    title: str
    body_text: str


@dataclass(frozen=True)
class Paragraph:
    paragraph_id: str
    article_id: str
    index: int
    text: str


@dataclass
class CorpusStats:
    article_count: int = 0
    paragraph_count: int = 0
    per_publisher_counts: dict[str, tuple[int, int]] = field(default_factory=dict)
    date_range: tuple[dt.date, dt.date] | None = None

    def to_doc(self) -> dict:
        return {
            "article_count": self.article_count,
            "paragraph_count": self.paragraph_count,
            "per_publisher": {
                pub: {"articles": a, "paragraphs": p}
                for pub, (a, p) in sorted(self.per_publisher_counts.items())
            },
            "date_range": (
                [self.date_range[0].isoformat(), self.date_range[1].isoformat()]
                if self.date_range
                else None
            ),
        }


def parse_date(value) -> dt.date:
    """Parse one of the accepted date formats; raise InvalidDate otherwise."""
    if isinstance(value, dt.date):
        return value
    if not isinstance(value, str) or not value.strip():
        raise InvalidDate(value, "not a date string")
    text = value.strip()
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        pass
    for fmt in _DATE_FORMATS:
        try:
            return dt.datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    raise InvalidDate(value)


def derive_article_id(publisher: str, url: str, title: str) -> str:
    """Stable fallback identifier: sha256 over the UTF-8 bytes of
    (publisher, url, title) joined by NUL, truncated to 16 hex chars."""
    payload = "\x00".join((publisher, url, title)).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:16]


def ingest_article(
    raw: dict,
    min_date: dt.date = DEFAULT_MIN_DATE,
    max_date: dt.date | None = None,
) -> Article:
    """Validate one parsed article document and build an Article.

    Unknown keys are ignored. ``article_id`` comes from an explicit ``id``
    field when present, else from a content digest of (publisher, url,
    title). Carriage returns in the body are normalized to line feeds.
    """
    for name in REQUIRED_FIELDS:
        if name not in raw or raw[name] is None:
            raise MissingField(name)

    publisher = str(raw["publisher"]).strip()
    if not publisher:
        raise MissingField("publisher")
    title = str(raw["title"])
    url = str(raw.get("url", "") or "")
    authors = tuple(str(a) for a in (raw.get("authors") or []))

    publish_date = parse_date(raw["date"])
    upper = max_date if max_date is not None else dt.date.today()
    if not (min_date <= publish_date <= upper):
        raise InvalidDate(raw["date"], f"outside allowed range {min_date}..{upper}")

    body_text = str(raw["text"]).replace("\r\n", "\n").replace("\r", "\n")
    if not body_text.strip():
        raise EmptyBody()

    raw_id = raw.get("id")
    article_id = str(raw_id) if raw_id not in (None, "") else derive_article_id(publisher, url, title)

    return Article(
        article_id=article_id,
        publisher=publisher,
        url=url,
        publish_date=publish_date,
        authors=authors,
        title=title,
        body_text=body_text,
    )


def paragraph_key(article_id: str, index: int) -> str:
    return f"{article_id}#p{index:04d}"


def segment_paragraphs(article: Article) -> list[Paragraph]:
    """Split the body on runs of blank lines (lines empty after trimming).

    Blocks are trimmed, whitespace-only blocks dropped, and indices assigned
    in document order.
    """
    blocks: list[str] = []
    current: list[str] = []
    for line in article.body_text.split("\n"):
        if line.strip():
            current.append(line)
        elif current:
            blocks.append("\n".join(current))
            current = []
    if current:
        blocks.append("\n".join(current))

    paragraphs = []
    for block in blocks:
        text = block.strip()
        if not text:
            continue
        index = len(paragraphs)
        paragraphs.append(
            Paragraph(
                paragraph_id=paragraph_key(article.article_id, index),
                article_id=article.article_id,
                index=index,
                text=text,
            )
        )
    return paragraphs


def load_corpus(
    root: Path,
    on_error: Callable[[Path, Exception], None] | None = None,
    min_date: dt.date = DEFAULT_MIN_DATE,
    max_date: dt.date | None = None,
) -> list[Article]:
    """Load articles from ``<root>/<publisher>/*.json`` in deterministic order.

    Order is (publisher directory name, file name), independent of
    filesystem enumeration order. Invalid files are skipped and reported
    through ``on_error`` (default: a warning log), never aborting the scan.
    """
    root = Path(root)
    if not root.is_dir():
        raise RootNotFound(root)

    def report(path: Path, exc: Exception) -> None:
        if on_error is not None:
            on_error(path, exc)
        else:
            logger.warning("skipping %s: %s", path, exc)

    publisher_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not publisher_dirs:
        logger.warning("corpus root %s contains no publisher directories", root)
        return []

    articles: list[Article] = []
    seen_ids: set[str] = set()
    for pub_dir in publisher_dirs:
        for path in sorted(pub_dir.glob("*.json")):
            try:
                with open(path, encoding="utf-8") as fh:
                    raw = json.load(fh)
                if not isinstance(raw, dict):
                    raise MissingField("publisher")
                article = ingest_article(raw, min_date=min_date, max_date=max_date)
            except Exception as exc:
                report(path, exc)
                continue
            if article.article_id in seen_ids:
                report(path, ValueError(f"duplicate article_id {article.article_id!r}"))
                continue
            seen_ids.add(article.article_id)
            articles.append(article)
    return articles


def corpus_stats(articles: Iterable[Article]) -> CorpusStats:
    stats = CorpusStats()
    min_date: dt.date | None = None
    max_date: dt.date | None = None
    for article in articles:
        n_paragraphs = len(segment_paragraphs(article))
        stats.article_count += 1
        stats.paragraph_count += n_paragraphs
        a, p = stats.per_publisher_counts.get(article.publisher, (0, 0))
        stats.per_publisher_counts[article.publisher] = (a + 1, p + n_paragraphs)
        if min_date is None or article.publish_date < min_date:
            min_date = article.publish_date
        if max_date is None or article.publish_date > max_date:
            max_date = article.publish_date
    if min_date is not None and max_date is not None:
        stats.date_range = (min_date, max_date)
    return stats


_WHITESPACE_RUN = re.compile(r"\s+")


def normalize_whitespace(text: str) -> str:
    """Collapse whitespace runs to single spaces and trim."""
    return _WHITESPACE_RUN.sub(" ", text).strip()


def article_to_record(article: Article) -> dict:
    return {
        "article_id": article.article_id,
        "publisher": article.publisher,
        "url": article.url,
        "publish_date": article.publish_date.isoformat(),
        "authors": list(article.authors),
        "title": article.title,
        "body_text": article.body_text,
    }


def paragraph_to_record(paragraph: Paragraph) -> dict:
    return {
        "paragraph_id": paragraph.paragraph_id,
        "article_id": paragraph.article_id,
        "index": paragraph.index,
        "text": paragraph.text,
    }
