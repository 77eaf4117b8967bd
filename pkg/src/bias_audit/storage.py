"""File helpers: line-delimited records, deterministic CSV/JSON, digests.

Stages communicate only through files, so serialization here is pinned:
JSON uses sorted keys and compact separators, CSV uses LF line endings and
shortest-roundtrip float formatting. Identical inputs always produce
byte-identical files.
"""

import csv
import hashlib
import io
import json
import os
from pathlib import Path
from typing import Any, Iterable, Iterator


def dumps_canonical(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def dumps_pretty(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_jsonl(path: Path, records: Iterable[dict]) -> int:
    """Write one canonical-JSON record per line; returns the record count."""
    buf = io.StringIO()
    n = 0
    for rec in records:
        buf.write(dumps_canonical(rec))
        buf.write("\n")
        n += 1
    atomic_write_text(Path(path), buf.getvalue())
    return n


def read_jsonl(path: Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_json(path: Path, doc: Any) -> None:
    atomic_write_text(Path(path), dumps_pretty(doc))


def format_cell(value: Any) -> str:
    """CSV cell formatting: shortest roundtrip for floats, empty for None."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable[Any]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    atomic_write_text(Path(path), buf.getvalue())


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_dir(root: Path) -> str:
    """Content digest of a directory: hash of the sorted (relpath, file digest) list."""
    root = Path(root)
    entries = []
    for path in sorted(root.rglob("*")):
        if path.is_file():
            entries.append(f"{path.relative_to(root).as_posix()}\x00{sha256_file(path)}")
    return hashlib.sha256("\n".join(entries).encode("utf-8")).hexdigest()
