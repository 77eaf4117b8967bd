"""Content-addressed on-disk response cache.

One file per entry, named by the hex digest of the request key. Each file
holds a one-line JSON metadata header followed by the raw response text.
Entries never expire; corpus runs resume by rereading them.
"""

import json
import os
import threading
import time
from pathlib import Path

from .storage import sha256_text

CACHE_DIR_ENV = "BIAS_AUDIT_CACHE_DIR"


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_DIR_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "bias-audit"


def cache_key(model_id: str, temperature: float, kind: str, text: str) -> str:
    """Pure function of the request: digest of (model, temperature, kind, text)."""
    payload = "\x00".join((model_id, repr(float(temperature)), kind, text))
    return sha256_text(payload)


class ResponseCache:
    """Thread-safe store mapping request keys to raw response text."""

    def __init__(self, directory: Path | None = None):
        self.directory = Path(directory) if directory is not None else default_cache_dir()
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.directory / key

    def load(self, key: str) -> str | None:
        path = self._path(key)
        try:
            # newline="" keeps cached text byte-faithful; universal-newline
            # translation would rewrite \r in stored responses
            with open(path, encoding="utf-8", newline="") as fh:
                content = fh.read()
        except FileNotFoundError:
            return None
        header, _, payload = content.partition("\n")
        try:
            json.loads(header)
        except ValueError:
            return None  # corrupt entry; treat as a miss
        return payload

    def store(self, key: str, raw_text: str, model_id: str = "", temperature: float = 0.0) -> None:
        header = json.dumps(
            {
                "key": key,
                "model_id": model_id,
                "temperature": temperature,
                "created_at": time.time(),
            },
            sort_keys=True,
        )
        path = self._path(key)
        with self._lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_name(path.name + f".tmp{os.getpid()}")
            with open(tmp, "w", encoding="utf-8", newline="") as fh:
                fh.write(header + "\n" + raw_text)
            os.replace(tmp, path)
