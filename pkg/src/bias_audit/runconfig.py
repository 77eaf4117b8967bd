"""Run configuration and stage manifests.

A run directory collects every stage output plus one manifest per stage
under manifests/. Manifests record versions, the configuration digest,
input content digests, stage parameters, and the produced files, and
contain no timestamps: rerunning a stage on identical inputs must yield
an identical manifest.
"""

import platform
from dataclasses import dataclass, replace
from pathlib import Path

from . import __version__
from .gateway import ProviderConfig
from .storage import dumps_canonical, sha256_text, write_json

MANIFEST_DIR = "manifests"

DEFAULT_FAILURE_THRESHOLD = 0.05


def resolve_provider(value, base_dir: Path | None = None) -> ProviderConfig:
    """Provider specs come in three forms: the literal string "mock", a
    path to a JSON document, or an inline mapping."""
    import json

    if isinstance(value, ProviderConfig):
        return value
    if isinstance(value, dict):
        return ProviderConfig.from_doc(value)
    if isinstance(value, str):
        if value.strip().lower() == "mock":
            return ProviderConfig()
        path = Path(value)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            doc = json.loads(path.read_text("utf-8"))
        except FileNotFoundError:
            raise ValueError(f"provider config not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ValueError(f"provider config {path} is not valid JSON: {exc}") from None
        return ProviderConfig.from_doc(doc)
    raise ValueError(f"cannot interpret provider spec {value!r}")


@dataclass(frozen=True)
class RunConfig:
    corpus_root: Path | None = None
    run_dir: Path | None = None
    detection_provider: ProviderConfig = ProviderConfig()
    debias_provider: ProviderConfig = ProviderConfig()
    embedding_provider: ProviderConfig = ProviderConfig()
    detector_model: str = ""
    failure_threshold: float = DEFAULT_FAILURE_THRESHOLD
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.failure_threshold <= 1.0:
            raise ValueError("failure_threshold must be a fraction in [0, 1]")

    @classmethod
    def load(cls, path) -> "RunConfig":
        import json

        path = Path(path)
        try:
            doc = json.loads(path.read_text("utf-8"))
        except FileNotFoundError:
            raise ValueError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ValueError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ValueError("config document must be a mapping")
        base = path.parent

        def as_path(key):
            if key not in doc or doc[key] is None:
                return None
            p = Path(doc[key])
            return p if p.is_absolute() else base / p

        cfg = cls(
            corpus_root=as_path("corpus_root"),
            run_dir=as_path("run_dir"),
            detection_provider=resolve_provider(doc.get("detection_provider", "mock"), base),
            debias_provider=resolve_provider(doc.get("debias_provider", "mock"), base),
            embedding_provider=resolve_provider(doc.get("embedding_provider", "mock"), base),
            detector_model=doc.get("detector_model", ""),
            failure_threshold=doc.get("failure_threshold", DEFAULT_FAILURE_THRESHOLD),
            seed=doc.get("seed", 0),
        )
        if not cfg.detector_model:
            cfg = replace(cfg, detector_model=cfg.detection_provider.model_id)
        return cfg

    def to_doc(self) -> dict:
        return {
            "corpus_root": str(self.corpus_root) if self.corpus_root else None,
            "run_dir": str(self.run_dir) if self.run_dir else None,
            "detection_provider": self.detection_provider.to_doc(),
            "debias_provider": self.debias_provider.to_doc(),
            "embedding_provider": self.embedding_provider.to_doc(),
            "detector_model": self.detector_model,
            "failure_threshold": self.failure_threshold,
            "seed": self.seed,
        }


def config_digest(config_doc: dict) -> str:
    return sha256_text(dumps_canonical(config_doc))


def build_manifest(
    stage: str,
    config_doc: dict,
    inputs: dict[str, str],
    parameters: dict,
    outputs: list[str],
) -> dict:
    """Manifest document for one stage. ``inputs`` maps input names to
    content digests; ``outputs`` holds run_dir-relative paths."""
    return {
        "stage": stage,
        "package_version": __version__,
        "python_version": platform.python_version(),
        "config_digest": config_digest(config_doc),
        "config": config_doc,
        "inputs": dict(sorted(inputs.items())),
        "parameters": dict(sorted(parameters.items())),
        "outputs": sorted(outputs),
    }


def write_manifest(run_dir, stage: str, manifest: dict) -> Path:
    path = Path(run_dir) / MANIFEST_DIR / f"{stage}.json"
    write_json(path, manifest)
    return path
