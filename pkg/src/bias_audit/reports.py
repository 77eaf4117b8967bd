"""Evaluation reports joining model outputs with human annotations.

Three report families: detection agreement (model vs majority label),
debias outcomes (share of rewrites judged bias-free, split by original
severity and by judge), and rewrite similarity (human ratings next to
embedding cosine). Each has a plain-dict row form plus CSV/JSON emitters
with fixed headers, used identically by the CLI and by tests.
"""

import statistics
from dataclasses import dataclass

from .annotations import (
    TASK_BIAS,
    TASK_SIMILARITY,
    AnnotationRecord,
    build_ground_truth,
    votes_by_paragraph,
)
from .errors import CoverageGap
from .metrics import (
    cohen_kappa,
    cosine_similarity,
    exact_match_rate,
    fbeta,
    krippendorff_alpha,
)
from .storage import write_csv, write_json

TABLE1_HEADER = ("model_id", "exact_match_pct", "kappa", "alpha", "fbeta")
TABLE2_HEADER = (
    "prompt_level",
    "human_moderate_pct",
    "human_extreme_pct",
    "llm_moderate_pct",
    "llm_extreme_pct",
)
TABLE3_HEADER = ("prompt_level", "human_similarity_mean", "cosine_similarity_mean")


@dataclass(frozen=True)
class MetricsReport:
    model_id: str
    n_items: int
    n_tie_broken: int
    exact_match: float
    kappa: float
    alpha: float
    fbeta_score: float
    alpha_level: str
    kappa_weight: str
    beta: float
    alpha_basis: str

    def to_doc(self) -> dict:
        return {
            "model_id": self.model_id,
            "n_items": self.n_items,
            "n_tie_broken": self.n_tie_broken,
            "exact_match": self.exact_match,
            "kappa": self.kappa,
            "alpha": self.alpha,
            "fbeta": self.fbeta_score,
            "metric_options": {
                "alpha_level": self.alpha_level,
                "kappa_weight": self.kappa_weight,
                "beta": self.beta,
                "alpha_basis": self.alpha_basis,
            },
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "MetricsReport":
        opts = doc["metric_options"]
        return cls(
            model_id=doc["model_id"],
            n_items=doc["n_items"],
            n_tie_broken=doc["n_tie_broken"],
            exact_match=doc["exact_match"],
            kappa=doc["kappa"],
            alpha=doc["alpha"],
            fbeta_score=doc["fbeta"],
            alpha_level=opts["alpha_level"],
            kappa_weight=opts["kappa_weight"],
            beta=opts["beta"],
            alpha_basis=opts["alpha_basis"],
        )


def detection_report(
    detect_records: list[dict],
    annotations: list[AnnotationRecord],
    alpha_level: str = "nominal",
    kappa_weight: str = "none",
    beta: float = 2.0,
    alpha_basis: str = "majority",
) -> MetricsReport:
    """Agreement between one model's scores and the human majority label.

    Every annotated paragraph must have a successful assessment; gaps abort
    with the missing ids. Paragraphs assessed but never annotated are
    outside the comparison and ignored.
    """
    if alpha_basis not in ("majority", "annotators"):
        raise ValueError(f"alpha_basis must be 'majority' or 'annotators', got {alpha_basis!r}")
    truth = build_ground_truth(annotations)
    scores = {
        r["paragraph_id"]: r["score"]
        for r in detect_records
        if r.get("status") == "ok"
    }
    missing = sorted(set(truth) - set(scores))
    if missing:
        raise CoverageGap(missing)

    pids = sorted(truth)
    y_true = [truth[p].value for p in pids]
    y_pred = [scores[p] for p in pids]

    if alpha_basis == "majority":
        units = [[scores[p], truth[p].value] for p in pids]
    else:
        votes = votes_by_paragraph(annotations, TASK_BIAS, "original")
        units = [[scores[p], *votes[p]] for p in pids]

    model_id = next(
        (r["model_id"] for r in detect_records if r.get("status") == "ok"), "unknown")
    return MetricsReport(
        model_id=model_id,
        n_items=len(pids),
        n_tie_broken=sum(1 for p in pids if truth[p].tie_broken),
        exact_match=exact_match_rate(y_pred, y_true),
        kappa=cohen_kappa(y_true, y_pred, weighting=kappa_weight),
        alpha=krippendorff_alpha(units, level=alpha_level),
        fbeta_score=fbeta(y_true, y_pred, beta=beta),
        alpha_level=alpha_level,
        kappa_weight=kappa_weight,
        beta=beta,
        alpha_basis=alpha_basis,
    )


def _pct_bias_free(post_scores: list[int]):
    if not post_scores:
        return None
    return 100.0 * sum(1 for s in post_scores if s == 0) / len(post_scores)


def debias_outcome_report(
    reassess_by_level: dict[int, list[dict]],
    annotations: list[AnnotationRecord],
) -> list[dict]:
    """Share of rewrites judged bias-free per prompt level, split by the
    original severity (moderate=1, extreme=2) and by who judged: human
    majority vote on the rewrite vs the model's own reassessment. Cells
    without observations are None.
    """
    rows = []
    for level in sorted(reassess_by_level):
        records = [r for r in reassess_by_level[level] if r.get("status") == "ok"]
        pre_by_pid = {r["paragraph_id"]: r["pre_score"] for r in records}

        llm = {1: [], 2: []}
        for r in records:
            if r["pre_score"] in llm:
                llm[r["pre_score"]].append(r["post_score"])

        human = {1: [], 2: []}
        truth = build_ground_truth(annotations, task=TASK_BIAS, variant=f"level{level}")
        for pid, label in truth.items():
            pre = pre_by_pid.get(pid)
            if pre in human:
                human[pre].append(label.value)

        rows.append({
            "prompt_level": level,
            "human_moderate_pct": _pct_bias_free(human[1]),
            "human_extreme_pct": _pct_bias_free(human[2]),
            "llm_moderate_pct": _pct_bias_free(llm[1]),
            "llm_extreme_pct": _pct_bias_free(llm[2]),
            "n_human_rated": sum(len(v) for v in human.values()),
            "n_reassessed": len(records),
        })
    return rows


def similarity_report(
    debias_by_level: dict[int, list[dict]],
    annotations: list[AnnotationRecord],
    embed_fn,
) -> list[dict]:
    """Per prompt level: mean human similarity rating (-2..2 scale, each
    paragraph first averaged over its raters) and mean embedding cosine
    between original and rewrite. Cosine covers every successful rewrite;
    the human mean covers the rated subset.
    """
    rows = []
    for level in sorted(debias_by_level):
        records = [r for r in debias_by_level[level] if r.get("status") == "ok"]

        cosines = [
            cosine_similarity(embed_fn(r["original_text"]), embed_fn(r["rewritten_text"]))
            for r in sorted(records, key=lambda r: r["paragraph_id"])
        ]

        votes = votes_by_paragraph(annotations, TASK_SIMILARITY, f"level{level}")
        rated_pids = [r["paragraph_id"] for r in records if r["paragraph_id"] in votes]
        per_item = [statistics.fmean(votes[pid]) for pid in sorted(rated_pids)]

        rows.append({
            "prompt_level": level,
            "human_similarity_mean": statistics.fmean(per_item) if per_item else None,
            "cosine_similarity_mean": statistics.fmean(cosines) if cosines else None,
            "n_items": len(records),
            "n_rated": len(per_item),
        })
    return rows


# -- emitters ----------------------------------------------------------------


def write_table1(path_csv, reports: list[MetricsReport]) -> None:
    rows = [
        (r.model_id, 100.0 * r.exact_match, r.kappa, r.alpha, r.fbeta_score)
        for r in sorted(reports, key=lambda r: r.model_id)
    ]
    write_csv(path_csv, TABLE1_HEADER, rows)


def write_table2(path_csv, rows: list[dict]) -> None:
    write_csv(
        path_csv,
        TABLE2_HEADER,
        [tuple(row[k] for k in TABLE2_HEADER) for row in rows],
    )


def write_table3(path_csv, rows: list[dict]) -> None:
    write_csv(
        path_csv,
        TABLE3_HEADER,
        [tuple(row[k] for k in TABLE3_HEADER) for row in rows],
    )


def write_report_doc(path_json, doc) -> None:
    write_json(path_json, doc)
