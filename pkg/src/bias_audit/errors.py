"""Exception hierarchy shared across the pipeline."""


class BiasAuditError(Exception):
    """Base class for all errors raised by this package."""


# -- corpus ------------------------------------------------------------


class CorpusError(BiasAuditError):
    pass


class MissingField(CorpusError):
    def __init__(self, field: str):
        super().__init__(f"missing required field: {field!r}")
        self.field = field


class InvalidDate(CorpusError):
    def __init__(self, value, reason: str = "unrecognized format"):
        super().__init__(f"invalid date {value!r}: {reason}")
        self.value = value


class EmptyBody(CorpusError):
    def __init__(self):
        super().__init__("article body is empty after trimming")


class RootNotFound(CorpusError):
    def __init__(self, root):
        super().__init__(f"corpus root not found: {root}")
        self.root = root


# -- gateway -----------------------------------------------------------


class GatewayError(BiasAuditError):
    pass


class AuthError(GatewayError):
    pass


class RateLimited(GatewayError):
    pass


class TransportError(GatewayError):
    pass


class ProviderRejected(GatewayError):
    def __init__(self, status: int, body_excerpt: str):
        super().__init__(f"provider rejected request (status {status}): {body_excerpt}")
        self.status = status
        self.body_excerpt = body_excerpt


class NoJsonFound(GatewayError):
    def __init__(self):
        super().__init__("no JSON object found in response text")


class MalformedJson(GatewayError):
    def __init__(self, position: int, reason: str = ""):
        detail = f" ({reason})" if reason else ""
        super().__init__(f"malformed JSON at position {position}{detail}")
        self.position = position


# -- detection / debias ------------------------------------------------


class SchemaError(BiasAuditError):
    def __init__(self, field: str):
        super().__init__(f"response missing required field: {field!r}")
        self.field = field


class ScoreUnparseable(BiasAuditError):
    def __init__(self, value):
        super().__init__(f"bias score not a number: {value!r}")
        self.value = value


class AssessmentFailed(BiasAuditError):
    """Terminal per-paragraph failure; recorded by the batch layer, never propagated."""

    def __init__(self, paragraph_id: str, cause: Exception):
        super().__init__(f"assessment failed for {paragraph_id}: {cause}")
        self.paragraph_id = paragraph_id
        self.cause = cause


class DebiasFailed(BiasAuditError):
    def __init__(self, paragraph_id: str, cause: Exception):
        super().__init__(f"debias failed for {paragraph_id}: {cause}")
        self.paragraph_id = paragraph_id
        self.cause = cause


# -- evaluation --------------------------------------------------------


class EvaluationError(BiasAuditError):
    pass


class EmptyVotes(EvaluationError):
    def __init__(self):
        super().__init__("cannot take a majority of zero votes")


class LengthMismatch(EvaluationError):
    def __init__(self, n_pred: int, n_truth: int):
        super().__init__(f"prediction/truth length mismatch: {n_pred} vs {n_truth}")


class InsufficientData(EvaluationError):
    pass


class DegenerateMarginals(EvaluationError):
    def __init__(self):
        super().__init__("expected agreement is 1 (both raters constant on the same value); kappa undefined")


class ZeroVector(EvaluationError):
    def __init__(self):
        super().__init__("cosine similarity undefined for a zero vector")


class DimensionMismatch(EvaluationError):
    def __init__(self, a: int, b: int):
        super().__init__(f"vector dimensions differ: {a} vs {b}")


class AnnotationError(EvaluationError):
    def __init__(self, row: int, reason: str):
        super().__init__(f"annotation row {row}: {reason}")
        self.row = row


class CoverageGap(EvaluationError):
    def __init__(self, paragraph_ids):
        ids = sorted(paragraph_ids)
        preview = ", ".join(ids[:5]) + ("..." if len(ids) > 5 else "")
        super().__init__(f"{len(ids)} paragraph(s) missing required data: {preview}")
        self.paragraph_ids = ids


# -- analytics ---------------------------------------------------------


class JoinGap(BiasAuditError):
    def __init__(self, paragraph_ids):
        ids = sorted(paragraph_ids)
        preview = ", ".join(ids[:5]) + ("..." if len(ids) > 5 else "")
        super().__init__(f"{len(ids)} paragraph(s) reference articles not in the corpus: {preview}")
        self.paragraph_ids = ids
