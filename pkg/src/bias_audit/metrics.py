"""Agreement, classification, and similarity metrics.

Everything here is computed from first principles on plain Python numbers;
the only delegation is the t-distribution tail probability inside
welch_t_test. Missing ratings are represented as None and handled where a
metric defines behavior for them.
"""

import math
import random
import statistics
from collections import Counter
from dataclasses import dataclass

from .errors import (
    DegenerateMarginals,
    DimensionMismatch,
    EmptyVotes,
    InsufficientData,
    LengthMismatch,
    ZeroVector,
)

ALPHA_LEVELS = ("nominal", "ordinal", "interval")
KAPPA_WEIGHTINGS = ("none", "linear", "quadratic")


def exact_match_rate(a, b) -> float:
    """Share of positions where the two label sequences agree exactly."""
    if len(a) != len(b):
        raise LengthMismatch(len(a), len(b))
    if not a:
        raise EmptyVotes()
    return sum(1 for x, y in zip(a, b) if x == y) / len(a)


# -- Krippendorff's alpha ----------------------------------------------------


def _coincidences(units) -> tuple[Counter, Counter, float]:
    """Build the coincidence matrix from rating units.

    Each unit contributes every ordered pair of its ratings, weighted by
    1/(m_u - 1), which makes row sums equal the number of pairable values.
    None ratings are dropped; units left with fewer than two ratings are
    dropped whole.
    """
    pairs: Counter = Counter()
    marginals: Counter = Counter()
    total = 0.0
    usable_units = 0
    for unit in units:
        ratings = [r for r in unit if r is not None]
        m = len(ratings)
        if m < 2:
            continue
        usable_units += 1
        w = 1.0 / (m - 1)
        for i, a in enumerate(ratings):
            marginals[a] += 1
            total += 1
            for j, b in enumerate(ratings):
                if i != j:
                    pairs[(a, b)] += w
    if usable_units < 2:
        raise InsufficientData("need at least two units with two or more ratings")
    return pairs, marginals, total


def _delta_sq(level: str, marginals: Counter):
    if level == "nominal":
        return lambda a, b: 0.0 if a == b else 1.0
    if level == "interval":
        return lambda a, b: float(a - b) ** 2
    if level == "ordinal":
        cats = sorted(marginals)

        def ordinal(a, b):
            if a == b:
                return 0.0
            lo, hi = (a, b) if a <= b else (b, a)
            span = sum(marginals[c] for c in cats if lo <= c <= hi)
            return (span - (marginals[a] + marginals[b]) / 2.0) ** 2

        return ordinal
    raise ValueError(f"level must be one of {ALPHA_LEVELS}, got {level!r}")


def krippendorff_alpha(units, level: str = "nominal") -> float:
    """Krippendorff's alpha over rating units at the given measurement level.

    ``units`` is a sequence of rating lists, one list per rated item; use
    None inside a list for a rater who skipped the item. Returns 1.0 when
    expected disagreement is zero (every pairable rating identical).
    """
    pairs, marginals, n = _coincidences(units)
    delta = _delta_sq(level, marginals)

    observed = sum(count * delta(a, b) for (a, b), count in pairs.items())
    expected = sum(
        marginals[a] * marginals[b] * delta(a, b)
        for a in marginals
        for b in marginals
        if a != b
    )
    if expected == 0.0:
        return 1.0
    d_o = observed / n
    d_e = expected / (n * (n - 1.0))
    return 1.0 - d_o / d_e


# -- Cohen's kappa -----------------------------------------------------------


def _kappa_weight(weighting: str):
    if weighting == "none":
        return lambda a, b: 0.0 if a == b else 1.0
    if weighting == "linear":
        return lambda a, b: abs(float(a) - float(b))
    if weighting == "quadratic":
        return lambda a, b: (float(a) - float(b)) ** 2
    raise ValueError(f"weighting must be one of {KAPPA_WEIGHTINGS}, got {weighting!r}")


def cohen_kappa(a, b, weighting: str = "none", categories=None) -> float:
    """Two-rater chance-corrected agreement, optionally distance-weighted.

    Weights are computed on category values, so weighted variants require
    numeric categories. ``categories`` defaults to the sorted union of the
    values observed in both sequences.
    """
    if len(a) != len(b):
        raise LengthMismatch(len(a), len(b))
    if not a:
        raise EmptyVotes()
    cats = sorted(set(a) | set(b)) if categories is None else sorted(categories)
    index = {c: i for i, c in enumerate(cats)}
    if any(v not in index for v in a) or any(v not in index for v in b):
        raise ValueError("rating outside the declared categories")

    n = len(a)
    observed = Counter(zip(a, b))
    row = Counter(a)
    col = Counter(b)
    weight = _kappa_weight(weighting)

    w_obs = sum(count * weight(x, y) for (x, y), count in observed.items()) / n
    w_exp = sum(
        row[x] * col[y] * weight(x, y) for x in cats for y in cats
    ) / (n * n)
    if w_exp == 0.0:
        raise DegenerateMarginals()
    return 1.0 - w_obs / w_exp


# -- classification ----------------------------------------------------------


def fbeta(y_true, y_pred, beta: float = 2.0) -> float:
    """F-beta over binarized labels: any value above zero is positive.

    A zero denominator anywhere yields 0.0 rather than an error, so the
    score is total on label sequences.
    """
    if len(y_true) != len(y_pred):
        raise LengthMismatch(len(y_pred), len(y_true))
    if not y_true:
        raise EmptyVotes()
    if beta <= 0:
        raise ValueError("beta must be positive")
    tp = fp = fn = 0
    for t, p in zip(y_true, y_pred):
        t_pos, p_pos = t > 0, p > 0
        if p_pos and t_pos:
            tp += 1
        elif p_pos:
            fp += 1
        elif t_pos:
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    b2 = beta * beta
    denom = b2 * precision + recall
    if denom == 0.0:
        return 0.0
    return (1.0 + b2) * precision * recall / denom


# -- similarity --------------------------------------------------------------


def cosine_similarity(a, b) -> float:
    if len(a) != len(b):
        raise DimensionMismatch(len(a), len(b))
    norm_a = math.sqrt(math.fsum(x * x for x in a))
    norm_b = math.sqrt(math.fsum(y * y for y in b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector()
    return math.fsum(x * y for x, y in zip(a, b)) / (norm_a * norm_b)


# -- two-sample comparison ---------------------------------------------------


@dataclass(frozen=True)
class WelchResult:
    t_stat: float
    df: float
    p_value: float
    mean_a: float
    mean_b: float
    degenerate: bool = False

    def to_doc(self) -> dict:
        return {
            "t_stat": self.t_stat,
            "df": self.df,
            "p_value": self.p_value,
            "mean_a": self.mean_a,
            "mean_b": self.mean_b,
            "degenerate": self.degenerate,
        }


def welch_t_test(a, b) -> WelchResult:
    """Two-sided Welch's t-test with hand-computed statistic and degrees
    of freedom; only the tail probability comes from scipy.

    Zero variance in both samples is reported as degenerate instead of
    dividing by zero: p=1 for equal means, p=0 otherwise.
    """
    if len(a) < 2 or len(b) < 2:
        raise InsufficientData("each sample needs at least two observations")
    mean_a, mean_b = statistics.fmean(a), statistics.fmean(b)
    var_a, var_b = statistics.variance(a), statistics.variance(b)
    se_a, se_b = var_a / len(a), var_b / len(b)
    pooled = se_a + se_b
    if pooled == 0.0:
        if mean_a == mean_b:
            return WelchResult(0.0, 0.0, 1.0, mean_a, mean_b, degenerate=True)
        t = math.copysign(math.inf, mean_a - mean_b)
        return WelchResult(t, 0.0, 0.0, mean_a, mean_b, degenerate=True)
    t = (mean_a - mean_b) / math.sqrt(pooled)
    df = pooled * pooled / (
        se_a * se_a / (len(a) - 1) + se_b * se_b / (len(b) - 1)
    )
    from scipy.stats import t as t_dist

    p = 2.0 * float(t_dist.sf(abs(t), df))
    return WelchResult(t, df, p, mean_a, mean_b)


def bootstrap_ci(
    values,
    stat_fn=statistics.fmean,
    n_resamples: int = 1000,
    confidence: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for a statistic, deterministic under a
    fixed seed."""
    if not values:
        raise EmptyVotes()
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must be in (0, 1)")
    rng = random.Random(seed)
    stats = sorted(
        stat_fn([rng.choice(values) for _ in range(len(values))])
        for _ in range(n_resamples)
    )
    tail = (1.0 - confidence) / 2.0
    return _percentile(stats, tail), _percentile(stats, 1.0 - tail)


def _percentile(sorted_vals, q: float) -> float:
    """Linear-interpolation percentile of an already sorted list."""
    if len(sorted_vals) == 1:
        return sorted_vals[0]
    pos = q * (len(sorted_vals) - 1)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    if lo == hi:
        return sorted_vals[lo]
    frac = pos - lo
    return sorted_vals[lo] * (1.0 - frac) + sorted_vals[hi] * frac
