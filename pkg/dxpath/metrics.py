"""
Retrieval and text metrics - set overlap, ROUGE-2, ROUGE-L and percentile
bootstrap confidence intervals.
"""

from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence

import numpy as np

from .errors import MetricError
from .seeding import subsystem_rng


def _harmonic(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


@dataclass(frozen=True)
class SetMetrics:
    recall: float
    precision: float
    f1: float

    def to_dict(self) -> Dict:
        return {"recall": self.recall, "precision": self.precision, "f1": self.f1}


def set_metrics(pred: Iterable[str], gold: Iterable[str]) -> SetMetrics:
    """
    Recall, precision and F1 of a predicted concept set.

    Raises:
        MetricError: If gold is empty
    """
    pred, gold = set(pred), set(gold)
    if not gold:
        raise MetricError("Recall is undefined for an empty gold set")
    hits = len(pred & gold)
    recall = hits / len(gold)
    precision = hits / len(pred) if pred else 0.0
    return SetMetrics(recall, precision, _harmonic(precision, recall))


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> Dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


ZERO = PRF(0.0, 0.0, 0.0)


def rouge_tokens(text: str) -> List[str]:
    """Lowercase whitespace tokenization, no stemming."""
    return text.lower().split()


def rouge2(candidate: Sequence[str], reference: Sequence[str]) -> PRF:
    """Clipped bigram overlap; fewer than 2 tokens on either side scores zero."""
    if len(candidate) < 2 or len(reference) < 2:
        return ZERO
    cand = Counter(zip(candidate[:-1], candidate[1:]))
    ref = Counter(zip(reference[:-1], reference[1:]))
    overlap = sum((cand & ref).values())
    p = overlap / (len(candidate) - 1)
    r = overlap / (len(reference) - 1)
    return PRF(p, r, _harmonic(p, r))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> PRF:
    """Longest common subsequence based ROUGE-L."""
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return ZERO
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return PRF(p, r, _harmonic(p, r))


@dataclass(frozen=True)
class RougeScores:
    rouge2: PRF
    rougeL: PRF

    def to_dict(self) -> Dict:
        return {"rouge2": self.rouge2.to_dict(), "rougeL": self.rougeL.to_dict()}


def rouge_scores(candidate_text: str, reference_text: str) -> RougeScores:
    cand, ref = rouge_tokens(candidate_text), rouge_tokens(reference_text)
    return RougeScores(rouge2(cand, ref), rouge_l(cand, ref))


@dataclass(frozen=True)
class CiReport:
    point: float
    lower: float
    upper: float
    resamples: int = 1000
    level: float = 95.0

    def to_dict(self) -> Dict:
        return {
            "point": self.point,
            "lower": self.lower,
            "upper": self.upper,
            "resamples": self.resamples,
            "level": self.level,
        }


def bootstrap_ci(
    scores: Sequence[float],
    resamples: int = 1000,
    level: float = 95.0,
    seed: int = 0,
) -> CiReport:
    """
    Percentile bootstrap CI of the mean.

    Args:
        scores: Per-example scores
        resamples: Number of resamples with replacement
        level: Confidence level in percent
        seed: Root seed (the bootstrap draws from its own subsystem stream)

    Returns:
        CiReport with lower <= point <= upper

    Raises:
        MetricError: With fewer than 2 scores
    """
    values = np.asarray(scores, dtype=np.float64)
    if values.size < 2:
        raise MetricError("Bootstrap CI needs at least 2 scores")
    if resamples < 1 or not 0.0 < level < 100.0:
        raise MetricError("Bootstrap needs resamples >= 1 and a level in (0, 100)")
    point = float(values.mean())
    if np.all(values == values[0]):
        return CiReport(point, point, point, resamples, level)

    rng = subsystem_rng(seed, "bootstrap")
    idx = rng.integers(0, values.size, size=(resamples, values.size))
    means = values[idx].mean(axis=1)
    tail = (100.0 - level) / 2.0
    lower = float(np.percentile(means, tail))
    upper = float(np.percentile(means, 100.0 - tail))
    return CiReport(point, min(lower, point), max(upper, point), resamples, level)
