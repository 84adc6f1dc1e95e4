"""Precision, recall and F-beta over boundary sets.

Boundaries match only on exact inter-token index. Precision (recall) is 1.0
when nothing was predicted (nothing was expected).
"""

import math
from dataclasses import dataclass

import numpy as np

from lmeos.errors import MetricsError

BETA = 0.5


def f_beta(precision, recall, beta=BETA):
    if precision == 0 and recall == 0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * precision * recall / (b2 * precision + recall)


@dataclass(frozen=True)
class SegmentationReport:
    true_positives: int
    false_positives: int
    false_negatives: int
    beta: float = BETA

    @property
    def precision(self):
        predicted = self.true_positives + self.false_positives
        return self.true_positives / predicted if predicted else 1.0

    @property
    def recall(self):
        expected = self.true_positives + self.false_negatives
        return self.true_positives / expected if expected else 1.0

    @property
    def f_beta(self):
        return f_beta(self.precision, self.recall, self.beta)

    def __add__(self, other):
        if not isinstance(other, SegmentationReport):
            return NotImplemented
        if other.beta != self.beta:
            raise MetricsError("Cannot pool reports with different beta", code="BETA_MISMATCH")
        return SegmentationReport(
            self.true_positives + other.true_positives,
            self.false_positives + other.false_positives,
            self.false_negatives + other.false_negatives,
            self.beta,
        )

    @classmethod
    def pooled(cls, reports, beta=BETA):
        """Micro-average: sum the counts, then compute the ratios."""
        return sum(reports, cls(0, 0, 0, beta))

    def to_dict(self):
        return {
            "precision": round(self.precision, 2),
            "recall": round(self.recall, 2),
            "f05": round(self.f_beta, 2),
            "tp": self.true_positives,
            "fp": self.false_positives,
            "fn": self.false_negatives,
        }


def score(hyp, ref, beta=BETA):
    """Score hypothesis boundaries against reference boundaries of the same stream."""
    if hyp.total_tokens != ref.total_tokens:
        raise MetricsError(
            f"Hypothesis has {hyp.total_tokens} tokens, reference has {ref.total_tokens}",
            code="LENGTH_MISMATCH",
        )
    return SegmentationReport(
        true_positives=len(hyp.indices & ref.indices),
        false_positives=len(hyp.indices - ref.indices),
        false_negatives=len(ref.indices - hyp.indices),
        beta=beta,
    )


def relative_gain(f_new, f_base):
    """Relative F gain in percent (unrounded)."""
    if not f_base > 0:
        raise MetricsError(f"Baseline F must be positive, got {f_base}", code="ZERO_BASELINE")
    return 100.0 * (f_new - f_base) / f_base


def mean_gain(gains):
    gains = np.asarray(list(gains), dtype=np.float64)
    if gains.size == 0:
        raise MetricsError("No gains to average", code="EMPTY_INPUT")
    value = float(gains.mean())
    if not math.isfinite(value):
        raise MetricsError("Gains must be finite", code="INVALID_GAIN")
    return value
