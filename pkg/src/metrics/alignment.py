"""Levenshtein alignment of hypothesis tokens to reference tokens.

Lets boundaries from an ASR hypothesis be scored against a reference whose
words differ. Substitution, insertion and deletion cost 1; a match costs 0.
Among equally cheap alignments the backtrace prefers, at each step from the
end, match > substitution > deletion > insertion.
"""

from dataclasses import dataclass

import numpy as np

from lmeos.errors import MetricsError

from .boundaries import BoundarySet

MATCH = "match"
SUBSTITUTION = "substitution"
DELETION = "deletion"  # reference token missing from the hypothesis
INSERTION = "insertion"  # hypothesis token absent from the reference


@dataclass(frozen=True)
class Alignment:
    """``pairs`` holds ``(hyp_index, ref_index, op)`` in stream order; one index is
    ``None`` for insertions and deletions."""

    distance: int
    pairs: tuple

    def hyp_to_ref(self):
        return {h: r for h, r, op in self.pairs if h is not None and r is not None}

    def count(self, op):
        return sum(1 for _, _, kind in self.pairs if kind == op)


def _cost_table(hyp, ref):
    n, m = len(hyp), len(ref)
    table = np.zeros((n + 1, m + 1), dtype=np.int64)
    table[:, 0] = np.arange(n + 1)
    table[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            diagonal = table[i - 1, j - 1] + (hyp[i - 1] != ref[j - 1])
            table[i, j] = min(diagonal, table[i - 1, j] + 1, table[i, j - 1] + 1)
    return table


def align_tokens(hyp_tokens, ref_tokens):
    """Minimum edit-distance alignment of two non-empty token sequences."""
    hyp, ref = list(hyp_tokens), list(ref_tokens)
    if not hyp or not ref:
        raise MetricsError("Cannot align an empty token sequence", code="EMPTY_INPUT")

    table = _cost_table(hyp, ref)
    pairs = []
    i, j = len(hyp), len(ref)
    while i > 0 or j > 0:
        here = table[i, j]
        if i > 0 and j > 0:
            same = hyp[i - 1] == ref[j - 1]
            if same and table[i - 1, j - 1] == here:
                pairs.append((i - 1, j - 1, MATCH))
                i, j = i - 1, j - 1
                continue
            if not same and table[i - 1, j - 1] + 1 == here:
                pairs.append((i - 1, j - 1, SUBSTITUTION))
                i, j = i - 1, j - 1
                continue
        if j > 0 and table[i, j - 1] + 1 == here:
            pairs.append((None, j - 1, DELETION))
            j -= 1
            continue
        pairs.append((i - 1, None, INSERTION))
        i -= 1

    pairs.reverse()
    return Alignment(distance=int(table[-1, -1]), pairs=tuple(pairs))


def project_boundaries(hyp, alignment, ref_total):
    """Carry hypothesis boundaries onto reference positions.

    A boundary after hypothesis token ``b`` lands after the last reference
    token aligned at or before ``b``. Boundaries that land before the first
    reference token or on the stream end are dropped.
    """
    last_ref = -1
    landing = {}
    for h, r, _ in alignment.pairs:
        if r is not None:
            last_ref = r
        if h is not None:
            landing[h] = last_ref
    projected = {landing[b] for b in hyp.indices if b in landing and landing[b] >= 0}
    return BoundarySet.create(projected, ref_total)
