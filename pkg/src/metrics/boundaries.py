from dataclasses import dataclass

from lmeos.errors import MetricsError


@dataclass(frozen=True)
class BoundarySet:
    """Inter-token boundaries of one stream: index ``i`` means "after token i".

    The stream-end boundary (``total_tokens - 1``) is never stored; every
    segmentation agrees on it.
    """

    indices: frozenset
    total_tokens: int

    @classmethod
    def create(cls, indices, total_tokens):
        indices = {int(i) for i in indices}
        out_of_range = sorted(i for i in indices if not 0 <= i < total_tokens)
        if out_of_range:
            raise MetricsError(
                f"Boundary {out_of_range[0]} outside a {total_tokens}-token stream",
                code="BOUNDARY_OUT_OF_RANGE",
            )
        indices.discard(total_tokens - 1)
        return cls(indices=frozenset(indices), total_tokens=total_tokens)

    def __len__(self):
        return len(self.indices)


def _segment_tokens(segment):
    tokens = getattr(segment, "tokens", segment)
    return list(tokens)


def boundaries_from_segments(segments, reference_tokens):
    """Boundaries after the last token of every segment but the final one.

    ``segments`` are token lists or objects with a ``tokens`` attribute.

    Raises:
        MetricsError: TOKEN_MISMATCH if the segments do not spell out
            ``reference_tokens`` exactly; run :func:`~metrics.alignment.align_tokens`
            first when they differ.
    """
    reference_tokens = list(reference_tokens)
    hypothesis = []
    indices = []
    for segment in segments:
        tokens = _segment_tokens(segment)
        if not tokens:
            continue
        hypothesis.extend(tokens)
        indices.append(len(hypothesis) - 1)

    check_same_tokens(hypothesis, reference_tokens)
    return BoundarySet.create(indices, len(reference_tokens))


def check_same_tokens(hypothesis, reference, where=""):
    """Raise TOKEN_MISMATCH naming the first position where the sequences differ."""
    hypothesis, reference = list(hypothesis), list(reference)
    if hypothesis == reference:
        return
    position = next(
        (i for i, (h, r) in enumerate(zip(hypothesis, reference)) if h != r),
        min(len(hypothesis), len(reference)),
    )
    found = hypothesis[position] if position < len(hypothesis) else "<end>"
    expected = reference[position] if position < len(reference) else "<end>"
    prefix = f"{where}: " if where else ""
    raise MetricsError(
        f"{prefix}hypothesis token {position} is {found!r}, reference has {expected!r} "
        f"({len(hypothesis)} vs {len(reference)} tokens)",
        code="TOKEN_MISMATCH",
    )
