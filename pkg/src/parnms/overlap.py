"""Scalar pairwise suppression test between two square detections.

This is the per-cell body of the matrix construction: given a candidate
``d_i`` and a reference ``d_j`` that is assumed to outscore it, decide
whether the candidate survives the comparison. The caller owns the score
gate; this module only measures geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

from .detections import Detection


@dataclass(frozen=True)
class OverlapOutcome:
    """Result of one pairwise comparison.

    ``keep`` is True when the candidate survives against the reference;
    ``ratio`` is the intersection area divided by the reference window's
    area, always in [0, 1], reported for diagnostics.
    """

    keep: bool
    ratio: float


def intersection_extent(a_lo: int, a_len: int, b_lo: int, b_len: int) -> int:
    """1D overlap length of [a_lo, a_lo+a_len] and [b_lo, b_lo+b_len].

    Inclusive pixel convention: two identical intervals of length L
    overlap by L + 1 pixels; intervals disjoint by at least one pixel
    clamp to 0.
    """
    return max(0, min(a_lo + a_len, b_lo + b_len) - max(a_lo, b_lo) + 1)


def suppression_test(d_i: Detection, d_j: Detection, theta: float) -> OverlapOutcome:
    """Decide whether ``d_i`` survives a comparison against ``d_j``.

    The candidate is kept when the intersection covers less than
    ``theta`` of ``d_j``'s own area, or when ``d_j`` is a padding slot.
    Widths and areas are exact integers; the threshold comparison is
    ``w*h < theta*a`` with a single double-precision product, exact for
    in-range coordinates.
    """
    w = intersection_extent(d_i.x, d_i.z, d_j.x, d_j.z)
    h = intersection_extent(d_i.y, d_i.z, d_j.y, d_j.z)
    area = (d_j.z + 1) * (d_j.z + 1)
    wh = w * h
    keep = wh < theta * area and d_j.z != 0
    return OverlapOutcome(keep=keep, ratio=wh / area)
