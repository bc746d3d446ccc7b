"""Reference NMS implementations used as independent correctness checks.

Everything here is deliberately sequential and matrix-free so it can be
audited line by line. Only the detection value types are shared with the
rest of the package; the pairwise overlap arithmetic is reimplemented
inline rather than imported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .detections import Detection, DetectionVector, NmsResult

TIE_POLICIES = ("paper_faithful", "by_index")


def _covers(cand: Detection, ref: Detection, theta: float) -> bool:
    # Fraction of ref's own area covered by the intersection, inclusive
    # pixel convention. Exact: integer extents, one double product.
    w = min(cand.x + cand.z, ref.x + ref.z) - max(cand.x, ref.x) + 1
    if w <= 0:
        return False
    h = min(cand.y + cand.z, ref.y + ref.z) - max(cand.y, ref.y) + 1
    if h <= 0:
        return False
    return w * h >= theta * ((ref.z + 1) * (ref.z + 1))


def _coverage(cand: Detection, ref: Detection) -> float:
    w = max(0, min(cand.x + cand.z, ref.x + ref.z) - max(cand.x, ref.x) + 1)
    h = max(0, min(cand.y + cand.z, ref.y + ref.z) - max(cand.y, ref.y) + 1)
    return (w * h) / ((ref.z + 1) * (ref.z + 1))


def brute_force_nms(
    d: DetectionVector, theta: float, tie_break: str = "paper_faithful"
) -> NmsResult:
    """Exhaustive-pair NMS: the ground truth the engine is tested against.

    A detection survives unless some other valid detection both outscores
    it (per the tie policy) and covers at least ``theta`` of its own area.
    Direct double loop; no matrix, no partitioning, no parallelism.
    """
    if tie_break not in TIE_POLICIES:
        raise ValueError(f"unknown tie_break {tie_break!r}")
    by_index = tie_break == "by_index"
    dets = d.valid()
    survivors = []
    for i, di in enumerate(dets):
        doomed = False
        for j, dj in enumerate(dets):
            if di.s < dj.s or (by_index and di.s == dj.s and i > j):
                if _covers(di, dj, theta):
                    doomed = True
                    break
        if not doomed:
            survivors.append(di)
    return NmsResult(tuple(survivors), len(dets) - len(survivors))


def greedy_nms(d: DetectionVector, theta: float) -> NmsResult:
    """Classic sequential NMS.

    Repeatedly select the highest-scored unprocessed detection (ties by
    lowest index) as a survivor, then drop every remaining detection
    that covers at least ``theta`` of the survivor's area. Survivors are
    returned in input order.
    """
    dets = d.valid()
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].s, i))
    pending = [True] * len(dets)
    kept = []
    for i in order:
        if not pending[i]:
            continue
        pending[i] = False
        kept.append(i)
        for j in range(len(dets)):
            if pending[j] and _covers(dets[j], dets[i], theta):
                pending[j] = False
    kept.sort()
    return NmsResult(tuple(dets[i] for i in kept), len(dets) - len(kept))


def soft_nms_rescore(
    d: DetectionVector, mode: str, theta: float, sigma: float = 0.5
) -> DetectionVector:
    """Greedy pass that decays overlapping scores instead of removing.

    Selection follows current (possibly already decayed) scores. In
    ``linear`` mode a remaining detection's score is scaled by
    ``1 - coverage`` whenever its coverage of the selected window is at
    least ``theta``; in ``gaussian`` mode every remaining score is scaled
    by ``exp(-coverage**2 / sigma)``.

    Returns the rescored vector in input order. Decayed scores may reach
    zero, so the result is meant for inspection or thresholding, not for
    feeding back into the engine.
    """
    if mode not in ("linear", "gaussian"):
        raise ValueError(f"unknown mode {mode!r}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    dets = d.valid()
    scores = [det.s for det in dets]
    pending = set(range(len(dets)))
    while pending:
        best = min(pending, key=lambda i: (-scores[i], i))
        pending.discard(best)
        for j in pending:
            cov = _coverage(dets[j], dets[best])
            if mode == "linear":
                if cov >= theta:
                    scores[j] *= 1.0 - cov
            else:
                scores[j] *= math.exp(-(cov * cov) / sigma)
    rescored = [
        Detection(det.x, det.y, det.z, scores[i]) for i, det in enumerate(dets)
    ]
    return DetectionVector(rescored, d.d_max, validate=False)


@dataclass(frozen=True)
class AgreementReport:
    """Survivor-set agreement between the engine and greedy NMS."""

    instances: int
    exact_matches: int
    jaccard_mean: float
    max_symmetric_diff: int


def _survivor_set(result: NmsResult) -> frozenset[tuple[int, int, int, float]]:
    return frozenset((det.x, det.y, det.z, det.s) for det in result.survivors)


def compare_methods(instances: Sequence[DetectionVector], theta: float) -> AgreementReport:
    """Run the engine and greedy NMS over instances and tally agreement.

    The two methods are not expected to coincide on suppression chains,
    so agreement is measured, never asserted. Jaccard similarity of two
    empty survivor sets is defined as 1.0.
    """
    from .engine import NmsConfig, run_nms

    if not instances:
        raise ValueError("compare_methods needs at least one instance")
    exact = 0
    jaccard_sum = 0.0
    max_diff = 0
    for vec in instances:
        cfg = NmsConfig(theta=theta, d_max=max(vec.d_max, 1), k=1, workers=1)
        run_vec = vec if vec.d_max == cfg.d_max else vec.repadded(cfg.d_max)
        engine_set = _survivor_set(run_nms(run_vec, cfg)[0])
        greedy_set = _survivor_set(greedy_nms(vec, theta))
        union = engine_set | greedy_set
        inter = engine_set & greedy_set
        jaccard_sum += 1.0 if not union else len(inter) / len(union)
        if engine_set == greedy_set:
            exact += 1
        max_diff = max(max_diff, len(union - inter))
    return AgreementReport(
        instances=len(instances),
        exact_matches=exact,
        jaccard_mean=jaccard_sum / len(instances),
        max_symmetric_diff=max_diff,
    )
