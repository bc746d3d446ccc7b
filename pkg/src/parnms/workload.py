"""Deterministic synthetic detection workloads.

Frames are built from well-separated object clusters: each object gets a
burst of jittered boxes whose scores decay with jitter magnitude, so the
least-jittered box is the unique cluster maximum and expected survivor
counts are analytic. Generation is fully seeded; identical specs produce
identical vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .detections import Detection, DetectionVector

# Fraction of the score range spent on decay across all clusters.
_SCORE_SPAN = 0.4
_TOP_SCORE = 1.0


class WorkloadError(ValueError):
    """A workload spec that cannot be realized."""


@dataclass(frozen=True)
class WorkloadSpec:
    """Shape of one synthetic frame.

    ``objects`` clusters are placed with pairwise corner separation of at
    least ``2 * base_z`` (guaranteeing zero inter-cluster overlap given
    the jitter constraint ``2 * jitter_xy + jitter_z < base_z``), and each
    cluster emits ``detections_per_object`` boxes: one exact box plus
    jittered copies with strictly lower scores.
    """

    objects: int
    detections_per_object: int
    frame_w: int = 1920
    frame_h: int = 1080
    base_z: int = 24
    jitter_xy: int = 3
    jitter_z: int = 2
    score_model: str = "peak_decay"
    seed: int = 0

    def __post_init__(self):
        if self.objects < 0:
            raise WorkloadError(f"objects must be non-negative, got {self.objects}")
        if self.detections_per_object < 1:
            raise WorkloadError(
                f"detections_per_object must be positive, got {self.detections_per_object}"
            )
        if self.base_z < 1:
            raise WorkloadError(f"base_z must be >= 1, got {self.base_z}")
        if self.jitter_xy < 0 or self.jitter_z < 0:
            raise WorkloadError("jitter values must be non-negative")
        if 2 * self.jitter_xy + self.jitter_z >= self.base_z:
            raise WorkloadError(
                "need 2*jitter_xy + jitter_z < base_z to keep clusters disjoint"
            )
        if self.detections_per_object > 1 and self.jitter_xy == 0 and self.jitter_z == 0:
            raise WorkloadError("detections_per_object > 1 requires nonzero jitter")
        if self.score_model != "peak_decay":
            raise WorkloadError(f"unknown score_model {self.score_model!r}")
        if self.frame_w < 1 or self.frame_h < 1:
            raise WorkloadError("frame dimensions must be positive")

    @property
    def count(self) -> int:
        return self.objects * self.detections_per_object

    @classmethod
    def sized_for(cls, objects: int, detections_per_object: int, **kwargs) -> "WorkloadSpec":
        """A spec whose frame is sized to fit ``objects`` clusters."""
        probe = cls(
            objects=0, detections_per_object=detections_per_object, **kwargs
        )
        pitch, extra = _grid_geometry(probe)
        side_cells = max(1, math.isqrt(max(objects - 1, 0)) + 1)
        margin = probe.base_z + probe.jitter_z + 2 * probe.jitter_xy + extra
        side = (side_cells - 1) * pitch + margin + pitch
        return replace(probe, objects=objects, frame_w=side, frame_h=side)


def _grid_geometry(spec: WorkloadSpec) -> tuple[int, int]:
    # Anchors live on a grid of this pitch plus a per-object offset in
    # [0, extra]; worst-case corner separation is pitch - extra = 2*base_z.
    extra = max(spec.base_z // 2, 1)
    return 2 * spec.base_z + extra, extra


def _layout(spec: WorkloadSpec) -> list[Detection]:
    """All detections of the frame, cluster-major, deterministic."""
    if spec.objects == 0:
        return []
    rng = np.random.default_rng(spec.seed)
    pitch, extra = _grid_geometry(spec)
    x_lo = spec.jitter_xy
    x_hi = spec.frame_w - spec.base_z - spec.jitter_z - spec.jitter_xy
    y_hi = spec.frame_h - spec.base_z - spec.jitter_z - spec.jitter_xy
    if x_hi < x_lo + extra or y_hi < x_lo + extra:
        raise WorkloadError("frame too small for the configured box size")
    cells_x = (x_hi - x_lo - extra) // pitch + 1
    cells_y = (y_hi - x_lo - extra) // pitch + 1
    if spec.objects > cells_x * cells_y:
        raise WorkloadError(
            f"cannot place {spec.objects} objects with separation {2 * spec.base_z} "
            f"in a {spec.frame_w}x{spec.frame_h} frame (capacity {cells_x * cells_y})"
        )
    cells = rng.choice(cells_x * cells_y, size=spec.objects, replace=False)

    per = spec.detections_per_object
    band = _SCORE_SPAN / spec.objects
    rank_cap = (2 * spec.jitter_xy**2 + spec.jitter_z**2) * per + per
    dets = []
    for o, cell in enumerate(cells):
        gx, gy = int(cell) % cells_x, int(cell) // cells_x
        ax = x_lo + gx * pitch + int(rng.integers(0, extra + 1))
        ay = x_lo + gy * pitch + int(rng.integers(0, extra + 1))
        base_score = _TOP_SCORE - o * band
        for j in range(per):
            if j == 0:
                dx = dy = dz = 0
            else:
                while True:
                    dx = int(rng.integers(-spec.jitter_xy, spec.jitter_xy + 1))
                    dy = int(rng.integers(-spec.jitter_xy, spec.jitter_xy + 1))
                    dz = int(rng.integers(-spec.jitter_z, spec.jitter_z + 1))
                    if dx or dy or dz:
                        break
            # Integer decay rank: squared jitter magnitude, ties broken by
            # the burst index, so every cluster has a unique score maximum
            # at its unjittered box.
            rank = (dx * dx + dy * dy + dz * dz) * per + j
            score = base_score - 0.9 * band * (rank / rank_cap)
            dets.append(Detection(ax + dx, ay + dy, spec.base_z + dz, score))
    return dets


def generate_frame(spec: WorkloadSpec, d_max: int | None = None) -> DetectionVector:
    """One synthetic frame; identical for identical specs.

    Raises:
        WorkloadError: when the objects cannot be placed with the
            required separation inside the frame.
    """
    return DetectionVector(_layout(spec), d_max if d_max is not None else spec.count)


def coverage_sweep(spec: WorkloadSpec, steps: int) -> list[DetectionVector]:
    """Frames that progressively uncover the frame's clusters.

    Frame ``t`` (0 <= t <= steps) holds the detections of the first ``t``
    objects only; all frames share one seeded layout and the full-frame
    capacity, so frame ``t`` is a strict prefix of frame ``t + 1``.
    """
    if not 0 <= steps <= spec.objects:
        raise WorkloadError(f"steps must be in [0, {spec.objects}], got {steps}")
    dets = _layout(spec)
    per = spec.detections_per_object
    return [
        DetectionVector(dets[: t * per], spec.count, validate=False)
        for t in range(steps + 1)
    ]


def mosaic(
    frames: list[DetectionVector],
    grid: tuple[int, int],
    frame_w: int,
    frame_h: int,
    d_max: int | None = None,
) -> DetectionVector:
    """Tile frames into one large frame, translating by grid cell.

    Frames are laid out row-major over a ``rows x cols`` grid of
    ``frame_w x frame_h`` cells. Capacity defaults to the summed input
    capacities.
    """
    rows, cols = grid
    if rows * cols != len(frames):
        raise ValueError(f"grid {rows}x{cols} does not match {len(frames)} frames")
    combined = []
    for idx, frame in enumerate(frames):
        off_x = (idx % cols) * frame_w
        off_y = (idx // cols) * frame_h
        for det in frame.valid():
            combined.append(Detection(det.x + off_x, det.y + off_y, det.z, det.s))
    if d_max is None:
        d_max = sum(frame.d_max for frame in frames)
    return DetectionVector(combined, d_max)


def random_frame(
    count: int,
    seed: int,
    frame_w: int = 512,
    frame_h: int = 512,
    z_range: tuple[int, int] = (4, 40),
    duplicate_fraction: float = 0.0,
    d_max: int | None = None,
) -> DetectionVector:
    """Unstructured random boxes for stress and agreement testing.

    Unlike clustered frames these have no analytic survivor count; they
    exercise dense overlap, suppression chains, and (optionally) exact
    duplicates: ``duplicate_fraction`` of the slots are overwritten with
    copies of earlier boxes, score included.
    """
    z_lo, z_hi = z_range
    if not 1 <= z_lo <= z_hi:
        raise ValueError(f"invalid z_range {z_range}")
    if z_hi >= min(frame_w, frame_h):
        raise ValueError("z_range exceeds the frame")
    rng = np.random.default_rng(seed)
    dets = []
    for _ in range(count):
        z = int(rng.integers(z_lo, z_hi + 1))
        x = int(rng.integers(0, frame_w - z + 1))
        y = int(rng.integers(0, frame_h - z + 1))
        s = float(rng.uniform(0.05, 1.0))
        dets.append(Detection(x, y, z, s))
    n_dup = int(count * duplicate_fraction)
    if count >= 2:
        for _ in range(n_dup):
            dst = int(rng.integers(1, count))
            src = int(rng.integers(0, dst))
            dets[dst] = dets[src]
    return DetectionVector(dets, d_max if d_max is not None else count)


def toy_frame() -> DetectionVector:
    """Nine detections in three tight, well-separated clusters of three.

    At theta = 0.3 every intra-cluster pair overlaps well past the
    threshold while clusters are mutually disjoint, so exactly the three
    cluster maxima survive.
    """
    clusters = ((0, 0), (100, 100), (200, 0))
    dets = []
    for n, (cx, cy) in enumerate(clusters):
        top = 0.9 - 0.05 * n
        dets.append(Detection(cx, cy, 20, top))
        dets.append(Detection(cx + 2, cy + 2, 20, top - 0.02))
        dets.append(Detection(cx + 1, cy, 20, top - 0.01))
    return DetectionVector(dets, 9)


def chain_fixture() -> tuple[DetectionVector, float]:
    """Three boxes a-b-c where suppression chains through b.

    With theta = 0.4: b covers 55/121 of a's area and c covers 66/121 of
    b's, while a and c are disjoint. Greedy NMS keeps {a, c} because b,
    c's only suppressor, is itself removed by a; the matrix method clears
    cell (c, b) regardless of b's own fate and keeps {a} alone. The two
    survivor sets differ by construction (Jaccard 0.5).
    """
    dets = [
        Detection(0, 0, 10, 0.9),
        Detection(6, 0, 10, 0.8),
        Detection(11, 0, 10, 0.7),
    ]
    return DetectionVector(dets, 4), 0.4
