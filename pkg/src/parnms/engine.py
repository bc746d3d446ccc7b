"""Parallel NMS pipeline over a bit-packed suppression matrix.

The pipeline has two data-parallel phases plus a trivial post-pass:

* map phase: fill an n x n boolean matrix, one cell per ordered pair.
  Cell (i, j) is cleared to 0 exactly when detection j outscores
  detection i (per the tie policy) and either covers at least ``theta``
  of its own area with the intersection or is a padding slot. Every
  other cell stays at its initialized value of 1.
* reduce phase: AND-fold each row into one survivor bit, organized as
  ``k`` equal-width segment folds per row. The fold layout is a tuning
  knob only; the resulting mask is independent of ``k``.
* survivor masking: select the valid detections whose row bit is 1.

Work is decomposed over contiguous row blocks, one block per worker, so
every storage word has a single writer and results are bit-identical for
any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .detections import Detection, DetectionVector, NmsResult

# Rows vectorized per inner step; bounds scratch-buffer memory per worker.
_ROW_CHUNK = 128

_TIE_POLICIES = ("paper_faithful", "by_index")


class ConfigError(ValueError):
    """Invalid engine configuration or mismatched pipeline inputs."""


@dataclass(frozen=True)
class NmsConfig:
    """Engine parameters.

    ``theta`` is the coverage threshold in [0, 1]; ``d_max`` the matrix
    dimension and vector capacity; ``k`` the number of per-row reduction
    segments (must divide ``d_max``); ``workers`` the pool size; and
    ``tie_break`` decides equal-score behavior: ``paper_faithful`` lets
    equal scores co-survive, ``by_index`` collapses exact score ties to
    the lowest index.
    """

    theta: float = 0.3
    d_max: int = 4096
    k: int = 32
    workers: int = 1
    tie_break: str = "paper_faithful"

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"theta must be in [0, 1], got {self.theta}")
        if self.d_max < 1:
            raise ConfigError(f"d_max must be positive, got {self.d_max}")
        if self.k < 1:
            raise ConfigError(f"k must be positive, got {self.k}")
        if self.d_max % self.k != 0:
            raise ConfigError(f"k={self.k} does not divide d_max={self.d_max}")
        if self.workers < 1:
            raise ConfigError(f"workers must be positive, got {self.workers}")
        if self.tie_break not in _TIE_POLICIES:
            raise ConfigError(
                f"tie_break must be one of {_TIE_POLICIES}, got {self.tie_break!r}"
            )


def _row_bytes(dim: int) -> int:
    # Rows are padded to whole 64-bit words.
    return ((dim + 63) // 64) * 8


class SuppressionMatrix:
    """Bit-packed square boolean matrix, one bit per detection pair.

    Row-major storage with little-endian bit order inside each byte;
    rows are padded to a whole number of 64-bit words and the padding
    bits are kept at 1 so whole-row folds never see spurious zeroes.
    """

    __slots__ = ("dim", "bits")

    def __init__(self, dim: int, bits: np.ndarray):
        self.dim = dim
        self.bits = bits

    @classmethod
    def all_ones(cls, dim: int) -> "SuppressionMatrix":
        bits = np.full((dim, _row_bytes(dim)), 0xFF, dtype=np.uint8)
        return cls(dim, bits)

    def get(self, i: int, j: int) -> bool:
        return bool((self.bits[i, j >> 3] >> (j & 7)) & 1)

    def set(self, i: int, j: int, value: bool) -> None:
        if value:
            self.bits[i, j >> 3] |= np.uint8(1 << (j & 7))
        else:
            self.bits[i, j >> 3] &= np.uint8(~(1 << (j & 7)) & 0xFF)

    def row_bools(self, i: int) -> np.ndarray:
        return np.unpackbits(self.bits[i], count=self.dim, bitorder="little").astype(bool)

    def to_bool_array(self) -> np.ndarray:
        return np.unpackbits(self.bits, axis=1, count=self.dim, bitorder="little").astype(bool)


class SurvivorMask:
    """Bit vector marking cluster representatives (1 = survivor)."""

    __slots__ = ("dim", "bits")

    def __init__(self, dim: int, bits: np.ndarray):
        self.dim = dim
        self.bits = bits

    @classmethod
    def from_bools(cls, flags: np.ndarray) -> "SurvivorMask":
        return cls(flags.shape[0], np.packbits(flags, bitorder="little"))

    def get(self, i: int) -> bool:
        return bool((self.bits[i >> 3] >> (i & 7)) & 1)

    def to_bool_array(self) -> np.ndarray:
        return np.unpackbits(self.bits, count=self.dim, bitorder="little").astype(bool)


@dataclass
class WorkCounters:
    """Exact operation tallies backing the scaling experiments.

    ``map_cells`` counts matrix cells visited (d_max**2 per full map),
    ``map_writes`` counts cells whose score gate passed, and
    ``reduce_segments`` counts per-row segment folds (d_max * k per full
    reduce).
    """

    map_cells: int = 0
    map_writes: int = 0
    reduce_segments: int = 0

    def __add__(self, other: "WorkCounters") -> "WorkCounters":
        return WorkCounters(
            self.map_cells + other.map_cells,
            self.map_writes + other.map_writes,
            self.reduce_segments + other.reduce_segments,
        )


def _row_blocks(dim: int, workers: int) -> list[tuple[int, int]]:
    # Contiguous, balanced row blocks; never more blocks than rows.
    blocks = min(workers, dim)
    base, extra = divmod(dim, blocks)
    bounds = []
    start = 0
    for b in range(blocks):
        stop = start + base + (1 if b < extra else 0)
        bounds.append((start, stop))
        start = stop
    return bounds


def _run_blocks(fn, blocks: list[tuple[int, int]]) -> list:
    if len(blocks) == 1:
        return [fn(*blocks[0])]
    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))


def map_phase(d: DetectionVector, cfg: NmsConfig) -> tuple[SuppressionMatrix, WorkCounters]:
    """Build the suppression matrix for ``d``.

    The matrix is freshly initialized to all-ones, then each cell (i, j)
    whose score gate passes is overwritten with the pairwise survival
    verdict. Cells are computed independently, so the output is
    bit-identical for any worker count.
    """
    dim = cfg.d_max
    if len(d) != dim:
        raise ConfigError(f"vector capacity {len(d)} does not match d_max={dim}")
    matrix = SuppressionMatrix.all_ones(dim)

    # int32 working copies keep the hot loops narrow; COORD_LIMIT makes
    # the casts lossless and the float64 area products exact.
    xs = d.xs.astype(np.int32)
    ys = d.ys.astype(np.int32)
    zs = d.zs.astype(np.int32)
    ss = d.ss
    xe = xs + zs
    ye = ys + zs
    thr = np.float64(cfg.theta) * np.square(zs.astype(np.float64) + 1.0)
    valid_j = zs != 0
    by_index = cfg.tie_break == "by_index"
    idx = np.arange(dim, dtype=np.int64) if by_index else None
    pack_bytes = (dim + 7) // 8
    pad_mask = np.uint8((0xFF << (dim & 7)) & 0xFF) if dim & 7 else None

    def fill_rows(r0: int, r1: int) -> tuple[int, int]:
        chunk = min(_ROW_CHUNK, r1 - r0)
        w = np.empty((chunk, dim), np.int32)
        h = np.empty_like(w)
        t = np.empty_like(w)
        area = np.empty((chunk, dim), np.float64)
        keep = np.empty((chunk, dim), bool)
        gate = np.empty_like(keep)
        cells = 0
        writes = 0
        for c0 in range(r0, r1, chunk):
            c1 = min(c0 + chunk, r1)
            b = c1 - c0
            wv, hv, tv = w[:b], h[:b], t[:b]
            av, kv, gv = area[:b], keep[:b], gate[:b]
            np.minimum(xe[c0:c1, None], xe[None, :], out=wv)
            np.maximum(xs[c0:c1, None], xs[None, :], out=tv)
            wv -= tv
            wv += 1
            np.maximum(wv, 0, out=wv)
            np.minimum(ye[c0:c1, None], ye[None, :], out=hv)
            np.maximum(ys[c0:c1, None], ys[None, :], out=tv)
            hv -= tv
            hv += 1
            np.maximum(hv, 0, out=hv)
            av[...] = wv  # widen to float64 before the product; exact below 2**53
            av *= hv
            np.less(av, thr[None, :], out=kv)
            kv &= valid_j[None, :]
            np.less(ss[c0:c1, None], ss[None, :], out=gv)
            if by_index:
                gv |= (ss[c0:c1, None] == ss[None, :]) & (idx[c0:c1, None] > idx[None, :])
            cells += b * dim
            writes += int(np.count_nonzero(gv))
            np.logical_not(gv, out=gv)
            kv |= gv
            packed = np.packbits(kv, axis=1, bitorder="little")
            if pad_mask is not None:
                packed[:, -1] |= pad_mask
            matrix.bits[c0:c1, :pack_bytes] = packed
        return cells, writes

    counters = WorkCounters()
    for cells, writes in _run_blocks(fill_rows, _row_blocks(dim, cfg.workers)):
        counters.map_cells += cells
        counters.map_writes += writes
    return matrix, counters


def reduce_phase(b: SuppressionMatrix, cfg: NmsConfig) -> tuple[SurvivorMask, WorkCounters]:
    """AND-fold every matrix row into one survivor bit.

    Each row is folded as ``k`` sequential segment ANDs of width
    ``d_max // k``: the first segment seeds the row's bit, the remaining
    k - 1 segments fold into it. The mask is independent of ``k`` and of
    the worker count.
    """
    dim = cfg.d_max
    if b.dim != dim:
        raise ConfigError(f"matrix dim {b.dim} does not match d_max={dim}")
    seg_w = dim // cfg.k
    flags = np.zeros(dim, dtype=bool)

    def fold_rows(r0: int, r1: int) -> int:
        rows = np.unpackbits(
            b.bits[r0:r1, : (dim + 7) // 8], axis=1, count=dim, bitorder="little"
        )
        segs = rows.reshape(r1 - r0, cfg.k, seg_w).all(axis=2)
        acc = segs[:, 0].copy()
        for s in range(1, cfg.k):
            acc &= segs[:, s]
        flags[r0:r1] = acc
        return (r1 - r0) * cfg.k

    counters = WorkCounters()
    for segments in _run_blocks(fold_rows, _row_blocks(dim, cfg.workers)):
        counters.reduce_segments += segments
    return SurvivorMask.from_bools(flags), counters


def mask_survivors(d: DetectionVector, v: SurvivorMask) -> NmsResult:
    """Select the valid detections whose mask bit is set, in input order.

    Padding slots are excluded regardless of their mask bit.
    """
    if v.dim != len(d):
        raise ConfigError(f"mask dim {v.dim} does not match vector capacity {len(d)}")
    flags = v.to_bool_array()
    survivors = tuple(d.slot(int(i)) for i in np.nonzero(flags[: d.count])[0])
    return NmsResult(survivors, d.count - len(survivors))


def run_nms(d: DetectionVector, cfg: NmsConfig) -> tuple[NmsResult, WorkCounters]:
    """Full pipeline: fresh all-ones matrix, map, reduce, mask."""
    matrix, counters = map_phase(d, cfg)
    mask, reduce_counters = reduce_phase(matrix, cfg)
    return mask_survivors(d, mask), counters + reduce_counters
