"""Work-efficient parallel non-maximum suppression.

Clusters overlapping detection windows by building a bit-packed boolean
suppression matrix in a data-parallel map phase and folding each row with
segmented AND reductions, then selecting one representative per cluster.
Ships with sequential reference oracles, a deterministic synthetic
workload generator, and a benchmark CLI (``nms-bench``).
"""

from .detections import (
    COORD_LIMIT,
    CapacityError,
    Detection,
    DetectionError,
    DetectionVector,
    NmsResult,
    ParseError,
    ValidationError,
    load_detections,
    store_detections,
    store_result,
)
from .engine import (
    ConfigError,
    NmsConfig,
    SuppressionMatrix,
    SurvivorMask,
    WorkCounters,
    map_phase,
    mask_survivors,
    reduce_phase,
    run_nms,
)
from .oracles import (
    AgreementReport,
    brute_force_nms,
    compare_methods,
    greedy_nms,
    soft_nms_rescore,
)
from .overlap import OverlapOutcome, intersection_extent, suppression_test
from .workload import (
    WorkloadError,
    WorkloadSpec,
    chain_fixture,
    coverage_sweep,
    generate_frame,
    mosaic,
    random_frame,
    toy_frame,
)

__version__ = "0.1.0"

__all__ = [
    "COORD_LIMIT",
    "AgreementReport",
    "CapacityError",
    "ConfigError",
    "Detection",
    "DetectionError",
    "DetectionVector",
    "NmsConfig",
    "NmsResult",
    "OverlapOutcome",
    "ParseError",
    "SuppressionMatrix",
    "SurvivorMask",
    "ValidationError",
    "WorkCounters",
    "WorkloadError",
    "WorkloadSpec",
    "brute_force_nms",
    "chain_fixture",
    "compare_methods",
    "coverage_sweep",
    "generate_frame",
    "greedy_nms",
    "intersection_extent",
    "load_detections",
    "map_phase",
    "mask_survivors",
    "mosaic",
    "random_frame",
    "reduce_phase",
    "run_nms",
    "soft_nms_rescore",
    "store_detections",
    "store_result",
    "suppression_test",
    "toy_frame",
]
