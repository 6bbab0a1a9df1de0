"""Multi-object tracking with interchangeable cue-fusion methods."""
from .assignment import AssignmentResult, min_cost, solve
from .fusion import Cues, FusionConfig, FusionMethod, fuse
from .geometry import FORBIDDEN, BBox
from .kalman import KFState, NoiseFactors, Preserve
from .tracker import (
    Detection,
    FrameOutput,
    SecondStageMetric,
    Track,
    Tracker,
    TrackerConfig,
    TrackStatus,
    run_sequence,
)

__all__ = [
    "AssignmentResult", "BBox", "Cues", "Detection", "FORBIDDEN", "FrameOutput",
    "FusionConfig", "FusionMethod", "KFState", "NoiseFactors", "Preserve",
    "SecondStageMetric", "Track", "TrackStatus", "Tracker", "TrackerConfig",
    "fuse", "min_cost", "run_sequence", "solve",
]
