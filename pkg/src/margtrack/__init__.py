"""Data association by marginal matching probabilities, with a tracker,
metrics, synthetic scenarios and MOT-format I/O."""
from ._lap_kernels import BACKEND
from .affinity import BoundingBox, cosine_similarity_matrix, iou_matrix
from .lap import Assignment, brute_force_assignment, solve_min_assignment
from .marginal import (StructureSet, collect_structures, exact_marginals, marginal_association,
                       marginal_probabilities)
from .metrics import MetricsReport, evaluate
from .motion import KalmanFilter, KalmanState
from .table import TrackTable
from .tracker import Detection, Tracker, TrackerConfig, run_sequence

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Assignment", "BoundingBox", "Detection", "KalmanFilter", "KalmanState", "MetricsReport",
    "StructureSet", "TrackTable", "Tracker", "TrackerConfig", "brute_force_assignment", "collect_structures",
    "cosine_similarity_matrix", "evaluate", "exact_marginals", "iou_matrix", "marginal_association",
    "marginal_probabilities", "run_sequence", "solve_min_assignment",
]
