"""Table structure toolkit: structural losses with min-max trainable
weights, rectilinear adjacency and span recovery, ground-truth alignment
normalization, and empty-cell-aware structure evaluation."""

from .geometry import BoundingBox, extent_overlap_x, extent_overlap_y, iou
from .structure import Cell, GridSpan, TableStructure, grid_boundaries, validate
from .losses import LossBreakdown, alignment_loss, breakdown, continuity_loss, overlap_loss
from .refine import LossWeights, RefineConfig, RefineTrace, objective, refine_boxes
from .adjacency import RectilinearAdjacency, assign_indices, build_rectilinear, resolve_spans
from .normalize import ContentAnnotation, WordBox, normalize_ground_truth, snap_to_word_boxes
from .metrics import AdjacencyRelation, EvalReport, extract_relations, match_cells, score, sweep
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "AdjacencyRelation",
    "BoundingBox",
    "Cell",
    "ContentAnnotation",
    "EvalReport",
    "GridSpan",
    "LossBreakdown",
    "LossWeights",
    "RectilinearAdjacency",
    "RefineConfig",
    "RefineTrace",
    "SynthConfig",
    "TableStructure",
    "WordBox",
    "alignment_loss",
    "assign_indices",
    "breakdown",
    "build_rectilinear",
    "continuity_loss",
    "extent_overlap_x",
    "extent_overlap_y",
    "extract_relations",
    "generate",
    "grid_boundaries",
    "iou",
    "match_cells",
    "normalize_ground_truth",
    "objective",
    "overlap_loss",
    "refine_boxes",
    "resolve_spans",
    "score",
    "snap_to_word_boxes",
    "sweep",
    "validate",
]
