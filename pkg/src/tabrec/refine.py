"""Desk-scale min-max refinement of cell boxes.

The box coordinates descend the weighted structural loss while the loss
weights ascend it, both with plain gradient steps and a shared learning
rate. Weights live on the probability simplex by construction: four free
parameters are mapped through a normalized exponential, so the ascent stays
unconstrained while the simplex constraint holds exactly at every step.

Updates are simultaneous: each iteration evaluates losses once and applies
the descent and ascent steps from that same evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import BoundingBox
from .losses import (
    CellList,
    LossBreakdown,
    alignment_terms,
    cells_to_arrays,
    continuity_terms,
    overlap_terms,
)

SIMPLEX_TOL = 1e-9


class DegenerateBox(RuntimeError):
    """A descent step would invert a box even after 20 halvings."""


class NonFinite(RuntimeError):
    """The objective or a gradient became non-finite."""


@dataclass(frozen=True)
class LossWeights:
    """Simplex-constrained weights on (alignment, continuity, overlap-x, overlap-y)."""

    w_al: float
    w_cl: float
    w_ol_x: float
    w_ol_y: float

    def __post_init__(self) -> None:
        v = self.as_vector()
        if np.any(v < 0):
            raise ValueError(f"negative loss weight: {self}")
        if abs(float(v.sum()) - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"loss weights must sum to 1, got {float(v.sum())!r}")

    @classmethod
    def uniform(cls) -> "LossWeights":
        return cls(0.25, 0.25, 0.25, 0.25)

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "LossWeights":
        return cls(float(v[0]), float(v[1]), float(v[2]), float(v[3]))

    def as_vector(self) -> np.ndarray:
        return np.array([self.w_al, self.w_cl, self.w_ol_x, self.w_ol_y])


@dataclass(frozen=True)
class RefineConfig:
    eta: float = 0.05
    iterations: int = 500
    weights_trainable: bool = True
    initial_weights: Optional[LossWeights] = None
    stop_tol: float = 1e-8
    per_cell: bool = False

    def __post_init__(self) -> None:
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    objective: float
    breakdown: LossBreakdown
    weights: LossWeights


@dataclass
class RefineTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])


def objective(cells: CellList, weights: LossWeights) -> float:
    """Weighted sum of the four structural losses."""
    coords, spans = cells_to_arrays(cells)
    if spans is None:
        raise ValueError("objective requires spans")
    bd = _breakdown(coords, spans)
    return float(weights.as_vector() @ bd.as_vector())


def _breakdown(coords: np.ndarray, spans: np.ndarray) -> LossBreakdown:
    l_al, _, _ = alignment_terms(coords, spans)
    l_cl, _, _ = continuity_terms(coords, spans)
    l_x, l_y, _, _, _ = overlap_terms(coords, spans)
    return LossBreakdown(l_al, l_cl, l_x, l_y)


def _softmax(theta: np.ndarray) -> np.ndarray:
    z = np.exp(theta - theta.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def _boxes_valid(coords: np.ndarray) -> bool:
    return bool(np.all(coords[:, 2] > coords[:, 0]) and np.all(coords[:, 3] > coords[:, 1]))


def refine_boxes(
    cells: CellList, cfg: RefineConfig = RefineConfig()
) -> tuple[list[BoundingBox], LossWeights, RefineTrace]:
    """Run the min-max refinement and return refined boxes, the final
    weights, and a per-iteration trace.

    Inputs whose losses are all zero are exact fixed points: their boxes
    come back bit-identical. A descent step that would invert any box is
    retried at half the step size (up to 20 halvings) before failing.
    """
    coords, spans = cells_to_arrays(cells)
    if spans is None:
        raise ValueError("refinement requires spans")
    n = len(coords)
    w0 = cfg.initial_weights or LossWeights.uniform()
    if cfg.per_cell:
        theta = np.tile(np.log(np.maximum(w0.as_vector(), 1e-12)), (n, 1))
    else:
        theta = np.log(np.maximum(w0.as_vector(), 1e-12))

    trace = RefineTrace()
    prev_obj: Optional[float] = None

    for it in range(cfg.iterations):
        if cfg.per_cell:
            w = _softmax(theta)  # (n, 4)
            l_al, g_al, pc_al = alignment_terms(coords, spans, cell_weights=w[:, 0])
            l_cl, g_cl, pc_cl = continuity_terms(coords, spans, cell_weights=w[:, 1])
            l_x, l_y, g_ol, pc_x, pc_y = overlap_terms(
                coords, spans, x_weights=w[:, 2], y_weights=w[:, 3]
            )
            lmat = np.stack([pc_al, pc_cl, pc_x, pc_y], axis=1)  # (n, 4) unweighted
            bd = LossBreakdown(*(float(v) for v in lmat.sum(axis=0)))
            obj = float((w * lmat).sum())
            grad = g_al + g_cl + g_ol
            rec_w = LossWeights.from_vector(w.mean(axis=0))
        else:
            w = _softmax(theta)  # (4,)
            l_al, g_al, _ = alignment_terms(coords, spans)
            l_cl, g_cl, _ = continuity_terms(coords, spans)
            l_x, l_y, g_ol, _, _ = overlap_terms(coords, spans)
            bd = LossBreakdown(l_al, l_cl, l_x, l_y)
            lvec = bd.as_vector()
            obj = float(w @ lvec)
            col_w = np.array([w[2], w[3], w[2], w[3]])
            grad = w[0] * g_al + w[1] * g_cl + g_ol * col_w
            rec_w = LossWeights.from_vector(w)

        if not np.isfinite(obj) or not np.all(np.isfinite(grad)):
            raise NonFinite(f"non-finite objective or gradient at iteration {it}")
        trace.records.append(TraceRecord(it, obj, bd, rec_w))

        if prev_obj is not None and abs(prev_obj - obj) < cfg.stop_tol:
            break
        prev_obj = obj

        step = cfg.eta
        cand = coords - step * grad
        halvings = 0
        while not _boxes_valid(cand):
            halvings += 1
            if halvings > 20:
                raise DegenerateBox(
                    f"descent step inverts a box at iteration {it} even after 20 halvings"
                )
            step *= 0.5
            cand = coords - step * grad
        coords = cand

        if cfg.weights_trainable:
            if cfg.per_cell:
                per_cell_obj = (w * lmat).sum(axis=1, keepdims=True)
                theta = theta + cfg.eta * w * (lmat - per_cell_obj)
            else:
                theta = theta + cfg.eta * w * (bd.as_vector() - obj)

    boxes = [BoundingBox(*row) for row in coords.tolist()]
    if cfg.per_cell:
        final_w = LossWeights.from_vector(_softmax(theta).mean(axis=0))
    else:
        final_w = LossWeights.from_vector(_softmax(theta))
    return boxes, final_w, trace
