"""Structural regularizers over table cell boxes and their analytic gradients.

Three losses, all sums of squared coordinate differences over qualifying
cell pairs:

* continuity: a cell starting at row r must start (in y) where cells ending
  at row r-1 end; likewise for columns in x. Summed over ordered pairs.
* overlap: hinged squared extent overlap between pairs whose grid ranges
  are disjoint along that axis (and intersect along the other, so only
  genuine neighbors are pushed apart). Summed over ordered pairs; the
  printed all-pairs/no-hinge form is available behind ``literal=True``.
* alignment: squared differences of shared start/end coordinates between
  cells with equal start/end row or column indices, over unordered pairs.

Array layout: coordinates are an ``(n, 4)`` float array with columns
``x1, y1, x2, y2``; spans an ``(n, 4)`` int array with columns
``sr, sc, er, ec``. Gradients come back as ``(n, 4)`` arrays matching the
input cell order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import BoundingBox
from .structure import GridSpan

X1, Y1, X2, Y2 = 0, 1, 2, 3
SR, SC, ER, EC = 0, 1, 2, 3

CellList = Sequence[tuple[BoundingBox, Optional[GridSpan]]]


@dataclass(frozen=True)
class LossBreakdown:
    """The four loss components; all nonnegative and finite."""

    l_al: float
    l_cl: float
    l_ol_x: float
    l_ol_y: float

    def total(self) -> float:
        return self.l_al + self.l_cl + self.l_ol_x + self.l_ol_y

    def as_vector(self) -> np.ndarray:
        return np.array([self.l_al, self.l_cl, self.l_ol_x, self.l_ol_y])


def cells_to_arrays(cells: CellList) -> tuple[np.ndarray, Optional[np.ndarray]]:
    if len(cells) == 0:
        raise ValueError("need at least one cell")
    coords = np.array([[b.x1, b.y1, b.x2, b.y2] for b, _ in cells], dtype=float)
    spans = None
    if all(s is not None for _, s in cells):
        spans = np.array([[s.sr, s.sc, s.er, s.ec] for _, s in cells], dtype=np.int64)
    elif any(s is not None for _, s in cells):
        raise ValueError("either all cells carry spans or none")
    return coords, spans


def _pair_weights(n: int, w: Optional[np.ndarray]) -> Optional[np.ndarray]:
    # pairwise weight = mean of the two cells' weights
    if w is None:
        return None
    w = np.asarray(w, dtype=float)
    return 0.5 * (w[:, None] + w[None, :])


def alignment_terms(
    coords: np.ndarray, spans: np.ndarray, cell_weights: Optional[np.ndarray] = None
) -> tuple[float, np.ndarray, np.ndarray]:
    """Alignment loss over unordered pairs with equal span indices.

    Returns ``(value, grad, per_cell)`` where ``per_cell`` attributes half of
    each (unweighted) pair term to each endpoint.
    """
    n = len(coords)
    grad = np.zeros_like(coords)
    per_cell = np.zeros(n)
    neq = ~np.eye(n, dtype=bool)
    omega = _pair_weights(n, cell_weights)
    value = 0.0
    for span_col, coord_col in ((SR, Y1), (ER, Y2), (SC, X1), (EC, X2)):
        idx = spans[:, span_col]
        mask = (idx[:, None] == idx[None, :]) & neq
        v = coords[:, coord_col]
        d = v[:, None] - v[None, :]
        p = mask * d * d
        per_cell += 0.5 * p.sum(axis=1)
        wm = mask * omega if omega is not None else mask
        value += 0.5 * float((wm * d * d).sum())
        grad[:, coord_col] += 2.0 * (wm * d).sum(axis=1)
    return value, grad, per_cell


def continuity_terms(
    coords: np.ndarray, spans: np.ndarray, cell_weights: Optional[np.ndarray] = None
) -> tuple[float, np.ndarray, np.ndarray]:
    """Continuity loss over ordered pairs (i starts where j ends + 1)."""
    n = len(coords)
    grad = np.zeros_like(coords)
    per_cell = np.zeros(n)
    omega = _pair_weights(n, cell_weights)
    value = 0.0
    for (s_col, e_col, start_c, end_c) in ((SR, ER, Y1, Y2), (SC, EC, X1, X2)):
        mask = spans[:, s_col][:, None] == (spans[:, e_col][None, :] + 1)
        starts = coords[:, start_c]
        ends = coords[:, end_c]
        d = starts[:, None] - ends[None, :]
        p = mask * d * d
        per_cell += 0.5 * (p.sum(axis=1) + p.sum(axis=0))
        wm = mask * omega if omega is not None else mask
        value += float((wm * d * d).sum())
        wd = wm * d
        grad[:, start_c] += 2.0 * wd.sum(axis=1)
        grad[:, end_c] -= 2.0 * wd.sum(axis=0)
    return value, grad, per_cell


def _overlap_gates(
    coords: np.ndarray, spans: Optional[np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    """Pair gates for the x and y overlap losses.

    With spans: x-loss pairs have disjoint column ranges and intersecting
    row ranges (mirror for y), so cells stacked in one column or sitting on
    a diagonal are not penalized. Without spans the gate falls back to
    'pairs overlapping along the other axis'.
    """
    n = len(coords)
    neq = ~np.eye(n, dtype=bool)
    if spans is not None:
        sr, sc, er, ec = (spans[:, k] for k in (SR, SC, ER, EC))
        col_disjoint = (ec[:, None] < sc[None, :]) | (ec[None, :] < sc[:, None])
        row_disjoint = (er[:, None] < sr[None, :]) | (er[None, :] < sr[:, None])
        col_meet = ~col_disjoint
        row_meet = ~row_disjoint
        return (col_disjoint & row_meet & neq), (row_disjoint & col_meet & neq)
    vx = np.minimum(coords[:, X2][:, None], coords[:, X2][None, :]) - np.maximum(
        coords[:, X1][:, None], coords[:, X1][None, :]
    )
    vy = np.minimum(coords[:, Y2][:, None], coords[:, Y2][None, :]) - np.maximum(
        coords[:, Y1][:, None], coords[:, Y1][None, :]
    )
    return ((vy > 0) & neq), ((vx > 0) & neq)


def overlap_terms(
    coords: np.ndarray,
    spans: Optional[np.ndarray] = None,
    x_weights: Optional[np.ndarray] = None,
    y_weights: Optional[np.ndarray] = None,
    literal: bool = False,
) -> tuple[float, float, np.ndarray, np.ndarray, np.ndarray]:
    """Overlap losses along x and y with one combined gradient.

    The gradient separates cleanly: the x loss only touches x coordinates
    and the y loss only y coordinates. Returns
    ``(l_x, l_y, grad, per_cell_x, per_cell_y)``.
    """
    n = len(coords)
    grad = np.zeros_like(coords)
    if literal:
        neq = ~np.eye(n, dtype=bool)
        gate_x = gate_y = neq
    else:
        gate_x, gate_y = _overlap_gates(coords, spans)

    def one_axis(lo_c: int, hi_c: int, gate: np.ndarray, w: Optional[np.ndarray]):
        lo = coords[:, lo_c]
        hi = coords[:, hi_c]
        v = np.minimum(hi[:, None], hi[None, :]) - np.maximum(lo[:, None], lo[None, :])
        h = v if literal else np.maximum(v, 0.0)
        p = gate * h * h
        per_cell = p.sum(axis=1)  # symmetric: half of row+col sums
        omega = _pair_weights(n, w)
        wg = gate * omega if omega is not None else gate.astype(float)
        value = float((wg * h * h).sum())
        t = 2.0 * wg * h
        min_side = hi[:, None] <= hi[None, :]
        max_side = lo[:, None] >= lo[None, :]
        g_hi = 2.0 * (t * min_side).sum(axis=1)
        g_lo = -2.0 * (t * max_side).sum(axis=1)
        return value, g_lo, g_hi, per_cell

    l_x, gx1, gx2, pc_x = one_axis(X1, X2, gate_x, x_weights)
    l_y, gy1, gy2, pc_y = one_axis(Y1, Y2, gate_y, y_weights)
    grad[:, X1] = gx1
    grad[:, X2] = gx2
    grad[:, Y1] = gy1
    grad[:, Y2] = gy2
    return l_x, l_y, grad, pc_x, pc_y


def continuity_loss(cells: CellList) -> tuple[float, np.ndarray]:
    coords, spans = cells_to_arrays(cells)
    if spans is None:
        raise ValueError("continuity loss requires spans")
    value, grad, _ = continuity_terms(coords, spans)
    return value, grad


def overlap_loss(cells: CellList, literal: bool = False) -> tuple[float, float, np.ndarray]:
    coords, spans = cells_to_arrays(cells)
    l_x, l_y, grad, _, _ = overlap_terms(coords, spans, literal=literal)
    return l_x, l_y, grad


def alignment_loss(cells: CellList) -> tuple[float, np.ndarray]:
    coords, spans = cells_to_arrays(cells)
    if spans is None:
        raise ValueError("alignment loss requires spans")
    value, grad, _ = alignment_terms(coords, spans)
    return value, grad


def breakdown(cells: CellList) -> LossBreakdown:
    """All four loss values for a cell list."""
    coords, spans = cells_to_arrays(cells)
    if spans is None:
        raise ValueError("loss breakdown requires spans")
    l_al, _, _ = alignment_terms(coords, spans)
    l_cl, _, _ = continuity_terms(coords, spans)
    l_x, l_y, _, _, _ = overlap_terms(coords, spans)
    return LossBreakdown(l_al, l_cl, l_x, l_y)
