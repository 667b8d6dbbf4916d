"""Rectilinear adjacency: four n x n boolean matrices recording, per cell,
its immediate left/right/top/bottom neighbor cells, plus the inverse path
back from matrices to a full table structure.

``m_r[i, j]`` means cell j is an immediate right neighbor of cell i: j's
columns start right where i's end, and their row ranges intersect. The left
and top matrices are the transposes of right and bottom.

Matrix indices follow the cell order of the structure they were built from
(or the box order handed to ``assign_indices``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import BoundingBox
from .structure import Cell, GridSpan, TableStructure, Violation, validate


class InvalidStructure(ValueError):
    """Input structure fails validation."""

    def __init__(self, message: str, violations: Sequence[Violation] = ()):
        super().__init__(message)
        self.violations = list(violations)


class NoConvergence(RuntimeError):
    """Span resolution failed to stabilize: inconsistent or cyclic matrices."""


class InconsistentGrid(ValueError):
    """Index assignment produced spans that do not tile a grid."""

    def __init__(self, message: str, violations: Sequence[Violation] = ()):
        super().__init__(message)
        self.violations = list(violations)


@dataclass(frozen=True)
class RectilinearAdjacency:
    n: int
    m_l: np.ndarray
    m_r: np.ndarray
    m_t: np.ndarray
    m_b: np.ndarray

    def __post_init__(self) -> None:
        for name in ("m_l", "m_r", "m_t", "m_b"):
            m = getattr(self, name)
            if m.shape != (self.n, self.n) or m.dtype != bool:
                raise ValueError(f"{name} must be an n x n boolean matrix")
            if np.any(np.diag(m)):
                raise ValueError(f"{name} has a nonzero diagonal")
        if not np.array_equal(self.m_l, self.m_r.T):
            raise ValueError("m_l must be the transpose of m_r")
        if not np.array_equal(self.m_t, self.m_b.T):
            raise ValueError("m_t must be the transpose of m_b")


def build_rectilinear(t: TableStructure) -> RectilinearAdjacency:
    """Immediate-neighbor matrices of a valid structure (boxes not needed)."""
    violations = validate(t, check_geometry=False)
    if violations:
        raise InvalidStructure("cannot build adjacency from invalid structure", violations)
    spans = np.array([[c.span.sr, c.span.sc, c.span.er, c.span.ec] for c in t.cells])
    sr, sc, er, ec = spans[:, 0], spans[:, 1], spans[:, 2], spans[:, 3]
    rows_meet = (sr[:, None] <= er[None, :]) & (sr[None, :] <= er[:, None])
    cols_meet = (sc[:, None] <= ec[None, :]) & (sc[None, :] <= ec[:, None])
    m_r = (sc[None, :] == ec[:, None] + 1) & rows_meet
    m_b = (sr[None, :] == er[:, None] + 1) & cols_meet
    return RectilinearAdjacency(len(t.cells), m_r.T.copy(), m_r, m_b.T.copy(), m_b)


def _neighbor_lists(m: np.ndarray) -> list[np.ndarray]:
    return [np.flatnonzero(m[i]) for i in range(m.shape[0])]


def _resolve_axis(
    before: list[np.ndarray],  # neighbors whose extent ends where mine starts
    after: list[np.ndarray],  # neighbors whose extent starts where mine ends
    side_a: list[np.ndarray],  # cross-axis neighbors (one side)
    side_b: list[np.ndarray],  # cross-axis neighbors (other side)
    history: Optional[list[tuple[np.ndarray, np.ndarray]]] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Recover start/end indices along one axis by squeezing sound lower
    bounds on the indices against sound upper bounds on the span counts
    until a fixed point.

    Phrased for rows (columns are the mirror image). Lower bounds:
      * a top neighbor j of i ends exactly where i starts: SR(i) = ER(j)+1
        (applied in both directions),
      * a bottom neighbor j starts exactly where i ends: ER(i) = SR(j)-1,
      * a horizontal neighbor j shares at least one row: ER(i) >= SR(j),
      * i spans at least as many rows as it has neighbors on either side
        (they are pairwise row-disjoint and each takes a row of i), and
        only the two outermost can stick out past i's rows,
      * cells with no bottom neighbor end at the last row seen so far,
      * ER(i) - SR(i) + 1 never exceeds the upper bound, so a grown ER
        lifts SR.
    Upper bounds on rowspan: the neighbors on one side of i tile i's rows,
    so rowspan(i) <= sum of their rowspans; iterated downward from n.
    """
    n = len(before)
    start = np.zeros(n, dtype=np.int64)
    end = np.zeros(n, dtype=np.int64)
    lb = np.ones(n, dtype=np.int64)
    ub = np.full(n, max(n, 1), dtype=np.int64)

    def side_lower(side: np.ndarray) -> int:
        # side neighbors are pairwise disjoint and each takes at least one
        # of i's rows; only the two outermost can stick out past i, so the
        # interior ones contribute their full span. Dropping the two
        # largest neighbor bounds is a conservative stand-in for dropping
        # the outermost two.
        if len(side) == 0:
            return 1
        if len(side) == 1:
            return 1
        spans = np.sort(lb[side])
        return max(len(side), int(spans.sum() - spans[-1] - spans[-2] + 2))

    for _ in range(2 * n + 8):
        changed = False
        for i in range(n):
            v = max(lb[i], side_lower(side_a[i]), side_lower(side_b[i]))
            if v != lb[i]:
                lb[i] = v
                changed = True
            for side in (side_a[i], side_b[i]):
                if len(side):
                    cap = int(ub[side].sum())
                    if cap < ub[i]:
                        ub[i] = cap
                        changed = True
        for i in range(n):
            s = start[i]
            if len(before[i]):
                s = max(s, int(end[before[i]].max()) + 1)
            s = max(s, int(end[i]) - int(ub[i]) + 1)
            e = max(int(end[i]), s + int(lb[i]) - 1)
            if len(after[i]):
                e = max(e, int(start[after[i]].max()) - 1)
            for side in (side_a[i], side_b[i]):
                if len(side):
                    e = max(e, int(start[side].max()))
            if len(before[i]):
                # reversed equality: my start pins my predecessors' ends
                for j in before[i]:
                    if end[j] < s - 1:
                        end[j] = s - 1
                        changed = True
            if s >= n or e >= n:
                raise NoConvergence("adjacency matrices imply an unbounded grid (cycle?)")
            if s != start[i] or e != end[i]:
                start[i], end[i] = s, e
                changed = True
        last = int(end.max()) if n else 0
        for i in range(n):
            if len(after[i]) == 0 and end[i] < last:
                end[i] = last
                changed = True
            if ub[i] < end[i] - start[i] + 1 or ub[i] < lb[i]:
                raise NoConvergence(
                    f"cell {i}: span bounds are contradictory (inconsistent matrices)"
                )
        if history is not None:
            history.append((start.copy(), end.copy()))
        if not changed:
            break
    else:
        raise NoConvergence(f"span resolution still changing after {2 * n + 8} sweeps")
    return start, end


def resolve_spans(adj: RectilinearAdjacency) -> tuple[list[int], list[int]]:
    """Row and column span counts implied by the adjacency matrices."""
    tops = _neighbor_lists(adj.m_t)
    bottoms = _neighbor_lists(adj.m_b)
    lefts = _neighbor_lists(adj.m_l)
    rights = _neighbor_lists(adj.m_r)
    sr, er = _resolve_axis(tops, bottoms, lefts, rights)
    sc, ec = _resolve_axis(lefts, rights, tops, bottoms)
    return (er - sr + 1).tolist(), (ec - sc + 1).tolist()


def cluster_starts(values: Sequence[float], eps: float) -> list[int]:
    """Single-linkage clustering of 1-d start coordinates: sorted values are
    split wherever consecutive ones are more than ``eps`` apart. Returns the
    cluster rank of each input value."""
    order = sorted(range(len(values)), key=lambda k: values[k])
    ranks = [0] * len(values)
    rank = 0
    for pos, k in enumerate(order):
        if pos > 0 and values[k] - values[order[pos - 1]] > eps:
            rank += 1
        ranks[k] = rank
    return ranks


def default_cluster_eps(extent: float) -> float:
    return max(2.0, 0.005 * extent)


def assign_indices(
    boxes: Sequence[BoundingBox],
    rowspan: Sequence[int],
    colspan: Sequence[int],
    eps_cluster_x: Optional[float] = None,
    eps_cluster_y: Optional[float] = None,
) -> TableStructure:
    """Grid indices from box coordinates plus resolved span counts.

    Start coordinates are clustered into the distinct row/column start
    positions; a cell's start index is its cluster's rank and its end index
    follows from the span count. Cell ids keep the input order.
    """
    if not (len(boxes) == len(rowspan) == len(colspan)):
        raise ValueError("boxes, rowspan, and colspan must have equal length")
    if eps_cluster_x is None:
        eps_cluster_x = default_cluster_eps(max(b.x2 for b in boxes) - min(b.x1 for b in boxes))
    if eps_cluster_y is None:
        eps_cluster_y = default_cluster_eps(max(b.y2 for b in boxes) - min(b.y1 for b in boxes))
    sc = cluster_starts([b.x1 for b in boxes], eps_cluster_x)
    sr = cluster_starts([b.y1 for b in boxes], eps_cluster_y)
    cells = []
    for k, b in enumerate(boxes):
        span = GridSpan(sr[k], sc[k], sr[k] + rowspan[k] - 1, sc[k] + colspan[k] - 1)
        cells.append(Cell(span=span, box=b, id=k))
    t = TableStructure(cells, max(c.span.er for c in cells) + 1, max(c.span.ec for c in cells) + 1)
    violations = validate(t, check_geometry=False)
    if violations:
        raise InconsistentGrid(
            "assigned spans do not tile the grid (cluster tolerance too coarse?): "
            + "; ".join(str(v) for v in violations[:5]),
            violations,
        )
    return t
