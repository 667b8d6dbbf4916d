"""Ground-truth and prediction pre/post-processing.

``normalize_ground_truth`` turns content-box annotations (smallest
rectangles around text) into an alignment-constrained cell grid: interior
grid boundaries sit midway between the content that ends on one side and
the content that starts on the other, outer boundaries pad the extreme
content edges, and every grid position the annotations leave uncovered
becomes a one-by-one empty cell.

``snap_to_word_boxes`` nudges grid boundaries off word boxes so no cell
edge cuts through text, then rebuilds all cell boxes from the adjusted
boundaries.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

from .geometry import BoundingBox
from .structure import (
    Cell,
    GridSpan,
    TableStructure,
    boxes_from_boundaries,
    grid_boundaries,
)

logger = logging.getLogger(__name__)

DEFAULT_PAD = 2.0


class BoundaryConflict(ValueError):
    """Content from adjacent rows/columns overlaps: no boundary fits between."""


class UnanchoredBoundary(ValueError):
    """A boundary has no content anywhere that could anchor or interpolate it."""


class UnresolvableSnap(RuntimeError):
    """A word box cannot be avoided by moving the boundary it straddles."""


@dataclass(frozen=True)
class ContentAnnotation:
    """One annotated cell: the smallest rectangle around its content plus
    its grid span."""

    box: BoundingBox
    span: GridSpan
    text: Optional[str] = None


@dataclass(frozen=True)
class WordBox:
    box: BoundingBox
    text: Optional[str] = None


def _axis_boundaries(
    anns: Sequence[ContentAnnotation],
    n: int,
    pad: float,
    axis: str,
) -> list[float]:
    """Boundary coordinates along one axis.

    Interior boundary k: midpoint between the content ending at k-1 and the
    content starting at k; one-sided boundaries sit ``pad`` past the content
    edge; anchorless interior boundaries are interpolated between their
    anchored neighbors. Outer boundaries pad the extreme content edges of
    the first/last row or column and cannot be interpolated.
    """
    if axis == "col":
        starts = lambda a: a.span.sc
        ends = lambda a: a.span.ec
        lo = lambda a: a.box.x1
        hi = lambda a: a.box.x2
    else:
        starts = lambda a: a.span.sr
        ends = lambda a: a.span.er
        lo = lambda a: a.box.y1
        hi = lambda a: a.box.y2

    vals: list[Optional[float]] = []
    for k in range(n + 1):
        left = [hi(a) for a in anns if ends(a) == k - 1]
        right = [lo(a) for a in anns if starts(a) == k]
        if k == 0:
            vals.append(min(right) - pad if right else None)
        elif k == n:
            vals.append(max(left) + pad if left else None)
        elif left and right:
            l, r = max(left), min(right)
            if l > r:
                raise BoundaryConflict(
                    f"{axis} boundary {k}: content ending at {l:g} overlaps content starting at {r:g}"
                )
            vals.append(0.5 * (l + r))
        elif left:
            vals.append(max(left) + pad)
        elif right:
            vals.append(min(right) - pad)
        else:
            vals.append(None)

    if vals[0] is None or vals[-1] is None:
        side = "first" if vals[0] is None else "last"
        raise UnanchoredBoundary(f"no content anchors the {side} {axis} boundary")
    k = 0
    while k <= n:
        if vals[k] is None:
            lo_i = k - 1
            hi_i = k
            while vals[hi_i] is None:
                hi_i += 1
            for j in range(k, hi_i):
                frac = (j - lo_i) / (hi_i - lo_i)
                vals[j] = vals[lo_i] + frac * (vals[hi_i] - vals[lo_i])
            k = hi_i
        k += 1
    out = [float(v) for v in vals]
    for k in range(n):
        if not out[k] < out[k + 1]:
            raise BoundaryConflict(
                f"{axis} boundaries not strictly increasing at {k}: {out[k]:g} >= {out[k + 1]:g}"
            )
    return out


def normalize_ground_truth(
    annotations: Sequence[ContentAnnotation],
    n_rows: int,
    n_cols: int,
    pad: float = DEFAULT_PAD,
) -> TableStructure:
    """Content annotations to a full alignment-constrained cell grid.

    Every annotated cell's box becomes the exact rectangle of its span's
    boundaries; every uncovered grid position becomes a one-by-one empty
    cell. The output satisfies the alignment constraints exactly.
    """
    if not annotations:
        raise UnanchoredBoundary("no annotations: nothing anchors any boundary")
    covered: dict[tuple[int, int], int] = {}
    for k, a in enumerate(annotations):
        if a.span.er >= n_rows or a.span.ec >= n_cols:
            raise ValueError(f"annotation {k} span {a.span} exceeds {n_rows}x{n_cols} grid")
        for pos in a.span.positions():
            if pos in covered:
                raise ValueError(f"annotations {covered[pos]} and {k} both cover {pos}")
            covered[pos] = k

    col_xs = _axis_boundaries(annotations, n_cols, pad, "col")
    row_ys = _axis_boundaries(annotations, n_rows, pad, "row")

    cells = [
        Cell(
            span=a.span,
            box=BoundingBox(col_xs[a.span.sc], row_ys[a.span.sr], col_xs[a.span.ec + 1], row_ys[a.span.er + 1]),
            empty=False,
            text=a.text,
        )
        for a in annotations
    ]
    for r in range(n_rows):
        for c in range(n_cols):
            if (r, c) not in covered:
                cells.append(
                    Cell(
                        span=GridSpan(r, c, r, c),
                        box=BoundingBox(col_xs[c], row_ys[r], col_xs[c + 1], row_ys[r + 1]),
                        empty=True,
                    )
                )
    return TableStructure(cells, n_rows, n_cols)


def _snap_axis(
    bounds: list[float],
    cross_bounds: list[float],
    cells: Sequence[Cell],
    words: Sequence[WordBox],
    axis: str,
    strict: bool,
) -> tuple[list[float], list[str]]:
    """Move boundaries along one axis off any word they cut.

    A word blocks boundary k only where k is a real cell edge: some cell
    starts at k or ends at k-1 with a cross-axis range overlapping the
    word (interior boundaries crossed by a spanning cell's own text are
    left alone). The boundary moves to the nearest word edge that clears
    every offending word while keeping boundaries strictly ordered; ties
    go to the smaller coordinate.
    """
    if axis == "col":
        w_lo, w_hi = (lambda w: w.box.x1), (lambda w: w.box.x2)
        c_lo, c_hi = (lambda w: w.box.y1), (lambda w: w.box.y2)
        s_start, s_end = (lambda c: c.span.sc), (lambda c: c.span.ec)
        cs_start, cs_end = (lambda c: c.span.sr), (lambda c: c.span.er)
    else:
        w_lo, w_hi = (lambda w: w.box.y1), (lambda w: w.box.y2)
        c_lo, c_hi = (lambda w: w.box.x1), (lambda w: w.box.x2)
        s_start, s_end = (lambda c: c.span.sr), (lambda c: c.span.er)
        cs_start, cs_end = (lambda c: c.span.sc), (lambda c: c.span.ec)

    out = list(bounds)
    problems: list[str] = []
    for k in range(len(out)):
        def offenders(b: float) -> list[WordBox]:
            hits = []
            for w in words:
                if not (w_lo(w) < b < w_hi(w)):
                    continue
                for c in cells:
                    if s_start(c) == k or s_end(c) == k - 1:
                        y1 = cross_bounds[cs_start(c)]
                        y2 = cross_bounds[cs_end(c) + 1]
                        if min(y2, c_hi(w)) - max(y1, c_lo(w)) > 0:
                            hits.append(w)
                            break
            return hits

        hit = offenders(out[k])
        if not hit:
            continue
        lo_lim = out[k - 1] if k > 0 else -float("inf")
        hi_lim = out[k + 1] if k + 1 < len(out) else float("inf")
        candidates = sorted({edge for w in hit for edge in (w_lo(w), w_hi(w))})
        viable = [
            c
            for c in candidates
            if lo_lim < c < hi_lim and not offenders(c)
        ]
        if not viable:
            msg = (
                f"{axis} boundary {k} at {out[k]:g} cannot clear word(s) "
                f"{[ (w_lo(w), w_hi(w)) for w in hit ]}; left unchanged"
            )
            if strict:
                raise UnresolvableSnap(msg)
            problems.append(msg)
            logger.warning(msg)
            continue
        out[k] = min(viable, key=lambda c: (abs(c - out[k]), c))
    return out, problems


def snap_to_word_boxes(
    t: TableStructure, words: Sequence[WordBox], strict: bool = False
) -> TableStructure:
    """Move grid boundaries off word boxes and rebuild all cell boxes.

    Idempotent: a boundary resting exactly on a word edge is not inside the
    word. Unresolvable boundaries are reported (raised when ``strict``) and
    left unchanged.
    """
    row_ys, col_xs = grid_boundaries(t)
    new_xs, _ = _snap_axis(col_xs, row_ys, t.cells, words, "col", strict)
    new_ys, _ = _snap_axis(row_ys, col_xs, t.cells, words, "row", strict)
    spans = [c.span for c in t.cells]
    boxes = boxes_from_boundaries(spans, new_ys, new_xs)
    cells = [
        Cell(span=c.span, box=b, empty=c.empty, text=c.text, id=c.id)
        for c, b in zip(t.cells, boxes)
    ]
    return TableStructure(cells, t.n_rows, t.n_cols)
