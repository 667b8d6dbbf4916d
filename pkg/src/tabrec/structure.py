"""Logical table model: cells with grid spans, and the validity rules that
tie same-row/same-column cells to shared boundary coordinates.

A ``TableStructure`` is valid when its cell spans partition the full
``n_rows x n_cols`` grid and, when boxes are present, the boxes realize the
alignment constraints:

  (i)   cells starting (ending) in the same row share start-y (end-y),
  (ii)  cells starting (ending) in the same column share start-x (end-x),
  (iii) a cell starting at column c starts at the end-x of column c-1,
  (iv)  a cell starting at row r starts at the end-y of row r-1,
  (v)   no two cell boxes overlap.

``validate`` reports violations as data; construction itself only enforces
local per-value invariants so that imperfect structures (e.g. raw
detections with dropped cells) remain representable and scorable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

from .geometry import BoundingBox, extent_overlap_x, extent_overlap_y

DEFAULT_EPS_ALIGN = 1.0
DEFAULT_EPS_OVERLAP = 0.5


class StructureInvalid(ValueError):
    """A structure failed validation where a valid one was required."""

    def __init__(self, message: str, violations: Sequence["Violation"] = ()):
        super().__init__(message)
        self.violations = list(violations)


class InconsistentAlignment(ValueError):
    """No boundary assignment reproduces all boxes within tolerance."""


@dataclass(frozen=True)
class GridSpan:
    """Start/end row and column indices of a cell, inclusive and 0-based."""

    sr: int
    sc: int
    er: int
    ec: int

    def __post_init__(self) -> None:
        if self.sr < 0 or self.sc < 0:
            raise ValueError(f"negative span indices: {self}")
        if self.er < self.sr or self.ec < self.sc:
            raise ValueError(f"inverted span: {self}")

    @property
    def rowspan(self) -> int:
        return self.er - self.sr + 1

    @property
    def colspan(self) -> int:
        return self.ec - self.sc + 1

    def positions(self) -> Iterable[tuple[int, int]]:
        for r in range(self.sr, self.er + 1):
            for c in range(self.sc, self.ec + 1):
                yield (r, c)


@dataclass(frozen=True)
class Cell:
    """One table cell. Empty cells are first-class values: they take part in
    adjacency and evaluation, they just carry no text."""

    span: GridSpan
    box: Optional[BoundingBox] = None
    empty: bool = False
    text: Optional[str] = None
    id: Optional[int] = None

    def __post_init__(self) -> None:
        if self.empty and self.text is not None:
            raise ValueError(f"empty cell {self.id!r} must not carry text")


@dataclass(frozen=True)
class Violation:
    """One broken validity rule: ``rule`` is 'partition', one of the
    alignment rules 'i'..'v', or a local naming like 'bounds'/'ids'."""

    rule: str
    cells: tuple[int, ...]
    message: str

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return f"[{self.rule}] cells {self.cells}: {self.message}"


@dataclass(frozen=True)
class TableStructure:
    cells: tuple[Cell, ...]
    n_rows: int
    n_cols: int

    def __init__(self, cells: Sequence[Cell], n_rows: int, n_cols: int):
        if n_rows < 1 or n_cols < 1:
            raise ValueError("table must have at least one row and column")
        cells = tuple(cells)
        missing = [c.id is None for c in cells]
        if any(missing):
            if not all(missing):
                raise ValueError("either all cell ids are supplied or none")
            # reading order (sr, then sc) gives deterministic ids
            order = sorted(range(len(cells)), key=lambda k: (cells[k].span.sr, cells[k].span.sc))
            ids = [0] * len(cells)
            for rank, k in enumerate(order):
                ids[k] = rank
            cells = tuple(replace(c, id=ids[k]) for k, c in enumerate(cells))
        seen = set()
        for c in cells:
            if c.id in seen:
                raise ValueError(f"duplicate cell id {c.id}")
            seen.add(c.id)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "n_rows", n_rows)
        object.__setattr__(self, "n_cols", n_cols)

    def __eq__(self, other: object) -> bool:
        # semantic equality: cell order is irrelevant, ids are not
        if not isinstance(other, TableStructure):
            return NotImplemented
        key = lambda c: c.id
        return (
            self.n_rows == other.n_rows
            and self.n_cols == other.n_cols
            and sorted(self.cells, key=key) == sorted(other.cells, key=key)
        )

    def __hash__(self) -> int:  # pragma: no cover - rarely hashed
        return hash((self.n_rows, self.n_cols, tuple(sorted(self.cells, key=lambda c: c.id))))

    def cell_by_id(self, cell_id: int) -> Cell:
        for c in self.cells:
            if c.id == cell_id:
                return c
        raise KeyError(cell_id)

    def in_reading_order(self) -> list[Cell]:
        return sorted(self.cells, key=lambda c: (c.span.sr, c.span.sc, c.id))

    def has_boxes(self) -> bool:
        return all(c.box is not None for c in self.cells)

    def occupancy(self) -> list[list[int]]:
        """Grid of cell indices (-1 where uncovered). Positions covered twice
        keep the first covering cell; ``validate`` reports the conflict."""
        grid = [[-1] * self.n_cols for _ in range(self.n_rows)]
        for k, c in enumerate(self.cells):
            for (r, col) in c.span.positions():
                if 0 <= r < self.n_rows and 0 <= col < self.n_cols and grid[r][col] == -1:
                    grid[r][col] = k
        return grid


def validate(
    t: TableStructure,
    eps_align: float = DEFAULT_EPS_ALIGN,
    eps_overlap: float = DEFAULT_EPS_OVERLAP,
    check_geometry: bool = True,
) -> list[Violation]:
    """Check the grid-partition invariant and alignment constraints (i)-(v).

    Returns an empty list iff the structure is valid. Geometric checks run
    only when every cell carries a box (and ``check_geometry`` is left on).
    """
    out: list[Violation] = []

    for c in t.cells:
        s = c.span
        if s.er >= t.n_rows or s.ec >= t.n_cols:
            out.append(Violation("bounds", (c.id,), f"span {s} exceeds {t.n_rows}x{t.n_cols} grid"))

    covers: dict[tuple[int, int], list[int]] = {}
    for c in t.cells:
        for pos in c.span.positions():
            covers.setdefault(pos, []).append(c.id)
    for r in range(t.n_rows):
        for col in range(t.n_cols):
            ids = covers.get((r, col), [])
            if not ids:
                out.append(Violation("partition", (), f"position ({r}, {col}) uncovered"))
            elif len(ids) > 1:
                out.append(
                    Violation("partition", tuple(ids), f"position ({r}, {col}) covered {len(ids)} times")
                )

    if not check_geometry or not t.has_boxes():
        return out

    out.extend(_boundary_violations(t, eps_align, axis="row"))
    out.extend(_boundary_violations(t, eps_align, axis="col"))

    cells = t.cells
    for i in range(len(cells)):
        for j in range(i + 1, len(cells)):
            a, b = cells[i].box, cells[j].box
            if extent_overlap_x(a, b) > eps_overlap and extent_overlap_y(a, b) > eps_overlap:
                out.append(
                    Violation("v", (cells[i].id, cells[j].id), "cell boxes overlap beyond tolerance")
                )
    return out


def _boundary_members(t: TableStructure, axis: str, k: int) -> list[tuple[Cell, float, str]]:
    """Cells touching grid boundary ``k``: enders first, then starters,
    each group in cell-id order."""
    enders, starters = [], []
    for c in sorted(t.cells, key=lambda c: c.id):
        if axis == "row":
            if c.span.er == k - 1:
                enders.append((c, c.box.y2, "end"))
            if c.span.sr == k:
                starters.append((c, c.box.y1, "start"))
        else:
            if c.span.ec == k - 1:
                enders.append((c, c.box.x2, "end"))
            if c.span.sc == k:
                starters.append((c, c.box.x1, "start"))
    return enders + starters


def _boundary_violations(t: TableStructure, eps: float, axis: str) -> list[Violation]:
    out = []
    n = t.n_rows if axis == "row" else t.n_cols
    same_rule = "i" if axis == "row" else "ii"
    cross_rule = "iv" if axis == "row" else "iii"
    for k in range(n + 1):
        members = _boundary_members(t, axis, k)
        if not members:
            continue
        ref_cell, ref_val, ref_kind = members[0]
        for cell, val, kind in members[1:]:
            if abs(val - ref_val) > eps:
                rule = same_rule if kind == ref_kind else cross_rule
                coord = ("y" if axis == "row" else "x") + ("1" if kind == "start" else "2")
                out.append(
                    Violation(
                        rule,
                        (cell.id, ref_cell.id),
                        f"{axis} boundary {k}: {coord}={val:g} does not match {ref_val:g}",
                    )
                )
    return out


def grid_boundaries(
    t: TableStructure, eps_align: float = DEFAULT_EPS_ALIGN
) -> tuple[list[float], list[float]]:
    """Recover the shared boundary coordinates of a valid boxed structure.

    Returns ``(row_ys, col_xs)`` with ``n_rows + 1`` and ``n_cols + 1``
    strictly increasing values such that every cell box is the rectangle
    spanned by its span's boundaries. Boundaries crossed only by spanning
    cells are interpolated between their anchored neighbors.
    """
    if not t.has_boxes():
        raise InconsistentAlignment("structure has cells without boxes")
    rows = _axis_boundaries(t, "row", eps_align)
    cols = _axis_boundaries(t, "col", eps_align)
    return rows, cols


def _axis_boundaries(t: TableStructure, axis: str, eps: float) -> list[float]:
    n = t.n_rows if axis == "row" else t.n_cols
    vals: list[Optional[float]] = []
    for k in range(n + 1):
        members = _boundary_members(t, axis, k)
        if not members:
            vals.append(None)
            continue
        coords = sorted(v for _, v, _ in members)
        mid = coords[len(coords) // 2]
        for cell, v, kind in members:
            if abs(v - mid) > eps:
                raise InconsistentAlignment(
                    f"{axis} boundary {k}: cell {cell.id} {kind}s at {v:g}, expected about {mid:g}"
                )
        vals.append(mid)
    # interpolate unanchored interior boundaries (outer ones are always
    # anchored: some cell starts at 0 and some ends at n-1 in a partition)
    if vals[0] is None or vals[-1] is None:
        raise InconsistentAlignment(f"outer {axis} boundary unanchored")
    k = 0
    while k <= n:
        if vals[k] is None:
            lo = k - 1
            hi = k
            while vals[hi] is None:
                hi += 1
            for j in range(k, hi):
                frac = (j - lo) / (hi - lo)
                vals[j] = vals[lo] + frac * (vals[hi] - vals[lo])
            k = hi
        k += 1
    out = [float(v) for v in vals]
    for a, b in zip(out, out[1:]):
        if not a < b:
            raise InconsistentAlignment(f"{axis} boundaries not strictly increasing: {out}")
    return out


def boxes_from_boundaries(
    spans: Sequence[GridSpan], row_ys: Sequence[float], col_xs: Sequence[float]
) -> list[BoundingBox]:
    """Rectangle of each span under the given boundary coordinates."""
    return [
        BoundingBox(col_xs[s.sc], row_ys[s.sr], col_xs[s.ec + 1], row_ys[s.er + 1])
        for s in spans
    ]


def require_valid(t: TableStructure, check_geometry: bool = True, **kw) -> TableStructure:
    violations = validate(t, check_geometry=check_geometry, **kw)
    if violations:
        raise StructureInvalid(
            f"structure fails validation with {len(violations)} violation(s): "
            + "; ".join(str(v) for v in violations[:5]),
            violations,
        )
    return t
