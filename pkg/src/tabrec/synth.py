"""Seeded synthetic tables: ground-truth merged grids plus controllably
corrupted predictions for property tests, refinement experiments, and
metric oracles.

Generation is a pure function of the config; the PCG64 generator keyed by
the seed makes outputs reproducible byte-for-byte. Merges are attempted
right-then-down per cell in reading order and are rejected when they would
break the grid partition or erase a grid boundary entirely (a boundary with
no cell starting at it is unrepresentable in adjacency matrices, which
would make the structure unrecoverable downstream).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BoundingBox
from .structure import Cell, GridSpan, TableStructure


@dataclass(frozen=True)
class SynthConfig:
    n_rows: int
    n_cols: int
    merge_prob: float = 0.0
    empty_prob: float = 0.0
    jitter_sigma: float = 0.0
    drop_prob: float = 0.0
    cell_w: float = 60.0
    cell_h: float = 30.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("need at least one row and column")
        for name in ("merge_prob", "empty_prob", "drop_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.cell_w <= 0 or self.cell_h <= 0 or self.jitter_sigma < 0:
            raise ValueError("sizes must be positive and jitter nonnegative")


def _merge_grid(rng: np.random.Generator, cfg: SynthConfig) -> list[GridSpan]:
    spans = {(r, c): GridSpan(r, c, r, c) for r in range(cfg.n_rows) for c in range(cfg.n_cols)}
    owner = {(r, c): (r, c) for r in range(cfg.n_rows) for c in range(cfg.n_cols)}

    def alive() -> list[tuple[int, int]]:
        return sorted(spans)

    def absorb(a: tuple[int, int], b: tuple[int, int], merged: GridSpan) -> None:
        for pos in spans[b].positions():
            owner[pos] = a
        spans[a] = merged
        del spans[b]

    for key in alive():
        if key not in spans or rng.random() >= cfg.merge_prob:
            continue
        s = spans[key]
        # right merge: partner must share the exact row range
        partner = owner.get((s.sr, s.ec + 1))
        if partner is not None and partner != key:
            p = spans[partner]
            boundary = s.ec + 1
            others_start = any(
                q.sc == boundary for k2, q in spans.items() if k2 not in (key, partner)
            )
            if p.sr == s.sr and p.er == s.er and p.sc == boundary and others_start:
                absorb(key, partner, GridSpan(s.sr, s.sc, s.er, p.ec))
                continue
        # down merge: partner must share the exact column range
        partner = owner.get((s.er + 1, s.sc))
        if partner is not None and partner != key:
            p = spans[partner]
            boundary = s.er + 1
            others_start = any(
                q.sr == boundary for k2, q in spans.items() if k2 not in (key, partner)
            )
            if p.sc == s.sc and p.ec == s.ec and p.sr == boundary and others_start:
                absorb(key, partner, GridSpan(s.sr, s.sc, p.er, s.ec))
    return [spans[k] for k in sorted(spans)]


def _legal_absorbers(cells: list[Cell], victim: Cell) -> list[int]:
    out = []
    v = victim.span
    for k, c in enumerate(cells):
        if c is victim:
            continue
        s = c.span
        horizontal = s.sr == v.sr and s.er == v.er and (s.ec + 1 == v.sc or v.ec + 1 == s.sc)
        vertical = s.sc == v.sc and s.ec == v.ec and (s.er + 1 == v.sr or v.er + 1 == s.sr)
        if horizontal or vertical:
            out.append(k)
    return out


def generate(cfg: SynthConfig) -> tuple[TableStructure, TableStructure]:
    """A valid ground-truth table and a corrupted prediction of it.

    The prediction jitters every coordinate, drops cells, and simulates the
    merged-cell failure mode: a dropped empty cell's area is absorbed by a
    random rectilinear neighbor when one fits, so the neighbor's detected
    box swallows the empty region.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    spans = _merge_grid(rng, cfg)
    xs = [c * cfg.cell_w for c in range(cfg.n_cols + 1)]
    ys = [r * cfg.cell_h for r in range(cfg.n_rows + 1)]

    gt_cells = []
    for i, s in enumerate(sorted(spans, key=lambda s: (s.sr, s.sc))):
        empty = bool(rng.random() < cfg.empty_prob)
        gt_cells.append(
            Cell(
                span=s,
                box=BoundingBox(xs[s.sc], ys[s.sr], xs[s.ec + 1], ys[s.er + 1]),
                empty=empty,
                text=None if empty else f"t{i}",
                id=i,
            )
        )
    gt = TableStructure(gt_cells, cfg.n_rows, cfg.n_cols)

    pred_cells = list(gt.cells)
    if cfg.drop_prob > 0:
        for cell in list(pred_cells):
            if rng.random() >= cfg.drop_prob:
                continue
            pred_cells.remove(cell)
            if cell.empty:
                hosts = _legal_absorbers(pred_cells, cell)
                if hosts:
                    k = hosts[int(rng.integers(len(hosts)))]
                    host = pred_cells[k]
                    hs, vs = host.span, cell.span
                    merged = GridSpan(
                        min(hs.sr, vs.sr), min(hs.sc, vs.sc), max(hs.er, vs.er), max(hs.ec, vs.ec)
                    )
                    pred_cells[k] = Cell(
                        span=merged,
                        box=host.box.union(cell.box),
                        empty=host.empty,
                        text=host.text,
                        id=host.id,
                    )

    if cfg.jitter_sigma > 0 and pred_cells:
        noise = rng.normal(0.0, cfg.jitter_sigma, size=(len(pred_cells), 4))
        jittered = []
        for cell, dv in zip(pred_cells, noise):
            x1, y1, x2, y2 = (
                cell.box.x1 + dv[0],
                cell.box.y1 + dv[1],
                cell.box.x2 + dv[2],
                cell.box.y2 + dv[3],
            )
            if x2 - x1 < 0.1:  # keep boxes valid under extreme jitter
                cx = 0.5 * (x1 + x2)
                x1, x2 = cx - 0.05, cx + 0.05
            if y2 - y1 < 0.1:
                cy = 0.5 * (y1 + y2)
                y1, y2 = cy - 0.05, cy + 0.05
            jittered.append(
                Cell(span=cell.span, box=BoundingBox(x1, y1, x2, y2), empty=cell.empty, text=cell.text, id=cell.id)
            )
        pred_cells = jittered

    pred = TableStructure(pred_cells, cfg.n_rows, cfg.n_cols)
    return gt, pred
