"""Structure-recognition scoring.

Relations are direction-typed adjacency pairs between cells. Two criteria:

* ``sec`` (standard): relations connect each non-empty cell to its nearest
  non-empty neighbor rightward and downward, skipping over empty cells.
* ``nec`` (empty-cell-aware): relations connect every cell, empty or not,
  to its immediate right and bottom neighbors, so empty-empty and
  empty-nonempty pairs count too.

Predicted cells are matched one-to-one to ground-truth cells greedily by
descending IoU above a threshold; predicted relations are rewritten into
ground-truth id space and compared as sets. Relations touching unmatched
predicted cells can never match and count as false positives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .geometry import iou
from .structure import TableStructure

CRITERIA = ("sec", "nec")


class MissingBoxes(ValueError):
    """Scoring needs geometry on both structures."""


@dataclass(frozen=True)
class AdjacencyRelation:
    """Directed adjacency between two cells; ``direction`` is 'h' for a
    rightward neighbor, 'v' for a downward one."""

    from_cell: int
    to_cell: int
    direction: str

    def canonical(self) -> tuple[int, int, str]:
        a, b = self.from_cell, self.to_cell
        return (a, b, self.direction) if a <= b else (b, a, self.direction)


@dataclass(frozen=True)
class EvalReport:
    criterion: str
    iou_threshold: float
    true_positives: int
    false_positives: int
    false_negatives: int
    precision: float
    recall: float
    f1: float
    unmatched_pred_cells: int
    unmatched_gt_cells: int

    @classmethod
    def from_counts(
        cls,
        criterion: str,
        iou_threshold: float,
        tp: int,
        fp: int,
        fn: int,
        unmatched_pred: int = 0,
        unmatched_gt: int = 0,
    ) -> "EvalReport":
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        return cls(criterion, iou_threshold, tp, fp, fn, p, r, f1, unmatched_pred, unmatched_gt)


def _check_criterion(criterion: str) -> str:
    c = criterion.lower()
    if c not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")
    return c


def extract_relations(t: TableStructure, criterion: str) -> set[AdjacencyRelation]:
    """Adjacency relations of a structure under one criterion.

    Tolerates partition holes (dropped predicted cells): walks simply skip
    uncovered positions.
    """
    criterion = _check_criterion(criterion)
    occ = t.occupancy()
    cells = t.cells
    rels: set[AdjacencyRelation] = set()

    def walk(r: int, c: int, dr: int, dc: int) -> Iterable[int]:
        while 0 <= r < t.n_rows and 0 <= c < t.n_cols:
            k = occ[r][c]
            if k != -1:
                yield k
                if dr:
                    r = cells[k].span.er
                else:
                    c = cells[k].span.ec
            r += dr
            c += dc

    for i, cell in enumerate(cells):
        if criterion == "sec" and cell.empty:
            continue
        s = cell.span
        for r in range(s.sr, s.er + 1):
            for k in walk(r, s.ec + 1, 0, 1):
                if criterion == "nec":
                    rels.add(AdjacencyRelation(cell.id, cells[k].id, "h"))
                    break
                if not cells[k].empty:
                    rels.add(AdjacencyRelation(cell.id, cells[k].id, "h"))
                    break
        for c in range(s.sc, s.ec + 1):
            for k in walk(s.er + 1, c, 1, 0):
                if criterion == "nec":
                    rels.add(AdjacencyRelation(cell.id, cells[k].id, "v"))
                    break
                if not cells[k].empty:
                    rels.add(AdjacencyRelation(cell.id, cells[k].id, "v"))
                    break
    return rels


def match_cells(
    pred: TableStructure, gt: TableStructure, iou_threshold: float
) -> dict[int, int]:
    """Greedy one-to-one matching by descending IoU; ties break on
    (gt id, pred id). Returns a pred-id to gt-id mapping."""
    if not pred.has_boxes() or not gt.has_boxes():
        raise MissingBoxes("both structures must carry boxes to match cells")
    candidates = []
    for p in pred.cells:
        for g in gt.cells:
            v = iou(p.box, g.box)
            if v >= iou_threshold:
                candidates.append((-v, g.id, p.id))
    candidates.sort()
    used_pred: set[int] = set()
    used_gt: set[int] = set()
    mapping: dict[int, int] = {}
    for neg_v, g_id, p_id in candidates:
        if p_id in used_pred or g_id in used_gt:
            continue
        mapping[p_id] = g_id
        used_pred.add(p_id)
        used_gt.add(g_id)
    return mapping


def score(
    pred: TableStructure,
    gt: TableStructure,
    criterion: str,
    iou_threshold: float = 0.6,
) -> EvalReport:
    """Relation-level precision/recall/F1 of a prediction against ground truth."""
    criterion = _check_criterion(criterion)
    mapping = match_cells(pred, gt, iou_threshold)
    pred_rels = extract_relations(pred, criterion)
    gt_set = {rel.canonical() for rel in extract_relations(gt, criterion)}
    tp = 0
    for rel in pred_rels:
        a = mapping.get(rel.from_cell)
        b = mapping.get(rel.to_cell)
        if a is None or b is None:
            continue
        key = (a, b, rel.direction) if a <= b else (b, a, rel.direction)
        if key in gt_set:
            tp += 1
    fp = len(pred_rels) - tp
    fn = len(gt_set) - tp
    return EvalReport.from_counts(
        criterion,
        iou_threshold,
        tp,
        fp,
        fn,
        unmatched_pred=len(pred.cells) - len(mapping),
        unmatched_gt=len(gt.cells) - len(mapping),
    )


def false_negative_relations(
    pred: TableStructure,
    gt: TableStructure,
    criterion: str,
    iou_threshold: float = 0.6,
) -> set[tuple[int, int, str]]:
    """Ground-truth relations the prediction misses, in gt-id space."""
    criterion = _check_criterion(criterion)
    mapping = match_cells(pred, gt, iou_threshold)
    mapped = set()
    for rel in extract_relations(pred, criterion):
        a = mapping.get(rel.from_cell)
        b = mapping.get(rel.to_cell)
        if a is not None and b is not None:
            mapped.add((a, b, rel.direction) if a <= b else (b, a, rel.direction))
    gt_set = {rel.canonical() for rel in extract_relations(gt, criterion)}
    return gt_set - mapped


def sweep(
    pred: TableStructure,
    gt: TableStructure,
    criterion: str,
    thresholds: Sequence[float],
) -> list[EvalReport]:
    """One report per IoU threshold, matching recomputed each time."""
    for th in thresholds:
        if not 0.0 < th <= 1.0:
            raise ValueError(f"threshold {th} outside (0, 1]")
    return [score(pred, gt, criterion, th) for th in thresholds]


def micro_average(reports: Sequence[EvalReport]) -> EvalReport:
    """Corpus aggregate by summing tp/fp/fn."""
    if not reports:
        raise ValueError("no reports to aggregate")
    crit = reports[0].criterion
    th = reports[0].iou_threshold
    return EvalReport.from_counts(
        crit,
        th,
        sum(r.true_positives for r in reports),
        sum(r.false_positives for r in reports),
        sum(r.false_negatives for r in reports),
        sum(r.unmatched_pred_cells for r in reports),
        sum(r.unmatched_gt_cells for r in reports),
    )


def macro_average(reports: Sequence[EvalReport]) -> EvalReport:
    """Corpus aggregate by averaging per-table precision/recall/F1."""
    if not reports:
        raise ValueError("no reports to aggregate")
    n = len(reports)
    return EvalReport(
        reports[0].criterion,
        reports[0].iou_threshold,
        sum(r.true_positives for r in reports),
        sum(r.false_positives for r in reports),
        sum(r.false_negatives for r in reports),
        sum(r.precision for r in reports) / n,
        sum(r.recall for r in reports) / n,
        sum(r.f1 for r in reports) / n,
        sum(r.unmatched_pred_cells for r in reports),
        sum(r.unmatched_gt_cells for r in reports),
    )
