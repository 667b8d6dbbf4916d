"""Serialization for every artifact the toolkit consumes or produces.

Structure documents are XML (schema in FORMATS.md); everything else is a
line-oriented text format with a versioned header line so goldens survive
format evolution. Readers reject unknown versions and report malformed
input with line numbers. XML coordinates are written with six significant
digits for byte-stable output; the record formats use the shortest exact
float representation and round-trip bit-for-bit.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Optional, Sequence, TextIO
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .adjacency import RectilinearAdjacency
from .geometry import BoundingBox
from .metrics import EvalReport
from .normalize import ContentAnnotation, WordBox
from .refine import LossBreakdown, LossWeights, RefineTrace, TraceRecord
from .structure import Cell, GridSpan, StructureInvalid, TableStructure, validate

FORMAT_PREFIX = "tabrec"


class MalformedDocument(ValueError):
    """Input is not well-formed XML."""


class SchemaViolation(ValueError):
    """Well-formed XML that does not follow the structure schema."""


class FormatError(ValueError):
    """A record file is malformed; carries the offending line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def _fmt(x: float) -> str:
    return f"{x:.6g}"


# ---------------------------------------------------------------- XML


def emit_xml(t: TableStructure) -> str:
    """Structure document with cells in reading order."""
    if not t.has_boxes():
        raise ValueError("cannot emit a structure whose cells lack boxes")
    lines = [f'<table rows="{t.n_rows}" cols="{t.n_cols}">']
    for c in t.in_reading_order():
        s = c.span
        lines.append(
            f'  <cell id="{c.id}" start-row="{s.sr}" end-row="{s.er}"'
            f' start-col="{s.sc}" end-col="{s.ec}"'
            f' empty="{"true" if c.empty else "false"}">'
        )
        b = c.box
        lines.append(
            f'    <bbox x1="{_fmt(b.x1)}" y1="{_fmt(b.y1)}" x2="{_fmt(b.x2)}" y2="{_fmt(b.y2)}"/>'
        )
        if c.text is not None:
            lines.append(f"    <content>{escape(c.text)}</content>")
        lines.append("  </cell>")
    lines.append("</table>")
    return "\n".join(lines) + "\n"


def parse_xml(text: str, check: bool = True) -> TableStructure:
    """Parse a structure document; with ``check`` the result must validate."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as e:
        raise MalformedDocument(f"not well-formed XML at line {e.position[0]}: {e.msg}") from e
    if root.tag != "table":
        raise SchemaViolation(f"root element must be 'table', got {root.tag!r}")

    def int_attr(el: ET.Element, name: str, what: str) -> int:
        raw = el.get(name)
        if raw is None:
            raise SchemaViolation(f"{what}: missing attribute {name!r}")
        try:
            return int(raw)
        except ValueError:
            raise SchemaViolation(f"{what}: attribute {name!r} is not an integer: {raw!r}")

    def float_attr(el: ET.Element, name: str, what: str) -> float:
        raw = el.get(name)
        if raw is None:
            raise SchemaViolation(f"{what}: missing attribute {name!r}")
        try:
            return float(raw)
        except ValueError:
            raise SchemaViolation(f"{what}: attribute {name!r} is not a number: {raw!r}")

    n_rows = int_attr(root, "rows", "table")
    n_cols = int_attr(root, "cols", "table")
    cells = []
    for k, el in enumerate(root):
        if el.tag != "cell":
            raise SchemaViolation(f"unexpected element {el.tag!r} under table")
        what = f"cell #{k}"
        cid = int_attr(el, "id", what)
        span = GridSpan(
            int_attr(el, "start-row", what),
            int_attr(el, "start-col", what),
            int_attr(el, "end-row", what),
            int_attr(el, "end-col", what),
        )
        raw_empty = el.get("empty")
        if raw_empty not in ("true", "false"):
            raise SchemaViolation(f"{what}: empty must be 'true' or 'false', got {raw_empty!r}")
        box = None
        text = None
        for child in el:
            if child.tag == "bbox":
                box = BoundingBox(
                    float_attr(child, "x1", what),
                    float_attr(child, "y1", what),
                    float_attr(child, "x2", what),
                    float_attr(child, "y2", what),
                )
            elif child.tag == "content":
                text = child.text or ""
            else:
                raise SchemaViolation(f"{what}: unexpected element {child.tag!r}")
        try:
            cells.append(Cell(span=span, box=box, empty=raw_empty == "true", text=text, id=cid))
        except ValueError as e:
            raise StructureInvalid(f"{what}: {e}") from e
    try:
        t = TableStructure(cells, n_rows, n_cols)
    except ValueError as e:
        raise StructureInvalid(str(e)) from e
    if check:
        violations = validate(t)
        if violations:
            raise StructureInvalid(
                "document parses but the structure is invalid: "
                + "; ".join(str(v) for v in violations[:5]),
                violations,
            )
    return t


# ---------------------------------------------------------------- record files


class _Reader:
    def __init__(self, text: str, kind: str):
        self.lines = text.splitlines()
        self.pos = 0
        header = self.next(f"{FORMAT_PREFIX}-{kind} header")
        expected = f"{FORMAT_PREFIX}-{kind} v1"
        if header != expected:
            raise FormatError(f"expected header {expected!r}, got {header!r}", 1)

    def next(self, what: str) -> str:
        if self.pos >= len(self.lines):
            raise FormatError(f"unexpected end of file, expected {what}", len(self.lines) + 1)
        self.pos += 1
        return self.lines[self.pos - 1]

    def count(self) -> int:
        raw = self.next("record count")
        try:
            n = int(raw)
        except ValueError:
            raise FormatError(f"record count is not an integer: {raw!r}", self.pos)
        if n < 0:
            raise FormatError(f"negative record count {n}", self.pos)
        return n

    def floats(self, k: int, what: str) -> list[float]:
        raw = self.next(what)
        parts = raw.split()
        if len(parts) != k:
            raise FormatError(f"{what}: expected {k} fields, got {len(parts)}", self.pos)
        try:
            return [float(p) for p in parts]
        except ValueError:
            raise FormatError(f"{what}: non-numeric field in {raw!r}", self.pos)


def _no_tabs(text: str, what: str) -> str:
    if "\t" in text or "\n" in text:
        raise ValueError(f"{what} must not contain tabs or newlines: {text!r}")
    return text


def write_boxes(boxes: Sequence[BoundingBox]) -> str:
    lines = [f"{FORMAT_PREFIX}-boxes v1", str(len(boxes))]
    lines += [f"{b.x1!r} {b.y1!r} {b.x2!r} {b.y2!r}" for b in boxes]
    return "\n".join(lines) + "\n"


def read_boxes(text: str) -> list[BoundingBox]:
    r = _Reader(text, "boxes")
    n = r.count()
    return [BoundingBox(*r.floats(4, f"box {i} of {n}")) for i in range(n)]


def write_spans(spans: Sequence[GridSpan]) -> str:
    lines = [f"{FORMAT_PREFIX}-spans v1", str(len(spans))]
    lines += [f"{s.sr} {s.sc} {s.er} {s.ec}" for s in spans]
    return "\n".join(lines) + "\n"


def read_spans(text: str) -> list[GridSpan]:
    r = _Reader(text, "spans")
    n = r.count()
    out = []
    for i in range(n):
        vals = r.floats(4, f"span {i} of {n}")
        if any(v != int(v) for v in vals):
            raise FormatError(f"span {i}: indices must be integers", r.pos)
        out.append(GridSpan(*(int(v) for v in vals)))
    return out


def write_annotations(anns: Sequence[ContentAnnotation]) -> str:
    lines = [f"{FORMAT_PREFIX}-annotations v1", str(len(anns))]
    for a in anns:
        s, b = a.span, a.box
        text = "" if a.text is None else _no_tabs(a.text, "annotation text")
        lines.append(f"{s.sr}\t{s.sc}\t{s.er}\t{s.ec}\t{b.x1!r}\t{b.y1!r}\t{b.x2!r}\t{b.y2!r}\t{text}")
    return "\n".join(lines) + "\n"


def read_annotations(text: str) -> list[ContentAnnotation]:
    r = _Reader(text, "annotations")
    n = r.count()
    out = []
    for i in range(n):
        raw = r.next(f"annotation {i} of {n}")
        parts = raw.split("\t")
        if len(parts) != 9:
            raise FormatError(f"annotation {i}: expected 9 tab-separated fields, got {len(parts)}", r.pos)
        try:
            span = GridSpan(*(int(p) for p in parts[:4]))
            box = BoundingBox(*(float(p) for p in parts[4:8]))
        except ValueError as e:
            raise FormatError(f"annotation {i}: {e}", r.pos)
        out.append(ContentAnnotation(box=box, span=span, text=parts[8] or None))
    return out


def write_words(words: Sequence[WordBox]) -> str:
    lines = [f"{FORMAT_PREFIX}-words v1", str(len(words))]
    for w in words:
        b = w.box
        text = "" if w.text is None else _no_tabs(w.text, "word text")
        lines.append(f"{b.x1!r}\t{b.y1!r}\t{b.x2!r}\t{b.y2!r}\t{text}")
    return "\n".join(lines) + "\n"


def read_words(text: str) -> list[WordBox]:
    r = _Reader(text, "words")
    n = r.count()
    out = []
    for i in range(n):
        raw = r.next(f"word {i} of {n}")
        parts = raw.split("\t")
        if len(parts) != 5:
            raise FormatError(f"word {i}: expected 5 tab-separated fields, got {len(parts)}", r.pos)
        try:
            box = BoundingBox(*(float(p) for p in parts[:4]))
        except ValueError as e:
            raise FormatError(f"word {i}: {e}", r.pos)
        out.append(WordBox(box=box, text=parts[4] or None))
    return out


_MATRIX_ORDER = ("left", "right", "top", "bottom")


def write_adjacency(adj: RectilinearAdjacency) -> str:
    lines = [f"{FORMAT_PREFIX}-adjacency v1", str(adj.n)]
    for label, m in zip(_MATRIX_ORDER, (adj.m_l, adj.m_r, adj.m_t, adj.m_b)):
        lines.append(label)
        for row in m:
            lines.append("".join("1" if v else "0" for v in row))
    return "\n".join(lines) + "\n"


def read_adjacency(text: str, strict: bool = False) -> RectilinearAdjacency:
    """Read the four bit matrices.

    Independently predicted matrices may disagree with their transposes;
    by default they are symmetrized (an edge recorded on either side
    counts). ``strict`` rejects asymmetric input instead.
    """
    r = _Reader(text, "adjacency")
    n = r.count()
    mats = {}
    for label in _MATRIX_ORDER:
        got = r.next(f"matrix label {label!r}")
        if got != label:
            raise FormatError(f"expected matrix label {label!r}, got {got!r}", r.pos)
        m = np.zeros((n, n), dtype=bool)
        for i in range(n):
            raw = r.next(f"{label} row {i} of {n}")
            if len(raw) != n or set(raw) - {"0", "1"}:
                raise FormatError(f"{label} row {i}: expected {n} bits, got {raw!r}", r.pos)
            m[i] = [ch == "1" for ch in raw]
        mats[label] = m
    m_l, m_r, m_t, m_b = (mats[k] for k in _MATRIX_ORDER)
    if np.any(np.diag(m_l) | np.diag(m_r) | np.diag(m_t) | np.diag(m_b)):
        raise FormatError("adjacency matrices must have zero diagonals")
    symmetric = np.array_equal(m_l, m_r.T) and np.array_equal(m_t, m_b.T)
    if not symmetric:
        if strict:
            raise FormatError("asymmetric adjacency matrices rejected in strict mode")
        m_l = m_l | m_r.T
        m_r = m_l.T.copy()
        m_t = m_t | m_b.T
        m_b = m_t.T.copy()
    return RectilinearAdjacency(n, m_l, m_r, m_t, m_b)


_REPORT_COLS = (
    "name criterion iou tp fp fn precision recall f1 unmatched_pred unmatched_gt"
)


def write_reports(reports: Sequence[tuple[str, EvalReport]]) -> str:
    lines = [f"{FORMAT_PREFIX}-report v1", str(len(reports)), _REPORT_COLS]
    for name, rep in reports:
        lines.append(
            "\t".join(
                [
                    _no_tabs(name, "report name"),
                    rep.criterion,
                    repr(rep.iou_threshold),
                    str(rep.true_positives),
                    str(rep.false_positives),
                    str(rep.false_negatives),
                    repr(rep.precision),
                    repr(rep.recall),
                    repr(rep.f1),
                    str(rep.unmatched_pred_cells),
                    str(rep.unmatched_gt_cells),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def read_reports(text: str) -> list[tuple[str, EvalReport]]:
    r = _Reader(text, "report")
    n = r.count()
    cols = r.next("column header")
    if cols != _REPORT_COLS:
        raise FormatError(f"unexpected column header {cols!r}", r.pos)
    out = []
    for i in range(n):
        raw = r.next(f"report {i} of {n}")
        parts = raw.split("\t")
        if len(parts) != 11:
            raise FormatError(f"report {i}: expected 11 fields, got {len(parts)}", r.pos)
        try:
            rep = EvalReport(
                criterion=parts[1],
                iou_threshold=float(parts[2]),
                true_positives=int(parts[3]),
                false_positives=int(parts[4]),
                false_negatives=int(parts[5]),
                precision=float(parts[6]),
                recall=float(parts[7]),
                f1=float(parts[8]),
                unmatched_pred_cells=int(parts[9]),
                unmatched_gt_cells=int(parts[10]),
            )
        except ValueError as e:
            raise FormatError(f"report {i}: {e}", r.pos)
        out.append((parts[0], rep))
    return out


def write_trace(trace: RefineTrace) -> str:
    lines = [f"{FORMAT_PREFIX}-trace v1", str(len(trace.records))]
    for rec in trace.records:
        bd, w = rec.breakdown, rec.weights
        lines.append(
            f"{rec.iteration} {rec.objective!r} "
            f"{bd.l_al!r} {bd.l_cl!r} {bd.l_ol_x!r} {bd.l_ol_y!r} "
            f"{w.w_al!r} {w.w_cl!r} {w.w_ol_x!r} {w.w_ol_y!r}"
        )
    return "\n".join(lines) + "\n"


def read_trace(text: str) -> RefineTrace:
    r = _Reader(text, "trace")
    n = r.count()
    records = []
    for i in range(n):
        vals = r.floats(10, f"trace record {i} of {n}")
        if vals[0] != int(vals[0]):
            raise FormatError(f"trace record {i}: iteration must be an integer", r.pos)
        records.append(
            TraceRecord(
                iteration=int(vals[0]),
                objective=vals[1],
                breakdown=LossBreakdown(*vals[2:6]),
                weights=LossWeights(*vals[6:10]),
            )
        )
    return RefineTrace(records)


# ---------------------------------------------------------------- plain-text report table


def render_sweep_table(reports: Sequence[EvalReport]) -> str:
    """Aligned plain-text sweep table: one row per IoU threshold."""
    header = f"{'IoU':>5}  {'P':>7}  {'R':>7}  {'F1':>7}  {'TP':>6}  {'FP':>6}  {'FN':>6}"
    rows = [header, "-" * len(header)]
    for rep in reports:
        rows.append(
            f"{rep.iou_threshold:>5.2f}  {rep.precision:>7.3f}  {rep.recall:>7.3f}  "
            f"{rep.f1:>7.3f}  {rep.true_positives:>6d}  {rep.false_positives:>6d}  "
            f"{rep.false_negatives:>6d}"
        )
    return "\n".join(rows) + "\n"
