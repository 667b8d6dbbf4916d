"""Command-line interface.

Exit codes: 0 on success, 1 when inputs fail validation or a domain error
occurs, 2 on usage errors (argparse's default).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import adjacency as adj_mod
from . import io as tio
from . import metrics, normalize, refine, structure, synth


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _cells_with_spans(boxes, spans):
    if len(boxes) != len(spans):
        raise ValueError(f"{len(boxes)} boxes but {len(spans)} spans")
    return list(zip(boxes, spans))


def cmd_gen(args) -> int:
    cfg = synth.SynthConfig(
        n_rows=args.rows,
        n_cols=args.cols,
        merge_prob=args.merge_prob,
        empty_prob=args.empty_prob,
        jitter_sigma=args.jitter,
        drop_prob=args.drop,
        seed=args.seed,
    )
    gt, pred = synth.generate(cfg)
    _write(args.out_gt, tio.emit_xml(gt))
    _write(args.out_pred, tio.emit_xml(pred))
    return 0


def cmd_normalize(args) -> int:
    anns = tio.read_annotations(_read(args.annotations))
    t = normalize.normalize_ground_truth(anns, args.rows, args.cols, pad=args.pad)
    _write(args.out, tio.emit_xml(t))
    return 0


def cmd_snap(args) -> int:
    t = tio.parse_xml(_read(args.structure))
    words = tio.read_words(_read(args.words))
    _write(args.out, tio.emit_xml(normalize.snap_to_word_boxes(t, words)))
    return 0


def cmd_targets(args) -> int:
    t = tio.parse_xml(_read(args.structure), check=False)
    _write(args.out_adjacency, tio.write_adjacency(adj_mod.build_rectilinear(t)))
    return 0


def cmd_resolve(args) -> int:
    boxes = tio.read_boxes(_read(args.boxes))
    adj = tio.read_adjacency(_read(args.adjacency), strict=args.strict_adjacency)
    if adj.n != len(boxes):
        raise ValueError(f"{len(boxes)} boxes but adjacency for {adj.n} cells")
    rowspan, colspan = adj_mod.resolve_spans(adj)
    t = adj_mod.assign_indices(boxes, rowspan, colspan)
    _write(args.out_xml, tio.emit_xml(t))
    return 0


def cmd_refine(args) -> int:
    boxes = tio.read_boxes(_read(args.boxes))
    spans = tio.read_spans(_read(args.spans))
    cfg = refine.RefineConfig(
        eta=args.eta,
        iterations=args.iters,
        weights_trainable=not args.fixed_weights,
        per_cell=args.per_cell_weights,
    )
    refined, weights, trace = refine.refine_boxes(_cells_with_spans(boxes, spans), cfg)
    _write(args.out, tio.write_boxes(refined))
    if args.trace:
        _write(args.trace, tio.write_trace(trace))
    final = trace.records[-1]
    print(
        f"refined {len(refined)} boxes in {len(trace)} iterations; "
        f"objective {trace.records[0].objective:.6g} -> {final.objective:.6g}; "
        f"weights ({weights.w_al:.3f}, {weights.w_cl:.3f}, "
        f"{weights.w_ol_x:.3f}, {weights.w_ol_y:.3f})"
    )
    return 0


def _table_pairs(pred_path: str, gt_path: str) -> list[tuple[str, Path, Path]]:
    p, g = Path(pred_path), Path(gt_path)
    if p.is_dir() != g.is_dir():
        raise ValueError("--pred and --gt must both be files or both directories")
    if not p.is_dir():
        return [("-", p, g)]
    names = sorted(f.name for f in p.iterdir() if f.suffix == ".xml")
    gt_names = {f.name for f in g.iterdir() if f.suffix == ".xml"}
    missing = [n for n in names if n not in gt_names]
    if missing:
        raise ValueError(f"no ground truth for {missing}")
    return [(n, p / n, g / n) for n in names]


def cmd_evaluate(args) -> int:
    pairs = _table_pairs(args.pred, args.gt)
    rows = []
    for name, pp, gp in pairs:
        pred = tio.parse_xml(_read(str(pp)), check=False)
        gt = tio.parse_xml(_read(str(gp)), check=False)
        rows.append((name, metrics.score(pred, gt, args.criterion, args.iou)))
    if len(rows) > 1:
        agg = metrics.micro_average if args.agg == "micro" else metrics.macro_average
        rows.append(("aggregate-" + args.agg, agg([r for _, r in rows])))
    _write(args.report, tio.write_reports(rows))
    for name, rep in rows:
        print(
            f"{name}: {rep.criterion} @ IoU {rep.iou_threshold:g}: "
            f"P={rep.precision:.3f} R={rep.recall:.3f} F1={rep.f1:.3f} "
            f"(tp={rep.true_positives} fp={rep.false_positives} fn={rep.false_negatives})"
        )
    return 0


def cmd_sweep(args) -> int:
    thresholds = [float(x) for x in args.thresholds.split(",") if x]
    pairs = _table_pairs(args.pred, args.gt)
    rows = []
    per_threshold = []
    for th in thresholds:
        reps = []
        for name, pp, gp in pairs:
            pred = tio.parse_xml(_read(str(pp)), check=False)
            gt = tio.parse_xml(_read(str(gp)), check=False)
            rep = metrics.score(pred, gt, args.criterion, th)
            reps.append(rep)
            rows.append((name, rep))
        combined = metrics.micro_average(reps) if len(reps) > 1 else reps[0]
        per_threshold.append(combined)
        if len(reps) > 1:
            rows.append(("aggregate-micro", combined))
    _write(args.report, tio.write_reports(rows))
    print(tio.render_sweep_table(per_threshold), end="")
    return 0


def cmd_validate(args) -> int:
    t = tio.parse_xml(_read(args.structure), check=False)
    violations = structure.validate(t)
    if not violations:
        print("valid")
        return 0
    for v in violations:
        print(v)
    return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tabrec", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic ground truth and prediction")
    g.add_argument("--rows", type=int, required=True)
    g.add_argument("--cols", type=int, required=True)
    g.add_argument("--merge-prob", type=float, default=0.0)
    g.add_argument("--empty-prob", type=float, default=0.0)
    g.add_argument("--jitter", type=float, default=0.0)
    g.add_argument("--drop", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-gt", required=True)
    g.add_argument("--out-pred", required=True)
    g.set_defaults(func=cmd_gen)

    n = sub.add_parser("normalize", help="content annotations to an aligned cell grid")
    n.add_argument("--annotations", required=True)
    n.add_argument("--rows", type=int, required=True)
    n.add_argument("--cols", type=int, required=True)
    n.add_argument("--pad", type=float, default=normalize.DEFAULT_PAD)
    n.add_argument("--out", required=True)
    n.set_defaults(func=cmd_normalize)

    s = sub.add_parser("snap", help="move cell boundaries off word boxes")
    s.add_argument("--structure", required=True)
    s.add_argument("--words", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_snap)

    t = sub.add_parser("targets", help="rectilinear adjacency matrices of a structure")
    t.add_argument("--structure", required=True)
    t.add_argument("--out-adjacency", required=True)
    t.set_defaults(func=cmd_targets)

    r = sub.add_parser("resolve", help="boxes + adjacency matrices to a structure XML")
    r.add_argument("--boxes", required=True)
    r.add_argument("--adjacency", required=True)
    r.add_argument("--strict-adjacency", action="store_true")
    r.add_argument("--out-xml", required=True)
    r.set_defaults(func=cmd_resolve)

    f = sub.add_parser("refine", help="min-max refinement of boxes under structural losses")
    f.add_argument("--boxes", required=True)
    f.add_argument("--spans", required=True)
    f.add_argument("--eta", type=float, default=0.05)
    f.add_argument("--iters", type=int, default=500)
    f.add_argument("--fixed-weights", action="store_true")
    f.add_argument("--per-cell-weights", action="store_true")
    f.add_argument("--out", required=True)
    f.add_argument("--trace")
    f.set_defaults(func=cmd_refine)

    e = sub.add_parser("evaluate", help="relation-level scoring of a prediction")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--criterion", choices=metrics.CRITERIA, required=True)
    e.add_argument("--iou", type=float, default=0.6)
    e.add_argument("--agg", choices=("micro", "macro"), default="micro")
    e.add_argument("--report", required=True)
    e.set_defaults(func=cmd_evaluate)

    w = sub.add_parser("sweep", help="scores across IoU thresholds")
    w.add_argument("--pred", required=True)
    w.add_argument("--gt", required=True)
    w.add_argument("--criterion", choices=metrics.CRITERIA, required=True)
    w.add_argument("--thresholds", default="0.5,0.6,0.7,0.8,0.9")
    w.add_argument("--report", required=True)
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="print structure violations")
    v.add_argument("--structure", required=True)
    v.set_defaults(func=cmd_validate)

    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        ValueError,
        RuntimeError,
        OSError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def entry() -> None:  # console-script wrapper
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
