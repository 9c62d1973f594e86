"""Command-line entry point: ``metastruct <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error. Every command prints its
resolved configuration (seed included) to stderr before running. All
randomness derives from ``--seed`` through named per-stage generators.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from metastruct import __version__
from metastruct.corruption import apply_ntm, dynamic_ntm, generate_rl, make_rcl_ntm, pcl
from metastruct.ems import EmsParams, ems_refine
from metastruct.fixtures import KINDS, FixtureSpec, gen_fixture
from metastruct.igtt import IgttConfig, PredictorFailure, igtt_run
from metastruct.io import (FormatError, list_images, load_ntm, read_intensity, read_mask,
                           save_ntm, write_csv, write_heatmap, write_intensity, write_mask)
from metastruct.masks import MaskError, as_binary, infer_num_classes
from metastruct.metrics import evaluate
from metastruct.ntm import NTMError, crd, ntm_rank
from metastruct.predictor import LogisticPredictor
from metastruct.sdd import count_semantic_classes, density_curve, density_maps, outline_crossings
from metastruct.seeding import stage_rng

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
DATA_ERRORS = (FormatError, MaskError, NTMError, FileNotFoundError, ValueError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "nan" if np.isnan(v) else f"{float(v):.10g}"
    return str(v)


def _announce(command: str, args):
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
           if k not in ("func", "command")}
    print(f"metastruct {command}: " + json.dumps(cfg, sort_keys=True), file=sys.stderr)


def _dump_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --- fixture -------------------------------------------------------------

def cmd_fixture(args):
    params = {}
    if args.kind == "circle-in-rectangle" and args.radius is not None:
        params["radius"] = args.radius
    if args.kind == "stripes-3" and args.width is not None:
        params["width"] = args.width
    if args.kind == "blobs-with-intensity":
        if args.n_blobs is not None:
            params["n_blobs"] = args.n_blobs
        if args.radius is not None:
            params["radius"] = (args.radius, args.radius)
    out = gen_fixture(FixtureSpec(args.kind, args.size, args.seed, params))
    if isinstance(out, tuple):
        mask, intensity = out
        if args.intensity_out is None:
            raise UsageError("blobs-with-intensity needs --intensity-out")
        write_intensity(args.intensity_out, intensity)
    else:
        mask = out
    write_mask(args.out, mask)


# --- corrupt -------------------------------------------------------------

def _corruption_ntm(args, m):
    if args.ntm is not None:
        return load_ntm(args.ntm)
    if args.flip is not None:
        return make_rcl_ntm("flip", args.flip, m=m)
    if args.sample is not None:
        return make_rcl_ntm("sample", args.sample, m=m)
    if args.pair is not None:
        return make_rcl_ntm("pair", *args.pair)
    if args.dynamic is not None:
        return dynamic_ntm(m, args.dynamic, args.seed)
    return None


def cmd_corrupt(args):
    y = read_mask(args.mask, args.num_classes)
    m = args.num_classes or infer_num_classes(y)
    if args.rl is not None:
        out = generate_rl(*y.shape, args.rl, stage_rng(args.seed, "corrupt-rl"))
    elif args.pcl is not None:
        out = pcl(as_binary(y), args.pcl, args.radius)
    else:
        q = _corruption_ntm(args, m)
        if q is None:
            raise UsageError("choose one of --ntm/--flip/--sample/--pair/--dynamic/--rl/--pcl")
        out = apply_ntm(y, q, stage_rng(args.seed, "corrupt-ntm"))
        if args.save_ntm is not None:
            save_ntm(args.save_ntm, q)
    write_mask(args.out, out)


# --- ems -----------------------------------------------------------------

def cmd_ems(args):
    s = as_binary(read_mask(args.mask))
    params = EmsParams(r=args.r, p_sample=args.p_sample, seed=args.seed)
    write_mask(args.out, ems_refine(s, params, rng=stage_rng(args.seed, "ems")))


# --- analyze-sdd ---------------------------------------------------------

def cmd_analyze_sdd(args):
    y = read_mask(args.mask, args.num_classes)
    m = args.num_classes or infer_num_classes(y)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    maps = density_maps(y, args.h, m, args.normalization)
    for c in range(m):
        write_heatmap(out / f"density_class{c}.png", maps[c])
    row = y.shape[0] // 2 if args.row is None else args.row
    curves = [density_curve(maps[c], row) for c in range(m)]
    markers = set(outline_crossings(y if args.reference is None else read_mask(args.reference), row))
    header = ["x"] + [f"class{c}" for c in range(m)] + ["outline"]
    rows = [[x] + [_fmt(cv[x]) for cv in curves] + [int(x in markers)] for x in range(y.shape[1])]
    write_csv(out / "density_curve.csv", header, rows)
    summary = count_semantic_classes(y, args.h, m).to_dict()
    summary.update({"row": row, "normalization": args.normalization, "num_labels": m})
    _dump_json(out / "summary.json", summary)
    print(f"D = {summary['D']}")


# --- crd -----------------------------------------------------------------

def _parse_matrix(values, m):
    """Row-major values (row j = observed class j) into an M x M NTM."""
    vals = np.asarray(values, dtype=float)
    if m is None:
        m = int(round(np.sqrt(vals.size)))
    if vals.size != m * m:
        raise UsageError(f"--matrix needs {m * m} values, got {vals.size}")
    return vals.reshape(m, m)


def cmd_crd(args):
    if (args.ntm is None) == (args.matrix is None):
        raise UsageError("give exactly one of --ntm or --matrix")
    q = load_ntm(args.ntm) if args.ntm is not None else _parse_matrix(args.matrix, args.m)
    res = crd(q)
    rank = ntm_rank(q)
    m = q.shape[0]
    print("d   " + " ".join(f"{v:>8d}" for v in range(m)))
    for u in range(m):
        print(f"{u:<3d} " + " ".join(f"{res.table[u, v]:8.4f}" for v in range(m)))
    print(f"min d = {res.min_value:.6g} at classes {res.min_pair}")
    print(f"rank = {rank}")
    if args.json is not None:
        _dump_json(Path(args.json), {"table": res.table.tolist(), "min_pair": list(res.min_pair),
                                     "min_value": res.min_value, "rank": rank})


# --- igtt ----------------------------------------------------------------

def cmd_igtt(args):
    paths = list_images(args.images)
    if not paths:
        raise FileNotFoundError(f"no .pgm/.png images in {args.images}")
    images = [read_intensity(p) for p in paths]
    refs = None
    if args.refs is not None:
        refs = [as_binary(read_mask(Path(args.refs) / p.name)) for p in paths]
    cfg = IgttConfig(k=args.k, ems=EmsParams(r=args.r, p_sample=args.p_sample, seed=args.seed),
                     max_iters=args.epochs, lr=args.lr, seed=args.seed, use_ems=not args.no_ems,
                     fit_first=not args.predict_first, snapshot_every=args.snapshot_every)
    result = igtt_run(images, cfg, LogisticPredictor(lr=args.lr), references=refs)
    out = Path(args.out_dir)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    for p, s in zip(paths, result.selections):
        write_mask(out / "masks" / p.name, s)
    if args.snapshot_every:
        for epoch in range(args.snapshot_every, args.epochs + 1, args.snapshot_every):
            d = out / "snapshots" / f"epoch{epoch:03d}"
            d.mkdir(parents=True, exist_ok=True)
            for p, y in zip(paths, result.trajectory[epoch]):
                write_mask(d / p.name, y)
    rows = []
    for e, chosen in enumerate(result.selected_index, start=1):
        for i, p in enumerate(paths):
            rec = {"epoch": e, "image": p.name, "selected": chosen[i]}
            if refs is not None:
                rep = result.metrics[(e - 1) * len(paths) + i]
                rec.update({k: rep[k] for k in ("dice", "iou", "accuracy", "auc")})
            rows.append(rec)
    header = list(rows[0])
    write_csv(out / "metrics.csv", header, [[_fmt(r[k]) for k in header] for r in rows])
    _dump_json(out / "predictor.json", result.predictor.state())
    if refs is not None:
        last = [r for r in rows if r["epoch"] == args.epochs]
        print(f"final mean dice = {np.mean([r['dice'] for r in last]):.4f}")


# --- metrics -------------------------------------------------------------

def _pairs(pred, ref):
    pred, ref = Path(pred), Path(ref)
    if pred.is_dir() != ref.is_dir():
        raise UsageError("--pred and --ref must both be files or both be directories")
    if not pred.is_dir():
        return [(pred, ref)]
    names = [p.name for p in list_images(pred)]
    if not names:
        raise FileNotFoundError(f"no .pgm/.png images in {pred}")
    return [(pred / n, ref / n) for n in names]


def cmd_metrics(args):
    rows = []
    for p_path, r_path in _pairs(args.pred, args.ref):
        pred = as_binary(read_mask(p_path))
        ref = as_binary(read_mask(r_path))
        prob = None
        if args.prob is not None:
            prob_dir = Path(args.prob)
            prob = read_intensity(prob_dir / p_path.name if prob_dir.is_dir() else prob_dir)
        rep = evaluate(pred, ref, prob=prob).as_dict()
        rows.append([p_path.name] + [rep[k] for k in ("dice", "iou", "accuracy", "auc")])
    table = [[r[0]] + [_fmt(v) if v is not None else "" for v in r[1:]] for r in rows]
    means = ["mean"]
    for k in range(1, 5):
        vals = [r[k] for r in rows if r[k] is not None]
        means.append(_fmt(float(np.nanmean(vals))) if vals else "")
    header = ["image", "dice", "iou", "accuracy", "auc"]
    if args.out is None:
        write_csv(sys.stdout, header, table + [means])
    else:
        write_csv(args.out, header, table + [means])


# --- parser --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="metastruct", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fixture", help="write a synthetic mask (and intensity image)")
    p.add_argument("--kind", choices=KINDS, default="circle-in-rectangle")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radius", type=int, help="circle radius, or fixed blob radius")
    p.add_argument("--width", type=int, help="stripes-3 image width")
    p.add_argument("--n-blobs", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--intensity-out", type=Path)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("corrupt", help="synthesize a noisy label from a clean mask")
    p.add_argument("--mask", type=Path, required=True)
    p.add_argument("--num-classes", type=int)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--ntm", type=Path, help="NTM JSON file")
    g.add_argument("--flip", type=float, metavar="P_FLIP")
    g.add_argument("--sample", type=float, metavar="P_SAMPLE")
    g.add_argument("--pair", type=float, nargs=2, metavar=("P01", "P10"))
    g.add_argument("--dynamic", type=int, metavar="EPOCH", help="random full-rank NTM for an epoch")
    g.add_argument("--rl", type=float, metavar="P_GENERATE")
    g.add_argument("--pcl", choices=("dilate", "erode", "skeleton"))
    p.add_argument("--radius", type=int, default=2, help="PCL structuring-element radius")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save-ntm", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("ems", help="skeletonize, shift and subsample a binary mask")
    p.add_argument("--mask", type=Path, required=True)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--p-sample", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_ems)

    p = sub.add_parser("analyze-sdd", help="density heatmaps, curve and meta-structure count")
    p.add_argument("--mask", type=Path, required=True)
    p.add_argument("--reference", type=Path, help="clean mask for outline markers")
    p.add_argument("--h", type=int, default=8)
    p.add_argument("--num-classes", type=int)
    p.add_argument("--normalization", choices=("local", "global"), default="local")
    p.add_argument("--row", type=int)
    p.add_argument("--seed", type=int, default=0, help="unused; recorded for provenance")
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(func=cmd_analyze_sdd)

    p = sub.add_parser("crd", help="pairwise complete randomization distances and rank")
    p.add_argument("--ntm", type=Path)
    p.add_argument("--matrix", type=float, nargs="+", help="row-major entries")
    p.add_argument("--m", type=int)
    p.add_argument("--json", type=Path)
    p.set_defaults(func=cmd_crd)

    p = sub.add_parser("igtt", help="unsupervised binary segmentation of an image folder")
    p.add_argument("--images", type=Path, required=True)
    p.add_argument("--refs", type=Path, help="reference masks (same file names)")
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--p-sample", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snapshot-every", type=int, default=0, metavar="N")
    p.add_argument("--no-ems", action="store_true", help="use the selected candidate directly")
    p.add_argument("--predict-first", action="store_true", help="predict before fitting each epoch")
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(func=cmd_igtt)

    p = sub.add_parser("metrics", help="Dice / IoU / accuracy / AUC per image pair")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--ref", type=Path, required=True)
    p.add_argument("--prob", type=Path, help="probability images for AUC")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_metrics)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _announce(args.command, args)
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except PredictorFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: no such file or directory: {exc.filename or exc}", file=sys.stderr)
        return EXIT_DATA
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
