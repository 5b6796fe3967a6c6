"""Command-line entry point: ``irstd {detect,synth,eval,flow}``.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
3 numeric failure.
"""

import argparse
import logging
import os
import sys

from threadpoolctl import threadpool_limits

from irstd import io, metrics, motion, pipeline, synth
from irstd.config import dump_config, load_config, parse_lines
from irstd.inr import NumericFailure
from irstd.tensor import read_nlt1, write_nlt1

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _load(loader, path):
    """Run a loader, reporting malformed or missing input as an I/O error."""
    try:
        return loader(path)
    except (OSError, ValueError) as err:
        raise InputError(str(err)) from err


def cmd_detect(args):
    overrides = list(args.set)
    if args.threads is not None:
        overrides.append(f"threads={args.threads}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.lambda_sparse is not None:
        overrides.append(f"solver.lambda_sparse={args.lambda_sparse}")
    if args.phi is not None:
        overrides.append(f"solver.phi={args.phi}")
    if args.config and not os.path.isfile(args.config):
        raise InputError(f"config file not found: {args.config}")
    try:
        cfg = load_config(args.config, overrides)
    except (KeyError, ValueError) as err:
        raise UsageError(f"config: {err}") from err

    d = _load(io.load_sequence, args.input)
    gt = _load(io.load_masks, args.gt) if args.gt else None
    if gt is not None and gt.shape != d.shape:
        raise InputError(f"ground truth shape {gt.shape} does not match input {d.shape}")
    enhanced = coarse = None
    if args.resume:
        enhanced = _load(read_nlt1, os.path.join(args.resume, "enhanced.nlt"))
        coarse = _load(read_nlt1, os.path.join(args.resume, "coarse.nlt"))

    out = pipeline.detect(d, cfg, gt=gt, enhanced=enhanced, coarse=coarse, state_dir=args.dump_state)
    out_dir = args.out or "."
    pipeline.write_outputs(out_dir, out)
    with open(os.path.join(out_dir, "config.txt"), "w") as fh:
        fh.write("\n".join(dump_config(cfg)) + "\n")
    if out.report is not None:
        iou, f1, pd, fa = out.report.scaled()
        print(f"IoU {iou:.2f}  F1 {f1:.2f}  Pd {pd:.2f}  Fa {fa:.2f} (x1e-5)")
    print(f"solver: {out.solve.iterations} iterations, converged={out.solve.converged}")
    return EXIT_OK


def read_scene_spec(path):
    """Flat ``key = value`` scene description; ``target`` may repeat."""
    with open(path) as fh:
        pairs = parse_lines(fh)
    opts, targets = {}, []
    for key, value in pairs:
        if key == "target":
            vals = [float(v) for v in value.split(",")]
            if not 2 <= len(vals) <= 6:
                raise ValueError("target = row,col[,v_row,v_col[,amplitude[,radius]]]")
            targets.append(synth.Target(*vals))
        else:
            opts[key] = value
    seed = int(opts.pop("seed", 0))
    n_random = int(opts.pop("random_targets", 0))
    speed = float(opts.pop("speed", 1.0))
    amplitude = float(opts.pop("amplitude", 0.6))
    radius = float(opts.pop("radius", 2.0))
    size = (int(opts.pop("n1", 64)), int(opts.pop("n2", 64)), int(opts.pop("n3", 16)))
    noise = float(opts.pop("noise", 0.01))
    scene = synth.default_scene(seed, n_random, speed, amplitude, radius, size, noise)
    scene.targets = targets + scene.targets
    if "bg_ranks" in opts:
        scene.bg_ranks = tuple(int(v) for v in opts.pop("bg_ranks").split(","))
    for key in ("bg_low", "bg_high"):
        if key in opts:
            setattr(scene, key, float(opts.pop(key)))
    if opts:
        raise ValueError(f"unknown scene keys: {sorted(opts)}")
    return scene, seed


def cmd_synth(args):
    if not os.path.isfile(args.spec):
        raise InputError(f"scene spec not found: {args.spec}")
    try:
        scene, seed = read_scene_spec(args.spec)
        images, gt = synth.generate_scene(scene, seed)
    except (KeyError, ValueError) as err:
        raise UsageError(f"scene spec: {err}") from err
    os.makedirs(args.out, exist_ok=True)
    io.save_sequence(os.path.join(args.out, "frames"), images)
    io.save_masks(os.path.join(args.out, "gt"), gt)
    write_nlt1(os.path.join(args.out, "frames.nlt"), images)
    print(f"wrote {images.shape[2]} frames of {images.shape[0]}x{images.shape[1]} to {args.out}")
    return EXIT_OK


def cmd_eval(args):
    if args.pred.endswith(".nlt"):
        pred = metrics.binarize(_load(read_nlt1, args.pred), args.tr, args.absolute)
    else:
        pred = _load(io.load_masks, args.pred)
    gt = _load(io.load_masks, args.gt)
    if pred.shape != gt.shape:
        raise InputError(f"prediction shape {pred.shape} does not match ground truth {gt.shape}")
    try:
        report = metrics.evaluate(pred, gt, args.match_radius)
    except metrics.UndefinedMetric as err:
        raise UsageError(str(err)) from err
    metrics.write_report_csv(args.out, report)
    iou, f1, pd, fa = report.scaled()
    print(f"IoU {iou:.2f}  F1 {f1:.2f}  Pd {pd:.2f}  Fa {fa:.2f} (x1e-5)")
    return EXIT_OK


def cmd_flow(args):
    d = _load(io.load_sequence, args.input)
    threads = args.threads or os.cpu_count() or 1
    mags = motion.normalize_magnitudes(motion.flow_magnitudes(d, motion.FlowConfig(), threads))
    fused = motion.dynamic_fuse(mags, args.k, args.beta)
    os.makedirs(args.out, exist_ok=True)
    io.save_sequence(args.out, fused / max(float(fused.max()), 1e-12))
    write_nlt1(os.path.join(args.out, "fused.nlt"), fused)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="irstd", description="Small moving target detection in infrared sequences.")
    p.add_argument("--threads", type=int, default=None, help="worker threads (0 = all cores)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("detect", help="run the detector on a frame sequence")
    d.add_argument("--input", required=True, help="frame directory or NLT1 file")
    d.add_argument("--config", help="key = value config file")
    d.add_argument("--gt", help="ground-truth mask directory")
    d.add_argument("--out", help="output directory (default: current)")
    d.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry; repeatable")
    d.add_argument("--seed", type=int)
    d.add_argument("--lambda", dest="lambda_sparse", type=float, help="sparsity weight")
    d.add_argument("--phi", type=float, help="TV weight")
    d.add_argument("--dump-state", help="write per-iteration solver snapshots and re_history.csv here")
    d.add_argument("--resume", help="reuse enhanced.nlt and coarse.nlt from a previous --out")
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("synth", help="generate a synthetic scene")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("eval", help="score predicted masks against ground truth")
    e.add_argument("--pred", required=True, help="mask directory, or an NLT1 target tensor")
    e.add_argument("--gt", required=True)
    e.add_argument("--out", required=True, help="report CSV")
    e.add_argument("--tr", type=float, default=0.4)
    e.add_argument("--absolute", action="store_true")
    e.add_argument("--match-radius", type=float, default=3.0)
    e.set_defaults(func=cmd_eval)

    f = sub.add_parser("flow", help="fused motion-magnitude maps")
    f.add_argument("--input", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--k", type=int, default=4)
    f.add_argument("--beta", type=float, default=0.1)
    f.set_defaults(func=cmd_flow)
    return p


def main(argv=None):
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        logging.getLogger().setLevel(logging.INFO if args.verbose else logging.WARNING)
        if args.threads is not None and args.threads < 0:
            raise UsageError("--threads must be >= 0")
        limit = args.threads if args.threads else None
        with threadpool_limits(limits=limit):
            return args.func(args)
    except UsageError as err:
        print(f"irstd: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, OSError) as err:
        print(f"irstd: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except pipeline.StageFailure as err:
        print(f"irstd: numeric failure in {err.stage}: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NumericFailure, FloatingPointError) as err:
        print(f"irstd: numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
