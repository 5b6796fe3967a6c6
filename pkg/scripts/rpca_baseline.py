"""Run the matrix RPCA baseline on a frame sequence or on default synthetic scenes.

    python3 scripts/rpca_baseline.py --seeds 5
    python3 scripts/rpca_baseline.py --input frames/ --gt gt/ --out rpca_masks/
"""

import argparse

import numpy as np

from irstd import baseline, io, metrics, synth


def score(d, gt, tr, lam):
    pred = metrics.binarize(baseline.rpca_detect(d, lam), tr)
    return pred, metrics.evaluate(pred, gt)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--input")
    ap.add_argument("--gt")
    ap.add_argument("--out")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--tr", type=float, default=0.4)
    ap.add_argument("--lam", type=float, default=None, help="default 1/sqrt(n1*n2)")
    args = ap.parse_args()

    if args.input:
        d = io.load_sequence(args.input)
        pred = metrics.binarize(baseline.rpca_detect(d, args.lam), args.tr)
        if args.out:
            io.save_masks(args.out, pred)
        if args.gt:
            r = metrics.evaluate(pred, io.load_masks(args.gt))
            print(f"iou {r.iou:.4f} f1 {r.f1:.4f} pd {r.pd:.4f} fa {r.fa:.2e}")
        return

    reports = []
    for seed in range(args.seeds):
        d, gt = synth.generate_scene(synth.default_scene(seed), seed)
        _, r = score(d, gt, args.tr, args.lam)
        reports.append((r.iou, r.pd, r.fa))
        print(f"seed {seed}: iou {r.iou:.4f} pd {r.pd:.4f} fa {r.fa:.2e}")
    a = np.mean(reports, axis=0)
    print(f"mean: iou {a[0]:.4f} pd {a[1]:.4f} fa {a[2]:.2e}")


if __name__ == "__main__":
    main()
