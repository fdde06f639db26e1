#!/usr/bin/env python3
"""Reproduce the error/time comparison tables on a test image.

Trains union dictionaries over a range of block counts and the overcomplete
baseline over a range of atom counts, then prints the combined CSV. With no
image argument a deterministic synthetic scene is generated first.

Usage:
    python scripts/run_benchmark_sweep.py [image.pgm] --out sweep_out \
        [--m 8192] [--kmax-list 8,16,24,32,64] [--n-list 64,96,128,160,256] \
        [--iters 100] [--seed 1]

The baseline sweep at the default iteration count takes tens of minutes on
one core; pass --n-list "" to skip it.
"""
import argparse
import sys
from pathlib import Path

from orthodict.cli import main as cli_main
from orthodict.data import synthetic_test_image, write_pgm


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("image", nargs="?", help="PGM/PPM input; synthesized if omitted")
    parser.add_argument("--out", default="sweep_out")
    parser.add_argument("--m", type=int, default=8192)
    parser.add_argument("--s0", type=int, default=8)
    parser.add_argument("--k0", type=int, default=5)
    parser.add_argument("--p0", type=int, default=4096)
    parser.add_argument("--r", type=int, default=6)
    parser.add_argument("--kmax-list", default="8,16,24,32,64")
    parser.add_argument("--n-list", default="")
    parser.add_argument("--iters", type=int, default=100)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.image:
        image = args.image
    else:
        image = out / "scene.pgm"
        write_pgm(image, synthetic_test_image(512, 512, seed=0))
        print(f"synthesized benchmark scene -> {image}")

    argv = [
        "compare",
        "--input", str(image),
        "--m", str(args.m),
        "--s0", str(args.s0),
        "--k0", str(args.k0),
        "--p0", str(args.p0),
        "--r", str(args.r),
        "--kmax-list", args.kmax_list,
        "--n-list", args.n_list,
        "--iters", str(args.iters),
        "--seed", str(args.seed),
        "--out", str(out),
    ]
    if args.workers is not None:
        argv += ["--workers", str(args.workers)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
