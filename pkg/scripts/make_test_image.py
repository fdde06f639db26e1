#!/usr/bin/env python3
"""Write the deterministic benchmark scene as a PGM file.

Usage: python scripts/make_test_image.py [out.pgm] [--size 512] [--seed 0]
"""
import argparse

from orthodict.data import synthetic_test_image, write_pgm


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", nargs="?", default="scene.pgm")
    parser.add_argument("--size", type=int, default=512)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    write_pgm(args.out, synthetic_test_image(args.size, args.size, seed=args.seed))
    print(f"wrote {args.size}x{args.size} scene to {args.out}")


if __name__ == "__main__":
    main()
