"""Benchmarking command line: train, represent, compare.

Exit codes: 0 success, 2 invalid configuration or input, 3 numerical failure.
Flags override values from an optional key=value config file; every effective
value is echoed into the emitted report. Timing never includes file I/O.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from time import perf_counter

import numpy as np

from . import store
from .baseline import aksvd_train, omp_batch
from .data import (
    ImageFormatError,
    MatrixFormatError,
    PatchConfig,
    extract_patches,
    load_image,
    load_matrix,
    save_matrix,
)
from .linalg import DecompositionError, frobenius_error
from .onb import NumericalError
from .parallel import resolve_workers
from .sbo import (
    ENERGY_KINDS,
    REPRESENT_TILE,
    SboConfig,
    SparseCode,
    UnionDictionary,
    represent,
    sbo_train,
)

EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class UsageError(ValueError):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orthodict",
        description="Train and benchmark union-of-orthoblocks dictionaries",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_signal_args(p):
        p.add_argument("--input", help="PGM/PPM image to draw patches from")
        p.add_argument("--signals", help="ODM1 signal matrix (alternative to --input)")
        p.add_argument("--m", type=int, default=8192, help="number of patches")
        p.add_argument("--patch-edge", type=int, default=8)
        p.add_argument(
            "--normalization",
            choices=["unit-range", "unit-range-dc-removed"],
            default="unit-range",
        )

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--chunk-size", type=int, default=REPRESENT_TILE)
        p.add_argument("--config", help="key=value file; flags take precedence")
        p.add_argument("--out", required=True, help="output directory")

    train = sub.add_parser("train", help="train a dictionary and write a report")
    add_signal_args(train)
    train.add_argument("--algo", choices=["sbo", "aksvd"], default="sbo")
    train.add_argument("--s0", type=int, default=8)
    train.add_argument("--k0", type=int, default=5)
    train.add_argument("--p0", type=int, default=4096)
    train.add_argument("--r", dest="rounds", type=int, default=6)
    train.add_argument("--w", dest="worst", type=int, default=None)
    train.add_argument("--kmax", type=int, default=64)
    train.add_argument("--target-error", type=float, default=0.0)
    train.add_argument("--energy", choices=list(ENERGY_KINDS), default="squared-sum")
    train.add_argument("--n", type=int, default=128, help="atoms (aksvd)")
    train.add_argument("--iters", type=int, default=100, help="iterations (aksvd)")
    train.add_argument("--save-codes", action="store_true")
    train.add_argument("--save-signals", action="store_true")
    add_common(train)

    rep = sub.add_parser("represent", help="one timed coding pass with a saved dictionary")
    add_signal_args(rep)
    rep.add_argument("--dict", dest="dict_dir", required=True, help="directory with dict.odm")
    rep.add_argument("--s0", type=int, default=8)
    rep.add_argument("--energy", choices=list(ENERGY_KINDS), default="squared-sum")
    rep.add_argument("--save-codes", action="store_true")
    add_common(rep)

    cmp_ = sub.add_parser("compare", help="sweep dictionary sizes, emit a CSV table")
    add_signal_args(cmp_)
    cmp_.add_argument("--kmax-list", default="", help="comma-separated K values for sbo")
    cmp_.add_argument("--n-list", default="", help="comma-separated atom counts for aksvd")
    cmp_.add_argument("--s0", type=int, default=8)
    cmp_.add_argument("--k0", type=int, default=5)
    cmp_.add_argument("--p0", type=int, default=4096)
    cmp_.add_argument("--r", dest="rounds", type=int, default=6)
    cmp_.add_argument("--w", dest="worst", type=int, default=None)
    cmp_.add_argument("--target-error", type=float, default=0.0)
    cmp_.add_argument("--energy", choices=list(ENERGY_KINDS), default="squared-sum")
    cmp_.add_argument("--iters", type=int, default=100)
    add_common(cmp_)
    return parser


def _apply_config_file(parser, argv):
    """Install config-file values as parser defaults so flags still win."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return
    path = Path(known.config)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    # apply to every subparser that knows the key
    applied = set()
    for action in parser._subparsers._group_actions[0].choices.values():  # noqa: SLF001
        defaults = {}
        for act in action._actions:  # noqa: SLF001
            if act.dest in values:
                raw = values[act.dest]
                defaults[act.dest] = (
                    act.type(raw) if callable(act.type) else raw
                ) if act.const is None else raw.lower() in ("1", "true", "yes")
                applied.add(act.dest)
        if defaults:
            action.set_defaults(**defaults)
    unknown = set(values) - applied
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")


def _load_signals(args) -> tuple[np.ndarray, dict]:
    if args.signals and args.input:
        raise UsageError("pass either --signals or --input, not both")
    if args.signals:
        y = load_matrix(args.signals)
        origin = {"signals": args.signals}
    elif args.input:
        grid = load_image(args.input)
        cfg = PatchConfig(
            patch_edge=args.patch_edge,
            count=args.m,
            seed=args.seed,
            normalization=args.normalization,
        )
        y = extract_patches(grid, cfg)
        origin = {
            "input": args.input,
            "m": args.m,
            "patch_edge": args.patch_edge,
            "normalization": args.normalization,
        }
    else:
        raise UsageError("a signal source is required: --input image or --signals matrix")
    return y, origin


def _cmd_train(args) -> int:
    y, origin = _load_signals(args)
    out = Path(args.out)
    workers = resolve_workers(args.workers)

    if args.algo == "sbo":
        cfg = SboConfig(
            s0=args.s0,
            k0=args.k0,
            p0=args.p0,
            rounds=args.rounds,
            worst_size=args.worst,
            k_max=args.kmax,
            target_error=args.target_error,
            energy_kind=args.energy,
            seed=args.seed,
            chunk_size=args.chunk_size,
        )
        dictionary, code, _, report = sbo_train(y, cfg, workers=args.workers)
        meta = {"algo": "sbo", "s0": args.s0, "energy_kind": args.energy, "seed": args.seed}
    else:
        dictionary, x, report = aksvd_train(
            y,
            n=args.n,
            s0=args.s0,
            iterations=args.iters,
            seed=args.seed,
            workers=args.workers,
        )
        code = x
        meta = {"algo": "aksvd", "s0": args.s0, "seed": args.seed}

    report.config.update(origin)
    report.workers = workers
    out.mkdir(parents=True, exist_ok=True)
    store.save_dictionary(out, dictionary, extra_meta=meta)
    if args.save_codes:
        if args.algo == "sbo":
            store.save_sbo_codes(out, code)
        else:
            store.save_baseline_codes(out, code)
    if args.save_signals:
        save_matrix(out / store.SIGNALS_FILE, y)
    report.save(out / store.REPORT_FILE)
    print(
        f"{args.algo}: {report.rows[-1].dictionary_size} "
        f"{'blocks' if args.algo == 'sbo' else 'atoms'}, "
        f"rmse {report.rmse_final:.6g}, t_learn {report.t_learn:.3f}s, "
        f"t_rep {report.t_rep:.3f}s -> {out}"
    )
    return 0


def _cmd_represent(args) -> int:
    y, origin = _load_signals(args)
    dictionary, header = store.load_dictionary(args.dict_dir)
    p = header["p"]
    if y.shape[0] != p:
        raise UsageError(
            f"signal dimension {y.shape[0]} does not match dictionary p={p}"
        )
    s0 = int(header.get("s0", args.s0))
    kind = header.get("energy_kind", args.energy)
    workers = resolve_workers(args.workers)
    out = Path(args.out)

    out.mkdir(parents=True, exist_ok=True)
    if isinstance(dictionary, UnionDictionary):
        t0 = perf_counter()
        assignment, code = represent(
            y, dictionary, s0, kind, args.chunk_size, args.workers
        )
        t_rep = perf_counter() - t0
        sparse_code = SparseCode(
            block=assignment.block,
            indices=code.indices,
            values=code.values,
            energy=assignment.energy,
            residual_sq=assignment.residual_sq,
        )
        rmse = frobenius_error(y, dictionary, sparse_code) / math.sqrt(y.size)
        if args.save_codes:
            store.save_sbo_codes(out, sparse_code)
    else:
        t0 = perf_counter()
        x, _ = omp_batch(y, dictionary, s0, workers=args.workers, chunk_size=args.chunk_size)
        t_rep = perf_counter() - t0
        rmse = frobenius_error(y, dictionary, x) / math.sqrt(y.size)
        if args.save_codes:
            store.save_baseline_codes(out, x)
    result = {
        "dictionary": str(args.dict_dir),
        "format": header["format"],
        "s0": s0,
        "workers": workers,
        "t_rep": t_rep,
        "rmse": rmse,
    }
    result.update(origin)
    (out / "represent.json").write_text(json.dumps(result, indent=2) + "\n")
    print(f"represent: rmse {rmse:.6g}, t_rep {t_rep:.3f}s -> {out}")
    return 0


def _parse_int_list(text: str, what: str) -> list[int]:
    items = [part.strip() for part in text.split(",") if part.strip()]
    try:
        return [int(v) for v in items]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated integer list, got {text!r}")


def _cmd_compare(args) -> int:
    kmax_values = _parse_int_list(args.kmax_list, "--kmax-list")
    n_values = _parse_int_list(args.n_list, "--n-list")
    if not kmax_values and not n_values:
        raise UsageError("empty sweep: pass --kmax-list and/or --n-list")
    y, origin = _load_signals(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    lines = ["algo,param,t_learn,t_rep,rmse"]
    for kmax in kmax_values:
        cfg = SboConfig(
            s0=args.s0,
            k0=args.k0,
            p0=args.p0,
            rounds=args.rounds,
            worst_size=args.worst,
            k_max=kmax,
            target_error=args.target_error,
            energy_kind=args.energy,
            seed=args.seed,
            chunk_size=args.chunk_size,
        )
        dictionary, code, _, report = sbo_train(y, cfg, workers=args.workers)
        run_dir = out / f"run_sbo_k{kmax}"
        report.config.update(origin)
        run_dir.mkdir(parents=True, exist_ok=True)
        store.save_dictionary(
            run_dir, dictionary,
            extra_meta={"algo": "sbo", "s0": args.s0, "energy_kind": args.energy, "seed": args.seed},
        )
        report.save(run_dir / store.REPORT_FILE)
        lines.append(
            f"sbo,{kmax},{report.t_learn:.6f},{report.t_rep:.6f},{report.rmse_final!r}"
        )
    for n in n_values:
        dictionary, x, report = aksvd_train(
            y, n=n, s0=args.s0, iterations=args.iters, seed=args.seed, workers=args.workers
        )
        run_dir = out / f"run_aksvd_n{n}"
        report.config.update(origin)
        run_dir.mkdir(parents=True, exist_ok=True)
        store.save_dictionary(
            run_dir, dictionary, extra_meta={"algo": "aksvd", "s0": args.s0, "seed": args.seed}
        )
        report.save(run_dir / store.REPORT_FILE)
        lines.append(
            f"aksvd,{n},{report.t_learn:.6f},{report.t_rep:.6f},{report.rmse_final!r}"
        )
    (out / store.SWEEP_FILE).write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "represent":
            return _cmd_represent(args)
        return _cmd_compare(args)
    except (UsageError, ImageFormatError, MatrixFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DecompositionError, NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

if __name__ == "__main__":
    sys.exit(main())
