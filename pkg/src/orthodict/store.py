"""On-disk layout of trained artifacts.

A dictionary is an .odm file of concatenated ODM1 records plus a JSON-lines
meta file: the first line describes the whole dictionary, the following lines
give each record's byte offset. Codes are stored the same way.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.sparse

from .data import MatrixFormatError, read_record, write_record
from .sbo import SparseCode, UnionDictionary

DICT_FILE = "dict.odm"
DICT_META_FILE = "dict.meta.json"
CODES_FILE = "codes.odm"
CODES_META_FILE = "codes.meta.json"
REPORT_FILE = "report.json"
SIGNALS_FILE = "signals.odm"
SWEEP_FILE = "sweep.csv"


def _write_records(path: Path, matrices) -> list[int]:
    offsets = []
    with open(path, "wb") as f:
        pos = 0
        for a in matrices:
            offsets.append(pos)
            pos += write_record(f, a)
    return offsets


def _write_meta(path: Path, header: dict, offsets: list[int], label: str) -> None:
    lines = [json.dumps(header, sort_keys=True)]
    lines += [
        json.dumps({label: i, "offset": off}, sort_keys=True)
        for i, off in enumerate(offsets)
    ]
    path.write_text("\n".join(lines) + "\n")


def _read_meta(path: Path) -> tuple[dict, list[dict]]:
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise MatrixFormatError(f"empty meta file {path}")
    return json.loads(lines[0]), [json.loads(ln) for ln in lines[1:]]


def save_dictionary(out_dir, dictionary, extra_meta: dict | None = None) -> None:
    """Persist a union of blocks or a dense atom dictionary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(dictionary, UnionDictionary):
        offsets = _write_records(out / DICT_FILE, dictionary.blocks)
        header = {
            "format": "union-onb",
            "p": dictionary.p,
            "blocks": dictionary.num_blocks,
        }
    else:
        d = np.asarray(dictionary, dtype=np.float64)
        offsets = _write_records(out / DICT_FILE, [d])
        header = {"format": "dense", "p": d.shape[0], "atoms": d.shape[1]}
    header.update(extra_meta or {})
    _write_meta(out / DICT_META_FILE, header, offsets, "block")


def load_dictionary(out_dir) -> tuple[UnionDictionary | np.ndarray, dict]:
    """Load whatever save_dictionary wrote; returns (dictionary, header)."""
    out = Path(out_dir)
    header, entries = _read_meta(out / DICT_META_FILE)
    buf = (out / DICT_FILE).read_bytes()
    matrices = []
    pos = 0
    while pos < len(buf):
        a, pos = read_record(buf, pos)
        matrices.append(a)
    if len(entries) not in (0, len(matrices)):
        raise MatrixFormatError(
            f"meta lists {len(entries)} records, file holds {len(matrices)}"
        )
    if header["format"] == "union-onb":
        if len(matrices) != header["blocks"]:
            raise MatrixFormatError(
                f"dictionary holds {len(matrices)} blocks, meta says {header['blocks']}"
            )
        return UnionDictionary(matrices), header
    if header["format"] == "dense":
        if len(matrices) != 1:
            raise MatrixFormatError("dense dictionary file must hold one record")
        return matrices[0], header
    raise MatrixFormatError(f"unknown dictionary format {header['format']!r}")


def save_sbo_codes(out_dir, code: SparseCode) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = [
        code.block[None, :].astype(np.float64),
        code.indices.astype(np.float64),
        code.values,
        code.energy[None, :],
        code.residual_sq[None, :],
    ]
    offsets = _write_records(out / CODES_FILE, records)
    header = {
        "format": "sbo-codes",
        "signals": int(code.block.shape[0]),
        "nnz_per_signal": int(code.indices.shape[0]),
    }
    _write_meta(out / CODES_META_FILE, header, offsets, "record")


def load_sbo_codes(out_dir) -> SparseCode:
    out = Path(out_dir)
    header, _ = _read_meta(out / CODES_META_FILE)
    if header.get("format") != "sbo-codes":
        raise MatrixFormatError(f"not an sbo codes file: {header!r}")
    buf = (out / CODES_FILE).read_bytes()
    records = []
    pos = 0
    while pos < len(buf):
        a, pos = read_record(buf, pos)
        records.append(a)
    block, indices, values, energy, residual_sq = records
    return SparseCode(
        block=block.ravel().astype(np.int64),
        indices=indices.astype(np.int64),
        values=values,
        energy=energy.ravel(),
        residual_sq=residual_sq.ravel(),
    )


def save_baseline_codes(out_dir, x: scipy.sparse.csc_array) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    x = scipy.sparse.csc_array(x)
    records = [
        np.asarray(x.indptr, dtype=np.float64)[None, :],
        np.asarray(x.indices, dtype=np.float64)[None, :],
        np.asarray(x.data, dtype=np.float64)[None, :],
    ]
    offsets = _write_records(out / CODES_FILE, records)
    header = {
        "format": "dense-codes",
        "atoms": int(x.shape[0]),
        "signals": int(x.shape[1]),
    }
    _write_meta(out / CODES_META_FILE, header, offsets, "record")


def load_baseline_codes(out_dir) -> scipy.sparse.csc_array:
    out = Path(out_dir)
    header, _ = _read_meta(out / CODES_META_FILE)
    if header.get("format") != "dense-codes":
        raise MatrixFormatError(f"not a baseline codes file: {header!r}")
    buf = (out / CODES_FILE).read_bytes()
    records = []
    pos = 0
    while pos < len(buf):
        a, pos = read_record(buf, pos)
        records.append(a)
    indptr, indices, data = (r.ravel() for r in records)
    return scipy.sparse.csc_array(
        (data, indices.astype(np.int64), indptr.astype(np.int64)),
        shape=(header["atoms"], header["signals"]),
    )
