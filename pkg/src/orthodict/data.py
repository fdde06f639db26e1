"""Signal ingestion: netpbm images, random patch extraction, matrix files.

Images are parsed bit-exactly per the netpbm formats P2/P3 (ASCII) and
P5/P6 (binary). Color pixels collapse to grayscale with the standard luma
weights 0.299/0.587/0.114, rounded half up. Matrices travel in the "ODM1"
container: magic bytes, little-endian u64 rows and cols, then the
column-major float64 payload.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ODM_MAGIC = b"ODM1"
ODM_HEADER = struct.Struct("<QQ")

NORMALIZATIONS = ("unit-range", "unit-range-dc-removed")


class ImageFormatError(ValueError):
    """Unparseable or malformed image file; carries the byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class MatrixFormatError(ValueError):
    """Malformed ODM1 matrix container."""


@dataclass
class PatchConfig:
    """Random square-patch extraction settings."""

    patch_edge: int = 8
    count: int = 4096
    seed: int = 0
    normalization: str = "unit-range"

    def validate(self) -> None:
        if self.patch_edge < 1:
            raise ValueError(f"patch_edge must be at least 1, got {self.patch_edge}")
        if self.count < 1:
            raise ValueError(f"count must be at least 1, got {self.count}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(
                f"normalization must be one of {NORMALIZATIONS}, got {self.normalization!r}"
            )


def _skip_separators(data: bytes, pos: int) -> int:
    while pos < len(data):
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        else:
            break
    return pos


def _read_token(data: bytes, pos: int, what: str) -> tuple[bytes, int]:
    pos = _skip_separators(data, pos)
    if pos >= len(data):
        raise ImageFormatError(f"unexpected end of file while reading {what}", pos)
    end = pos
    while end < len(data) and not data[end : end + 1].isspace() and data[end : end + 1] != b"#":
        end += 1
    return data[pos:end], end


def _read_int(data: bytes, pos: int, what: str) -> tuple[int, int]:
    token, newpos = _read_token(data, pos, what)
    try:
        return int(token), newpos
    except ValueError:
        raise ImageFormatError(
            f"invalid {what} token {token!r}", newpos - len(token)
        ) from None


def load_image(path) -> np.ndarray:
    """Read a PGM or PPM file into an 8-bit grayscale grid.

    Color images are converted by luma; samples with a maxval other than 255
    are rescaled to the 0..255 range.
    """
    data = Path(path).read_bytes()
    magic, pos = _read_token(data, 0, "magic number")
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise ImageFormatError(f"unsupported netpbm magic {magic!r}", 0)
    channels = 3 if magic in (b"P3", b"P6") else 1
    binary = magic in (b"P5", b"P6")

    width, pos = _read_int(data, pos, "width")
    height, pos = _read_int(data, pos, "height")
    if width < 1 or height < 1:
        raise ImageFormatError(f"invalid image dimensions {width}x{height}", pos)
    maxval, pos = _read_int(data, pos, "maxval")
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"maxval {maxval} out of range 1..65535", pos)

    count = width * height * channels
    if binary:
        if pos >= len(data) or not data[pos : pos + 1].isspace():
            raise ImageFormatError("missing whitespace after maxval", pos)
        pos += 1
        bytes_per = 2 if maxval > 255 else 1
        need = count * bytes_per
        have = len(data) - pos
        if have < need:
            raise ImageFormatError(
                f"truncated raster: expected {need} bytes, got {have}", pos + have
            )
        dtype = ">u2" if bytes_per == 2 else np.uint8
        samples = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(
            np.float64
        )
        bad = np.nonzero(samples > maxval)[0]
        if bad.size:
            raise ImageFormatError(
                f"sample value {int(samples[bad[0]])} exceeds maxval {maxval}",
                pos + int(bad[0]) * bytes_per,
            )
    else:
        samples = np.empty(count, dtype=np.float64)
        for i in range(count):
            value, pos = _read_int(data, pos, f"sample {i}")
            if value < 0 or value > maxval:
                raise ImageFormatError(
                    f"sample value {value} outside 0..{maxval}", pos
                )
            samples[i] = value

    if channels == 3:
        rgb = samples.reshape(height, width, 3)
        gray = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    else:
        gray = samples.reshape(height, width)
    if maxval != 255:
        gray = gray * (255.0 / maxval)
    return np.floor(gray + 0.5).astype(np.uint8)


def write_pgm(path, grid: np.ndarray, binary: bool = True) -> None:
    """Write an 8-bit grayscale grid as P5 (binary) or P2 (ASCII)."""
    grid = np.asarray(grid, dtype=np.uint8)
    h, w = grid.shape
    with open(path, "wb") as f:
        if binary:
            f.write(f"P5\n{w} {h}\n255\n".encode())
            f.write(grid.tobytes(order="C"))
        else:
            f.write(f"P2\n{w} {h}\n255\n".encode())
            for row in grid:
                f.write((" ".join(str(int(v)) for v in row) + "\n").encode())


def write_ppm(path, rgb: np.ndarray, binary: bool = True) -> None:
    """Write an 8-bit RGB image as P6 (binary) or P3 (ASCII)."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    with open(path, "wb") as f:
        if binary:
            f.write(f"P6\n{w} {h}\n255\n".encode())
            f.write(rgb.tobytes(order="C"))
        else:
            f.write(f"P3\n{w} {h}\n255\n".encode())
            flat = rgb.reshape(h, w * 3)
            for row in flat:
                f.write((" ".join(str(int(v)) for v in row) + "\n").encode())


def extract_patches(grid: np.ndarray, cfg: PatchConfig) -> np.ndarray:
    """Sample random square patches and vectorize them into signal columns.

    Top-left corners are drawn uniformly (with replacement) over all valid
    positions using the configured seed. Each patch is vectorized
    column-major; unit-range normalization divides by 255 and the dc-removed
    variant additionally subtracts the patch mean. The result is a
    Fortran-ordered (patch_edge^2, count) matrix.
    """
    cfg.validate()
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale grid, got shape {grid.shape}")
    h, w = grid.shape
    e = cfg.patch_edge
    if h < e or w < e:
        raise ValueError(f"grid {h}x{w} is smaller than a {e}x{e} patch")
    rng = np.random.default_rng(cfg.seed)
    rows = rng.integers(0, h - e + 1, size=cfg.count)
    cols = rng.integers(0, w - e + 1, size=cfg.count)
    windows = np.lib.stride_tricks.sliding_window_view(grid, (e, e))[rows, cols]
    # column-major patch vectorization: entry (r, c) lands at row c*e + r
    signals = windows.transpose(0, 2, 1).reshape(cfg.count, e * e).T
    signals = signals.astype(np.float64) / 255.0
    if cfg.normalization == "unit-range-dc-removed":
        signals = signals - signals.mean(axis=0)
    return np.asfortranarray(signals)


def save_matrix(path, a: np.ndarray) -> None:
    """Write one matrix as a single ODM1 record."""
    with open(path, "wb") as f:
        write_record(f, a)


def load_matrix(path) -> np.ndarray:
    """Read exactly one ODM1 record; trailing bytes are an error."""
    buf = Path(path).read_bytes()
    a, pos = read_record(buf, 0)
    if pos != len(buf):
        raise MatrixFormatError(
            f"trailing data: file has {len(buf)} bytes, record ends at {pos}"
        )
    return a


def write_record(f, a: np.ndarray) -> int:
    """Append one ODM1 record to a binary stream; returns bytes written."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"ODM1 stores 2-D matrices, got shape {a.shape}")
    payload = a.tobytes(order="F")
    f.write(ODM_MAGIC)
    f.write(ODM_HEADER.pack(a.shape[0], a.shape[1]))
    f.write(payload)
    return len(ODM_MAGIC) + ODM_HEADER.size + len(payload)


def read_record(buf: bytes, pos: int) -> tuple[np.ndarray, int]:
    """Read one ODM1 record starting at ``pos``; returns (matrix, next pos)."""
    if buf[pos : pos + 4] != ODM_MAGIC:
        raise MatrixFormatError(
            f"bad magic {buf[pos:pos + 4]!r} at offset {pos}, expected {ODM_MAGIC!r}"
        )
    pos += 4
    if len(buf) - pos < ODM_HEADER.size:
        raise MatrixFormatError(f"truncated header at offset {pos}")
    rows, cols = ODM_HEADER.unpack_from(buf, pos)
    pos += ODM_HEADER.size
    need = rows * cols * 8
    have = len(buf) - pos
    if have < need:
        raise MatrixFormatError(
            f"truncated payload: expected {need} bytes, got {have}"
        )
    a = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=pos)
    return a.reshape(rows, cols, order="F").copy(order="F"), pos + need


def synthetic_test_image(
    height: int = 512, width: int = 512, seed: int = 0
) -> np.ndarray:
    """Deterministic textured grayscale scene for benchmarks and tests.

    Mixes smooth shading, soft blobs, oriented stripes across coarse-to-fine
    scales, hard edges and film-like grain, so 8x8 patches carry detail at
    every scale the way photographic test material does.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    yn, xn = yy / height, xx / width
    img = 0.45 + 0.25 * xn + 0.15 * np.sin(2.3 * np.pi * yn)
    for _ in range(24):
        cy, cx = rng.uniform(0, 1, 2)
        radius = rng.uniform(0.02, 0.18)
        amp = rng.uniform(-0.35, 0.35)
        img += amp * np.exp(-((yn - cy) ** 2 + (xn - cx) ** 2) / (2 * radius**2))
    # oriented stripes from coarse fabric weave up to near-pixel scale
    for _ in range(20):
        fy, fx = rng.uniform(4, 150, 2)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0.01, 0.05)
        carrier = np.sin(2 * np.pi * (fy * yn + fx * xn) + phase)
        # localize half of the textures so regions differ
        if rng.random() < 0.5:
            cy, cx = rng.uniform(0, 1, 2)
            spread = rng.uniform(0.05, 0.3)
            carrier = carrier * np.exp(
                -((yn - cy) ** 2 + (xn - cx) ** 2) / (2 * spread**2)
            )
        img += amp * carrier
    # a few hard edges so some patches are discontinuous
    for _ in range(6):
        split = rng.uniform(0.2, 0.8)
        amp = rng.uniform(-0.15, 0.15)
        if rng.random() < 0.5:
            img += amp * (xn > split)
        else:
            img += amp * (yn > split)
    img += 0.07 * rng.standard_normal(img.shape)
    lo, hi = img.min(), img.max()
    img = (img - lo) / (hi - lo)
    return np.floor(img * 255.0 + 0.5).astype(np.uint8)
