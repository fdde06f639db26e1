"""Training of a single orthonormal block by alternating optimization.

The coding step keeps, per signal, the largest-magnitude transform
coefficients; the update step replaces the block by the orthogonal polar
factor of Y X^T, which is optimal for the current coding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

from .linalg import orthonormality_defect, procrustes_polar, thin_svd

#: orthonormality tolerance every block must satisfy after creation/update
ORTHONORMALITY_TOL = 1e-8


class NumericalError(RuntimeError):
    """A trained block violated its orthonormality contract."""


@dataclass
class ThresholdedCode:
    """Hard-thresholded coefficients, one column per signal.

    ``indices[:, j]`` holds the kept coefficient rows for signal j in strictly
    increasing order and ``values[:, j]`` the matching coefficients. Every
    column keeps exactly min(s0, p) entries.
    """

    indices: np.ndarray  # (k, m) int64
    values: np.ndarray  # (k, m) float64

    @property
    def nnz_per_column(self) -> int:
        return self.indices.shape[0]

    @property
    def num_columns(self) -> int:
        return self.indices.shape[1]

    def to_csc(self, p: int) -> scipy.sparse.csc_array:
        """Sparse (p, m) coefficient matrix view of the code."""
        k, m = self.indices.shape
        indptr = np.arange(m + 1, dtype=np.int64) * k
        return scipy.sparse.csc_array(
            (
                self.values.ravel(order="F"),
                self.indices.ravel(order="F"),
                indptr,
            ),
            shape=(p, m),
        )


def select_top(coeffs: np.ndarray, s0: int) -> ThresholdedCode:
    """Keep the s0 largest-magnitude entries of each coefficient column.

    Ties are broken toward the lowest row index. Accepts a single vector or a
    (p, m) matrix; with s0 >= p everything is kept.
    """
    if s0 < 1:
        raise ValueError(f"s0 must be at least 1, got {s0}")
    coeffs = np.asarray(coeffs, dtype=np.float64)
    squeeze = coeffs.ndim == 1
    if squeeze:
        coeffs = coeffs[:, None]
    p = coeffs.shape[0]
    k = min(s0, p)
    # stable sort on negated magnitudes: equal magnitudes keep low rows first
    order = np.argsort(-np.abs(coeffs), axis=0, kind="stable")[:k]
    indices = np.sort(order, axis=0)
    values = np.take_along_axis(coeffs, indices, axis=0)
    return ThresholdedCode(indices.astype(np.int64), values)


def init_onb(ysub: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """Initial orthonormal block from the left singular vectors of the data.

    When the sample has fewer columns than rows, or is rank deficient, the
    missing directions are completed by Gram-Schmidt against vectors drawn
    from ``rng`` so the result is always a full orthonormal square.
    """
    ysub = np.asarray(ysub, dtype=np.float64)
    p = ysub.shape[0]
    if ysub.shape[1] == 0:
        return _complete_columns(np.empty((p, 0)), rng)
    res = thin_svd(ysub)
    scale = res.sigma[0] if res.sigma.size else 0.0
    keep = res.sigma > scale * 1e-12 if scale > 0.0 else np.zeros(res.sigma.shape, bool)
    q = _complete_columns(res.u[:, keep], rng)
    _check_block(q)
    return q


def _complete_columns(u: np.ndarray, rng: np.random.Generator | None) -> np.ndarray:
    p, r = u.shape
    if r == p:
        return np.ascontiguousarray(u)
    if rng is None:
        rng = np.random.default_rng(0)
    cols = [u[:, j] for j in range(r)]
    while len(cols) < p:
        v = rng.standard_normal(p)
        for c in cols:
            v -= (c @ v) * c
        # repeat the projection once; plain Gram-Schmidt loses orthogonality
        for c in cols:
            v -= (c @ v) * c
        norm = np.linalg.norm(v)
        if norm < 1e-8:
            continue
        cols.append(v / norm)
    return np.column_stack(cols)


def _check_block(q: np.ndarray) -> None:
    defect = orthonormality_defect(q)
    if not np.isfinite(defect) or defect > ORTHONORMALITY_TOL:
        raise NumericalError(
            f"block lost orthonormality: defect {defect:.3e} > {ORTHONORMALITY_TOL:.0e}"
        )


def sparse_outer(y: np.ndarray, code: ThresholdedCode) -> np.ndarray:
    """P = Y X^T with X given in thresholded form, without densifying X."""
    x = code.to_csc(y.shape[0])
    if x.shape[1] != y.shape[1]:
        raise ValueError(
            f"code covers {x.shape[1]} signals but the matrix has {y.shape[1]}"
        )
    return np.asarray((x @ y.T).T)


def train_onb(
    y: np.ndarray,
    q0: np.ndarray,
    s0: int,
    rounds: int,
) -> tuple[np.ndarray, ThresholdedCode]:
    """Alternating coding/update refinement of one orthonormal block.

    Runs ``rounds`` passes of hard-threshold coding followed by the polar
    update of Y X^T, then returns the block together with the coding of the
    final block. The per-round error of the matched (block, code) pair never
    increases. An empty signal set returns the block unchanged.
    """
    y = np.asarray(y, dtype=np.float64)
    q = np.asarray(q0, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError(f"initial block must be square, got {q.shape}")
    if y.shape[0] != q.shape[0]:
        raise ValueError(
            f"signals have dimension {y.shape[0]} but the block is {q.shape[0]}x{q.shape[1]}"
        )
    if rounds < 0:
        raise ValueError(f"rounds must be nonnegative, got {rounds}")
    if not np.isfinite(y).all():
        raise ValueError("signal matrix contains NaN or Inf entries")
    _check_block(q)
    if y.shape[1] == 0:
        k = min(s0, q.shape[0])
        empty = ThresholdedCode(
            np.empty((k, 0), dtype=np.int64), np.empty((k, 0), dtype=np.float64)
        )
        return q, empty
    for _ in range(rounds):
        code = select_top(q.T @ y, s0)
        q = procrustes_polar(sparse_outer(y, code))
        _check_block(q)
    return q, select_top(q.T @ y, s0)
