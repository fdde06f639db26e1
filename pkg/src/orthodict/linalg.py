"""Dense linear-algebra primitives: thin SVD, polar (Procrustes) update, error norms.

Matrices are plain float64 numpy arrays. Signal matrices are kept in
column-major (Fortran) order so that one signal occupies contiguous memory;
the routines here accept either layout.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg


class DecompositionError(RuntimeError):
    """A matrix decomposition failed to converge."""


class SvdResult(NamedTuple):
    """Thin SVD ``A = u @ diag(sigma) @ v.T``.

    u is p x r and v is n x r, both with orthonormal columns; sigma holds the
    r = min(p, n) singular values in non-increasing order. Column signs are
    canonical: the largest-magnitude entry of each u column is nonnegative.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray


def _canonical_signs(u: np.ndarray, vt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Flip column pairs so each u column's largest-magnitude entry is >= 0.
    # Makes the decomposition deterministic and reproducible bit for bit.
    pivot = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[pivot, np.arange(u.shape[1])] < 0.0, -1.0, 1.0)
    return u * signs, vt * signs[:, None]


def thin_svd(a: np.ndarray) -> SvdResult:
    """Thin singular value decomposition with a deterministic sign convention.

    Raises DecompositionError when neither LAPACK driver converges, and
    ValueError for empty or non-finite input.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"thin_svd expects a nonempty 2-D matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("thin_svd input contains NaN or Inf entries")
    try:
        u, sigma, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge where the slower QR-iteration
        # driver succeeds; fall back before giving up.
        try:
            u, sigma, vt = scipy.linalg.svd(
                a, full_matrices=False, lapack_driver="gesvd"
            )
        except Exception as exc:
            raise DecompositionError(
                f"SVD did not converge for a {a.shape[0]}x{a.shape[1]} matrix"
            ) from exc
    u, vt = _canonical_signs(u, vt)
    return SvdResult(u, sigma, vt.T)


def procrustes_polar(p_mat: np.ndarray) -> np.ndarray:
    """Orthogonal factor of the polar decomposition of a square matrix.

    Returns the orthogonal Q maximizing trace(Q.T @ P), i.e. the solution of
    the orthogonal Procrustes problem, via Q = U V^T from the SVD of P.
    """
    p_mat = np.asarray(p_mat, dtype=np.float64)
    if p_mat.ndim != 2 or p_mat.shape[0] != p_mat.shape[1]:
        raise ValueError(f"procrustes_polar expects a square matrix, got {p_mat.shape}")
    res = thin_svd(p_mat)
    return res.u @ res.v.T


def orthonormality_defect(q: np.ndarray) -> float:
    """Frobenius distance of Q^T Q from the identity."""
    q = np.asarray(q)
    gram = q.T @ q
    gram = gram - np.eye(q.shape[1])
    return float(np.linalg.norm(gram))


def frobenius_error(y: np.ndarray, dictionary, code) -> float:
    """Frobenius norm of the approximation error ``Y - D X``.

    Accepts the dictionary as a dense matrix, a single orthonormal block or a
    union of blocks, and the representation as a dense array, a scipy sparse
    matrix, a per-column (indices, values) code or a single-best-block sparse
    code. Structured codes are reconstructed block by block; the full dense
    coefficient matrix is never formed.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2:
        raise ValueError(f"expected a 2-D signal matrix, got shape {y.shape}")
    yhat = reconstruct(dictionary, code, y.shape)
    return float(np.linalg.norm(y - yhat))


def reconstruct(dictionary, code, expect_shape=None) -> np.ndarray:
    """Dense approximation ``D X`` for any supported dictionary/code pairing."""
    import scipy.sparse

    from .sbo import SparseCode, UnionDictionary

    if isinstance(dictionary, UnionDictionary):
        if not isinstance(code, SparseCode):
            raise ValueError("a union dictionary needs a single-best-block code")
        return _reconstruct_union(dictionary, code, expect_shape)

    d = np.asarray(dictionary, dtype=np.float64)
    if d.ndim != 2:
        raise ValueError(f"expected a 2-D dictionary, got shape {d.shape}")
    if scipy.sparse.issparse(code):
        if code.shape[0] != d.shape[1]:
            raise ValueError(
                f"dictionary has {d.shape[1]} atoms but code has {code.shape[0]} rows"
            )
        return np.asarray(d @ code)
    if hasattr(code, "indices") and hasattr(code, "values"):
        return _reconstruct_pairs(d, code.indices, code.values, expect_shape)
    x = np.asarray(code, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != d.shape[1]:
        raise ValueError(
            f"dictionary has {d.shape[1]} atoms but code has shape {x.shape}"
        )
    return d @ x


def _reconstruct_pairs(d, indices, values, expect_shape):
    indices = np.asarray(indices)
    values = np.asarray(values, dtype=np.float64)
    if indices.shape != values.shape:
        raise ValueError("code indices and values must have matching shapes")
    yhat = np.zeros((d.shape[0], indices.shape[1]))
    for r in range(indices.shape[0]):
        yhat += d[:, indices[r]] * values[r]
    if expect_shape is not None and yhat.shape != tuple(expect_shape):
        raise ValueError(f"reconstruction shape {yhat.shape} != signals {expect_shape}")
    return yhat


def _reconstruct_union(dictionary, code, expect_shape):
    m = code.block.shape[0]
    yhat = np.zeros((dictionary.p, m))
    order = np.argsort(code.block, kind="stable")
    bounds = np.searchsorted(code.block[order], np.arange(dictionary.num_blocks + 1))
    for b in range(dictionary.num_blocks):
        cols = order[bounds[b] : bounds[b + 1]]
        if cols.size == 0:
            continue
        qb = dictionary.blocks[b]
        for r in range(code.indices.shape[0]):
            yhat[:, cols] += qb[:, code.indices[r, cols]] * code.values[r, cols]
    if expect_shape is not None and yhat.shape != tuple(expect_shape):
        raise ValueError(f"reconstruction shape {yhat.shape} != signals {expect_shape}")
    return yhat
