"""Dictionary learning with unions of orthonormal bases.

Single-best-block training (each signal is coded by exactly one orthonormal
block), an OMP/AK-SVD overcomplete baseline, image-patch ingestion, and a
benchmarking CLI.
"""

from .baseline import OmpResult, aksvd_train, omp, omp_batch
from .data import (
    ImageFormatError,
    MatrixFormatError,
    PatchConfig,
    extract_patches,
    load_image,
    load_matrix,
    save_matrix,
    synthetic_test_image,
)
from .linalg import (
    DecompositionError,
    SvdResult,
    frobenius_error,
    orthonormality_defect,
    procrustes_polar,
    reconstruct,
    thin_svd,
)
from .onb import NumericalError, ThresholdedCode, init_onb, select_top, train_onb
from .report import IterationStats, TrainReport
from .sbo import (
    Assignment,
    SboConfig,
    SparseCode,
    UnionDictionary,
    block_energy,
    group_by_block,
    represent,
    sbo_init,
    sbo_train,
    worst_set,
)

__all__ = [
    "Assignment",
    "DecompositionError",
    "ImageFormatError",
    "IterationStats",
    "MatrixFormatError",
    "NumericalError",
    "OmpResult",
    "PatchConfig",
    "SboConfig",
    "SparseCode",
    "SvdResult",
    "ThresholdedCode",
    "TrainReport",
    "UnionDictionary",
    "aksvd_train",
    "block_energy",
    "extract_patches",
    "frobenius_error",
    "group_by_block",
    "init_onb",
    "load_image",
    "load_matrix",
    "omp",
    "omp_batch",
    "orthonormality_defect",
    "procrustes_polar",
    "reconstruct",
    "represent",
    "save_matrix",
    "sbo_init",
    "sbo_train",
    "select_top",
    "synthetic_test_image",
    "thin_svd",
    "train_onb",
    "worst_set",
]

__version__ = "0.1.0"
