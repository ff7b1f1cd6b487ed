"""Symmetric eigendecomposition with a deterministic ordering convention."""

from __future__ import annotations

import numpy as np

from .errors import NumericalError

#: relative asymmetry above which a matrix is rejected as non-symmetric
SYMMETRY_RTOL = 1e-10


def check_symmetric(matrix: np.ndarray) -> np.ndarray:
    """Validate (approximate) symmetry and return the symmetrized matrix."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise NumericalError(
            f"expected a square matrix, got shape {matrix.shape}", module="linalg"
        )
    scale = max(1.0, float(np.abs(matrix).max(initial=0.0)))
    asymmetry = float(np.abs(matrix - matrix.T).max(initial=0.0))
    if asymmetry > SYMMETRY_RTOL * scale:
        raise NumericalError(
            f"matrix is not symmetric: max |A - A^T| = {asymmetry:.3e} "
            f"exceeds {SYMMETRY_RTOL:.0e} * {scale:.3e}",
            module="linalg",
        )
    return (matrix + matrix.T) / 2.0


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive.

    Ties resolve to the first maximal entry, making the decomposition
    reproducible across platforms.
    """
    lead = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[lead, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def eigh_descending(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix.

    Backed by LAPACK's symmetric solver; results are reordered and
    sign-normalized so identical inputs give identical outputs.
    """
    sym = check_symmetric(matrix)
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}", module="linalg")
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], fix_signs(eigenvectors[:, order])
