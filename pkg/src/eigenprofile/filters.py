"""Data-driven orthogonal spatial filter design.

The filter bank for a window size c is learned from the image itself:
every pixel contributes the row-major vectorization of its c x c
neighborhood (mirror-padded at the borders), the covariance of those
patch vectors is estimated, and the leading eigenvectors become the
filters. Filter i's output variance over the image equals eigenvalue i,
so the bank extracts spatial features in decreasing order of energy and
the responses are mutually uncorrelated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .datacube import Image
from .errors import DegenerateDataError
from .linalg import eigh_descending

#: energies below this fraction of the largest one are clamped to zero
ENERGY_CLAMP_REL = 1e-12

#: soft cap on the transient window-matrix size used by chunked passes
_CHUNK_BUDGET_FLOATS = 8_000_000


@dataclass(frozen=True)
class PatchMatrix:
    """One column per pixel: the vectorized c x c neighborhood around it.

    Columns are ordered row-major over pixel centers; each column lists the
    window row by row, matching the filter vectorization.
    """

    c: int
    columns: np.ndarray

    def __post_init__(self):
        if self.columns.ndim != 2 or self.columns.shape[0] != self.c * self.c:
            raise ValueError(
                f"patch matrix must be (c^2, n), got {self.columns.shape} for c={self.c}"
            )

    @property
    def n_patches(self) -> int:
        return self.columns.shape[1]


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric c^2 x c^2 covariance of vectorized patches."""

    c: int
    entries: np.ndarray

    def __post_init__(self):
        d = self.c * self.c
        if self.entries.shape != (d, d):
            raise ValueError(
                f"covariance must be ({d}, {d}), got {self.entries.shape}"
            )


@dataclass(frozen=True)
class FilterSelection:
    """How many filters to keep.

    With `num_filters` set, exactly that many leading filters are kept
    (capped at c^2). Otherwise the smallest count whose energies reach
    `energy_fraction` of the covariance trace is used, clamped to
    [min_filters, max_filters].
    """

    num_filters: int | None = None
    energy_fraction: float = 0.99
    min_filters: int = 3
    max_filters: int = 50

    def __post_init__(self):
        if self.num_filters is not None and self.num_filters < 1:
            raise ValueError("num_filters must be >= 1")
        if not 0 < self.energy_fraction <= 1:
            raise ValueError("energy_fraction must be in (0, 1]")
        if not 1 <= self.min_filters <= self.max_filters:
            raise ValueError("need 1 <= min_filters <= max_filters")


@dataclass(frozen=True)
class FilterSet:
    """Orthonormal spatial filters (rows, length c^2) with their energies."""

    c: int
    filters: np.ndarray
    energies: np.ndarray

    def __post_init__(self):
        n, d = self.filters.shape
        if n < 1:
            raise ValueError("filter set must contain at least one filter")
        if d != self.c * self.c:
            raise ValueError(f"filters must have length c^2={self.c * self.c}, got {d}")
        if n > d:
            raise ValueError(f"at most c^2={d} orthogonal filters exist, got {n}")
        if self.energies.shape != (n,):
            raise ValueError("one energy per filter required")
        if np.any(np.diff(self.energies) > 0) or self.energies[-1] < 0:
            raise ValueError("energies must be nonincreasing and nonnegative")
        gram = self.filters @ self.filters.T
        if np.abs(gram - np.eye(n)).max() > 1e-8:
            raise ValueError("filters are not orthonormal")

    @property
    def n(self) -> int:
        return self.filters.shape[0]

    def grid(self, index: int) -> np.ndarray:
        """Filter `index` reshaped to its c x c spatial layout."""
        return self.filters[index].reshape(self.c, self.c)


def _check_window(c: int, rows: int, cols: int) -> int:
    if c < 1 or c % 2 == 0:
        raise ValueError(f"window size must be odd and positive, got {c}")
    if c > min(rows, cols):
        raise ValueError(
            f"window size {c} exceeds image extent {rows}x{cols}"
        )
    return (c - 1) // 2


def mirror_pad(values: np.ndarray, half: int) -> np.ndarray:
    """Pad spatially by edge-duplicating reflection (1,2,3 -> 2,1,|1,2,3|,3,2)."""
    if half == 0:
        return values
    return np.pad(values, half, mode="symmetric")


def _window_rows(padded: np.ndarray, c: int, row0: int, row1: int, cols: int) -> np.ndarray:
    """Vectorized patches for pixel rows [row0, row1) as an (m*cols, c^2) block."""
    slab = padded[row0 : row1 + c - 1]
    windows = sliding_window_view(slab, (c, c))
    return windows.reshape(-1, c * c)


def _chunk_rows(cols: int, c: int) -> int:
    return max(1, _CHUNK_BUDGET_FLOATS // max(1, cols * c * c))


def extract_patches(image: Image, c: int) -> PatchMatrix:
    """Vectorize every pixel's mirror-padded c x c neighborhood."""
    half = _check_window(c, image.rows, image.cols)
    padded = mirror_pad(image.values, half)
    columns = _window_rows(padded, c, 0, image.rows, image.cols).T
    return PatchMatrix(c, np.ascontiguousarray(columns))


def patch_covariance(patches: PatchMatrix) -> CovarianceMatrix:
    """Sample covariance of the patch columns (mean patch removed, ddof=1)."""
    n = patches.n_patches
    if n < 2:
        raise DegenerateDataError(
            f"need at least 2 patches for a covariance, got {n}", module="filters"
        )
    centered = patches.columns - patches.columns.mean(axis=1, keepdims=True)
    omega = centered @ centered.T / (n - 1)
    return CovarianceMatrix(patches.c, (omega + omega.T) / 2.0)


def image_patch_covariance(image: Image, c: int) -> CovarianceMatrix:
    """Patch covariance accumulated in row chunks (bounded memory).

    Equals patch_covariance(extract_patches(image, c)) up to accumulation
    rounding; preferred for large images where the full patch matrix would
    not fit comfortably in memory.
    """
    half = _check_window(c, image.rows, image.cols)
    padded = mirror_pad(image.values, half)
    d = c * c
    n = image.rows * image.cols
    if n < 2:
        raise DegenerateDataError(
            f"need at least 2 patches for a covariance, got {n}", module="filters"
        )
    second = np.zeros((d, d))
    total = np.zeros(d)
    step = _chunk_rows(image.cols, c)
    for row0 in range(0, image.rows, step):
        row1 = min(row0 + step, image.rows)
        block = _window_rows(padded, c, row0, row1, image.cols)
        second += block.T @ block
        total += block.sum(axis=0)
    mean = total / n
    omega = (second - n * np.outer(mean, mean)) / (n - 1)
    return CovarianceMatrix(c, (omega + omega.T) / 2.0)


def symmetric_eigen(matrix: CovarianceMatrix | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Descending eigenvalues and orthonormal eigenvector columns.

    Rejects inputs that are not symmetric within tolerance; the sign of
    each eigenvector is fixed deterministically.
    """
    entries = matrix.entries if isinstance(matrix, CovarianceMatrix) else matrix
    return eigh_descending(entries)


def _select_count(energies: np.ndarray, c: int, selection: FilterSelection) -> int:
    d = c * c
    if selection.num_filters is not None:
        return min(selection.num_filters, d)
    trace = energies.sum()
    cumulative = np.cumsum(energies)
    by_energy = int(np.argmax(cumulative >= selection.energy_fraction * trace)) + 1
    return min(max(by_energy, selection.min_filters), selection.max_filters, d)


def design_filter_set(
    image: Image, c: int, selection: FilterSelection | None = None
) -> FilterSet:
    """Learn the orthonormal maximum-energy filter bank from one image.

    The first filter maximizes output variance over all unit-norm c x c
    kernels; each further filter maximizes variance subject to being
    uncorrelated with (equivalently, orthogonal to) the previous ones.
    """
    selection = selection or FilterSelection()
    omega = image_patch_covariance(image, c)
    eigenvalues, eigenvectors = symmetric_eigen(omega)
    clamp = ENERGY_CLAMP_REL * max(eigenvalues[0], 0.0)
    energies = np.where(eigenvalues < clamp, 0.0, eigenvalues)
    if energies.sum() <= 0:
        raise DegenerateDataError(
            "no informative filters: patch covariance has zero energy "
            "(constant image?)",
            module="filters",
        )
    n = _select_count(energies, c, selection)
    return FilterSet(c, np.ascontiguousarray(eigenvectors[:, :n].T), energies[:n])


def format_filter_report(filter_set: FilterSet) -> str:
    """Energies plus each filter laid out as its c x c grid, for inspection."""
    lines = [f"filters: {filter_set.n}  window: {filter_set.c}x{filter_set.c}", ""]
    for i in range(filter_set.n):
        lines.append(f"filter {i + 1}  energy {filter_set.energies[i]:.6e}")
        for row in filter_set.grid(i):
            lines.append("  " + " ".join(f"{v: .4f}" for v in row))
        lines.append("")
    return "\n".join(lines)
