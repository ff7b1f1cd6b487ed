"""Spectral PCA over the band dimension and component selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datacube import HyperCube
from .errors import DegenerateDataError
from .linalg import eigh_descending

#: eigenvalues below this fraction of the largest one are clamped to zero
EIGENVALUE_CLAMP_REL = 1e-12


@dataclass(frozen=True)
class PcaModel:
    """Eigendecomposition of the band covariance of a cube.

    `eigenvectors` columns are the components, orthonormal, ordered by
    descending eigenvalue, each with its largest-magnitude entry positive.
    """

    mean: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        b = self.mean.shape[0]
        if self.eigenvalues.shape != (b,) or self.eigenvectors.shape != (b, b):
            raise ValueError("inconsistent PCA model shapes")
        if np.any(np.diff(self.eigenvalues) > 0):
            raise ValueError("eigenvalues must be nonincreasing")
        if self.eigenvalues[-1] < 0:
            raise ValueError("eigenvalues must be nonnegative")

    @property
    def bands(self) -> int:
        return self.mean.shape[0]

    def explained_fractions(self) -> np.ndarray:
        """Cumulative explained-variance fractions per component count."""
        total = self.eigenvalues.sum()
        if total <= 0:
            raise DegenerateDataError(
                "cube has zero spectral variance", module="spectral"
            )
        return np.cumsum(self.eigenvalues) / total


@dataclass(frozen=True)
class PcStack:
    """Leading principal-component planes of a cube, each (rows, cols)."""

    rows: int
    cols: int
    k: int
    planes: np.ndarray

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("component count must be >= 1")
        if self.planes.shape != (self.k, self.rows, self.cols):
            raise ValueError(
                f"plane stack shape {self.planes.shape} != "
                f"({self.k}, {self.rows}, {self.cols})"
            )
        if not np.isfinite(self.planes).all():
            raise ValueError("PC planes contain non-finite values")


def fit_spectral_pca(cube: HyperCube) -> PcaModel:
    """Eigendecompose the band covariance (pixels as observations, ddof=1)."""
    n_pixels = cube.rows * cube.cols
    if n_pixels < 2:
        raise DegenerateDataError(
            f"need at least 2 pixels to estimate covariance, got {n_pixels}",
            module="spectral",
        )
    spectra = cube.spectra()
    mean = spectra.mean(axis=0)
    centered = spectra - mean
    cov = centered.T @ centered / (n_pixels - 1)
    eigenvalues, eigenvectors = eigh_descending(cov)
    clamp = EIGENVALUE_CLAMP_REL * max(eigenvalues[0], 0.0)
    eigenvalues = np.where(eigenvalues < clamp, 0.0, eigenvalues)
    return PcaModel(mean, eigenvalues, eigenvectors)


def select_components(model: PcaModel, fraction: float) -> int:
    """Smallest k whose leading eigenvalues reach `fraction` of total variance."""
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    cumulative = model.explained_fractions()
    return int(np.argmax(cumulative >= fraction)) + 1


def project(cube: HyperCube, model: PcaModel, k: int) -> PcStack:
    """Project every pixel spectrum onto the first k components."""
    if not 1 <= k <= model.bands:
        raise ValueError(f"k must be in [1, {model.bands}], got {k}")
    if cube.bands != model.bands:
        raise ValueError(
            f"cube has {cube.bands} bands but model expects {model.bands}"
        )
    centered = cube.spectra() - model.mean
    scores = centered @ model.eigenvectors[:, :k]
    planes = np.ascontiguousarray(scores.T.reshape(k, cube.rows, cube.cols))
    return PcStack(cube.rows, cube.cols, k, planes)


def format_eigenspectrum(model: PcaModel) -> str:
    """Eigenvalue table (value, explained %, cumulative %) as aligned text."""
    total = model.eigenvalues.sum()
    lines = [f"{'component':>9}  {'eigenvalue':>14}  {'explained%':>10}  {'cumulative%':>11}"]
    cumulative = 0.0
    for i, value in enumerate(model.eigenvalues, start=1):
        share = 100.0 * value / total if total > 0 else 0.0
        cumulative += share
        lines.append(f"{i:>9}  {value:>14.6e}  {share:>10.4f}  {cumulative:>11.4f}")
    return "\n".join(lines) + "\n"
