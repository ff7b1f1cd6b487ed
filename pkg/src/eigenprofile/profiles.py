"""Energy-profile construction: filter responses stacked across components.

Applying the learned filter bank to each retained principal-component
plane gives one feature map per (component, filter) pair. Stacking them
pixel-wise yields the per-pixel feature vector fed to the classifier.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datacube import Image
from .errors import DataIOError
from .filters import FilterSet, _chunk_rows, _check_window, _window_rows, mirror_pad
from .spectral import PcStack

_PROFILE_MAGIC = b"EPRF"
_PROFILE_VERSION = 1


@dataclass(frozen=True)
class FeatureMap:
    """Response of one filter on one image, same spatial extent."""

    rows: int
    cols: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.rows, self.cols):
            raise ValueError(
                f"feature map shape {self.values.shape} != ({self.rows}, {self.cols})"
            )
        if not np.isfinite(self.values).all():
            raise ValueError("feature map contains non-finite values")


@dataclass(frozen=True)
class EnergyProfile:
    """Per-pixel feature matrix, (rows*cols, dim), pixels row-major.

    Column p*n + q holds filter q applied to component plane p, so the
    layout is component-major over a bank of n filters.
    """

    rows: int
    cols: int
    dim: int
    values: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("profile must have at least one feature")
        if self.values.shape != (self.rows * self.cols, self.dim):
            raise ValueError(
                f"profile shape {self.values.shape} != ({self.rows * self.cols}, {self.dim})"
            )
        if not np.isfinite(self.values).all():
            raise ValueError("profile contains non-finite values")


@dataclass(frozen=True)
class ScaledFeatures:
    """Feature matrix after per-feature affine scaling to [-1, 1] on training pixels."""

    rows: int
    cols: int
    values: np.ndarray
    feature_min: np.ndarray
    feature_max: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != self.rows * self.cols:
            raise ValueError("scaled feature matrix must be (rows*cols, dim)")
        dim = self.values.shape[1]
        if self.feature_min.shape != (dim,) or self.feature_max.shape != (dim,):
            raise ValueError("scaling parameters must be per-feature")

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def _filtered_block(
    padded: np.ndarray, c: int, row0: int, row1: int, cols: int, bank: np.ndarray
) -> np.ndarray:
    """Responses of all filters in `bank` (d x n) for pixel rows [row0, row1)."""
    return _window_rows(padded, c, row0, row1, cols) @ bank


def apply_filter(image: Image, filter_vec: np.ndarray, c: int) -> FeatureMap:
    """Correlate the image with one vectorized c x c filter (mirror borders).

    Output pixel (x, y) is the dot product of the filter with the
    vectorized neighborhood centered there, so the result has the same
    extent as the input. No kernel flip is applied.
    """
    half = _check_window(c, image.rows, image.cols)
    filter_vec = np.asarray(filter_vec, dtype=np.float64).reshape(-1)
    if filter_vec.shape[0] != c * c:
        raise ValueError(
            f"filter length {filter_vec.shape[0]} != c^2 = {c * c}"
        )
    padded = mirror_pad(image.values, half)
    out = np.empty((image.rows, image.cols))
    step = _chunk_rows(image.cols, c)
    bank = filter_vec[:, None]
    for row0 in range(0, image.rows, step):
        row1 = min(row0 + step, image.rows)
        block = _filtered_block(padded, c, row0, row1, image.cols, bank)
        out[row0:row1] = block.reshape(row1 - row0, image.cols)
    return FeatureMap(image.rows, image.cols, out)


def build_profile(pcs: PcStack, filter_set: FilterSet) -> EnergyProfile:
    """Stack every (component, filter) response into the per-pixel profile."""
    c = filter_set.c
    n = filter_set.n
    half = _check_window(c, pcs.rows, pcs.cols)
    dim = pcs.k * n
    values = np.empty((pcs.rows * pcs.cols, dim))
    bank = filter_set.filters.T
    step = _chunk_rows(pcs.cols, c)
    for p in range(pcs.k):
        padded = mirror_pad(pcs.planes[p], half)
        for row0 in range(0, pcs.rows, step):
            row1 = min(row0 + step, pcs.rows)
            block = _filtered_block(padded, c, row0, row1, pcs.cols, bank)
            values[row0 * pcs.cols : row1 * pcs.cols, p * n : (p + 1) * n] = block
    return EnergyProfile(pcs.rows, pcs.cols, dim, values)


def fit_feature_scaling(
    profile: EnergyProfile | np.ndarray,
    train_indices: np.ndarray,
    rows: int | None = None,
    cols: int | None = None,
) -> ScaledFeatures:
    """Scale each feature so its training range [min, max] maps onto [-1, 1].

    Scaling is fit on training pixels only; other pixels may land outside
    [-1, 1]. Features constant over the training set are zeroed.
    """
    if isinstance(profile, EnergyProfile):
        matrix, rows, cols = profile.values, profile.rows, profile.cols
    else:
        matrix = np.asarray(profile, dtype=np.float64)
        if rows is None or cols is None:
            raise ValueError("rows and cols are required for a bare feature matrix")
    train_indices = np.asarray(train_indices, dtype=np.int64)
    if train_indices.size == 0:
        raise ValueError("training index set must be nonempty")
    lo = matrix[train_indices].min(axis=0)
    hi = matrix[train_indices].max(axis=0)
    return ScaledFeatures(rows, cols, _affine_scale(matrix, lo, hi), lo, hi)


def _affine_scale(matrix: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = hi - lo
    varying = span > 0
    gain = np.where(varying, 2.0 / np.where(varying, span, 1.0), 0.0)
    return (matrix - lo) * gain - np.where(varying, 1.0, 0.0)


def scale_with(params: ScaledFeatures, matrix: np.ndarray) -> np.ndarray:
    """Apply an already-fitted feature scaling to new feature rows."""
    return _affine_scale(matrix, params.feature_min, params.feature_max)


def save_profile(profile: EnergyProfile, path: str | Path) -> None:
    """Dump the profile matrix: 16-byte header then float64 little-endian values."""
    header = _PROFILE_MAGIC + struct.pack(
        "<HHII", _PROFILE_VERSION, 0, profile.rows, profile.cols
    ) + struct.pack("<I", profile.dim)
    data = np.ascontiguousarray(profile.values, dtype="<f8").tobytes()
    Path(path).write_bytes(header + data)


def load_profile(path: str | Path) -> EnergyProfile:
    raw = Path(path).read_bytes()
    if raw[:4] != _PROFILE_MAGIC:
        raise DataIOError(f"{path} is not a profile dump", module="profiles")
    version, _, rows, cols = struct.unpack("<HHII", raw[4:16])
    if version != _PROFILE_VERSION:
        raise DataIOError(f"unsupported profile version {version}", module="profiles")
    (dim,) = struct.unpack("<I", raw[16:20])
    expected = 20 + rows * cols * dim * 8
    if len(raw) != expected:
        raise DataIOError(
            f"profile dump {path} has {len(raw)} bytes, expected {expected}",
            module="profiles",
        )
    values = np.frombuffer(raw[20:], dtype="<f8").reshape(rows * cols, dim)
    return EnergyProfile(rows, cols, dim, values.astype(np.float64))
