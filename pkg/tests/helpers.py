"""Shared test utilities: independent oracles, synthetic scenes, raw writers.

The oracles here deliberately avoid the library's vectorized code paths
(nested loops, explicit index reflection) so they stay meaningful as
references.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from eigenprofile.datacube import HyperCube, Image, LabelMap


def reflect_index(i: int, n: int) -> int:
    """Edge-duplicating mirror: -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2."""
    if i < 0:
        i = -i - 1
    if i >= n:
        i = 2 * n - i - 1
    return i


def oracle_correlate(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Nested-loop sliding-window correlation with mirror borders."""
    rows, cols = image.shape
    c = kernel.shape[0]
    half = (c - 1) // 2
    out = np.zeros((rows, cols))
    for y in range(rows):
        for x in range(cols):
            acc = 0.0
            for a in range(c):
                for b in range(c):
                    yy = reflect_index(y + a - half, rows)
                    xx = reflect_index(x + b - half, cols)
                    acc += kernel[a, b] * image[yy, xx]
            out[y, x] = acc
    return out


def oracle_patches(image: np.ndarray, c: int) -> np.ndarray:
    """Naive (c^2, n_pixels) patch matrix via per-pixel loops."""
    rows, cols = image.shape
    half = (c - 1) // 2
    columns = np.zeros((c * c, rows * cols))
    for y in range(rows):
        for x in range(cols):
            patch = []
            for a in range(c):
                for b in range(c):
                    yy = reflect_index(y + a - half, rows)
                    xx = reflect_index(x + b - half, cols)
                    patch.append(image[yy, xx])
            columns[:, y * cols + x] = patch
    return columns


def oracle_covariance(columns: np.ndarray) -> np.ndarray:
    """Two-loop covariance of column vectors (ddof=1)."""
    d, n = columns.shape
    mean = columns.mean(axis=1)
    cov = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            cov[i, j] = np.sum(
                (columns[i] - mean[i]) * (columns[j] - mean[j])
            ) / (n - 1)
    return cov


def read_ppm(path) -> tuple[int, int, np.ndarray]:
    """Minimal binary P6 reader; returns (rows, cols, rgb array)."""
    raw = Path(path).read_bytes()
    assert raw[:2] == b"P6"
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end : end + 1].isspace():
            end += 1
        tokens.append(int(raw[pos:end]))
        pos = end
    pos += 1
    width, height, maxval = tokens
    assert maxval == 255
    rgb = np.frombuffer(raw[pos:], dtype=np.uint8).reshape(height, width, 3)
    return height, width, rgb


def write_pgm(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    assert labels.max() <= 255
    header = f"P5\n{labels.shape[1]} {labels.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + labels.astype(np.uint8).tobytes())


def write_raw_cube(
    path, values: np.ndarray, dtype: str, byteorder: str, interleave: str
) -> None:
    """Write (bands, rows, cols) values as a raw file in the given layout."""
    b, r, l = values.shape
    np_dtype = np.dtype(
        {"uint8": "u1", "uint16": "u2", "int16": "i2",
         "float32": "f4", "float64": "f8"}[dtype]
    ).newbyteorder("<" if byteorder == "little" else ">")
    if interleave == "bsq":
        ordered = values
    elif interleave == "bil":
        ordered = values.transpose(1, 0, 2)
    else:  # bip
        ordered = values.transpose(1, 2, 0)
    Path(path).write_bytes(np.ascontiguousarray(ordered).astype(np_dtype).tobytes())


def write_header(
    path, rows: int, cols: int, bands: int, dtype: str, byteorder: str, interleave: str
) -> None:
    text = (
        f"rows = {rows}\ncols = {cols}\nbands = {bands}\n"
        f"dtype = {dtype}\nbyteorder = {byteorder}\ninterleave = {interleave}\n"
    )
    Path(path).write_text(text)


def quadrant_labels(rows: int, cols: int, seam: int = 0) -> np.ndarray:
    """Four rectangular class regions; `seam` rows/cols next to the internal
    boundaries stay unlabeled, as real ground-truth maps leave field edges."""
    labels = np.zeros((rows, cols), dtype=np.int32)
    labels[: rows // 2, : cols // 2] = 1
    labels[: rows // 2, cols // 2 :] = 2
    labels[rows // 2 :, : cols // 2] = 3
    labels[rows // 2 :, cols // 2 :] = 4
    if seam:
        labels[rows // 2 - seam : rows // 2 + seam, :] = 0
        labels[:, cols // 2 - seam : cols // 2 + seam] = 0
    return labels


def textured_scene(
    rows: int = 64,
    cols: int = 64,
    bands: int = 10,
    noise: float = 0.03,
    level: float = 0.3,
    amp_own: float = 0.6,
    amp_other: float = 0.35,
    seam: int = 3,
    seed: int = 7,
) -> tuple[HyperCube, LabelMap]:
    """Four quadrant classes: distinct spectra plus oriented stripe textures.

    Class c's spectrum is offset by `level` along the c-th of four
    orthonormal spectral directions, and every direction carries a stripe
    field (orientation 0/90/45/135 degrees, strongest for the class's own
    direction). The stripes swing each pixel's spectrum across the class
    offsets, so per-pixel spectral classification is ambiguous while
    window-filtered features recover the class levels cleanly.
    """
    rng = np.random.default_rng(seed)
    full = quadrant_labels(rows, cols)
    labels = quadrant_labels(rows, cols, seam)
    t = np.arange(bands)
    base = 3.0 + np.sin(2.0 * np.pi * t / bands)
    raw = [
        np.ones(bands),
        np.cos(2.0 * np.pi * t / bands),
        np.sin(2.0 * np.pi * t / bands),
        np.cos(4.0 * np.pi * t / bands),
    ]
    directions: list[np.ndarray] = []
    for v in raw:
        v = v.astype(np.float64)
        for d in directions:
            v = v - (v @ d) * d
        directions.append(v / np.linalg.norm(v))
    yy, xx = np.mgrid[0:rows, 0:cols].astype(np.float64)
    diag_period = 4.0 * np.sqrt(2.0)
    fields = [
        np.sin(2.0 * np.pi * yy / 4.0),
        np.sin(2.0 * np.pi * xx / 4.0),
        np.sin(2.0 * np.pi * (yy + xx) / diag_period),
        np.sin(2.0 * np.pi * (yy - xx) / diag_period),
    ]
    own_amp = [amp_own + 0.05 * (3 - j) for j in range(4)]
    values = np.zeros((bands, rows, cols))
    for class_id in range(1, 5):
        mask = full == class_id
        spectrum = base + level * directions[class_id - 1]
        pixels = np.repeat(spectrum[:, None], mask.sum(), axis=1)
        for j in range(4):
            amp = own_amp[j] if j == class_id - 1 else amp_other
            pixels = pixels + amp * np.outer(directions[j], fields[j][mask])
        values[:, mask] = pixels
    values += noise * rng.standard_normal(values.shape)
    cube = HyperCube(rows, cols, bands, values)
    return cube, LabelMap(rows, cols, labels)


def easy_scene(
    rows: int = 32, cols: int = 32, bands: int = 8, seed: int = 3, seam: int = 2
) -> tuple[HyperCube, LabelMap]:
    """Three cleanly separable striped classes for end-to-end smoke runs."""
    rng = np.random.default_rng(seed)
    third = cols // 3
    full = np.zeros((rows, cols), dtype=np.int32)
    full[:, :third] = 1
    full[:, third : 2 * third] = 2
    full[:, 2 * third :] = 3
    labels = full.copy()
    if seam:
        labels[:, third - seam : third + seam] = 0
        labels[:, 2 * third - seam : 2 * third + seam] = 0
    t = np.linspace(0.0, 1.0, bands)
    spectra = [
        2.0 + np.sin(2.0 * np.pi * t),
        4.0 + np.cos(2.0 * np.pi * t),
        6.0 - np.sin(4.0 * np.pi * t),
    ]
    yy, xx = np.mgrid[0:rows, 0:cols].astype(np.float64)
    textures = [
        1.0 + 0.2 * np.sin(2.0 * np.pi * yy / 4.0),
        1.0 + 0.2 * np.sin(2.0 * np.pi * xx / 4.0),
        1.0 + 0.2 * np.sin(2.0 * np.pi * (xx + yy) / 6.0),
    ]
    values = np.zeros((bands, rows, cols))
    for class_id in range(1, 4):
        mask = full == class_id
        values[:, mask] = (
            spectra[class_id - 1][:, None] * textures[class_id - 1][mask][None, :]
        )
    values += 0.05 * rng.standard_normal(values.shape)
    cube = HyperCube(rows, cols, bands, values)
    return cube, LabelMap(rows, cols, labels)


def random_image(rng: np.random.Generator, rows: int, cols: int) -> Image:
    return Image(rows, cols, rng.standard_normal((rows, cols)))
