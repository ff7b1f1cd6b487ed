"""Hyperspectral cube and label-raster I/O.

Cubes are stored on disk as raw binary samples plus a small text header
(key=value lines, ``#`` comments) declaring ``rows``, ``cols``, ``bands``,
``dtype``, ``byteorder`` and ``interleave``. ENVI-style key names
(``lines``, ``samples``) are accepted as aliases and unknown keys are
ignored. Internally every cube is normalized to 64-bit floats in
band-sequential layout (band, row, col), so one band is a contiguous
2-D slice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataIOError

_DTYPES = {
    "uint8": np.uint8,
    "uint16": np.uint16,
    "int16": np.int16,
    "float32": np.float32,
    "float64": np.float64,
}

_HEADER_ALIASES = {
    "lines": "rows",
    "samples": "cols",
    "data_type": "dtype",
    "byte_order": "byteorder",
}

_INTERLEAVES = ("bsq", "bil", "bip")


@dataclass(frozen=True)
class CubeHeader:
    """Shape and sample-format description of a raw raster file."""

    rows: int
    cols: int
    bands: int
    dtype: str = "uint16"
    byteorder: str = "little"
    interleave: str = "bsq"

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.bands < 1:
            raise DataIOError(
                f"header dimensions must be positive, got "
                f"rows={self.rows} cols={self.cols} bands={self.bands}",
                module="datacube",
            )
        if self.dtype not in _DTYPES:
            raise DataIOError(
                f"unsupported dtype {self.dtype!r}; expected one of {sorted(_DTYPES)}",
                module="datacube",
            )
        if self.byteorder not in ("little", "big"):
            raise DataIOError(
                f"byteorder must be 'little' or 'big', got {self.byteorder!r}",
                module="datacube",
            )
        if self.interleave not in _INTERLEAVES:
            raise DataIOError(
                f"interleave must be one of {_INTERLEAVES}, got {self.interleave!r}",
                module="datacube",
            )

    @property
    def sample_dtype(self) -> np.dtype:
        base = np.dtype(_DTYPES[self.dtype])
        return base.newbyteorder("<" if self.byteorder == "little" else ">")

    @property
    def n_bytes(self) -> int:
        return self.rows * self.cols * self.bands * self.sample_dtype.itemsize


@dataclass(frozen=True)
class HyperCube:
    """Dense hyperspectral cube, float64, band-sequential (band, row, col)."""

    rows: int
    cols: int
    bands: int
    values: np.ndarray
    band_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.bands < 1:
            raise DataIOError("cube dimensions must be positive", module="datacube")
        if self.values.shape != (self.bands, self.rows, self.cols):
            raise DataIOError(
                f"cube values shape {self.values.shape} does not match "
                f"(bands, rows, cols)=({self.bands}, {self.rows}, {self.cols})",
                module="datacube",
            )
        if not np.isfinite(self.values).all():
            raise DataIOError("cube contains non-finite values", module="datacube")

    def band(self, index: int) -> "Image":
        """Return band `index` as a 2-D image."""
        if not 0 <= index < self.bands:
            raise IndexError(f"band index {index} out of range [0, {self.bands})")
        return Image(self.rows, self.cols, np.array(self.values[index]))

    def spectra(self) -> np.ndarray:
        """All pixel spectra as an (rows*cols, bands) matrix, pixels row-major."""
        return self.values.reshape(self.bands, -1).T.copy()


@dataclass(frozen=True)
class Image:
    """Single-band real image stored as a (rows, cols) float64 array."""

    rows: int
    cols: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.rows, self.cols):
            raise ValueError(
                f"image values shape {self.values.shape} != ({self.rows}, {self.cols})"
            )
        if not np.isfinite(self.values).all():
            raise ValueError("image contains non-finite values")


@dataclass(frozen=True)
class LabelMap:
    """Integer label raster; 0 is unlabeled background, 1..K are classes."""

    rows: int
    cols: int
    labels: np.ndarray

    def __post_init__(self):
        if self.labels.shape != (self.rows, self.cols):
            raise DataIOError(
                f"label raster shape {self.labels.shape} != ({self.rows}, {self.cols})",
                module="datacube",
            )
        if self.labels.min(initial=0) < 0:
            raise DataIOError("labels must be nonnegative", module="datacube")

    @property
    def classes(self) -> np.ndarray:
        """Sorted distinct nonzero labels present in the raster."""
        values = np.unique(self.labels)
        return values[values > 0]

    def flat(self) -> np.ndarray:
        return self.labels.reshape(-1)


def parse_header_text(text: str) -> CubeHeader:
    """Parse key=value header lines into a CubeHeader.

    Keys are case-insensitive, spaces around ``=`` are allowed, ``#`` and
    ``;`` start comments, and unrecognized keys are skipped.
    """
    fields: dict[str, str] = {}
    for raw_line in text.splitlines():
        line = raw_line.split("#", 1)[0].split(";", 1)[0].strip()
        if not line or "=" not in line:
            continue
        key, _, value = line.partition("=")
        key = key.strip().lower().replace(" ", "_")
        key = _HEADER_ALIASES.get(key, key)
        fields[key] = value.strip()

    missing = [k for k in ("rows", "cols", "bands") if k not in fields]
    if missing:
        raise DataIOError(
            f"header is missing required keys: {', '.join(missing)}", module="datacube"
        )
    try:
        rows = int(fields["rows"])
        cols = int(fields["cols"])
        bands = int(fields["bands"])
    except ValueError as exc:
        raise DataIOError(f"non-integer header dimension: {exc}", module="datacube")
    return CubeHeader(
        rows=rows,
        cols=cols,
        bands=bands,
        dtype=fields.get("dtype", "uint16").lower(),
        byteorder=fields.get("byteorder", "little").lower(),
        interleave=fields.get("interleave", "bsq").lower(),
    )


def read_header(path: str | Path) -> CubeHeader:
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"header file not found: {path}", module="datacube")
    return parse_header_text(path.read_text())


def _sidecar_header(data_path: Path) -> Path:
    """Header next to a raw file: `<name>.hdr` wins over `<stem>.hdr`."""
    appended = Path(str(data_path) + ".hdr")
    if appended.is_file():
        return appended
    return data_path.with_suffix(".hdr")


def load_cube(
    data_path: str | Path,
    header: CubeHeader | str | Path | None = None,
) -> HyperCube:
    """Load a raw cube file and normalize it to the internal layout.

    `header` may be a parsed CubeHeader, a path to a header file, or None
    to look for a sidecar `.hdr` next to the data file. The file size must
    match the declared shape exactly and all samples must be finite.
    """
    data_path = Path(data_path)
    if not data_path.is_file():
        raise DataIOError(f"cube file not found: {data_path}", module="datacube")
    if header is None:
        header = _sidecar_header(data_path)
    if not isinstance(header, CubeHeader):
        header = read_header(header)

    raw = data_path.read_bytes()
    if len(raw) != header.n_bytes:
        raise DataIOError(
            f"cube file {data_path} has {len(raw)} bytes but header declares "
            f"{header.rows}x{header.cols}x{header.bands} {header.dtype} samples "
            f"= {header.n_bytes} bytes",
            module="datacube",
        )
    flat = np.frombuffer(raw, dtype=header.sample_dtype).astype(np.float64)
    bad = ~np.isfinite(flat)
    if bad.any():
        offset = int(np.argmax(bad))
        raise DataIOError(
            f"cube file {data_path} contains a non-finite sample at offset {offset}",
            module="datacube",
        )

    r, l, b = header.rows, header.cols, header.bands
    if header.interleave == "bsq":
        values = flat.reshape(b, r, l)
    elif header.interleave == "bil":
        values = flat.reshape(r, b, l).transpose(1, 0, 2)
    else:  # bip
        values = flat.reshape(r, l, b).transpose(2, 0, 1)
    return HyperCube(r, l, b, np.ascontiguousarray(values))


def remove_bands(cube: HyperCube, band_indices) -> HyperCube:
    """Drop the given 0-based bands, keeping the rest in order, bit-exact."""
    indices = np.asarray(band_indices, dtype=np.int64)
    if indices.size == 0:
        return cube
    if len(np.unique(indices)) != len(indices):
        raise DataIOError("band indices to remove must be unique", module="datacube")
    if indices.min() < 0 or indices.max() >= cube.bands:
        raise DataIOError(
            f"band index out of range [0, {cube.bands}): {indices.tolist()}",
            module="datacube",
        )
    keep = np.setdiff1d(np.arange(cube.bands), indices)
    labels = None
    if cube.band_labels is not None:
        labels = tuple(cube.band_labels[i] for i in keep)
    return HyperCube(cube.rows, cube.cols, len(keep), cube.values[keep].copy(), labels)


def expand_band_ranges(spec_text: str) -> list[int]:
    """Expand a 1-based range list like ``104-108,150-163,220`` to 0-based indices."""
    indices: set[int] = set()
    text = spec_text.strip()
    if not text:
        return []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo_text, _, hi_text = part.partition("-")
            try:
                lo, hi = int(lo_text), int(hi_text)
            except ValueError:
                raise ConfigError(f"bad band range {part!r}", module="datacube")
            if lo < 1 or hi < lo:
                raise ConfigError(f"bad band range {part!r}", module="datacube")
            indices.update(range(lo - 1, hi))
        else:
            try:
                value = int(part)
            except ValueError:
                raise ConfigError(f"bad band index {part!r}", module="datacube")
            if value < 1:
                raise ConfigError(f"band indices are 1-based, got {value}", module="datacube")
            indices.add(value - 1)
    return sorted(indices)


def _read_pnm_tokens(raw: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace/comment-separated ASCII integers; return values
    and the offset just past the single whitespace byte after the last one."""
    tokens: list[int] = []
    pos = 0
    while len(tokens) < count:
        if pos >= len(raw):
            raise DataIOError("truncated PNM header", module="datacube")
        ch = raw[pos : pos + 1]
        if ch == b"#":
            nl = raw.find(b"\n", pos)
            pos = len(raw) if nl < 0 else nl + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(raw) and not raw[end : end + 1].isspace():
                end += 1
            try:
                tokens.append(int(raw[pos:end]))
            except ValueError:
                raise DataIOError(f"bad PNM header token {raw[pos:end]!r}", module="datacube")
            pos = end
    return tokens, pos + 1


def load_labels(path: str | Path, rows: int, cols: int) -> LabelMap:
    """Load a ground-truth raster as a LabelMap.

    Accepts a portable graymap (P2/P5) or a raw single-band raster with the
    same header convention as cubes. Dimensions must match `rows`/`cols`.
    """
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"label file not found: {path}", module="datacube")
    raw = path.read_bytes()

    if raw[:2] in (b"P2", b"P5"):
        magic = raw[:2]
        (width, height, maxval), pos = _read_pnm_tokens(raw[2:], 3)
        pos += 2
        if (height, width) != (rows, cols):
            raise DataIOError(
                f"label raster is {height}x{width}, expected {rows}x{cols}",
                module="datacube",
            )
        if magic == b"P5":
            dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
            need = rows * cols * dtype.itemsize
            body = raw[pos : pos + need]
            if len(body) != need:
                raise DataIOError(
                    f"label file {path} truncated: {len(body)} of {need} pixel bytes",
                    module="datacube",
                )
            labels = np.frombuffer(body, dtype=dtype).astype(np.int32)
        else:
            values, _ = _read_pnm_tokens(raw[pos:], rows * cols)
            labels = np.asarray(values, dtype=np.int32)
        return LabelMap(rows, cols, labels.reshape(rows, cols))

    header = read_header(_sidecar_header(path))
    if header.bands != 1:
        raise DataIOError(
            f"label raster must be single-band, header declares {header.bands}",
            module="datacube",
        )
    if (header.rows, header.cols) != (rows, cols):
        raise DataIOError(
            f"label raster is {header.rows}x{header.cols}, expected {rows}x{cols}",
            module="datacube",
        )
    if len(raw) != header.n_bytes:
        raise DataIOError(
            f"label file {path} has {len(raw)} bytes, header declares {header.n_bytes}",
            module="datacube",
        )
    labels = np.frombuffer(raw, dtype=header.sample_dtype).astype(np.int32)
    return LabelMap(rows, cols, labels.reshape(rows, cols))


def write_class_map(label_map: LabelMap, palette: dict[int, tuple[int, int, int]], path: str | Path) -> None:
    """Write the label raster as a binary P6 pixmap; background is black."""
    missing = [int(c) for c in label_map.classes if int(c) not in palette]
    if missing:
        raise ConfigError(
            f"palette has no entry for label {missing[0]}", module="datacube"
        )
    lut = np.zeros((int(label_map.labels.max(initial=0)) + 1, 3), dtype=np.uint8)
    for label, rgb in palette.items():
        if 0 < label < len(lut):
            lut[label] = rgb
    pixels = lut[label_map.labels]
    header = f"P6\n{label_map.cols} {label_map.rows}\n255\n".encode()
    Path(path).write_bytes(header + pixels.tobytes())
