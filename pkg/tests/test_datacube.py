import numpy as np
import pytest

from eigenprofile.datacube import (
    CubeHeader,
    HyperCube,
    LabelMap,
    expand_band_ranges,
    load_cube,
    load_labels,
    parse_header_text,
    remove_bands,
    write_class_map,
)
from eigenprofile.errors import ConfigError, DataIOError

from helpers import read_ppm, write_header, write_pgm, write_raw_cube


def test_load_cube_identity_conversion(tmp_path):
    path = tmp_path / "tiny.raw"
    path.write_bytes(np.array([1, 2, 3, 4], dtype="<u2").tobytes())
    cube = load_cube(path, CubeHeader(2, 2, 1, "uint16", "little", "bsq"))
    assert (cube.rows, cube.cols, cube.bands) == (2, 2, 1)
    assert cube.values.dtype == np.float64
    np.testing.assert_array_equal(cube.values[0], [[1.0, 2.0], [3.0, 4.0]])


def test_load_cube_aviris_sized_descriptor(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.integers(0, 10000, size=(220, 145, 145), dtype=np.uint16)
    path = tmp_path / "pines.raw"
    write_raw_cube(path, values, "uint16", "little", "bil")
    cube = load_cube(path, CubeHeader(145, 145, 220, "uint16", "little", "bil"))
    assert (cube.rows, cube.cols, cube.bands) == (145, 145, 220)
    np.testing.assert_array_equal(cube.values, values.astype(np.float64))


def test_load_cube_size_mismatch(tmp_path):
    path = tmp_path / "short.raw"
    path.write_bytes(b"\x00" * 999)
    header = CubeHeader(10, 10, 5, "uint16", "little", "bsq")
    with pytest.raises(DataIOError, match="999.*1000|1000.*999"):
        load_cube(path, header)


def test_load_cube_missing_file(tmp_path):
    with pytest.raises(DataIOError, match="no_such"):
        load_cube(tmp_path / "no_such.raw", CubeHeader(1, 1, 1))


def test_load_cube_rejects_non_finite(tmp_path):
    values = np.ones(12, dtype="<f4")
    values[7] = np.nan
    path = tmp_path / "nan.raw"
    path.write_bytes(values.tobytes())
    with pytest.raises(DataIOError, match="offset 7"):
        load_cube(path, CubeHeader(2, 2, 3, "float32", "little", "bsq"))


@pytest.mark.parametrize("interleave", ["bsq", "bil", "bip"])
@pytest.mark.parametrize("byteorder", ["little", "big"])
def test_interleave_and_byteorder_normalization(tmp_path, interleave, byteorder):
    # pixel (i, j) spectrum must be identical no matter the file layout
    rng = np.random.default_rng(5)
    values = rng.integers(0, 500, size=(4, 3, 5)).astype(np.float64)
    path = tmp_path / f"cube_{interleave}_{byteorder}.raw"
    write_raw_cube(path, values, "uint16", byteorder, interleave)
    cube = load_cube(path, CubeHeader(3, 5, 4, "uint16", byteorder, interleave))
    np.testing.assert_array_equal(cube.values, values)


def test_roundtrip_lossless_for_exact_types(tmp_path):
    rng = np.random.default_rng(11)
    values = rng.integers(-300, 300, size=(6, 7, 8)).astype(np.float64)
    path = tmp_path / "cube.raw"
    write_raw_cube(path, values, "int16", "big", "bip")
    cube = load_cube(path, CubeHeader(7, 8, 6, "int16", "big", "bip"))
    np.testing.assert_array_equal(cube.values, values)


def test_header_parsing_with_aliases_and_comments():
    header = parse_header_text(
        "# synthetic scene\nlines = 7\nsamples=9\nbands = 3\n"
        "dtype = float32\nbyte order = big\ninterleave = bil\nwavelength units = nm\n"
    )
    assert header == CubeHeader(7, 9, 3, "float32", "big", "bil")


def test_header_missing_keys():
    with pytest.raises(DataIOError, match="rows"):
        parse_header_text("cols = 3\nbands = 2\n")


def test_sidecar_header_discovery(tmp_path):
    values = np.arange(8, dtype=np.float64).reshape(2, 2, 2)
    path = tmp_path / "scene.raw"
    write_raw_cube(path, values, "uint8", "little", "bsq")
    write_header(tmp_path / "scene.raw.hdr", 2, 2, 2, "uint8", "little", "bsq")
    cube = load_cube(path)
    np.testing.assert_array_equal(cube.values, values)


class TestRemoveBands:
    def test_water_absorption_indian_pines(self):
        cube = HyperCube(2, 2, 220, np.arange(220 * 4, dtype=np.float64).reshape(220, 2, 2))
        removed = expand_band_ranges("104-108,150-163,220")
        assert len(removed) == 20
        reduced = remove_bands(cube, removed)
        assert reduced.bands == 200

    def test_salinas_band_list(self):
        cube = HyperCube(1, 2, 224, np.zeros((224, 1, 2)))
        removed = expand_band_ranges("108-112,154-167,224")
        assert len(removed) == 20
        assert remove_bands(cube, removed).bands == 204

    def test_empty_removal_is_identity(self):
        cube = HyperCube(2, 3, 4, np.random.default_rng(1).random((4, 2, 3)))
        reduced = remove_bands(cube, [])
        np.testing.assert_array_equal(reduced.values, cube.values)

    def test_values_preserved_bit_exact(self):
        rng = np.random.default_rng(2)
        cube = HyperCube(3, 3, 5, rng.random((5, 3, 3)))
        reduced = remove_bands(cube, [1, 3])
        np.testing.assert_array_equal(reduced.values, cube.values[[0, 2, 4]])

    def test_out_of_range_index(self):
        cube = HyperCube(1, 1, 3, np.zeros((3, 1, 1)))
        with pytest.raises(DataIOError):
            remove_bands(cube, [3])

    def test_order_independent_composition(self):
        rng = np.random.default_rng(3)
        cube = HyperCube(2, 2, 6, rng.random((6, 2, 2)))
        direct = remove_bands(cube, [1, 3])
        chained = remove_bands(remove_bands(cube, [3]), [1])
        swapped = remove_bands(remove_bands(cube, [1]), [2])  # old band 3
        np.testing.assert_array_equal(direct.values, chained.values)
        np.testing.assert_array_equal(direct.values, swapped.values)


def test_expand_band_ranges_zero_based():
    indices = expand_band_ranges("104-108,150-163,220")
    assert indices[:5] == [103, 104, 105, 106, 107]
    assert indices[-1] == 219


def test_expand_band_ranges_rejects_garbage():
    with pytest.raises(ConfigError):
        expand_band_ranges("5-3")
    with pytest.raises(ConfigError):
        expand_band_ranges("0")
    with pytest.raises(ConfigError):
        expand_band_ranges("abc")


class TestLoadLabels:
    def test_pgm_binary(self, tmp_path):
        labels = np.array([[0, 1, 2], [3, 0, 1]], dtype=np.int32)
        write_pgm(tmp_path / "gt.pgm", labels)
        label_map = load_labels(tmp_path / "gt.pgm", 2, 3)
        np.testing.assert_array_equal(label_map.labels, labels)
        assert label_map.classes.tolist() == [1, 2, 3]

    def test_pgm_ascii(self, tmp_path):
        (tmp_path / "gt.pgm").write_text("P2\n# comment\n3 2\n255\n0 1 2\n3 0 1\n")
        label_map = load_labels(tmp_path / "gt.pgm", 2, 3)
        np.testing.assert_array_equal(label_map.labels, [[0, 1, 2], [3, 0, 1]])

    def test_dimension_mismatch(self, tmp_path):
        write_pgm(tmp_path / "gt.pgm", np.zeros((4, 4), dtype=np.int32))
        with pytest.raises(DataIOError, match="4x4"):
            load_labels(tmp_path / "gt.pgm", 2, 3)

    def test_all_zero_raster(self, tmp_path):
        write_pgm(tmp_path / "gt.pgm", np.zeros((3, 3), dtype=np.int32))
        label_map = load_labels(tmp_path / "gt.pgm", 3, 3)
        assert label_map.classes.size == 0

    def test_raw_with_sidecar_header(self, tmp_path):
        labels = np.array([[1, 2], [0, 16]], dtype=np.int32)
        (tmp_path / "gt.raw").write_bytes(labels.astype("<u2").tobytes())
        write_header(tmp_path / "gt.raw.hdr", 2, 2, 1, "uint16", "little", "bsq")
        label_map = load_labels(tmp_path / "gt.raw", 2, 2)
        np.testing.assert_array_equal(label_map.labels, labels)


class TestWriteClassMap:
    def test_single_black_background_pixel(self, tmp_path):
        path = tmp_path / "map.ppm"
        write_class_map(LabelMap(1, 1, np.zeros((1, 1), np.int32)), {}, path)
        rows, cols, rgb = read_ppm(path)
        assert (rows, cols) == (1, 1)
        assert rgb[0, 0].tolist() == [0, 0, 0]

    def test_direct_palette_lookup(self, tmp_path):
        path = tmp_path / "map.ppm"
        label_map = LabelMap(2, 1, np.array([[1], [2]], np.int32))
        write_class_map(label_map, {1: (255, 0, 0), 2: (0, 255, 0)}, path)
        rows, cols, rgb = read_ppm(path)
        assert rgb[0, 0].tolist() == [255, 0, 0]
        assert rgb[1, 0].tolist() == [0, 255, 0]

    def test_roundtrip_recovers_geometry(self, tmp_path):
        rng = np.random.default_rng(4)
        labels = rng.integers(0, 4, size=(9, 7)).astype(np.int32)
        palette = {1: (10, 0, 0), 2: (0, 20, 0), 3: (0, 0, 30)}
        path = tmp_path / "map.ppm"
        write_class_map(LabelMap(9, 7, labels), palette, path)
        rows, cols, rgb = read_ppm(path)
        inverse = {rgb_val: label for label, rgb_val in palette.items()}
        inverse[(0, 0, 0)] = 0
        recovered = np.array(
            [[inverse[tuple(rgb[i, j])] for j in range(cols)] for i in range(rows)]
        )
        np.testing.assert_array_equal(recovered, labels)

    def test_missing_palette_entry_names_label(self, tmp_path):
        label_map = LabelMap(1, 2, np.array([[1, 7]], np.int32))
        with pytest.raises(ConfigError, match="label 7"):
            write_class_map(label_map, {1: (1, 1, 1)}, tmp_path / "map.ppm")


def test_hypercube_invariants():
    with pytest.raises(DataIOError):
        HyperCube(2, 2, 2, np.zeros((2, 2, 1)))
    bad = np.zeros((1, 1, 1))
    bad[0, 0, 0] = np.inf
    with pytest.raises(DataIOError):
        HyperCube(1, 1, 1, bad)


def test_labelmap_rejects_negative():
    with pytest.raises(DataIOError):
        LabelMap(1, 2, np.array([[0, -1]], np.int32))
