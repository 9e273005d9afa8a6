"""Grille derivation, padding, capacity, and the exchange file format."""

import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stegofill import (
    CardanGrille,
    GrilleError,
    capacity,
    center_offset,
    check_overlap,
    derive_grille,
    load_grille,
    zero_pad,
)
from stegofill.grille import format_grille_file, parse_grille_file


def reference_cells(key: bytes, shape, density):
    """Second implementation of the keyed stream, kept deliberately naive."""
    a, b = shape
    out = np.zeros((a, b), dtype=np.uint8)
    stream = b""
    counter = 0
    while len(stream) < a * b:
        stream += hashlib.sha256(key + counter.to_bytes(8, "big")).digest()
        counter += 1
    threshold = int(density * 256)
    for i in range(a):
        for j in range(b):
            out[i, j] = 1 if stream[i * b + j] < threshold else 0
    return out


# Frozen outputs of reference_cells, so a bug cannot hide in both copies.
CHECKERBOARD_KEY = b"checkerboard-564"
CHECKERBOARD_CELLS = [[1, 0, 1], [0, 1, 0], [1, 0, 1]]

GOLDEN_KEY = b"golden-vector"
GOLDEN_CELLS = [
    [0, 1, 0, 0, 0, 0, 0, 0],
    [0, 1, 1, 0, 0, 0, 1, 1],
    [0, 1, 1, 1, 0, 0, 0, 0],
    [0, 1, 1, 1, 1, 1, 0, 0],
    [1, 1, 1, 0, 0, 1, 0, 1],
    [1, 1, 1, 1, 1, 0, 1, 1],
    [0, 0, 1, 0, 0, 1, 0, 1],
    [1, 1, 0, 0, 0, 1, 0, 0],
]


class TestDerivation:
    def test_checkerboard_golden_vector(self):
        g = derive_grille(CHECKERBOARD_KEY, (3, 3), 0.5)
        assert g.cells.tolist() == CHECKERBOARD_CELLS
        assert g.popcount == 5

    def test_eight_by_eight_golden_vector(self):
        g = derive_grille(GOLDEN_KEY, (8, 8), 0.5)
        assert g.cells.tolist() == GOLDEN_CELLS
        assert g.popcount == 31

    def test_matches_reference_implementation(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            key = rng.bytes(rng.integers(1, 33))
            shape = (int(rng.integers(1, 20)), int(rng.integers(1, 20)))
            density = float(rng.uniform(0.05, 1.0))
            g = derive_grille(key, shape, density)
            np.testing.assert_array_equal(g.cells, reference_cells(key, shape, density))

    def test_deterministic(self):
        a = derive_grille(b"k", (12, 9), 0.4)
        b = derive_grille(b"k", (12, 9), 0.4)
        np.testing.assert_array_equal(a.cells, b.cells)

    def test_density_one_fills_everything(self):
        g = derive_grille(b"any", (7, 7), 1.0)
        assert g.popcount == 49

    def test_key_sensitivity(self):
        # One flipped key byte must not reproduce the grille.
        rng = np.random.default_rng(9)
        identical = 0
        for _ in range(120):
            key = bytearray(rng.bytes(16))
            base = derive_grille(bytes(key), (16, 16), 0.5)
            key[rng.integers(0, 16)] ^= 1 << rng.integers(0, 8)
            other = derive_grille(bytes(key), (16, 16), 0.5)
            if np.array_equal(base.cells, other.cells):
                identical += 1
        assert identical == 0

    def test_rejects_bad_arguments(self):
        with pytest.raises(GrilleError):
            derive_grille(b"", (3, 3))
        with pytest.raises(GrilleError):
            derive_grille(b"k", (0, 3))
        with pytest.raises(GrilleError):
            derive_grille(b"k", (3, 3), density=0.0)
        with pytest.raises(GrilleError):
            derive_grille(b"k", (3, 3), density=1.5)

    def test_cells_are_read_only(self):
        g = derive_grille(b"k", (4, 4))
        with pytest.raises(ValueError):
            g.cells[0, 0] = 0

    @given(
        st.binary(min_size=1, max_size=24),
        st.integers(1, 12),
        st.integers(1, 12),
        st.floats(0.05, 1.0),
    )
    def test_derivation_property(self, key, a, b, density):
        g = derive_grille(key, (a, b), density)
        assert g.cells.shape == (a, b)
        assert set(np.unique(g.cells)) <= {0, 1}
        np.testing.assert_array_equal(g.cells, reference_cells(key, (a, b), density))


class TestPaddingAndCapacity:
    def test_center_offset(self):
        assert center_offset((64, 64), (8, 8)) == (28, 28)
        assert center_offset((64, 64), (64, 64)) == (0, 0)
        assert center_offset((5, 5), (2, 2)) == (1, 1)

    def test_zero_pad_places_cells(self):
        g = load_grille(CHECKERBOARD_CELLS)
        padded = zero_pad(g, (8, 8), offset=(2, 3))
        assert padded.cells.shape == (8, 8)
        assert padded.cells.sum() == g.popcount
        for (i, j) in zip(*np.nonzero(np.array(CHECKERBOARD_CELLS))):
            assert padded.cells[2 + i, 3 + j] == 1

    def test_zero_pad_default_centers(self):
        g = load_grille(np.ones((4, 4), dtype=np.uint8))
        padded = zero_pad(g, (10, 10))
        assert padded.offset == (3, 3)
        assert padded.cells[3:7, 3:7].sum() == 16

    def test_zero_pad_exhaustive_small(self):
        rng = np.random.default_rng(3)
        for a in range(1, 9):
            for b in range(1, 9):
                cells = (rng.random((a, b)) < 0.5).astype(np.uint8)
                g = load_grille(cells)
                padded = zero_pad(g, (16, 16), offset=(16 - a, 16 - b))
                assert padded.cells.sum() == cells.sum()
                np.testing.assert_array_equal(
                    padded.cells[16 - a:, 16 - b:], cells
                )

    def test_zero_pad_rejects_overflow(self):
        g = load_grille(np.ones((4, 4), dtype=np.uint8))
        with pytest.raises(GrilleError):
            zero_pad(g, (8, 8), offset=(6, 0))
        with pytest.raises(GrilleError):
            zero_pad(g, (3, 3))

    def test_support_row_major(self):
        g = load_grille(CHECKERBOARD_CELLS)
        padded = zero_pad(g, (5, 5), offset=(1, 1))
        support = padded.support()
        expected = [(1, 1), (1, 3), (2, 2), (3, 1), (3, 3)]
        assert [tuple(p) for p in support] == expected

    def test_capacity_formula(self):
        rng = np.random.default_rng(8)
        for _ in range(40):
            cells = (rng.random((6, 6)) < 0.5).astype(np.uint8)
            g = load_grille(cells)
            for si in range(8):
                for c in (1, 3):
                    assert capacity(g, c, si) == int(cells.sum()) * c * (8 - si)

    def test_overlap_report(self):
        g = load_grille(np.ones((6, 6), dtype=np.uint8))
        padded = zero_pad(g, (12, 12))
        mask = np.ones((12, 12, 1))
        mask[4:8, 4:8, :] = 0  # region smaller than the grille
        report = check_overlap(padded, mask)
        assert report.support_cells == 36
        assert report.cells_on_kept == 36 - 16
        assert not report.fully_inside
        mask[:, :, :] = 0
        report = check_overlap(padded, mask)
        assert report.cells_on_kept == 0
        assert report.fully_inside


class TestExchangeFormat:
    def test_keyed_document_bytes(self):
        g = derive_grille(b"demo", (6, 6), 0.5)
        text = format_grille_file(g, si=5)
        assert text == (
            "version: 1\n"
            "shape: 6 6\n"
            "density: 0.5\n"
            "offset: center\n"
            "si: 5\n"
            "key: 64656d6f\n"
        )

    def test_explicit_cells_document_bytes(self):
        g = load_grille(CHECKERBOARD_CELLS)
        text = format_grille_file(g, si=3, offset=(4, 7))
        # density on an explicit grille is the observed 1-cell fraction
        assert text == (
            "version: 1\n"
            "shape: 3 3\n"
            "density: 0.5555555555555556\n"
            "offset: 4 7\n"
            "si: 3\n"
            "cells:\n"
            "101\n"
            "010\n"
            "101\n"
        )

    def test_roundtrip_keyed(self):
        g = derive_grille(b"\x00\xffkey", (5, 9), 0.3)
        parsed, si, offset = parse_grille_file(format_grille_file(g, si=6, offset=(2, 2)))
        np.testing.assert_array_equal(parsed.cells, g.cells)
        assert parsed.key == g.key
        assert si == 6
        assert offset == (2, 2)

    def test_roundtrip_explicit(self):
        cells = np.array(GOLDEN_CELLS, dtype=np.uint8)
        parsed, si, offset = parse_grille_file(format_grille_file(load_grille(cells), si=0))
        np.testing.assert_array_equal(parsed.cells, cells)
        assert si == 0
        assert offset is None

    def test_file_roundtrip(self, tmp_path):
        from stegofill import read_grille_file, write_grille_file

        g = derive_grille(b"disk", (4, 4), 0.7)
        path = tmp_path / "g.txt"
        write_grille_file(path, g, si=2, offset=(1, 1))
        parsed, si, offset = read_grille_file(path)
        np.testing.assert_array_equal(parsed.cells, g.cells)
        assert (si, offset) == (2, (1, 1))

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "version: 2\nshape: 3 3\ndensity: 0.5\noffset: center\nsi: 5\nkey: aa\n",
            "version: 1\nshape: 3\ndensity: 0.5\noffset: center\nsi: 5\nkey: aa\n",
            "version: 1\nshape: 3 3\ndensity: 0.5\noffset: center\nsi: 9\nkey: aa\n",
            "version: 1\nshape: 3 3\ndensity: 0.5\noffset: center\nsi: 5\n",
            "version: 1\nshape: 2 2\ndensity: 0.5\noffset: center\nsi: 5\ncells:\n10\n1\n",
            "version: 1\nshape: 2 2\ndensity: 0.5\noffset: center\nsi: 5\ncells:\n10\n12\n",
        ],
    )
    def test_rejects_malformed_documents(self, text):
        with pytest.raises(GrilleError):
            parse_grille_file(text)

    def test_mismatched_key_and_cells_rejected(self):
        # A document carrying both key and cells is ambiguous.
        text = (
            "version: 1\nshape: 3 3\ndensity: 0.5\noffset: center\nsi: 5\n"
            "key: aa\ncells:\n101\n010\n101\n"
        )
        with pytest.raises(GrilleError):
            parse_grille_file(text)

    @given(
        st.binary(min_size=1, max_size=16),
        st.integers(1, 10),
        st.integers(1, 10),
        st.integers(0, 7),
    )
    def test_format_parse_inverse(self, key, a, b, si):
        g = derive_grille(key, (a, b), 0.5)
        parsed, si2, offset = parse_grille_file(format_grille_file(g, si=si))
        np.testing.assert_array_equal(parsed.cells, g.cells)
        assert si2 == si and offset is None


class TestLoadGrille:
    def test_accepts_binary_array(self):
        g = load_grille([[1, 0], [0, 1]])
        assert isinstance(g, CardanGrille)
        assert g.key is None
        assert g.popcount == 2

    def test_rejects_nonbinary(self):
        with pytest.raises(GrilleError):
            load_grille([[1, 2], [0, 1]])
        with pytest.raises(GrilleError):
            load_grille(np.zeros((0, 3)))
        with pytest.raises(GrilleError):
            load_grille(np.ones((2, 2, 2)))
