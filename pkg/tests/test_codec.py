"""Chunk codec, message expansion/extraction, quantization."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stegofill import (
    CapacityError,
    CodecError,
    SecretMessage,
    bit_error_rate,
    capacity,
    decode_chunk,
    decoding_margin,
    dequantize,
    encode_chunk,
    expand_message,
    extract_message,
    load_grille,
    quantize,
    zero_pad,
)

CHECKERBOARD = [[1, 0, 1], [0, 1, 0], [1, 0, 1]]


def all_chunks(si):
    width = 8 - si
    for value in range(2**width):
        yield np.array([(value >> (width - 1 - k)) & 1 for k in range(width)],
                       dtype=np.uint8)


class TestChunkCodec:
    def test_hand_values(self):
        assert encode_chunk([1, 0, 1], si=5) == 176
        assert encode_chunk([0], si=7) == 64
        assert encode_chunk([1], si=7) == 192
        assert encode_chunk([0] * 8, si=0) == 0
        assert decode_chunk(176, si=5).tolist() == [1, 0, 1]
        assert decode_chunk(255, si=7).tolist() == [1]
        assert decode_chunk(0, si=7).tolist() == [0]

    def test_exhaustive_roundtrip(self):
        cases = 0
        for si in range(8):
            for chunk in all_chunks(si):
                got = decode_chunk(encode_chunk(chunk, si), si)
                assert got.tolist() == chunk.tolist()
                cases += 1
        assert cases == 510  # sum of 2^(8-si) over si=0..7

    def test_redundancy_is_midpoint(self):
        for si in range(1, 8):
            byte = encode_chunk([0] * (8 - si), si)
            assert byte == 1 << (si - 1)

    def test_rejects_wrong_width(self):
        with pytest.raises(CodecError):
            encode_chunk([1, 0], si=5)
        with pytest.raises(CodecError):
            encode_chunk([1, 0, 1], si=9)

    @given(st.integers(0, 7), st.integers(0, 255))
    def test_decode_total(self, si, pixel):
        bits = decode_chunk(pixel, si)
        assert bits.shape == (8 - si,)
        assert set(bits.tolist()) <= {0, 1}


class TestQuantization:
    def test_round_half_away(self):
        # v8 = floor((v+1)*127.5 + 0.5): 0.0 maps to 127.5 and rounds up.
        assert quantize(np.array([-1.0])).tolist() == [0]
        assert quantize(np.array([1.0])).tolist() == [255]
        assert quantize(np.array([0.0])).tolist() == [128]

    def test_bin_edges(self):
        # Values just inside each half-step band land on the byte itself.
        bytes_ = np.arange(256, dtype=np.float64)
        lo = (bytes_ - 0.499) / 127.5 - 1.0
        hi = (bytes_ + 0.499) / 127.5 - 1.0
        assert quantize(lo).tolist() == bytes_.astype(int).tolist()
        assert quantize(hi).tolist() == bytes_.astype(int).tolist()

    def test_clips_out_of_range(self):
        assert quantize(np.array([-1.2])).tolist() == [0]
        assert quantize(np.array([1.7])).tolist() == [255]

    def test_dequantize_roundtrip(self):
        bytes_ = np.arange(256, dtype=np.uint8)
        assert quantize(dequantize(bytes_)).tolist() == bytes_.tolist()

    @given(st.floats(-1.0, 1.0))
    def test_quantize_within_byte_range(self, v):
        b = int(quantize(np.array([v]))[0])
        assert 0 <= b <= 255


class TestMargin:
    def test_margin_values(self):
        assert decoding_margin(0) == 0.0
        assert decoding_margin(5) == pytest.approx(31 / 255)
        assert decoding_margin(7) == pytest.approx(127 / 255)

    @pytest.mark.parametrize("si", range(1, 8))
    def test_noise_below_margin_is_harmless(self, si):
        rng = np.random.default_rng(si)
        margin = decoding_margin(si)
        for chunk in all_chunks(si):
            byte = encode_chunk(chunk, si)
            real = dequantize(np.array([byte], dtype=np.uint8))[0]
            for _ in range(8):
                delta = rng.uniform(-margin, margin) * 0.999
                noisy = quantize(np.array([real + delta]))[0]
                assert decode_chunk(int(noisy), si).tolist() == chunk.tolist()

    @pytest.mark.parametrize("si", range(1, 8))
    def test_perturbation_just_past_margin_flips(self, si):
        # One quantization step past the margin must leave the bin. Use a
        # non-maximal chunk so the flip is not masked by clipping at 255.
        chunk = next(all_chunks(si))
        byte = encode_chunk(chunk, si)
        real = dequantize(np.array([byte], dtype=np.uint8))[0]
        past = (2**si) / 255.0
        noisy = quantize(np.array([real + past]))[0]
        assert decode_chunk(int(noisy), si).tolist() != chunk.tolist()


class TestSecretMessage:
    def test_bitstring_roundtrip(self):
        m = SecretMessage.from_bitstring("0100110")
        assert m.length == 7
        assert m.to_bitstring() == "0100110"

    def test_bytes_roundtrip(self):
        m = SecretMessage.from_bytes(b"\xa5\x01")
        assert m.length == 16
        assert m.to_bytes() == b"\xa5\x01"
        assert m.to_bitstring() == "1010010100000001"

    def test_hex_roundtrip(self):
        m = SecretMessage.from_hex("a5")
        assert m.to_bitstring() == "10100101"

    def test_rejects_junk(self):
        with pytest.raises(CodecError):
            SecretMessage.from_bitstring("0102")

    def test_random_reproducible(self):
        a = SecretMessage.random(64, np.random.default_rng(3))
        b = SecretMessage.random(64, np.random.default_rng(3))
        assert a == b

    def test_ber(self):
        a = SecretMessage.from_bitstring("0101")
        assert bit_error_rate(a, a) == 0.0
        assert bit_error_rate(a, SecretMessage.from_bitstring("1010")) == 1.0
        assert bit_error_rate(a, SecretMessage.from_bitstring("0111")) == 0.25
        with pytest.raises(CodecError):
            bit_error_rate(a, SecretMessage.from_bitstring("01"))


def make_cover(shape, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1, 1, size=shape)


class TestExpandExtract:
    def test_single_channel_walkthrough(self):
        # Five support pixels on the 3x3 checkerboard carry one bit each
        # at si=7, in row-major support order.
        grille = load_grille(CHECKERBOARD)
        padded = zero_pad(grille, (3, 3), offset=(0, 0))
        cover = make_cover((3, 3, 1))
        m = SecretMessage.from_bitstring("01011")
        carrier = expand_message(m, cover, padded, si=7)
        v8 = quantize(carrier.image)
        assert v8[0, 0, 0] == 64   # bit 0
        assert v8[0, 2, 0] == 192  # bit 1
        assert v8[1, 1, 0] == 64   # bit 0
        assert v8[2, 0, 0] == 192  # bit 1
        assert v8[2, 2, 0] == 192  # bit 1
        got = extract_message(carrier.image, padded, si=7, expected_length=5)
        assert got == m

    def test_nonsupport_pixels_untouched(self):
        grille = load_grille(CHECKERBOARD)
        padded = zero_pad(grille, (6, 6), offset=(2, 1))
        cover = make_cover((6, 6, 3), seed=1)
        m = SecretMessage.random(capacity(grille, 3, 5), np.random.default_rng(2))
        carrier = expand_message(m, cover, padded, si=5)
        support = padded.cells.astype(bool)
        np.testing.assert_array_equal(carrier.image[~support], cover[~support])

    def test_channel_order_within_pixel(self):
        grille = load_grille([[1]])
        padded = zero_pad(grille, (1, 1), offset=(0, 0))
        cover = make_cover((1, 1, 3))
        m = SecretMessage.from_bitstring("011")  # one si=7 bit per channel
        carrier = expand_message(m, cover, padded, si=7)
        v8 = quantize(carrier.image)
        assert v8[0, 0, 0] == 64
        assert v8[0, 0, 1] == 192
        assert v8[0, 0, 2] == 192

    def test_empty_message_writes_zero_chunks(self):
        grille = load_grille(CHECKERBOARD)
        padded = zero_pad(grille, (3, 3), offset=(0, 0))
        cover = make_cover((3, 3, 1))
        m = SecretMessage.from_bitstring("")
        carrier = expand_message(m, cover, padded, si=6)
        v8 = quantize(carrier.image)
        support = padded.cells.astype(bool)
        assert set(np.unique(v8[support])) == {encode_chunk([0, 0], 6)}
        got = extract_message(carrier.image, padded, si=6, expected_length=0)
        assert got.length == 0

    def test_partial_final_chunk_zero_padded(self):
        grille = load_grille([[1]])
        padded = zero_pad(grille, (1, 1), offset=(0, 0))
        cover = make_cover((1, 1, 1))
        m = SecretMessage.from_bitstring("11")  # si=4 chunk has 4 bits
        carrier = expand_message(m, cover, padded, si=4)
        v8 = int(quantize(carrier.image)[0, 0, 0])
        assert v8 == encode_chunk([1, 1, 0, 0], 4)
        assert extract_message(carrier.image, padded, 4, 2) == m

    def test_capacity_overflow_reports_both_numbers(self):
        grille = load_grille(CHECKERBOARD)
        padded = zero_pad(grille, (3, 3), offset=(0, 0))
        cover = make_cover((3, 3, 1))
        cap = capacity(grille, 1, 7)
        with pytest.raises(CapacityError) as err:
            expand_message(SecretMessage.from_bitstring("1" * 9), cover, padded, si=7)
        assert str(cap) in str(err.value)
        assert "9" in str(err.value)

    def test_extract_rejects_impossible_length(self):
        grille = load_grille(CHECKERBOARD)
        padded = zero_pad(grille, (3, 3), offset=(0, 0))
        cover = make_cover((3, 3, 1))
        with pytest.raises(CapacityError):
            extract_message(cover, padded, si=7, expected_length=6)

    def test_locality(self):
        # Extraction must ignore everything off the grille support.
        rng = np.random.default_rng(5)
        grille = load_grille(CHECKERBOARD)
        padded = zero_pad(grille, (8, 8), offset=(3, 2))
        cover = make_cover((8, 8, 3), seed=6)
        m = SecretMessage.random(capacity(grille, 3, 5), rng)
        carrier = expand_message(m, cover, padded, si=5)
        support = padded.cells.astype(bool)
        for _ in range(20):
            vandalized = carrier.image.copy()
            noise = rng.uniform(-1, 1, size=vandalized.shape)
            vandalized[~support] = noise[~support]
            got = extract_message(vandalized, padded, si=5, expected_length=m.length)
            assert got == m

    def test_all_zero_grille_extracts_empty(self):
        padded = zero_pad(load_grille([[1]]), (4, 4), offset=(0, 0))
        blank = zero_pad(load_grille(np.zeros((2, 2), dtype=np.uint8) + 0), (4, 4))
        # zero-popcount grille: capacity 0, empty extraction only
        assert blank.popcount == 0
        cover = make_cover((4, 4, 1))
        got = extract_message(cover, blank, si=5, expected_length=0)
        assert got.length == 0
        del padded

    @given(st.integers(0, 2**32 - 1))
    def test_expand_extract_inverse(self, seed):
        rng = np.random.default_rng(seed)
        a, b = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        cells = (rng.random((a, b)) < 0.6).astype(np.uint8)
        if cells.sum() == 0:
            cells[0, 0] = 1
        grille = load_grille(cells)
        H, W = a + int(rng.integers(0, 5)), b + int(rng.integers(0, 5))
        C = int(rng.choice([1, 3]))
        si = int(rng.integers(0, 8))
        padded = zero_pad(grille, (H, W),
                          offset=(int(rng.integers(0, H - a + 1)),
                                  int(rng.integers(0, W - b + 1))))
        cap = capacity(grille, C, si)
        m = SecretMessage.random(int(rng.integers(0, cap + 1)), rng)
        cover = rng.uniform(-1, 1, size=(H, W, C))
        carrier = expand_message(m, cover, padded, si)
        got = extract_message(carrier.image, padded, si, m.length)
        assert got == m
