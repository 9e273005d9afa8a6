"""Bit-plane codec between secret bits and pixels at grille positions.

Pixel domain convention, used everywhere in this package: images are
real-valued arrays in [-1, 1]; the quantized 8-bit view of a value v is

    v8 = round_half_away((v + 1) * 127.5)  in 0..255

All bit-plane operations act on v8; all optimization losses act on the
real domain. Rounding is half-away-from-zero, pinned so that sender and
receiver quantize identically on every platform.

Each writable slot is one (pixel, channel) pair of a grille support
pixel. A slot stores one chunk of (8 - si) message bits in the top bit
planes of its byte; the si low planes are redundancy, set to the bin
midpoint pattern 100...0 so that the stored value sits farthest from
both decision boundaries. Slots are traversed row-major over the grille
support, then channel 0..C-1 within a pixel; the traversal order is part
of the wire contract between the two parties.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grille import PaddedGrille, capacity


class CapacityError(ValueError):
    """Message does not fit (or exceeds) the grille's writable bits."""


class CodecError(ValueError):
    """Malformed message, chunk, or shape disagreement."""


# --- quantization ----------------------------------------------------------

def quantize(image: np.ndarray) -> np.ndarray:
    """[-1, 1] real image -> uint8, rounding half away from zero."""
    v8 = np.floor((np.asarray(image, dtype=np.float64) + 1.0) * 127.5 + 0.5)
    return np.clip(v8, 0, 255).astype(np.uint8)


def dequantize(v8: np.ndarray) -> np.ndarray:
    """uint8 -> [-1, 1] real image (exact inverse up to quantization bins)."""
    return np.asarray(v8, dtype=np.float64) / 127.5 - 1.0


# --- messages ---------------------------------------------------------------

@dataclass(frozen=True)
class SecretMessage:
    """Ordered bit sequence; bits are uint8 values 0/1."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8).ravel()
        if bits.size and not np.isin(bits, (0, 1)).all():
            raise CodecError("message bits must be 0 or 1")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def length(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other) -> bool:
        return isinstance(other, SecretMessage) and np.array_equal(self.bits, other.bits)

    @classmethod
    def from_bitstring(cls, s: str) -> "SecretMessage":
        if any(ch not in "01" for ch in s):
            raise CodecError("bitstring may contain only '0' and '1'")
        return cls(np.array([int(ch) for ch in s], dtype=np.uint8))

    @classmethod
    def from_bytes(cls, data: bytes) -> "SecretMessage":
        return cls(np.unpackbits(np.frombuffer(data, dtype=np.uint8)))

    @classmethod
    def from_hex(cls, s: str) -> "SecretMessage":
        s = s.strip()
        if len(s) % 2:
            s = s + "0"
        return cls.from_bytes(bytes.fromhex(s))

    @classmethod
    def random(cls, length: int, rng: np.random.Generator) -> "SecretMessage":
        return cls(rng.integers(0, 2, size=length, dtype=np.uint8))

    def to_bitstring(self) -> str:
        return "".join(str(int(b)) for b in self.bits)

    def to_bytes(self) -> bytes:
        """Bits packed MSB-first, zero-padded to a whole byte."""
        return np.packbits(self.bits).tobytes()


def bit_error_rate(sent: SecretMessage, received: SecretMessage) -> float:
    """Hamming distance / length; requires equal lengths."""
    if sent.length != received.length:
        raise CodecError(f"length mismatch: sent {sent.length} vs received {received.length}")
    if sent.length == 0:
        return 0.0
    return float(np.count_nonzero(sent.bits != received.bits)) / sent.length


@dataclass(frozen=True)
class StegoImage:
    """Completed carrier plus a record of how it was produced.

    The provenance dict stays in memory; the public sidecar written next
    to a stego file carries only the non-secret subset of it.
    """

    image: np.ndarray
    provenance: dict

    def __post_init__(self):
        img = np.ascontiguousarray(self.image, dtype=np.float64)
        if img.min() < -1.0 or img.max() > 1.0:
            raise CodecError("stego pixels must lie in [-1, 1]")
        img.setflags(write=False)
        object.__setattr__(self, "image", img)


# --- chunk codec ------------------------------------------------------------

def encode_chunk(bits: np.ndarray, si: int) -> int:
    """(8 - si) message bits -> byte with midpoint redundancy pattern.

    The chunk occupies the top bit planes; redundancy planes get 100...0,
    i.e. 2^(si-1), which centers the value in its decoding bin. si=0 is
    the identity on bytes.
    """
    if not (0 <= si <= 7):
        raise CodecError(f"stability index must be in 0..7, got {si}")
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    width = 8 - si
    if bits.size != width:
        raise CodecError(f"chunk must have exactly {width} bits at si={si}, got {bits.size}")
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    byte = value << si
    if si > 0:
        byte |= 1 << (si - 1)
    return byte


def decode_chunk(pixel: int, si: int) -> np.ndarray:
    """Byte -> top (8 - si) bits, MSB first. Exact inverse of encode_chunk."""
    if not (0 <= si <= 7):
        raise CodecError(f"stability index must be in 0..7, got {si}")
    width = 8 - si
    value = int(pixel) >> si
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def decoding_margin(si: int) -> float:
    """Largest real-domain perturbation guaranteed not to change decode.

    A stored midpoint byte survives any |delta| < (2^si - 1)/255 in the
    real domain (equivalently 2^(si-1) - 0.5 quantization steps).
    """
    return (2**si - 1) / 255.0


# --- expansion / extraction -------------------------------------------------

@dataclass(frozen=True)
class ExpandedCarrier:
    """Corrupted cover with encoded message values written at grille slots."""

    image: np.ndarray
    padded_grille: PaddedGrille = field(repr=False)
    si: int

    def __post_init__(self):
        img = np.ascontiguousarray(self.image, dtype=np.float64)
        img.setflags(write=False)
        object.__setattr__(self, "image", img)


def _check_image_grille(image: np.ndarray, padded: PaddedGrille):
    image = np.asarray(image)
    if image.ndim != 3:
        raise CodecError(f"expected (H, W, C) image, got shape {image.shape}")
    if image.shape[:2] != padded.image_shape:
        raise CodecError(
            f"image spatial shape {image.shape[:2]} != grille frame {padded.image_shape}"
        )
    return image


def _chunk_all_bits(bits: np.ndarray, n_slots: int, width: int) -> np.ndarray:
    """Split bits into n_slots chunks of `width`, zero-padding the tail."""
    full = np.zeros(n_slots * width, dtype=np.uint8)
    full[: bits.size] = bits
    return full.reshape(n_slots, width)


def expand_message(
    message: SecretMessage,
    cover: np.ndarray,
    padded: PaddedGrille,
    si: int,
) -> ExpandedCarrier:
    """Write the message into the cover at grille slots; other pixels untouched.

    Every support slot gets written: slots beyond the message carry zero
    chunks, so an empty message produces the all-zero payload. Extraction
    with the true length inverts this exactly before any completion runs.
    """
    cover = _check_image_grille(cover, padded)
    channels = cover.shape[2]
    cap = capacity(padded.source, channels, si)
    if message.length > cap:
        raise CapacityError(
            f"message of {message.length} bits exceeds capacity {cap} "
            f"(popcount {padded.popcount}, {channels} channels, si={si})"
        )
    width = 8 - si
    support = padded.support()
    n_slots = support.shape[0] * channels
    chunks = _chunk_all_bits(message.bits, n_slots, width)

    carrier = np.array(cover, dtype=np.float64, copy=True)
    slot = 0
    for row, col in support:
        for ch in range(channels):
            byte = encode_chunk(chunks[slot], si)
            carrier[row, col, ch] = byte / 127.5 - 1.0
            slot += 1
    return ExpandedCarrier(image=carrier, padded_grille=padded, si=si)


def extract_message(
    image: np.ndarray,
    padded: PaddedGrille,
    si: int,
    expected_length: int,
) -> SecretMessage:
    """Read grille slots in traversal order and decode the top bit planes.

    Model-free: only the image pixels and the shared grille parameters
    are consulted. ``expected_length`` travels out of band.
    """
    image = _check_image_grille(image, padded)
    channels = image.shape[2]
    cap = capacity(padded.source, channels, si)
    if expected_length > cap:
        raise CapacityError(
            f"expected_length {expected_length} exceeds capacity {cap} at si={si}"
        )
    if expected_length < 0:
        raise CodecError("expected_length must be non-negative")
    v8 = quantize(image)
    bits = []
    needed_slots = -(-expected_length // (8 - si)) if expected_length else 0
    slot = 0
    for row, col in padded.support():
        for ch in range(channels):
            if slot >= needed_slots:
                break
            bits.append(decode_chunk(v8[row, col, ch], si))
            slot += 1
        if slot >= needed_slots:
            break
    if bits:
        flat = np.concatenate(bits)[:expected_length]
    else:
        flat = np.zeros(0, dtype=np.uint8)
    return SecretMessage(flat)
