"""Keyed binary grille masks that mark writable pixel positions.

A grille is a small (a, b) binary matrix: 1 marks a cell where message
data may be written, 0 marks a cell that must be left alone. Sender and
receiver derive the same grille from a short shared key, so the grille
never travels with the image.

Derivation is a counter-mode hash stream, fixed here so that independent
implementations interoperate byte-for-byte:

    stream = SHA256(key || be64(0)) || SHA256(key || be64(1)) || ...

One stream byte is consumed per cell in row-major order, and a cell is 1
iff its byte < floor(density * 256). density=1.0 therefore yields the
all-ones grille.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

HASH_BLOCK = 32  # SHA-256 digest size


class GrilleError(ValueError):
    """Invalid grille parameters, placement, or exchange file."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.uint8)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CardanGrille:
    """Binary (a, b) mask; ``key`` is None for hand-specified grilles."""

    cells: np.ndarray
    key: bytes | None
    density: float

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.ndim != 2:
            raise GrilleError(f"grille cells must be 2-D, got shape {cells.shape}")
        if not np.isin(cells, (0, 1)).all():
            raise GrilleError("grille cells must be 0 or 1")
        object.__setattr__(self, "cells", _freeze(cells))

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def popcount(self) -> int:
        return int(self.cells.sum())

    @property
    def usable(self) -> bool:
        """A grille with no 1-cells cannot carry a message."""
        return self.popcount >= 1


@dataclass(frozen=True)
class PaddedGrille:
    """Grille placed inside a full (H, W) image frame, zero elsewhere."""

    cells: np.ndarray
    offset: tuple[int, int]
    source: CardanGrille = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "cells", _freeze(np.asarray(self.cells)))

    @property
    def image_shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def popcount(self) -> int:
        return int(self.cells.sum())

    def support(self) -> np.ndarray:
        """(n, 2) array of (row, col) 1-cell positions in row-major order."""
        rows, cols = np.nonzero(self.cells)
        return np.column_stack([rows, cols])


@dataclass(frozen=True)
class OverlapReport:
    """How a padded grille relates to a completion mask (1 = kept pixel)."""

    support_cells: int
    cells_on_kept: int

    @property
    def fully_inside(self) -> bool:
        return self.cells_on_kept == 0


def _hash_stream(key: bytes, nbytes: int) -> bytes:
    blocks = []
    for counter in range((nbytes + HASH_BLOCK - 1) // HASH_BLOCK):
        blocks.append(hashlib.sha256(key + counter.to_bytes(8, "big")).digest())
    return b"".join(blocks)[:nbytes]


def derive_grille(key: bytes, shape: tuple[int, int], density: float = 0.5) -> CardanGrille:
    """Derive a grille deterministically from a secret key.

    Same (key, shape, density) gives bit-identical cells on every platform;
    see the module docstring for the exact stream construction.
    """
    if not key:
        raise GrilleError("grille key must be non-empty")
    a, b = shape
    if a < 1 or b < 1:
        raise GrilleError(f"grille shape must be at least 1x1, got {shape}")
    if not (0.0 < density <= 1.0):
        raise GrilleError(f"density must be in (0, 1], got {density}")
    threshold = math.floor(density * 256)
    raw = np.frombuffer(_hash_stream(bytes(key), a * b), dtype=np.uint8)
    cells = (raw < threshold).astype(np.uint8).reshape(a, b)
    return CardanGrille(cells=cells, key=bytes(key), density=density)


def load_grille(cells) -> CardanGrille:
    """Wrap an explicit binary matrix as a grille (no key recorded).

    The recorded density is the observed fraction of 1-cells; it is
    informational only, since explicit cells are authoritative.
    """
    cells = np.asarray(cells)
    if cells.ndim != 2 or cells.shape[0] < 1 or cells.shape[1] < 1:
        raise GrilleError(f"grille cells must be a non-empty 2-d matrix, got shape {cells.shape}")
    if not np.isin(cells, (0, 1)).all():
        raise GrilleError("grille cells must contain only 0 and 1")
    return CardanGrille(cells=cells, key=None, density=float(cells.mean()))


def center_offset(image_shape: tuple[int, int], grille_shape: tuple[int, int]) -> tuple[int, int]:
    H, W = image_shape
    a, b = grille_shape
    return ((H - a) // 2, (W - b) // 2)


def zero_pad(
    grille: CardanGrille,
    image_shape: tuple[int, int],
    offset: tuple[int, int] | None = None,
) -> PaddedGrille:
    """Place the grille inside an (H, W) frame; default placement is centered."""
    H, W = image_shape
    a, b = grille.shape
    if offset is None:
        offset = center_offset(image_shape, grille.shape)
    row, col = offset
    if row < 0 or col < 0 or row + a > H or col + b > W:
        raise GrilleError(
            f"grille window {a}x{b} at offset {offset} does not fit in a "
            f"{H}x{W} image (rows {row}..{row + a}, cols {col}..{col + b})"
        )
    cells = np.zeros((H, W), dtype=np.uint8)
    cells[row : row + a, col : col + b] = grille.cells
    return PaddedGrille(cells=cells, offset=(row, col), source=grille)


def capacity(grille: CardanGrille, channels: int, si: int) -> int:
    """Writable bit count: popcount * channels * (8 - si).

    ``si`` low-order bit planes of each 8-bit value are reserved as
    redundancy, so each writable cell carries (8 - si) bits per channel.
    """
    if not (0 <= si <= 7):
        raise GrilleError(f"stability index must be in 0..7, got {si}")
    if channels < 1:
        raise GrilleError(f"channel count must be positive, got {channels}")
    return grille.popcount * channels * (8 - si)


def check_overlap(padded: PaddedGrille, completion_mask: np.ndarray) -> OverlapReport:
    """Count grille cells that land on kept (mask=1) pixels.

    A nonzero count means part of the grille lies outside the completed
    region, so those message pixels survive verbatim in the output and
    show up as visible distortion.
    """
    completion_mask = np.asarray(completion_mask)
    if completion_mask.ndim == 3:
        completion_mask = completion_mask[:, :, 0]  # masks are channel-uniform
    if completion_mask.shape != padded.cells.shape:
        raise GrilleError(
            f"mask shape {completion_mask.shape} != grille frame {padded.cells.shape}"
        )
    on_kept = int(((padded.cells == 1) & (completion_mask == 1)).sum())
    return OverlapReport(support_cells=padded.popcount, cells_on_kept=on_kept)


# ---------------------------------------------------------------------------
# Exchange file format
#
# Small UTF-8 text document, LF line endings, one "name: value" field per
# line, in this exact order (so two implementations emit identical bytes):
#
#   version: 1
#   shape: <a> <b>
#   density: <float, shortest round-trip repr>
#   offset: <row> <col>        (or the literal word "center")
#   si: <0..7>
#   key: <lowercase hex>       -- exactly one of key / cells
#   cells:                     -- followed by <a> lines of <b> '0'/'1' chars
#
# The file carries everything the receiver needs except the expected
# message length, which travels out of band.
# ---------------------------------------------------------------------------

def format_grille_file(
    grille: CardanGrille,
    si: int,
    offset: tuple[int, int] | None = None,
) -> str:
    a, b = grille.shape
    lines = [
        "version: 1",
        f"shape: {a} {b}",
        f"density: {grille.density!r}",
        "offset: center" if offset is None else f"offset: {offset[0]} {offset[1]}",
        f"si: {si}",
    ]
    if grille.key is not None:
        lines.append(f"key: {grille.key.hex()}")
    else:
        lines.append("cells:")
        lines.extend("".join(str(int(v)) for v in row) for row in grille.cells)
    return "\n".join(lines) + "\n"


def write_grille_file(path, grille: CardanGrille, si: int, offset=None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_grille_file(grille, si, offset))


def parse_grille_file(text: str):
    """Parse an exchange document; returns (grille, si, offset or None)."""
    lines = text.splitlines()
    fields = {}
    cell_rows = []
    in_cells = False
    for line in lines:
        if in_cells:
            cell_rows.append(line.strip())
            continue
        if not line.strip():
            continue
        name, sep, value = line.partition(":")
        if not sep:
            raise GrilleError(f"malformed grille file line: {line!r}")
        name = name.strip()
        value = value.strip()
        if name == "cells":
            in_cells = True
        else:
            fields[name] = value

    for required in ("version", "shape", "density", "si"):
        if required not in fields:
            raise GrilleError(f"grille file missing field {required!r}")
    if fields["version"] != "1":
        raise GrilleError(f"unsupported grille file version {fields['version']!r}")

    try:
        a, b = (int(v) for v in fields["shape"].split())
        density = float(fields["density"])
        si = int(fields["si"])
    except ValueError as exc:
        raise GrilleError(f"malformed grille file field: {exc}") from exc
    if not (0 <= si <= 7):
        raise GrilleError(f"grille file si out of range: {si}")

    offset = None
    if "offset" in fields and fields["offset"] != "center":
        try:
            r, c = (int(v) for v in fields["offset"].split())
        except ValueError as exc:
            raise GrilleError(f"malformed grille file offset: {exc}") from exc
        offset = (r, c)

    if "key" in fields and cell_rows:
        raise GrilleError("grille file must carry either a key or explicit cells, not both")
    if "key" in fields:
        try:
            key = bytes.fromhex(fields["key"])
        except ValueError as exc:
            raise GrilleError(f"malformed grille file key: {exc}") from exc
        grille = derive_grille(key, (a, b), density)
    elif cell_rows:
        if len(cell_rows) != a or any(len(r) != b for r in cell_rows):
            raise GrilleError(f"cells block does not match declared shape {a}x{b}")
        if any(ch not in "01" for r in cell_rows for ch in r):
            raise GrilleError("cells block may contain only '0' and '1'")
        grille = load_grille([[int(ch) for ch in r] for r in cell_rows])
    else:
        raise GrilleError("grille file carries neither a key nor explicit cells")
    return grille, si, offset


def read_grille_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_grille_file(fh.read())
