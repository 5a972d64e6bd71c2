"""
QPIE image encoding: binarize, pad, column-major amplitude layout, segmentation,
plus readers for matrix text, PGM (P2/P5) and MNIST IDX files.
"""

import logging
import re
import struct
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from errors import AllZeroImageError, DimensionMismatchError, MalformedInputError
from reports import atomic_write_bytes
from state import Statevector

logger = logging.getLogger(__name__)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
IMAGE_FORMATS = ('text', 'pgm', 'idx')


def _is_pow2(value: int) -> bool:
    return value > 0 and value & (value - 1) == 0


def _next_pow2(value: int) -> int:
    return 1 << (value - 1).bit_length()


class Image(BaseModel):
    """P x Q matrix of non-negative pixel values; black = 1 in binary images."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    pixels: np.ndarray

    @field_validator('pixels', mode='before')
    @classmethod
    def _as_readonly_matrix(cls, value):
        pixels = np.array(value, dtype=float)
        if pixels.ndim != 2 or 0 in pixels.shape:
            raise ValueError(f'pixels must be a non-empty 2D matrix, got shape {pixels.shape}')
        if not np.all(np.isfinite(pixels)) or np.any(pixels < 0):
            raise ValueError('pixel values must be finite and non-negative')
        pixels.setflags(write=False)
        return pixels

    @property
    def rows(self) -> int:
        return self.pixels.shape[0]

    @property
    def cols(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.pixels.shape

    @property
    def is_blank(self) -> bool:
        return not np.any(self.pixels > 0)


class QuantumImage(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    source: Image
    n_qubits: int = Field(gt=0)
    state: Statevector


class Block(BaseModel):
    """One segment; ``row``/``col`` are grid coordinates, not pixel offsets."""

    model_config = ConfigDict(frozen=True)

    row: int
    col: int
    image: Image


def binarize(img: Image, threshold: float) -> Image:
    return Image(pixels=(img.pixels >= threshold).astype(float))


def pad_to_pow2(img: Image) -> Image:
    """Grow rows and columns to the next power of two with zero rows at the bottom and zero columns at the right."""
    rows, cols = _next_pow2(img.rows), _next_pow2(img.cols)
    if (rows, cols) == img.shape:
        return img
    padded = np.zeros((rows, cols))
    padded[:img.rows, :img.cols] = img.pixels
    return Image(pixels=padded)


def encode_qpie(img: Image) -> QuantumImage:
    size = img.rows * img.cols
    if size < 2 or not _is_pow2(size):
        raise DimensionMismatchError(f'{img.rows}x{img.cols} image: pixel count must be a power of two >= 2')
    column_major = img.pixels.reshape(-1, order='F')
    norm = np.linalg.norm(column_major)
    if norm == 0:
        raise AllZeroImageError(f'{img.rows}x{img.cols} image has no nonzero pixel to encode')
    n_qubits = size.bit_length() - 1
    state = Statevector(n_qubits=n_qubits, amplitudes=column_major / norm)
    return QuantumImage(source=img, n_qubits=n_qubits, state=state)


def grid_shape(img: Image, block_rows: int, block_cols: int) -> Tuple[int, int]:
    if block_rows < 1 or block_cols < 1:
        raise DimensionMismatchError(f'block dims must be positive, got {block_rows}x{block_cols}')
    if img.rows % block_rows or img.cols % block_cols:
        raise DimensionMismatchError(
            f'{block_rows}x{block_cols} blocks do not tile a {img.rows}x{img.cols} image'
        )
    if block_rows * block_cols < 2:
        raise DimensionMismatchError(f'{block_rows}x{block_cols} blocks hold a single pixel; need at least 2')
    if not _is_pow2(block_rows * block_cols):
        raise DimensionMismatchError(f'{block_rows}x{block_cols} block pixel count is not a power of two')
    return img.rows // block_rows, img.cols // block_cols


def segment(img: Image, block_rows: int, block_cols: int) -> List[Block]:
    """Non-overlapping tiling, row-major over grid coordinates."""
    grid_rows, grid_cols = grid_shape(img, block_rows, block_cols)
    blocks = []
    for r in range(grid_rows):
        for c in range(grid_cols):
            tile = img.pixels[r * block_rows:(r + 1) * block_rows, c * block_cols:(c + 1) * block_cols]
            blocks.append(Block(row=r, col=c, image=Image(pixels=tile)))
    return blocks


def reassemble(blocks: List[Block]) -> Image:
    if not blocks:
        raise DimensionMismatchError('no blocks to reassemble')
    block_rows, block_cols = blocks[0].image.shape
    grid_rows = max(b.row for b in blocks) + 1
    grid_cols = max(b.col for b in blocks) + 1
    if len(blocks) != grid_rows * grid_cols:
        raise DimensionMismatchError(f'{len(blocks)} blocks do not fill a {grid_rows}x{grid_cols} grid')
    pixels = np.zeros((grid_rows * block_rows, grid_cols * block_cols))
    for b in blocks:
        if b.image.shape != (block_rows, block_cols):
            raise DimensionMismatchError(f'block ({b.row},{b.col}) has shape {b.image.shape}')
        pixels[b.row * block_rows:(b.row + 1) * block_rows, b.col * block_cols:(b.col + 1) * block_cols] = b.image.pixels
    return Image(pixels=pixels)


# -- readers ---------------------------------------------------------------

def _read_matrix_text(path: Path) -> Tuple[np.ndarray, float]:
    rows = []
    for number, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(token) for token in line.split()])
        except ValueError as exc:
            raise MalformedInputError(f'{path}:{number}: {exc}') from exc
    if not rows:
        raise MalformedInputError(f'{path}: no pixel rows')
    widths = {len(row) for row in rows}
    if len(widths) != 1:
        raise MalformedInputError(f'{path}: ragged rows (widths {sorted(widths)})')
    pixels = np.array(rows)
    return pixels, float(pixels.max())


_PGM_TOKEN = re.compile(rb'\s*(?:#[^\n]*\n\s*)*(\S+)')


def _read_pgm(path: Path) -> Tuple[np.ndarray, float]:
    data = path.read_bytes()
    header, position = [], 0
    while len(header) < 4:
        match = _PGM_TOKEN.match(data, position)
        if not match:
            raise MalformedInputError(f'{path}: truncated PGM header')
        header.append(match.group(1))
        position = match.end()
    magic = header[0]
    if magic not in (b'P2', b'P5'):
        raise MalformedInputError(f'{path}: unsupported magic {magic!r} (expected P2 or P5)')
    try:
        width, height, maxval = (int(token) for token in header[1:])
    except ValueError as exc:
        raise MalformedInputError(f'{path}: bad PGM header {header}') from exc
    if width < 1 or height < 1 or not 0 < maxval <= 65535:
        raise MalformedInputError(f'{path}: bad PGM geometry {width}x{height} maxval {maxval}')
    count = width * height

    if magic == b'P2':
        tokens = re.sub(rb'#[^\n]*', b'', data[position:]).split()
        if len(tokens) < count:
            raise MalformedInputError(f'{path}: expected {count} pixels, found {len(tokens)}')
        try:
            values = np.array([int(t) for t in tokens[:count]], dtype=float)
        except ValueError as exc:
            raise MalformedInputError(f'{path}: non-integer pixel') from exc
    else:
        # exactly one whitespace byte separates maxval from the raster
        start = position + 1
        dtype = np.dtype('>u2') if maxval > 255 else np.dtype('u1')
        raster = data[start:start + count * dtype.itemsize]
        if len(raster) < count * dtype.itemsize:
            raise MalformedInputError(f'{path}: truncated P5 raster')
        values = np.frombuffer(raster, dtype=dtype).astype(float)
    if values.max() > maxval:
        raise MalformedInputError(f'{path}: pixel exceeds maxval {maxval}')
    return values.reshape(height, width), float(maxval)


def _read_idx_header(data: bytes, path: Path, magic: int) -> Tuple[Tuple[int, ...], int]:
    if len(data) < 4:
        raise MalformedInputError(f'{path}: truncated IDX header')
    found = struct.unpack('>I', data[:4])[0]
    if found != magic:
        raise MalformedInputError(f'{path}: magic {found:#010x}, expected {magic:#010x}')
    ndim = magic & 0xFF
    end = 4 + 4 * ndim
    if len(data) < end:
        raise MalformedInputError(f'{path}: truncated IDX dimensions')
    dims = struct.unpack(f'>{ndim}I', data[4:end])
    if len(data) - end < int(np.prod(dims)):
        raise MalformedInputError(f'{path}: truncated IDX payload')
    return dims, end


def _read_idx_image(path: Path, index: int) -> Tuple[np.ndarray, float]:
    data = path.read_bytes()
    (count, rows, cols), offset = _read_idx_header(data, path, IDX_IMAGE_MAGIC)
    if not 0 <= index < count:
        raise MalformedInputError(f'{path}: image index {index} outside [0, {count})')
    start = offset + index * rows * cols
    pixels = np.frombuffer(data, dtype=np.uint8, count=rows * cols, offset=start)
    return pixels.reshape(rows, cols).astype(float), 255.0


def load_idx_labels(path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    (count,), offset = _read_idx_header(data, path, IDX_LABEL_MAGIC)
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=offset).copy()


def idx_image_count(path) -> int:
    path = Path(path)
    (count, _, _), _ = _read_idx_header(path.read_bytes(), path, IDX_IMAGE_MAGIC)
    return count


def detect_format(path) -> str:
    name = Path(path).name.lower()
    if name.endswith('.pgm'):
        return 'pgm'
    if name.endswith('.idx') or 'idx3' in name or name.endswith('-ubyte'):
        return 'idx'
    return 'text'


def load_image(path, fmt: Optional[str] = None, index: int = 0, invert: bool = False) -> Image:
    """Read a pixel matrix as stored; ``invert`` maps v -> maxval - v so dark pixels become large."""
    path = Path(path)
    fmt = fmt or detect_format(path)
    if fmt not in IMAGE_FORMATS:
        raise MalformedInputError(f'unknown image format {fmt!r}; choose from {IMAGE_FORMATS}')
    try:
        if fmt == 'pgm':
            pixels, maxval = _read_pgm(path)
        elif fmt == 'idx':
            pixels, maxval = _read_idx_image(path, index)
        else:
            pixels, maxval = _read_matrix_text(path)
    except OSError as exc:
        raise MalformedInputError(f'cannot read {path}: {exc}') from exc
    if invert:
        pixels = maxval - pixels
    try:
        image = Image(pixels=pixels)
    except ValueError as exc:
        raise MalformedInputError(f'{path}: {exc}') from exc
    logger.debug('Loaded %s (%s) as %dx%d', path, fmt, image.rows, image.cols)
    return image


def write_pgm(img: Image, path, binary: bool = False) -> Path:
    values = np.rint(img.pixels).astype(int)
    maxval = max(1, int(values.max()))
    if maxval > 65535:
        raise MalformedInputError(f'pixel value {maxval} does not fit PGM')
    header = f"{'P5' if binary else 'P2'}\n{img.cols} {img.rows}\n{maxval}\n".encode('ascii')
    if binary:
        dtype = '>u2' if maxval > 255 else 'u1'
        body = values.astype(dtype).tobytes()
    else:
        body = ''.join(' '.join(str(v) for v in row) + '\n' for row in values).encode('ascii')
    return atomic_write_bytes(path, header + body)
