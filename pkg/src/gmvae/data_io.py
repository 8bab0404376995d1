"""IDX ingestion, binarization, subsetting and batching.

Only the unsigned-byte, three-dimensional IDX layout used by MNIST image
files is supported (magic ``0x00000803``).  Gzip-compressed inputs are
recognised by their two magic bytes and inflated transparently.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import FormatError, TruncationError

IDX_IMAGE_MAGIC = 0x00000803
_GZIP_MAGIC = b"\x1f\x8b"

DESK_TRAIN = "mnist-desk-train-images-idx3-ubyte.gz"
DESK_TEST = "mnist-desk-test-images-idx3-ubyte.gz"


@dataclass(frozen=True)
class IdxImageSet:
    count: int
    rows: int
    cols: int
    pixels: np.ndarray = field(repr=False)  # uint8, shape (count, rows*cols)

    def __post_init__(self):
        pixels = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        pixels = pixels.reshape(self.count, self.rows * self.cols)
        object.__setattr__(self, "pixels", pixels)

    @property
    def dim(self):
        return self.rows * self.cols


@dataclass(frozen=True)
class BinarizedDataset:
    bits: np.ndarray = field(repr=False)  # float64 in {0, 1}, shape (count, dim)
    threshold: float

    @property
    def count(self):
        return self.bits.shape[0]

    @property
    def dim(self):
        return self.bits.shape[1]

    def take(self, index):
        return BinarizedDataset(self.bits[index], self.threshold)


def parse_idx(buffer: bytes) -> IdxImageSet:
    """Parse an IDX image buffer (optionally gzip-compressed)."""
    if buffer[:2] == _GZIP_MAGIC:
        buffer = gzip.decompress(buffer)
    if len(buffer) < 16:
        raise TruncationError(f"IDX header needs 16 bytes, got {len(buffer)}")
    magic, count, rows, cols = struct.unpack(">IIII", buffer[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(
            f"expected image magic 0x{IDX_IMAGE_MAGIC:08x}, got 0x{magic:08x}"
        )
    expected = count * rows * cols
    body = buffer[16:]
    if len(body) < expected:
        raise TruncationError(
            f"IDX body holds {len(body)} bytes, header promises {expected}"
        )
    if len(body) > expected:
        raise FormatError(f"{len(body) - expected} trailing bytes after IDX body")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(count, rows * cols)
    return IdxImageSet(count=count, rows=rows, cols=cols, pixels=pixels.copy())


def serialize_idx(images: IdxImageSet) -> bytes:
    header = struct.pack(">IIII", IDX_IMAGE_MAGIC, images.count, images.rows, images.cols)
    return header + images.pixels.tobytes()


def load_idx(path) -> IdxImageSet:
    return parse_idx(Path(path).read_bytes())


def load_desk_mnist(split: str) -> IdxImageSet:
    """Load one split ("train" or "test") of the bundled MNIST subset."""
    name = {"train": DESK_TRAIN, "test": DESK_TEST}[split]
    return parse_idx(resources.files("gmvae.data").joinpath(name).read_bytes())


def binarize(images: IdxImageSet, threshold: float = 0.5) -> BinarizedDataset:
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    bits = (images.pixels / 255.0 > threshold).astype(np.float64)
    return BinarizedDataset(bits=bits, threshold=float(threshold))


def subset(dataset: BinarizedDataset, n: int, seed: int) -> BinarizedDataset:
    """Seeded shuffle of ``dataset`` keeping the first ``n`` examples."""
    if n > dataset.count:
        raise ValueError(f"asked for {n} examples, dataset holds {dataset.count}")
    order = np.random.default_rng(seed).permutation(dataset.count)
    return dataset.take(order[:n])


def iterate_batches(bits: np.ndarray, batch_size: int, rng: np.random.Generator):
    """Yield shuffled batches; the last partial batch is kept."""
    order = rng.permutation(len(bits))
    for start in range(0, len(bits), batch_size):
        yield bits[order[start:start + batch_size]]


def subset_and_batch(dataset: BinarizedDataset, n: int, batch_size: int, seed: int):
    """Seeded subset of size ``n`` split into fixed-size batches.

    Deterministic given ``seed``: the same seed reproduces both the retained
    examples and the batch order.
    """
    kept = subset(dataset, n, seed)
    rng = np.random.default_rng([seed, 1])
    return list(iterate_batches(kept.bits, batch_size, rng))


# ---------------------------------------------------------------------------
# raw float matrices (reconstruction dumps)
# ---------------------------------------------------------------------------

MATRIX_MAGIC = b"GMIMG01\n"


def serialize_matrix(array) -> bytes:
    """``GMIMG01\\n``, uint32 LE ndim, uint32 LE dims, then float64 LE data (C order)."""
    array = np.ascontiguousarray(array, dtype="<f8")
    head = MATRIX_MAGIC + struct.pack("<I", array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape)
    return head + array.tobytes()


def parse_matrix(buffer: bytes) -> np.ndarray:
    if not buffer.startswith(MATRIX_MAGIC):
        raise FormatError(f"bad matrix magic {buffer[:8]!r}")
    pos = len(MATRIX_MAGIC)
    if len(buffer) < pos + 4:
        raise TruncationError("matrix header ends before ndim")
    (ndim,) = struct.unpack_from("<I", buffer, pos)
    pos += 4
    if len(buffer) < pos + 4 * ndim:
        raise TruncationError("matrix header ends inside the dims")
    shape = struct.unpack_from(f"<{ndim}I", buffer, pos)
    pos += 4 * ndim
    expected = int(np.prod(shape)) * 8
    if len(buffer) - pos != expected:
        raise TruncationError(f"matrix body holds {len(buffer) - pos} bytes, dims imply {expected}")
    return np.frombuffer(buffer, dtype="<f8", offset=pos).reshape(shape).astype(np.float64)


def write_matrix(path, array):
    Path(path).write_bytes(serialize_matrix(array))


def read_matrix(path) -> np.ndarray:
    return parse_matrix(Path(path).read_bytes())


def load_dataset(path, split, threshold, n, seed):
    """Binarized images from ``path`` (or the bundled split when ``None``), seeded subset of ``n``."""
    images = load_desk_mnist(split) if path is None else load_idx(path)
    data = binarize(images, threshold)
    return subset(data, n, seed)
