"""MNIST ingestion: IDX parsing, 8×8 downscaling and binarization."""

import gzip
import hashlib
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy import ndimage

from sotneuron.exc import DatasetError, FormatError

logger = logging.getLogger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

CLASSES = (0, 1, 2, 3)
SIDE = 8
POOL = 4
EVALUATION_SIZE = 100


@dataclass(frozen=True)
class Dataset:
    """Binary 8×8 images and their labels

    ``images`` has shape (n, 64) with values in {0, 1}
    (row-major flattening) and ``labels`` shape (n,).
    """
    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.ndim != 2 or len(self.images) != len(self.labels):
            raise ValueError(f"Images {self.images.shape} do not match labels {self.labels.shape}")
        if not np.isin(self.images, (0, 1)).all():
            raise ValueError("Images must be binary")

    def __len__(self):
        return len(self.labels)

    def checksum(self) -> str:
        "SHA-256 of the labels and images"
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.labels, dtype="<i8").tobytes())
        digest.update(np.ascontiguousarray(self.images, dtype=np.uint8).tobytes())
        return digest.hexdigest()

    def subset(self, size: int) -> 'Dataset':
        return Dataset(images=self.images[:size], labels=self.labels[:size])


def _open(path: Path):
    with open(path, "rb") as file:
        gzipped = file.read(2) == b"\x1f\x8b"
    return gzip.open(path, "rb") if gzipped else open(path, "rb")


def read_idx(path: Union[str, Path], magic: int) -> np.ndarray:
    """Read an unsigned-byte IDX file

    Parameters
    ----------
    path : path-like
        Plain or gzip-compressed IDX file
    magic : int
        Expected big-endian magic number
        (0x803 for images, 0x801 for labels)
    """
    path = Path(path)
    with _open(path) as file:
        head = file.read(4)
        if len(head) < 4:
            raise FormatError(f"{path}: file too short for an IDX header")
        found, = struct.unpack(">I", head)
        if found != magic:
            raise FormatError(f"{path}: magic number 0x{found:08x}, expected 0x{magic:08x}")
        ndim = magic & 0xFF
        dims_raw = file.read(4 * ndim)
        if len(dims_raw) < 4 * ndim:
            raise FormatError(f"{path}: truncated dimension header")
        dims = struct.unpack(">" + "I" * ndim, dims_raw)
        data = np.frombuffer(file.read(), dtype=np.uint8)
    if data.size != int(np.prod(dims)):
        raise FormatError(f"{path}: header announces {dims} but holds {data.size} bytes")
    return data.reshape(dims)


def downscale(images: np.ndarray, side: int=SIDE, pool: int=POOL) -> np.ndarray:
    """Downscale grayscale images to ``side`` × ``side``

    Images are normalized to [0, 1], bilinearly resampled to
    ``side·pool`` pixels and then area-averaged over
    ``pool`` × ``pool`` blocks.

    Parameters
    ----------
    images : array (n, rows, cols)
        8-bit intensities
    """
    images = np.asarray(images, dtype=float) / 255.0
    n, rows, cols = images.shape
    size = side * pool
    resampled = ndimage.zoom(images, (1, size / rows, size / cols), order=1, mode="nearest")
    resampled = np.clip(resampled, 0.0, 1.0)
    return resampled.reshape(n, side, pool, side, pool).mean(axis=(2, 4))


def binarize(images: np.ndarray, threshold: float=0.5) -> np.ndarray:
    "Binary pixels, 1 where the normalized intensity reaches the threshold"
    return (np.asarray(images) >= threshold).astype(np.uint8)


def load_split(image_file, label_file, limit: Optional[int]=None, labels: Sequence[int]=CLASSES) -> Dataset:
    """Load IDX files keeping only the given labels

    Parameters
    ----------
    image_file, label_file : path-like
        IDX image and label files
    limit : int, optional
        Keep at most this many qualifying images,
        in file order
    labels : sequence of int
        Labels to keep
    """
    raw_images = read_idx(image_file, IMAGE_MAGIC)
    raw_labels = read_idx(label_file, LABEL_MAGIC)
    if raw_images.ndim != 3 or raw_labels.ndim != 1 or len(raw_images) != len(raw_labels):
        raise FormatError(f"Image file {raw_images.shape} does not match label file {raw_labels.shape}")

    keep = np.flatnonzero(np.isin(raw_labels, labels))
    if limit is not None:
        keep = keep[:limit]
    images = binarize(downscale(raw_images[keep])).reshape(len(keep), -1)
    logger.info("Loaded %d images with labels %s from %s", len(keep), list(labels), image_file)
    return Dataset(images=images, labels=raw_labels[keep].astype(np.int64))


def ingest_mnist(idx_image_file, idx_label_file, n_images: int=EVALUATION_SIZE) -> Dataset:
    """Evaluation set: the first qualifying test images of digits 0-3

    Raises
    ------
    DatasetError
        If the files hold fewer than ``n_images`` qualifying images
    """
    dataset = load_split(idx_image_file, idx_label_file, limit=n_images)
    if len(dataset) < n_images:
        raise DatasetError(f"Only {len(dataset)} images with labels {list(CLASSES)}, {n_images} required")
    return dataset
