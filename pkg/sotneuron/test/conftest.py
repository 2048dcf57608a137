
import gzip
import os
import struct
from pathlib import Path

import numpy as np
import pytest
from dotenv import load_dotenv

from sotneuron.config import MNIST_ENV
from sotneuron.device import DeviceParams, PulseSchedule
from sotneuron.magnetodynamics import MaterialParams
from sotneuron.network.mnist import Dataset, IMAGE_MAGIC, LABEL_MAGIC


def pytest_addoption(parser):
    parser.addoption(
        '--no-build',
        action='store_false',
        dest="is_build",
        default=True,
        help='Expect the package is not built.'
    )
    parser.addoption(
        '--run-slow',
        action='store_true',
        dest="run_slow",
        default=False,
        help='Run the long statistical simulations.'
    )

def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long statistical simulation, run with --run-slow")

def pytest_collection_modifyitems(config, items):
    if config.getoption("run_slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# Devices
# -------

@pytest.fixture(scope="session")
def device():
    return DeviceParams()

@pytest.fixture(scope="session")
def cold_device():
    "Same anisotropy as the default device, without thermal noise"
    return DeviceParams(material=MaterialParams(T=0.0))

@pytest.fixture
def short_schedule():
    return PulseSchedule(t_clock=0.2e-9, t_write=0.1e-9, relax=0.1e-9)


# MNIST
# -----

def write_idx(path, array, magic, compress=False):
    "Write an unsigned-byte IDX file"
    array = np.asarray(array, dtype=np.uint8)
    content = struct.pack(">I", magic) + struct.pack(">" + "I" * array.ndim, *array.shape) + array.tobytes()
    opener = gzip.open if compress else open
    with opener(path, "wb") as file:
        file.write(content)
    return Path(path)

def quadrant_images(labels, rng, noise=0.0):
    "28×28 images lighting the quadrant of the label"
    images = np.zeros((len(labels), 28, 28), dtype=np.uint8)
    for image, label in zip(images, labels):
        row, col = divmod(int(label) % 4, 2)
        image[row * 14:(row + 1) * 14, col * 14:(col + 1) * 14] = 255
        if noise:
            flips = rng.random((28, 28)) < noise
            image[flips] = 255 - image[flips]
    return images

@pytest.fixture
def idx_writer():
    return write_idx

@pytest.fixture
def synthetic_mnist(tmp_path):
    "Directory with MNIST-named IDX files of quadrant images"
    rng = np.random.default_rng(5)
    directory = tmp_path / "mnist"
    directory.mkdir()
    for prefix, n in (("train", 400), ("t10k", 200)):
        labels = rng.integers(0, 6, size=n)
        write_idx(directory / f"{prefix}-images-idx3-ubyte", quadrant_images(labels, rng, noise=0.02), IMAGE_MAGIC)
        write_idx(directory / f"{prefix}-labels-idx1-ubyte", labels, LABEL_MAGIC)
    return directory

@pytest.fixture
def prototype_dataset():
    "Noisy copies of four 8×8 binary prototypes"
    rng = np.random.default_rng(11)
    prototypes = np.zeros((4, 8, 8), dtype=np.uint8)
    for label in range(4):
        row, col = divmod(label, 2)
        prototypes[label, row * 4:(row + 1) * 4, col * 4:(col + 1) * 4] = 1
    labels = rng.integers(0, 4, size=240)
    images = prototypes[labels].reshape(len(labels), 64)
    flips = rng.random(images.shape) < 0.05
    images = np.where(flips, 1 - images, images).astype(np.uint8)
    return Dataset(images=images, labels=labels)

@pytest.fixture
def mnist_dir():
    load_dotenv()
    if MNIST_ENV not in os.environ:
        pytest.skip(f"{MNIST_ENV} not set")
    path = Path(os.environ[MNIST_ENV])
    if not path.is_dir():
        pytest.skip(f"{path} is not a directory")
    return path
