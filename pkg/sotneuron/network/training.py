"""Offline training of the two-layer network and weight files."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from sotneuron.exc import FormatError, TrainingFailedError
from sotneuron.network.mnist import Dataset
from sotneuron.repos import JSONDirectoryStore

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass
class NetworkTopology:
    """Float weights of the input-hidden-output network

    ``W1`` has shape (n_inputs, n_hidden) and ``W2`` shape
    (n_hidden, n_outputs); each bias is realized in the
    crossbar as an always-on input row.
    """
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        self.W1, self.b1, self.W2, self.b2 = (np.asarray(a, dtype=float) for a in (self.W1, self.b1, self.W2, self.b2))
        if self.W1.ndim != 2 or self.W2.ndim != 2:
            raise ValueError("Weights must be matrices")
        if self.b1.shape != (self.W1.shape[1],) or self.W2.shape[0] != self.W1.shape[1] or self.b2.shape != (self.W2.shape[1],):
            raise ValueError(
                f"Inconsistent dimensions: W1 {self.W1.shape}, b1 {self.b1.shape}, "
                f"W2 {self.W2.shape}, b2 {self.b2.shape}"
            )
        if not all(np.isfinite(a).all() for a in (self.W1, self.b1, self.W2, self.b2)):
            raise ValueError("Weights must be finite")

    @property
    def n_inputs(self) -> int:
        return self.W1.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W1.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.W2.shape[1]

    def layers(self):
        return [(self.W1, self.b1), (self.W2, self.b2)]

    @classmethod
    def initialize(cls, n_inputs: int=64, n_hidden: int=25, n_outputs: int=4, rng: Optional[np.random.Generator]=None) -> 'NetworkTopology':
        rng = np.random.default_rng() if rng is None else rng
        return cls(
            W1=rng.normal(0.0, 1.0 / np.sqrt(n_inputs), size=(n_inputs, n_hidden)),
            b1=np.zeros(n_hidden),
            W2=rng.normal(0.0, 1.0 / np.sqrt(n_hidden), size=(n_hidden, n_outputs)),
            b2=np.zeros(n_outputs),
        )


class TrainingHyperparams(BaseModel):
    """Settings of the surrogate-gradient training

    The binary hidden neuron is replaced by the sigmoid
    ``1/(1 + exp(-k·z))`` whose steepness ``k`` grows
    geometrically from ``steepness_start`` to
    ``steepness_end`` over the epochs.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_hidden: int = Field(default=25, ge=1)
    epochs: int = Field(default=300, ge=1)
    learning_rate: float = Field(default=0.1, gt=0)
    momentum: float = Field(default=0.9, ge=0, lt=1)
    batch_size: int = Field(default=32, ge=1)
    steepness_start: float = Field(default=1.0, gt=0)
    steepness_end: float = Field(default=8.0, gt=0)
    seed: int = Field(default=0, ge=0)
    min_train_accuracy: float = Field(default=0.9, ge=0, le=1)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def float_predict(network: NetworkTopology, images: np.ndarray) -> np.ndarray:
    """Class predictions of the float network with binary hidden neurons

    This is the computation the crossbar approximates: hidden
    neurons fire when their pre-activation is positive and the
    class is the output with the largest pre-activation.
    """
    x = np.atleast_2d(np.asarray(images, dtype=float))
    hidden = (x @ network.W1 + network.b1 > 0).astype(float)
    return np.argmax(hidden @ network.W2 + network.b2, axis=1)


def accuracy(network: NetworkTopology, dataset: Dataset) -> float:
    return float(np.mean(float_predict(network, dataset.images) == dataset.labels))


def train_offline(dataset: Dataset, hyperparams: Optional[TrainingHyperparams]=None, topology: Optional[NetworkTopology]=None) -> NetworkTopology:
    """Train the network with mini-batch SGD and momentum

    Parameters
    ----------
    dataset : Dataset
        Training images and labels
    hyperparams : TrainingHyperparams, optional
    topology : NetworkTopology, optional
        Initial weights (for instance imported from a file),
        randomly initialized by default

    Raises
    ------
    TrainingFailedError
        If the binary-activation accuracy on the training
        set stays below ``min_train_accuracy``
    """
    hp = hyperparams or TrainingHyperparams()
    rng = np.random.default_rng(hp.seed)
    n_outputs = int(max(dataset.labels.max() + 1, 4 if topology is None else topology.n_outputs))
    if topology is None:
        topology = NetworkTopology.initialize(dataset.images.shape[1], hp.n_hidden, n_outputs, rng=rng)
    params = [a.copy() for a in (topology.W1, topology.b1, topology.W2, topology.b2)]
    velocity = [np.zeros_like(p) for p in params]

    x_all = dataset.images.astype(float)
    y_all = np.eye(params[2].shape[1])[dataset.labels]
    n = len(dataset)
    growth = (hp.steepness_end / hp.steepness_start) ** (1.0 / max(hp.epochs - 1, 1))
    history = []

    for epoch in range(hp.epochs):
        k = hp.steepness_start * growth ** epoch
        order = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, hp.batch_size):
            batch = order[start:start + hp.batch_size]
            x, y = x_all[batch], y_all[batch]
            W1, b1, W2, b2 = params

            h = _sigmoid(k * (x @ W1 + b1))
            p = _softmax(h @ W2 + b2)
            total_loss -= float(np.sum(y * np.log(p + 1e-12)))

            d_out = (p - y) / len(batch)
            d_hidden = (d_out @ W2.T) * k * h * (1 - h)
            grads = [x.T @ d_hidden, d_hidden.sum(axis=0), h.T @ d_out, d_out.sum(axis=0)]
            for param, vel, grad in zip(params, velocity, grads):
                vel *= hp.momentum
                vel -= hp.learning_rate * grad
                param += vel
        history.append(total_loss / n)
        if epoch % 50 == 0:
            logger.debug("Epoch %d: loss %.4f (steepness %.2f)", epoch, history[-1], k)

    network = NetworkTopology(*params)
    train_accuracy = accuracy(network, dataset)
    logger.info("Training finished: loss %.4f, binary-activation accuracy %.3f", history[-1], train_accuracy)
    if train_accuracy < hp.min_train_accuracy:
        raise TrainingFailedError(
            f"Training accuracy {train_accuracy:.3f} below the required {hp.min_train_accuracy}",
            diagnostics={"train_accuracy": train_accuracy, "loss_history": history, "hyperparams": hp.model_dump()},
        )
    return network


# Weight files
# ------------

def _store(path: Path) -> JSONDirectoryStore:
    return JSONDirectoryStore(path=path.parent)


def save_weights(network: NetworkTopology, path: Union[str, Path], header: Optional[dict]=None) -> Path:
    """Write the weights as JSON (``schema_version`` 1)

    Weight matrices are row-major nested lists of shape
    (n_inputs, n_outputs) per layer.
    """
    path = Path(path)
    store = _store(path)
    store.upsert({
        "name": path.stem,
        "schema_version": SCHEMA_VERSION,
        "kind": "weights",
        "layers": [
            {"n_inputs": W.shape[0], "n_outputs": W.shape[1], "weights": W.tolist(), "bias": b.tolist()}
            for W, b in network.layers()
        ],
        "provenance": header or {},
    })
    return store.get_file_path(path.stem)


def load_weights(path: Union[str, Path]) -> NetworkTopology:
    "Read weights written by :func:`save_weights`"
    path = Path(path)
    store = _store(path)
    if path.stem not in store:
        raise FileNotFoundError(f"Weight file {store.get_file_path(path.stem)} not found")
    data = store[path.stem]
    if data.get("schema_version") != SCHEMA_VERSION or data.get("kind") != "weights":
        raise FormatError(f"{path}: not a version {SCHEMA_VERSION} weight file")
    try:
        (first, second) = data["layers"]
        arrays = []
        for layer in (first, second):
            W = np.array(layer["weights"], dtype=float).reshape(layer["n_inputs"], layer["n_outputs"])
            arrays.extend([W, np.array(layer["bias"], dtype=float)])
        return NetworkTopology(*arrays)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: invalid weight file ({exc})") from exc
