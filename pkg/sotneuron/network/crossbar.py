"""Bipolar resistive crossbar: weight mapping and column currents.

Each input drives a row pair: the ``+`` row is switched to
``+Vs`` and the ``-`` row to ``-Vs`` when the input is 1, and
both rows sit at 0 V otherwise. A weight is programmed on the
row of its sign, the other row holding the off conductance.
Every column ends in a neuron sensed through ``Gs``.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from sotneuron.exc import DegenerateScaleError, FormatError
from sotneuron.network.training import SCHEMA_VERSION, NetworkTopology
from sotneuron.repos import JSONDirectoryStore

logger = logging.getLogger(__name__)

OFF = -1


class CrossbarParams(BaseModel):
    """Electrical parameters of the crossbar

    Parameters
    ----------
    Vs : float
        Supply magnitude [V]
    G_min, G_max : float
        Programmable conductance range [S]
    levels : int
        Number of uniformly spaced programmable levels
    G_OFF : float, optional
        Off-state conductance [S], by default G_max/1e6
    Gs : float
        Sense conductance of the neuron path [S]
    R_on : float
        Series ON resistance of each input switch [Ω]
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    Vs: float = Field(default=1.0, gt=0)
    G_min: float = Field(default=1 / 160e3, gt=0)
    G_max: float = Field(default=1 / 8e3, gt=0)
    levels: int = Field(default=32, ge=2)
    G_OFF: Optional[float] = Field(default=None, ge=0)
    Gs: float = Field(default=1e-4, gt=0)
    R_on: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def check_range(self):
        if not self.G_min < self.G_max:
            raise ValueError(f"G_min ({self.G_min}) must be below G_max ({self.G_max})")
        if self.G_OFF is None:
            object.__setattr__(self, "G_OFF", self.G_max / 1e6)
        if not self.G_OFF < self.G_min:
            raise ValueError(f"G_OFF ({self.G_OFF}) must be far below G_min ({self.G_min})")
        return self

    @property
    def level_values(self) -> np.ndarray:
        return np.linspace(self.G_min, self.G_max, self.levels)

    @property
    def level_step(self) -> float:
        return (self.G_max - self.G_min) / (self.levels - 1)


@dataclass
class ConductanceLayer:
    """One crossbar: rows are the inputs then the bias row

    ``plus_levels`` and ``minus_levels`` hold the programmed
    level index of every cell, ``-1`` for the off state.
    """
    plus_levels: np.ndarray
    minus_levels: np.ndarray
    scale: float
    params: CrossbarParams

    def __post_init__(self):
        self.plus_levels = np.asarray(self.plus_levels, dtype=int)
        self.minus_levels = np.asarray(self.minus_levels, dtype=int)
        if self.plus_levels.shape != self.minus_levels.shape:
            raise ValueError("Both sides of the crossbar must have the same shape")
        if np.any((self.plus_levels != OFF) & (self.minus_levels != OFF)):
            raise ValueError("A cell can be programmed on one side only")

    def _conductance(self, levels: np.ndarray) -> np.ndarray:
        values = self.params.level_values
        return np.where(levels == OFF, self.params.G_OFF, values[np.clip(levels, 0, None)])

    @property
    def G_plus(self) -> np.ndarray:
        return self._conductance(self.plus_levels)

    @property
    def G_minus(self) -> np.ndarray:
        return self._conductance(self.minus_levels)

    @property
    def shape(self):
        return self.plus_levels.shape

    def effective_weights(self) -> np.ndarray:
        "Dequantized weights (G+ - G-)/s, bias as the last row"
        return (self.G_plus - self.G_minus) / self.scale


@dataclass
class ConductanceNetwork:
    "Crossbars of the hidden and output layers"
    layers: List[ConductanceLayer]

    @property
    def params(self) -> CrossbarParams:
        return self.layers[0].params

    def effective_weights(self) -> NetworkTopology:
        (hidden, output) = [layer.effective_weights() for layer in self.layers]
        return NetworkTopology(W1=hidden[:-1], b1=hidden[-1], W2=output[:-1], b2=output[-1])


# Quantization
# ------------

def level_indices(magnitude: np.ndarray, params: CrossbarParams) -> np.ndarray:
    """Nearest programmable level of scaled weight magnitudes

    Magnitudes below half of G_min fall in the dead zone and
    map to the off state.
    """
    magnitude = np.asarray(magnitude, dtype=float)
    index = np.rint((magnitude - params.G_min) / params.level_step).astype(int)
    index = np.clip(index, 0, params.levels - 1)
    return np.where(magnitude < params.G_min / 2, OFF, index)


def quantize_layer(weights: np.ndarray, bias: np.ndarray, params: CrossbarParams) -> ConductanceLayer:
    "Map one layer (bias as an extra row) onto a bipolar crossbar"
    augmented = np.vstack([np.asarray(weights, dtype=float), np.asarray(bias, dtype=float)[None, :]])
    if not np.isfinite(augmented).all():
        raise ValueError("Weights must be finite")
    peak = np.abs(augmented).max()
    if peak == 0:
        raise DegenerateScaleError("Cannot scale an all-zero weight matrix to conductances")
    scale = params.G_max / peak
    levels = level_indices(np.abs(augmented) * scale, params)
    plus = np.where(augmented > 0, levels, OFF)
    minus = np.where(augmented < 0, levels, OFF)
    return ConductanceLayer(plus_levels=plus, minus_levels=minus, scale=scale, params=params)


def quantize_weights(weights: NetworkTopology, params: Optional[CrossbarParams]=None) -> ConductanceNetwork:
    """Map trained weights onto conductances

    Per layer the largest weight magnitude is scaled to G_max
    and every weight snaps to the nearest of the programmable
    levels on the side of its sign.
    """
    params = params or CrossbarParams()
    layers = [quantize_layer(W, b, params) for W, b in weights.layers()]
    for index, layer in enumerate(layers):
        logger.debug(
            "Layer %d: scale %.4g S per unit weight, %d of %d cells programmed",
            index, layer.scale, int(np.count_nonzero(layer.plus_levels != OFF) + np.count_nonzero(layer.minus_levels != OFF)), layer.plus_levels.size
        )
    return ConductanceNetwork(layers=layers)


# Currents
# --------

def _row_voltages(x: np.ndarray, Vs: float):
    x_aug = np.append(np.asarray(x, dtype=float), 1.0)
    return Vs * x_aug, -Vs * x_aug


def _series(G: np.ndarray, R_on: float) -> np.ndarray:
    return G / (1.0 + G * R_on) if R_on else G


def column_currents(layer: ConductanceLayer, x: np.ndarray) -> np.ndarray:
    """Synaptic current of every column [A]

    .. math::

        I_j = G_s\\frac{\\sum_i G^+_{ij}V^+_i + G^-_{ij}V^-_i}{G_s + \\sum_i G^+_{ij} + G^-_{ij}}
    """
    params = layer.params
    v_plus, v_minus = _row_voltages(x, params.Vs)
    G_plus = _series(layer.G_plus, params.R_on)
    G_minus = _series(layer.G_minus, params.R_on)
    numerator = v_plus @ G_plus + v_minus @ G_minus
    denominator = params.Gs + G_plus.sum(axis=0) + G_minus.sum(axis=0)
    return params.Gs * numerator / denominator


def synaptic_current(column: int, layer: ConductanceLayer, x: np.ndarray) -> float:
    "Current delivered to the neuron of one column [A]"
    return float(column_currents(layer, x)[column])


def nodal_column_current(G_plus: np.ndarray, G_minus: np.ndarray, x: np.ndarray, params: CrossbarParams) -> float:
    """Column current from nodal analysis of the full resistor network

    The column wire is one node grounded through ``Gs``. With a
    non-zero switch resistance every row is an extra node tied
    to its source through ``1/R_on``.
    """
    v_plus, v_minus = _row_voltages(x, params.Vs)
    G = np.concatenate([G_plus, G_minus]).astype(float)
    sources = np.concatenate([v_plus, v_minus])
    n_rows = len(G)

    if params.R_on == 0:
        # Unknown: column node only
        A = np.array([[params.Gs + G.sum()]])
        rhs = np.array([G @ sources])
    else:
        g_on = 1.0 / params.R_on
        # Unknowns: column node, then row nodes
        A = np.zeros((n_rows + 1, n_rows + 1))
        rhs = np.zeros(n_rows + 1)
        A[0, 0] = params.Gs + G.sum()
        A[0, 1:] = -G
        A[1:, 0] = -G
        A[1:, 1:] = np.diag(G + g_on)
        rhs[1:] = g_on * sources
    voltages = np.linalg.solve(A, rhs)
    return float(params.Gs * voltages[0])


def rcn_static_power(x: np.ndarray, layer: ConductanceLayer) -> float:
    """Static power dissipated by one crossbar under an input pattern [W]

    Sums G·ΔV² over all cells and the sense paths, the
    column nodes sitting at I_j/Gs.
    """
    params = layer.params
    v_plus, v_minus = _row_voltages(x, params.Vs)
    v_column = column_currents(layer, x) / params.Gs
    G_plus = _series(layer.G_plus, params.R_on)
    G_minus = _series(layer.G_minus, params.R_on)
    cells = (G_plus * (v_plus[:, None] - v_column[None, :]) ** 2).sum() + (G_minus * (v_minus[:, None] - v_column[None, :]) ** 2).sum()
    return float(cells + params.Gs * np.sum(v_column ** 2))


# Conductance files
# -----------------

def save_conductances(network: ConductanceNetwork, path: Union[str, Path], header: Optional[dict]=None) -> Path:
    "Write level indices and scale factors as JSON"
    path = Path(path)
    store = JSONDirectoryStore(path=path.parent)
    store.upsert({
        "name": path.stem,
        "schema_version": SCHEMA_VERSION,
        "kind": "conductances",
        "params": network.params.model_dump(),
        "layers": [
            {
                "n_rows": layer.shape[0],
                "n_columns": layer.shape[1],
                "scale": layer.scale,
                "plus_levels": layer.plus_levels.tolist(),
                "minus_levels": layer.minus_levels.tolist(),
            }
            for layer in network.layers
        ],
        "provenance": header or {},
    })
    return store.get_file_path(path.stem)


def load_conductances(path: Union[str, Path]) -> ConductanceNetwork:
    "Read a file written by :func:`save_conductances`"
    path = Path(path)
    store = JSONDirectoryStore(path=path.parent)
    if path.stem not in store:
        raise FileNotFoundError(f"Conductance file {store.get_file_path(path.stem)} not found")
    data = store[path.stem]
    if data.get("schema_version") != SCHEMA_VERSION or data.get("kind") != "conductances":
        raise FormatError(f"{path}: not a version {SCHEMA_VERSION} conductance file")
    try:
        params = CrossbarParams(**data["params"])
        layers = [
            ConductanceLayer(
                plus_levels=np.array(layer["plus_levels"], dtype=int).reshape(layer["n_rows"], layer["n_columns"]),
                minus_levels=np.array(layer["minus_levels"], dtype=int).reshape(layer["n_rows"], layer["n_columns"]),
                scale=float(layer["scale"]),
                params=params,
            )
            for layer in data["layers"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: invalid conductance file ({exc})") from exc
    if len(layers) != 2:
        raise FormatError(f"{path}: expected 2 layers, found {len(layers)}")
    return ConductanceNetwork(layers=layers)
