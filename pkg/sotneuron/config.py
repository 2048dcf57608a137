"""Experiment configuration.

A TOML document with the tables ``[device]``, ``[integrator]``,
``[schedule]``, ``[sweep]``, ``[network]`` and ``[power]`` plus the
top-level keys ``seed``, ``threads`` and ``out_dir``. Omitted keys
take the built-in defaults; unknown keys are rejected.

.. code-block:: toml

    seed = 42
    threads = 4

    [device.material]
    T = 300.0

    [schedule]
    I_clock = 85e-6

    [sweep]
    trials_per_point = 1000
"""

import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from sotneuron.device import DeviceParams, PulseSchedule
from sotneuron.exc import ConfigError
from sotneuron.magnetodynamics import IntegratorConfig
from sotneuron.montecarlo import DEFAULT_BATCH_SIZE, SweepGrid
from sotneuron.network.crossbar import CrossbarParams
from sotneuron.network.inference import InferenceMode
from sotneuron.network.training import TrainingHyperparams

if sys.version_info >= (3, 11):
    import tomllib
else: # pragma: no cover
    import tomli as tomllib

try:
    from typing import Literal
except ImportError: # pragma: no cover
    from typing_extensions import Literal

logger = logging.getLogger(__name__)

CONFIG_ENV = "SOTNEURON_CONFIG"
MNIST_ENV = "SOTNEURON_MNIST_DIR"


class SweepSettings(BaseModel):
    "Phase diagram grid, currents in amperes"
    model_config = ConfigDict(extra="forbid")

    clock_min: float = 0.0
    clock_max: float = 120e-6
    clock_points: int = Field(default=20, ge=1)
    write_min: float = -10e-6
    write_max: float = 10e-6
    write_points: int = Field(default=20, ge=1)
    clock_levels: Optional[List[float]] = None
    write_levels: Optional[List[float]] = None
    trials_per_point: int = Field(default=1000, ge=1)
    batch_size: int = Field(default=DEFAULT_BATCH_SIZE, ge=1)

    def grid(self, seed: int) -> SweepGrid:
        "Sweep grid, explicit levels taking precedence over ranges"
        clock = self.clock_levels
        if clock is None:
            clock = np.linspace(self.clock_min, self.clock_max, self.clock_points).tolist()
        write = self.write_levels
        if write is None:
            write = np.linspace(self.write_min, self.write_max, self.write_points).tolist()
        return SweepGrid(clock_levels=clock, write_levels=write, trials_per_point=self.trials_per_point, master_seed=seed)


class NetworkSettings(BaseModel):
    """Crossbar network experiment

    File paths left empty resolve inside the output directory
    (``weights.json``, ``conductances.json``,
    ``phase_diagram.csv``) or, for MNIST, inside ``mnist_dir``
    which defaults to the ``SOTNEURON_MNIST_DIR`` variable.
    """
    model_config = ConfigDict(extra="forbid")

    mnist_dir: Optional[Path] = None
    train_images: str = "train-images-idx3-ubyte"
    train_labels: str = "train-labels-idx1-ubyte"
    test_images: str = "t10k-images-idx3-ubyte"
    test_labels: str = "t10k-labels-idx1-ubyte"
    n_train: Optional[int] = Field(default=None, ge=1)
    n_eval: int = Field(default=100, ge=1)
    protocol: Literal["held_out", "included"] = "held_out"

    training: TrainingHyperparams = TrainingHyperparams()
    crossbar: CrossbarParams = CrossbarParams()

    mode: InferenceMode = InferenceMode.STOCHASTIC_LOOKUP
    runs_per_image: int = Field(default=100, ge=1)
    I_clock: float = 85e-6
    weights: Optional[Path] = None
    conductances: Optional[Path] = None
    phase_diagram: Optional[Path] = None

    def resolve_mnist_dir(self) -> Path:
        path = self.mnist_dir or os.environ.get(MNIST_ENV)
        if path is None:
            raise ConfigError("No MNIST directory", [f"set network.mnist_dir or the {MNIST_ENV} variable"])
        return Path(path)


class PowerSettings(BaseModel):
    "Power report inputs"
    model_config = ConfigDict(extra="forbid")

    input_pattern: Optional[List[int]] = None
    conductances: Optional[Path] = None


class ExperimentConfig(BaseModel):
    """Fully resolved experiment configuration

    Examples
    --------
    .. code-block:: python

        config = load_config("experiment.toml", overrides={"seed": 7})
        config.sweep.grid(config.seed)
    """
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    threads: int = Field(default=1, ge=0)
    out_dir: Path = Path("out")
    repeats: int = Field(default=1, ge=1)

    device: DeviceParams = DeviceParams()
    integrator: IntegratorConfig = IntegratorConfig()
    schedule: PulseSchedule = PulseSchedule()
    sweep: SweepSettings = SweepSettings()
    network: NetworkSettings = NetworkSettings()
    power: PowerSettings = PowerSettings()

    def provenance(self) -> Dict[str, Any]:
        "Header embedded into every artifact"
        from sotneuron import __version__
        return {"seed": self.seed, "version": __version__, "config": self.model_dump(mode="json")}


def _diagnostics(error: ValidationError) -> List[str]:
    lines = []
    for detail in error.errors():
        location = ".".join(str(part) for part in detail["loc"]) or "<root>"
        lines.append(f"{location}: {detail['msg']}")
    return lines


def parse_config(data: Dict[str, Any], overrides: Optional[Dict[str, Any]]=None) -> ExperimentConfig:
    "Validate a config mapping, top-level overrides applied last"
    data = dict(data)
    data.update({key: value for key, value in (overrides or {}).items() if value is not None})
    try:
        return ExperimentConfig(**data)
    except ValidationError as exc:
        raise ConfigError("Invalid configuration", _diagnostics(exc)) from exc


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    "Parse a TOML config file"
    path = Path(path)
    try:
        with open(path, "rb") as file:
            return tomllib.load(file)
    except FileNotFoundError as exc:
        raise ConfigError(f"Config file {path} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"Config file {path} is not valid TOML", [str(exc)]) from exc


def default_config_path() -> Optional[Path]:
    "Config path from the environment (or a .env file)"
    load_dotenv()
    path = os.environ.get(CONFIG_ENV)
    return Path(path) if path else None


def load_config(path: Optional[Union[str, Path]]=None, overrides: Optional[Dict[str, Any]]=None) -> ExperimentConfig:
    """Resolve the experiment configuration

    Defaults are overridden by the file (``path`` or the
    ``SOTNEURON_CONFIG`` variable) and the file by
    ``overrides`` (command-line flags).

    Raises
    ------
    ConfigError
        With one diagnostic line per problem
    """
    path = path or default_config_path()
    data = read_config_file(path) if path is not None else {}
    if path is not None:
        logger.debug("Configuration read from %s", path)
    return parse_config(data, overrides=overrides)
