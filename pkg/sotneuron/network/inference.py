"""Classification with SOT neurons behind the crossbars."""

import logging
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel

from sotneuron.device import DeviceParams, NeuronState, PulseSchedule, read_voltage, simulate_ensemble
from sotneuron.magnetodynamics import IntegratorConfig
from sotneuron.montecarlo import PhaseDiagram, firing_probability, trial_rng
from sotneuron.network.crossbar import ConductanceLayer, ConductanceNetwork, column_currents
from sotneuron.network.mnist import Dataset
from sotneuron.parallel import ordered_map
from sotneuron.repos import CSVFileStore, JSONDirectoryStore

logger = logging.getLogger(__name__)

RUN_FIELDS = ["image", "run", "label", "predicted", "correct", "no_fire"]


class InferenceMode(str, Enum):
    "How a neuron turns its synaptic current into an output"
    DETERMINISTIC = "deterministic"
    STOCHASTIC_LOOKUP = "lookup"
    STOCHASTIC_FULL = "full"


@dataclass
class NeuronContext:
    """What the stochastic modes need to evaluate a neuron

    Parameters
    ----------
    I_clock : float
        Operating clock current [A]
    diagram : PhaseDiagram, optional
        Switching statistics for the lookup mode
    device, schedule, integrator : optional
        Device simulation settings for the full mode
    """
    I_clock: float = 85e-6
    diagram: Optional[PhaseDiagram] = None
    device: Optional[DeviceParams] = None
    schedule: Optional[PulseSchedule] = None
    integrator: Optional[IntegratorConfig] = None

    def require(self, mode: 'InferenceMode'):
        if mode is InferenceMode.STOCHASTIC_LOOKUP and self.diagram is None:
            raise ValueError("Lookup inference requires a phase diagram")


def layer_forward(x: np.ndarray, layer: ConductanceLayer, mode: InferenceMode, rng: Optional[np.random.Generator]=None, context: Optional[NeuronContext]=None) -> Tuple[np.ndarray, np.ndarray]:
    """Neuron outputs of one crossbar layer

    Parameters
    ----------
    x : array of {0, 1}
        Layer inputs
    layer : ConductanceLayer
    mode : InferenceMode
    rng : numpy.random.Generator, optional
        Stream of the stochastic modes
    context : NeuronContext, optional
        Operating point of the stochastic modes

    Returns
    -------
    outputs : array of {0, 1}
        Logic level of every neuron
    currents : array
        Synaptic currents [A]
    """
    currents = column_currents(layer, x)
    mode = InferenceMode(mode)
    if mode is InferenceMode.DETERMINISTIC:
        return (currents > 0).astype(np.uint8), currents

    context = context or NeuronContext()
    context.require(mode)
    rng = np.random.default_rng() if rng is None else rng
    if mode is InferenceMode.STOCHASTIC_LOOKUP:
        p_fire = np.atleast_1d(firing_probability(context.diagram, currents, context.I_clock))
        return (rng.random(len(currents)) < p_fire).astype(np.uint8), currents

    device = context.device or DeviceParams()
    schedule = (context.schedule or PulseSchedule()).with_currents(context.I_clock, 0.0)
    seeds = rng.integers(0, 2 ** 63, size=len(currents))
    neuron_rngs = [np.random.Generator(np.random.Philox(int(seed))) for seed in seeds]
    result = simulate_ensemble(device, schedule, context.integrator or IntegratorConfig(), neuron_rngs, I_write=currents)
    outputs = np.array([read_voltage(state, device.mtj).logic for state in result.states], dtype=np.uint8)
    return outputs, currents


def decide(outputs: np.ndarray, currents: np.ndarray) -> int:
    """Class of an output layer response

    The firing neuron with the largest current magnitude wins;
    when none fires, the largest signed current does.
    """
    firing = np.flatnonzero(outputs)
    if firing.size:
        return int(firing[np.argmax(np.abs(currents[firing]))])
    return int(np.argmax(currents))


def network_forward(image: np.ndarray, network: ConductanceNetwork, mode: InferenceMode, rng: Optional[np.random.Generator]=None, context: Optional[NeuronContext]=None) -> Tuple[int, np.ndarray, np.ndarray]:
    "Predicted class with the output layer response"
    hidden, _ = layer_forward(image, network.layers[0], mode, rng=rng, context=context)
    outputs, currents = layer_forward(hidden, network.layers[1], mode, rng=rng, context=context)
    return decide(outputs, currents), outputs, currents


def network_infer(image: np.ndarray, network: ConductanceNetwork, mode: InferenceMode, rng: Optional[np.random.Generator]=None, context: Optional[NeuronContext]=None) -> int:
    "Predicted class of one binary image"
    predicted, _, _ = network_forward(image, network, mode, rng=rng, context=context)
    return predicted


# Evaluation
# ----------

class AccuracyReport(BaseModel):
    """Classification accuracy over repeated stochastic runs

    ``confusion[label][predicted]`` counts runs.
    """
    mode: InferenceMode
    protocol: str = "held_out"
    n_images: int
    runs_per_image: int
    master_seed: int
    accuracy: float
    per_class: Dict[int, float]
    confusion: List[List[int]]
    no_fire_rate: float
    per_image: List[float]


def _evaluate_images(task):
    images, labels, offsets, network, mode, runs, master_seed, context = task
    records = []
    for image, label, index in zip(images, labels, offsets):
        for run in range(runs):
            rng = trial_rng(master_seed, int(index), run)
            predicted, outputs, _ = network_forward(image, network, mode, rng=rng, context=context)
            records.append({
                "image": int(index), "run": run, "label": int(label), "predicted": predicted,
                "correct": int(predicted == label), "no_fire": int(not outputs.any()),
            })
    return records


def evaluate(dataset: Dataset, network: ConductanceNetwork, mode: InferenceMode, runs_per_image: int=1, master_seed: int=0, context: Optional[NeuronContext]=None, threads: Optional[int]=1, protocol: str="held_out", chunk: int=10) -> Tuple[AccuracyReport, List[dict]]:
    """Accuracy of the crossbar network on a dataset

    Every (image, run) pair draws from its own stream, so the
    report does not depend on the number of workers.

    Returns
    -------
    AccuracyReport
        Aggregated statistics
    list of dict
        One record per run
    """
    if runs_per_image < 1:
        raise ValueError(f"At least one run per image is required, got {runs_per_image}")
    mode = InferenceMode(mode)
    if context is not None:
        context.require(mode)
    tasks = [
        (dataset.images[start:start + chunk], dataset.labels[start:start + chunk], range(start, min(start + chunk, len(dataset))), network, mode, runs_per_image, master_seed, context)
        for start in range(0, len(dataset), chunk)
    ]
    records = []
    started = time.perf_counter()
    for chunk_records in ordered_map(_evaluate_images, tasks, threads=threads):
        records.extend(chunk_records)
        logger.info("Evaluated %d/%d runs (%.1f s)", len(records), len(dataset) * runs_per_image, time.perf_counter() - started)

    n_classes = network.layers[1].shape[1]
    labels = np.array([r["label"] for r in records], dtype=int)
    predicted = np.array([r["predicted"] for r in records], dtype=int)
    correct = labels == predicted
    confusion = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(confusion, (labels, predicted), 1)

    report = AccuracyReport(
        mode=mode,
        protocol=protocol,
        n_images=len(dataset),
        runs_per_image=runs_per_image,
        master_seed=master_seed,
        accuracy=float(correct.mean()) if len(records) else 0.0,
        per_class={
            int(label): float(correct[labels == label].mean())
            for label in np.unique(labels)
        },
        confusion=confusion.tolist(),
        no_fire_rate=float(np.mean([r["no_fire"] for r in records])) if records else 0.0,
        per_image=correct.reshape(len(dataset), runs_per_image).mean(axis=1).tolist(),
    )
    logger.info("Accuracy (%s, %d runs per image): %.4f", mode.value, runs_per_image, report.accuracy)
    return report, records


def write_report(report: AccuracyReport, records: List[dict], out_dir: Union[str, Path], header: Optional[dict]=None, name: str="accuracy") -> Tuple[Path, Path]:
    "Write the report as JSON and the run log as CSV"
    out_dir = Path(out_dir)
    json_store = JSONDirectoryStore(path=out_dir)
    json_store.upsert({"name": name, "provenance": header or {}, **report.model_dump(mode="json")})
    csv_store = CSVFileStore(filename=out_dir / f"{name}_runs.csv", fieldnames=RUN_FIELDS, header=header)
    csv_store.write_file(records)
    return json_store.get_file_path(name), csv_store.filename
