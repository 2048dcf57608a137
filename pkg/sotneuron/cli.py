"""Command-line interface.

Progress goes to standard error; results go to files in the
output directory whose paths are printed on standard output.
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List

import numpy as np

from sotneuron.config import ExperimentConfig, load_config
from sotneuron.device import clock_power, hm_resistance, simulate_two_step
from sotneuron.exc import (
    ConfigError, DatasetError, FormatError, IntegrationDivergedError, TrainingFailedError,
)
from sotneuron.logging import StoreHandler
from sotneuron.logging.handler import LogEvent
from sotneuron.magnetodynamics import TRAJECTORY_FIELDS
from sotneuron.montecarlo import phase_diagram, read_phase_diagram, trial_rng, write_phase_diagram
from sotneuron.network import (
    Dataset, InferenceMode, NeuronContext, evaluate, float_predict, ingest_mnist, layer_forward,
    load_conductances, load_split, load_weights, network_infer, quantize_weights,
    rcn_static_power, save_conductances, save_weights, train_offline, write_report,
)
from sotneuron.repos import CSVFileStore, JSONDirectoryStore

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DIVERGED = 4
EXIT_TRAINING = 5

PUBLISHED_FIGURE = "matches the published per-neuron clock power"
OWN_ESTIMATE = "model estimate without a published counterpart"


# Commands
# --------

def cmd_switch(config: ExperimentConfig) -> List[Path]:
    "Simulate the two-step protocol and write the trajectories"
    out_dir, header = config.out_dir, config.provenance()
    power = clock_power(config.schedule, config.device.heavy_metal)
    states, paths = [], []
    for k in range(config.repeats):
        trajectory, state = simulate_two_step(config.schedule, config.device, config.integrator, rng=trial_rng(config.seed, 0, k))
        store = CSVFileStore(filename=out_dir / f"trajectory_{k}.csv", fieldnames=TRAJECTORY_FIELDS, header=header)
        store.write_file(list(trajectory.to_rows()))
        paths.append(store.filename)
        states.append(state.value)
        logger.info("Repeat %d ended in %s", k, state.value)

    summary = JSONDirectoryStore(path=out_dir)
    summary.upsert({
        "name": "switch_summary",
        "final_states": states,
        "final_state": states[0],
        "ap_fraction": states.count("AP") / len(states),
        "clock_power_W": power.power,
        "clock_energy_J": power.energy,
        "provenance": header,
    })
    return paths + [summary.get_file_path("switch_summary")]


def cmd_phase_diagram(config: ExperimentConfig) -> List[Path]:
    "Sweep the clock and write currents"
    grid = config.sweep.grid(config.seed)
    started = time.perf_counter()
    diagram = phase_diagram(grid, config.device, config.integrator, schedule=config.schedule, threads=config.threads, batch_size=config.sweep.batch_size)
    elapsed = time.perf_counter() - started
    n_trajectories = grid.shape[0] * grid.shape[1] * grid.trials_per_point
    logger.info("%d trajectories in %.1f s (%.1f trajectories/s)", n_trajectories, elapsed, n_trajectories / elapsed if elapsed else float("inf"))
    for failure in diagram.failures:
        logger.error("Point %d (I_clock=%g, I_write=%g) failed: %s", failure.point_index, failure.I_clock, failure.I_write, failure.message)
    return list(write_phase_diagram(diagram, config.out_dir, header=config.provenance()))


def _evaluation_set(config: ExperimentConfig) -> Dataset:
    net = config.network
    mnist_dir = net.resolve_mnist_dir()
    return ingest_mnist(mnist_dir / net.test_images, mnist_dir / net.test_labels, n_images=net.n_eval)


def cmd_train(config: ExperimentConfig) -> List[Path]:
    "Train the float network offline"
    net = config.network
    mnist_dir = net.resolve_mnist_dir()
    train = load_split(mnist_dir / net.train_images, mnist_dir / net.train_labels, limit=net.n_train)
    evaluation = _evaluation_set(config)
    if net.protocol == "included":
        train = Dataset(images=np.vstack([train.images, evaluation.images]), labels=np.concatenate([train.labels, evaluation.labels]))

    network = train_offline(train, net.training)
    accuracy = float(np.mean(float_predict(network, evaluation.images) == evaluation.labels))
    logger.info("Float network accuracy on the evaluation set (%s): %.3f", net.protocol, accuracy)
    return [save_weights(network, net.weights or config.out_dir / "weights.json", header=config.provenance())]


def cmd_quantize(config: ExperimentConfig) -> List[Path]:
    "Map the trained weights onto crossbar conductances"
    net = config.network
    network = load_weights(net.weights or config.out_dir / "weights.json")
    conductances = quantize_weights(network, net.crossbar)
    return [save_conductances(conductances, config.out_dir / "conductances.json", header=config.provenance())]


def _context(config: ExperimentConfig, mode: InferenceMode) -> NeuronContext:
    net = config.network
    diagram = None
    if mode is InferenceMode.STOCHASTIC_LOOKUP:
        diagram = read_phase_diagram(net.phase_diagram or config.out_dir / "phase_diagram.csv")
    return NeuronContext(I_clock=net.I_clock, diagram=diagram, device=config.device, schedule=config.schedule, integrator=config.integrator)


def _conductances(config: ExperimentConfig):
    return load_conductances(config.network.conductances or config.out_dir / "conductances.json")


def cmd_infer(config: ExperimentConfig) -> List[Path]:
    "Classify every evaluation image once"
    net = config.network
    dataset = _evaluation_set(config)
    conductances = _conductances(config)
    context = _context(config, net.mode)
    rows = []
    for index, (image, label) in enumerate(zip(dataset.images, dataset.labels)):
        predicted = network_infer(image, conductances, net.mode, rng=trial_rng(config.seed, index, 0), context=context)
        rows.append({"image": index, "label": int(label), "predicted": predicted})
    store = CSVFileStore(filename=config.out_dir / "predictions.csv", fieldnames=["image", "label", "predicted"], header=config.provenance())
    store.write_file(rows)
    return [store.filename]


def cmd_evaluate(config: ExperimentConfig) -> List[Path]:
    "Accuracy report of the configured mode next to the deterministic one"
    net = config.network
    dataset = _evaluation_set(config)
    conductances = _conductances(config)
    header = config.provenance()

    paths = []
    runs = [(InferenceMode.DETERMINISTIC, 1)]
    if net.mode is not InferenceMode.DETERMINISTIC:
        runs.append((net.mode, net.runs_per_image))
    for mode, runs_per_image in runs:
        report, records = evaluate(
            dataset, conductances, mode, runs_per_image=runs_per_image, master_seed=config.seed,
            context=_context(config, mode), threads=config.threads, protocol=net.protocol,
        )
        logger.info("%s accuracy: %.4f (no-fire rate %.4f)", mode.value, report.accuracy, report.no_fire_rate)
        paths.extend(write_report(report, records, config.out_dir, header=header, name=f"accuracy_{mode.value}"))
    return paths


def cmd_power(config: ExperimentConfig) -> List[Path]:
    "Clock power of one neuron and crossbar static power"
    power = clock_power(config.schedule, config.device.heavy_metal)
    report = {
        "name": "power",
        "clock": {
            "I_clock_A": config.schedule.I_clock,
            "R_HM_ohm": hm_resistance(config.device.heavy_metal),
            "power_W": power.power,
            "energy_per_clock_J": power.energy,
            "label": PUBLISHED_FIGURE,
        },
        "provenance": config.provenance(),
    }
    path = config.power.conductances or config.network.conductances or config.out_dir / "conductances.json"
    if Path(path).is_file():
        conductances = load_conductances(path)
        n_inputs = conductances.layers[0].shape[0] - 1
        pattern = np.ones(n_inputs) if config.power.input_pattern is None else np.asarray(config.power.input_pattern, dtype=float)
        if pattern.shape != (n_inputs,):
            raise ConfigError("Invalid power settings", [f"power.input_pattern: expected {n_inputs} inputs, got {pattern.size}"])
        hidden, _ = layer_forward(pattern, conductances.layers[0], InferenceMode.DETERMINISTIC)
        report["rcn_static"] = {
            "hidden_W": rcn_static_power(pattern, conductances.layers[0]),
            "output_W": rcn_static_power(hidden, conductances.layers[1]),
            "label": OWN_ESTIMATE,
        }
    else:
        logger.warning("No conductance file at %s, crossbar static power not reported", path)
    store = JSONDirectoryStore(path=config.out_dir)
    store.upsert(report)
    return [store.get_file_path("power")]


COMMANDS: Dict[str, Callable[[ExperimentConfig], List[Path]]] = {
    "switch": cmd_switch,
    "phase-diagram": cmd_phase_diagram,
    "train": cmd_train,
    "quantize": cmd_quantize,
    "infer": cmd_infer,
    "evaluate": cmd_evaluate,
    "power": cmd_power,
}


# Plumbing
# --------

def parse_args(args=None) -> argparse.Namespace:
    "Parse CLI arguments"
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML experiment file (default: $SOTNEURON_CONFIG)")
    common.add_argument("--seed", type=int, help="Master seed")
    common.add_argument("--threads", type=int, help="Worker processes, 0 for all cores")
    common.add_argument("--out", dest="out_dir", type=Path, help="Output directory")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="sotneuron", description="Stochastic SOT neuron simulator")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        sub = subparsers.add_parser(name, parents=[common], help=func.__doc__)
        if name == "switch":
            sub.add_argument("--repeats", type=int, help="Number of independent runs")
        if name in ("infer", "evaluate"):
            sub.add_argument("--mode", choices=[mode.value for mode in InferenceMode], help="Neuron model")
    return parser.parse_args(args)


def _setup_logging(verbose: bool) -> logging.Handler:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    package = logging.getLogger("sotneuron")
    package.setLevel(logging.DEBUG if verbose else logging.INFO)
    package.addHandler(handler)
    return handler


def _event_handler(out_dir: Path, header: dict) -> StoreHandler:
    store = CSVFileStore(filename=out_dir / "events.csv", model=LogEvent, header=header)
    handler = StoreHandler(store=store, level=logging.WARNING)
    logging.getLogger("sotneuron").addHandler(handler)
    return handler


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    "Experiment configuration with the command-line flags applied"
    overrides = {"seed": args.seed, "threads": args.threads, "out_dir": args.out_dir, "repeats": getattr(args, "repeats", None)}
    config = load_config(args.config, overrides=overrides)
    mode = getattr(args, "mode", None)
    if mode is not None:
        network = config.network.model_copy(update={"mode": InferenceMode(mode)})
        config = config.model_copy(update={"network": network})
    return config


def main(args=None) -> int:
    "Run a subcommand and return its exit code"
    args = parse_args(args)
    handlers = [_setup_logging(args.verbose)]
    try:
        config = resolve_config(args)
        # Errors of the command end up in events.csv as well
        handlers.append(_event_handler(config.out_dir, config.provenance()))
        paths = COMMANDS[args.command](config)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except (FormatError, DatasetError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_IO
    except IntegrationDivergedError as exc:
        logger.error("Simulation diverged: %s", exc)
        return EXIT_DIVERGED
    except TrainingFailedError as exc:
        logger.error("%s (diagnostics: train accuracy %s)", exc, exc.diagnostics.get("train_accuracy"))
        return EXIT_TRAINING
    except Exception:
        logger.exception("Unexpected error")
        return EXIT_UNEXPECTED
    finally:
        for handler in handlers:
            logging.getLogger("sotneuron").removeHandler(handler)

    for path in paths:
        print(path)
    return EXIT_OK
