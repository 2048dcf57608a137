"""Switching statistics and the (clock, write) phase diagram.

Every trial owns a counter-based random stream keyed by the
master seed, the grid point and the trial index. Results are
therefore identical whatever the batch size, the number of
worker processes or the order in which the work finishes.
"""

import logging
import math
import time
import warnings
from pathlib import Path
from typing import Iterator, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.interpolate import RegularGridInterpolator

from sotneuron.device import DeviceParams, PulseSchedule, simulate_ensemble
from sotneuron.exc import FormatError, IntegrationDivergedError, LookupClampWarning, SotNeuronError
from sotneuron.magnetodynamics import IntegratorConfig
from sotneuron.parallel import ordered_map
from sotneuron.repos import CSVFileStore, JSONDirectoryStore

logger = logging.getLogger(__name__)

Z95 = 1.96
DEFAULT_BATCH_SIZE = 2048

PHASE_DIAGRAM_FIELDS = ["I_clock", "I_write", "n", "p_hat", "ci95", "successes", "error"]


class SweepGrid(BaseModel):
    """Currents of a phase diagram sweep

    Parameters
    ----------
    clock_levels : list of float
        Clock currents [A], strictly monotone
    write_levels : list of float
        Signed write currents [A], strictly monotone
    trials_per_point : int
        Independent trials per (clock, write) point
    master_seed : int
        Unsigned 64-bit seed of every trial stream

    Examples
    --------
    .. code-block:: python

        grid = SweepGrid.from_ranges(clock=(0, 120e-6, 20), write=(-10e-6, 10e-6, 20))
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    clock_levels: List[float]
    write_levels: List[float]
    trials_per_point: int = Field(default=1000, ge=1)
    master_seed: int = Field(default=0, ge=0, lt=2 ** 64)

    @field_validator("clock_levels", "write_levels")
    @classmethod
    def check_levels(cls, value):
        if not value:
            raise ValueError("At least one level is required")
        if not all(math.isfinite(v) for v in value):
            raise ValueError("Levels must be finite")
        steps = np.diff(value)
        if len(steps) and not (np.all(steps > 0) or np.all(steps < 0)):
            raise ValueError("Levels must be strictly monotone")
        return value

    @classmethod
    def from_ranges(cls, clock: Tuple[float, float, int], write: Tuple[float, float, int], **kwargs) -> 'SweepGrid':
        "Grid of evenly spaced levels, ranges given as (start, stop, count)"
        return cls(
            clock_levels=np.linspace(*clock).tolist(),
            write_levels=np.linspace(*write).tolist(),
            **kwargs
        )

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.clock_levels), len(self.write_levels)

    def points(self) -> Iterator[Tuple[int, float, float]]:
        "Point index and currents in row-major (clock, write) order"
        for i, I_clock in enumerate(self.clock_levels):
            for j, I_write in enumerate(self.write_levels):
                yield i * len(self.write_levels) + j, I_clock, I_write


class PointEstimate(BaseModel):
    "Switching probability estimate of one grid point"
    p_hat: float = Field(ge=0, le=1)
    n: int = Field(ge=1)
    ci95: float = Field(ge=0)
    successes: int = Field(ge=0)


class PointFailure(BaseModel):
    "Grid point whose trials could not be completed"
    point_index: int
    I_clock: float
    I_write: float
    message: str


class PhaseDiagram(BaseModel):
    """Switching probabilities over a sweep grid

    ``estimates[i][j]`` belongs to ``clock_levels[i]`` and
    ``write_levels[j]``; failed points are ``None`` and
    described in ``failures``.
    """
    grid: SweepGrid
    estimates: List[List[Optional[PointEstimate]]]
    failures: List[PointFailure] = []

    @property
    def p_hat(self) -> np.ndarray:
        "Matrix of estimates, NaN where the point failed"
        return np.array([[np.nan if e is None else e.p_hat for e in row] for row in self.estimates])

    def estimate(self, I_clock: float, I_write: float) -> Optional[PointEstimate]:
        "Estimate at exact grid currents"
        i = self.grid.clock_levels.index(I_clock)
        j = self.grid.write_levels.index(I_write)
        return self.estimates[i][j]

    def to_rows(self) -> Iterator[dict]:
        "Long-form rows (one per point)"
        failures = {f.point_index: f.message for f in self.failures}
        for index, I_clock, I_write in self.grid.points():
            i, j = divmod(index, len(self.grid.write_levels))
            estimate = self.estimates[i][j]
            row = {"I_clock": I_clock, "I_write": I_write, "n": None, "p_hat": None, "ci95": None, "successes": None, "error": failures.get(index)}
            if estimate is not None:
                row.update(estimate.model_dump())
            yield row

    def to_json(self) -> dict:
        "Nested form: the grid and an estimate matrix"
        return {
            "clock_levels": self.grid.clock_levels,
            "write_levels": self.grid.write_levels,
            "trials_per_point": self.grid.trials_per_point,
            "master_seed": self.grid.master_seed,
            "p_hat": [[None if e is None else e.p_hat for e in row] for row in self.estimates],
            "n": [[None if e is None else e.n for e in row] for row in self.estimates],
            "ci95": [[None if e is None else e.ci95 for e in row] for row in self.estimates],
            "failures": [f.model_dump() for f in self.failures],
        }


# Statistics
# ----------

def trial_rng(master_seed: int, point_index: int, trial_index: int) -> np.random.Generator:
    "Random stream of one trial, derived from the master seed"
    seq = np.random.SeedSequence(master_seed, spawn_key=(point_index, trial_index))
    return np.random.Generator(np.random.Philox(seq))


def bernoulli_estimate(successes: int, n: int) -> PointEstimate:
    "Proportion with the normal-approximation 95 % half-width"
    if n < 1:
        raise ValueError(f"At least one trial is required, got {n}")
    p_hat = successes / n
    ci95 = Z95 * math.sqrt(p_hat * (1 - p_hat) / n)
    return PointEstimate(p_hat=p_hat, n=n, ci95=ci95, successes=successes)


def _count_successes(device: DeviceParams, schedule: PulseSchedule, cfg: IntegratorConfig, master_seed: int, point_index: int, start: int, stop: int) -> int:
    rngs = [trial_rng(master_seed, point_index, k) for k in range(start, stop)]
    try:
        result = simulate_ensemble(device, schedule, cfg, rngs)
    except IntegrationDivergedError as exc:
        trial = None if exc.trial is None else start + exc.trial
        raise IntegrationDivergedError(
            f"Point {point_index} (I_clock={schedule.I_clock!r}, I_write={schedule.I_write!r}): "
            f"trial {trial} diverged at step {exc.step}",
            step=exc.step, trial=trial,
        ) from exc
    # Zero write current counts AP outcomes
    fired = result.ap if schedule.I_write >= 0 else ~result.ap
    return int(np.count_nonzero(fired))


def _batches(n: int, batch_size: int) -> Iterator[Tuple[int, int]]:
    for start in range(0, n, batch_size):
        yield start, min(start + batch_size, n)


def switching_probability(point: Tuple[float, float], device: DeviceParams, cfg: IntegratorConfig, n: int, seed: int, point_index: int=0, schedule: Optional[PulseSchedule]=None, batch_size: int=DEFAULT_BATCH_SIZE) -> PointEstimate:
    """Probability that the neuron ends in the commanded state

    The commanded state is AP for a positive write current
    and P for a negative one; at zero write current the
    probability of AP is reported.

    Parameters
    ----------
    point : (float, float)
        Clock and write currents [A]
    device : DeviceParams
    cfg : IntegratorConfig
    n : int
        Number of trials
    seed : int
        Master seed
    point_index : int
        Index keying the trial streams, as in :meth:`SweepGrid.points`
    schedule : PulseSchedule, optional
        Pulse timing, its currents are replaced by ``point``
    """
    if n < 1:
        raise ValueError(f"At least one trial is required, got {n}")
    schedule = (schedule or PulseSchedule()).with_currents(*point)
    successes = sum(
        _count_successes(device, schedule, cfg, seed, point_index, start, stop)
        for start, stop in _batches(n, batch_size)
    )
    return bernoulli_estimate(successes, n)


def _run_chunk(task):
    device, schedule, cfg, master_seed, point_index, start, stop = task
    try:
        return point_index, stop - start, _count_successes(device, schedule, cfg, master_seed, point_index, start, stop), None
    except SotNeuronError as exc:
        return point_index, stop - start, 0, str(exc)


def phase_diagram(grid: SweepGrid, device: DeviceParams, cfg: IntegratorConfig, schedule: Optional[PulseSchedule]=None, threads: Optional[int]=1, batch_size: int=DEFAULT_BATCH_SIZE) -> PhaseDiagram:
    """Estimate the switching probability at every grid point

    Trials are cut into batches that are distributed over
    worker processes. A point whose trials fail is recorded
    in ``failures`` and the sweep continues.

    Parameters
    ----------
    grid : SweepGrid
    device : DeviceParams
    cfg : IntegratorConfig
    schedule : PulseSchedule, optional
        Pulse timing shared by all points
    threads : int
        Number of worker processes (0 for all cores)
    batch_size : int
        Trials integrated together
    """
    schedule = schedule or PulseSchedule()
    # Resolve the cached device quantities once for all workers
    device.calibrated_material

    tasks = [
        (device, schedule.with_currents(I_clock, I_write), cfg, grid.master_seed, index, start, stop)
        for index, I_clock, I_write in grid.points()
        for start, stop in _batches(grid.trials_per_point, batch_size)
    ]
    n_points = grid.shape[0] * grid.shape[1]
    successes = [0] * n_points
    completed = [0] * n_points
    errors = {}

    started = time.perf_counter()
    trajectories = 0
    for index, count, success, error in ordered_map(_run_chunk, tasks, threads=threads):
        completed[index] += count
        successes[index] += success
        trajectories += count
        if error is not None and index not in errors:
            logger.warning("Point %d failed: %s", index, error)
            errors[index] = error
        if completed[index] == grid.trials_per_point:
            elapsed = time.perf_counter() - started
            logger.info(
                "Point %d/%d done (%.1f trajectories/s)",
                index + 1, n_points, trajectories / elapsed if elapsed > 0 else float("inf")
            )

    estimates = [[None] * grid.shape[1] for _ in range(grid.shape[0])]
    failures = []
    for index, I_clock, I_write in grid.points():
        i, j = divmod(index, grid.shape[1])
        if index in errors:
            failures.append(PointFailure(point_index=index, I_clock=I_clock, I_write=I_write, message=errors[index]))
        else:
            estimates[i][j] = bernoulli_estimate(successes[index], grid.trials_per_point)
    return PhaseDiagram(grid=grid, estimates=estimates, failures=failures)


# Lookup
# ------

def _interpolate(clock_levels, write_levels, values: np.ndarray, I_clock: float, I_write) -> np.ndarray:
    clock = np.asarray(clock_levels, dtype=float)
    write = np.asarray(write_levels, dtype=float)
    if clock.size > 1 and clock[0] > clock[-1]:
        clock, values = clock[::-1], values[::-1, :]
    if write.size > 1 and write[0] > write[-1]:
        write, values = write[::-1], values[:, ::-1]

    query = np.atleast_1d(np.asarray(I_write, dtype=float))
    clamped_write = np.clip(query, write[0], write[-1])
    clamped_clock = float(np.clip(I_clock, clock[0], clock[-1]))
    if np.any(clamped_write != query) or clamped_clock != I_clock:
        # Message text is fixed, the query goes to the log
        warnings.warn("Lookup outside the phase diagram clamped to its edge", LookupClampWarning)
        logger.debug(
            "Clamped lookup at I_clock=%r, I_write in [%r, %r]",
            I_clock, float(query.min()), float(query.max())
        )

    if clock.size == 1 and write.size == 1:
        result = np.full(query.shape, values[0, 0])
    elif clock.size == 1:
        result = np.interp(clamped_write, write, values[0])
    elif write.size == 1:
        result = np.full(query.shape, np.interp(clamped_clock, clock, values[:, 0]))
    else:
        interpolator = RegularGridInterpolator((clock, write), values, method="linear")
        result = interpolator(np.column_stack([np.full(query.shape, clamped_clock), clamped_write]))
    result = np.clip(result, 0.0, 1.0)
    return result if np.ndim(I_write) else float(result[0])


def probability_lookup(diagram: PhaseDiagram, I_write, I_clock: float) -> Union[float, np.ndarray]:
    """Interpolated switching probability

    Bilinear interpolation of the estimated probabilities at the
    operating clock current. Queries outside the grid are
    clamped to its edge with a :class:`LookupClampWarning`.

    Parameters
    ----------
    diagram : PhaseDiagram
    I_write : float or array
        Write currents [A]
    I_clock : float
        Operating clock current [A]
    """
    return _interpolate(diagram.grid.clock_levels, diagram.grid.write_levels, diagram.p_hat, I_clock, I_write)


def firing_probability(diagram: PhaseDiagram, I_write, I_clock: float) -> Union[float, np.ndarray]:
    """Interpolated probability of ending in AP

    Switching probabilities refer to the commanded state, so the
    negative-current side is complemented before interpolating.
    """
    p_ap = diagram.p_hat.copy()
    negative = np.asarray(diagram.grid.write_levels) < 0
    p_ap[:, negative] = 1.0 - p_ap[:, negative]
    return _interpolate(diagram.grid.clock_levels, diagram.grid.write_levels, p_ap, I_clock, I_write)


# Persistence
# -----------

def write_phase_diagram(diagram: PhaseDiagram, out_dir: Union[str, Path], header: Optional[dict]=None, name: str="phase_diagram") -> Tuple[Path, Path]:
    """Write the diagram as long-form CSV and nested JSON

    Returns
    -------
    (Path, Path)
        Paths of the CSV and the JSON file
    """
    out_dir = Path(out_dir)
    csv_store = CSVFileStore(filename=out_dir / f"{name}.csv", fieldnames=PHASE_DIAGRAM_FIELDS, header=header)
    csv_store.write_file(list(diagram.to_rows()))

    json_store = JSONDirectoryStore(path=out_dir)
    json_store.upsert({"name": name, "provenance": header or {}, **diagram.to_json()})
    return csv_store.filename, json_store.get_file_path(name)


def read_phase_diagram(path: Union[str, Path]) -> PhaseDiagram:
    """Read a diagram back from its long-form CSV"""
    store = CSVFileStore(filename=Path(path), fieldnames=PHASE_DIAGRAM_FIELDS)
    if not store.filename.is_file():
        raise FileNotFoundError(f"Phase diagram {path} not found")
    try:
        rows = store.all()
        clock_levels = list(dict.fromkeys(float(row["I_clock"]) for row in rows))
        write_levels = list(dict.fromkeys(float(row["I_write"]) for row in rows))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"Invalid phase diagram file {path}: {exc}") from exc
    if not rows or len(rows) != len(clock_levels) * len(write_levels):
        raise FormatError(f"Phase diagram {path} is not a complete grid")

    provenance = store.read_header()
    n_max = max((int(row["n"]) for row in rows if row["n"] is not None), default=1)
    grid = SweepGrid(
        clock_levels=clock_levels,
        write_levels=write_levels,
        trials_per_point=n_max,
        master_seed=provenance.get("seed", 0),
    )
    estimates = [[None] * len(write_levels) for _ in clock_levels]
    failures = []
    for index, row in enumerate(rows):
        i, j = divmod(index, len(write_levels))
        if row["p_hat"] is None:
            failures.append(PointFailure(point_index=index, I_clock=float(row["I_clock"]), I_write=float(row["I_write"]), message=row["error"] or "missing"))
        else:
            estimates[i][j] = PointEstimate(p_hat=float(row["p_hat"]), n=int(row["n"]), ci95=float(row["ci95"]), successes=int(row["successes"]))
    return PhaseDiagram(grid=grid, estimates=estimates, failures=failures)
