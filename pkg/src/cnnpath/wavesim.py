"""Wave episodes, threshold-crossing logs and transition-interval measurement."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .lattice import CouplingMap, GridState, Integrator, ShapeError, _check_cell
from .physics import stable_states

WINNER_THRESHOLD = 1.2  # V
TP_WINDOW = 20          # cells averaged by measure_tp
MEASURE_QUIET = 2000.0  # ns without a crossing before a corridor run is abandoned


class MeasurementError(RuntimeError):
    pass


@lru_cache(maxsize=256)
def _stable(curve, bias):
    return stable_states(curve, bias)


@dataclass(frozen=True)
class Excitation:
    """How a wave source is started.

    ``program`` sets the cell to the high stable state and holds it there for
    ``hold`` ns (``0`` programs it once and lets it go). ``current`` injects
    ``current`` uA into the cell for ``duration`` ns.
    """

    mode: str = "program"
    hold: float = math.inf
    current: float = 30.0
    duration: float = 5.0

    def __post_init__(self):
        if self.mode not in ("program", "current"):
            raise ValueError(f"unknown excitation mode {self.mode!r}")
        if self.hold < 0 or self.duration < 0:
            raise ValueError("excitation times must be non-negative")


@dataclass(frozen=True)
class Stop:
    """Episode end conditions; whichever is met first ends the run.

    watch
        cells whose crossing ends the episode (all of them, or the first one
        with ``watch_all=False``), after ``linger`` further ns
    budget
        simulated time limit in ns
    quiet
        end after this many ns without any new crossing (0 disables)
    """

    watch: tuple = ()
    watch_all: bool = True
    linger: float = 0.0
    budget: float = math.inf
    quiet: float = 0.0


@dataclass
class CrossingLog:
    """First time each cell rose through ``threshold`` (NaN if never)."""

    times: np.ndarray
    threshold: float
    status: str = "time"
    start: float = 0.0
    end: float = 0.0

    def time(self, cell):
        t = self.times[tuple(cell)]
        return None if np.isnan(t) else float(t)

    @property
    def crossed(self):
        return ~np.isnan(self.times)

    @property
    def count(self):
        return int(np.count_nonzero(self.crossed))


@dataclass(frozen=True)
class SpeedMeasurement:
    bias: float
    tp: float
    cp: float = field(init=False)
    status: str = "ok"

    def __post_init__(self):
        object.__setattr__(self, "cp", 1000.0 / self.tp if self.tp > 0 else math.nan)


_STATUS = {_kernels.DONE_TIME: "time", _kernels.DONE_WATCH: "watch",
           _kernels.DONE_QUIET: "quiet"}


def run_wave(state, coupling, params, curve, threshold=WINNER_THRESHOLD, stop=Stop(), *,
             sources=(), excitation=Excitation(), active_set=True, frame_every=None,
             on_frame=None):
    """Integrate an episode and log first crossings of ``threshold``.

    ``state`` is advanced in place and returned with the log. Each cell in
    ``sources`` is excited at the episode start according to ``excitation``.
    Cells already at or above ``threshold`` when the episode starts are
    logged as crossing at the start time. ``on_frame(state)`` is called at
    the start and every ``frame_every`` ns.
    """
    if not (math.isfinite(stop.budget) or stop.quiet > 0 or stop.watch):
        raise ValueError("stop condition can never be met")
    coupling.check(params)
    if state.v.shape != params.shape:
        raise ShapeError(f"state is {state.v.shape}, grid is {params.shape}")
    stable = _stable(curve, params.bias)
    shape = params.shape
    t0 = state.t

    clamp = np.zeros(shape, dtype=bool)
    clamp_val = np.zeros(shape)
    stim = np.zeros(shape)
    for cell in sources:
        i, j = _check_cell(cell, shape)
        if excitation.mode == "program":
            if stable.high is None:
                raise ValueError("bias has no high stable state to program")
            state.v[i, j] = stable.high
            clamp[i, j] = True
            clamp_val[i, j] = stable.high
        else:
            stim[i, j] = excitation.current
    clamp_until = t0 + excitation.hold if excitation.mode == "program" else t0
    stim_until = t0 + excitation.duration if excitation.mode == "current" else t0

    cross = np.full(shape, np.nan)
    cross[state.v >= threshold] = t0
    watch = np.zeros(shape, dtype=bool)
    for cell in stop.watch:
        watch[_check_cell(cell, shape)] = True
    aux = np.array([t0, np.nan, -1.0])

    integ = Integrator(coupling, params, curve, active_set=active_set,
                       levels=(stable.low, stable.high))
    remaining = math.ceil(stop.budget / params.dt - 1e-9) if math.isfinite(stop.budget) else None
    chunk = None
    if frame_every:
        chunk = max(1, round(frame_every / params.dt))
        if on_frame:
            on_frame(state)
    status = _kernels.DONE_TIME
    done = 0
    while remaining is None or remaining > 0:
        n = chunk or 1_000_000
        if remaining is not None:
            n = min(n, remaining)
        taken, status = integ.run(
            state, n, clamp=(clamp, clamp_val), clamp_until=clamp_until, stim=stim,
            stim_until=stim_until, threshold=threshold, cross=cross, watch=watch,
            watch_all=stop.watch_all, linger=stop.linger, quiet=stop.quiet, aux=aux,
            origin=t0, offset=done)
        done += taken
        if remaining is not None:
            remaining -= taken
        if chunk and on_frame:
            on_frame(state)
        if status != _kernels.DONE_TIME:
            break
    return state, CrossingLog(cross, threshold, _STATUS[status], t0, state.t)


def measure_tp(params, curve, threshold=WINNER_THRESHOLD, length=60, *, window=TP_WINDOW,
               excitation=Excitation(), active_set=True):
    """Transition interval along a ``1 x length`` corridor.

    The source sits on cell 0; ``t_p`` is the mean spacing of crossings over
    the ``window`` cells in the middle of the corridor.
    """
    if length < window + 2:
        raise ValueError(f"corridor of {length} cells is too short for a {window}-cell window")
    stable = _stable(curve, params.bias)
    if not stable.excitable:
        raise MeasurementError(f"bias {params.bias} uA is not excitable for this curve")
    lane = params.replace(rows=1, cols=length)
    first = (length - window) // 2
    last = first + window - 1
    state = GridState(np.full(lane.shape, stable.low), 0.0)
    _, log = run_wave(state, CouplingMap.uniform(lane), lane, curve, threshold,
                      Stop(watch=((0, last),), quiet=MEASURE_QUIET),
                      sources=[(0, 0)], excitation=excitation, active_set=active_set)
    t = log.times[0]
    if np.isnan(t[last]):
        raise MeasurementError(f"wave stalled before cell {last} at bias {params.bias} uA")
    return SpeedMeasurement(params.bias, float((t[last] - t[first]) / (last - first)))


def sweep_bias(biases, params, curve, threshold=WINNER_THRESHOLD, **kwargs):
    """One measurement per bias, in input order; failures are kept as rows."""
    rows = []
    for bias in biases:
        p = params.replace(bias=float(bias))
        if not _stable(curve, p.bias).excitable:
            rows.append(SpeedMeasurement(p.bias, math.nan, "non-excitable"))
            continue
        try:
            rows.append(measure_tp(p, curve, threshold, **kwargs))
        except MeasurementError:
            rows.append(SpeedMeasurement(p.bias, math.nan, "no-propagation"))
    return rows


def is_decreasing(rows):
    tps = [r.tp for r in rows if r.status == "ok"]
    return all(a > b for a, b in zip(tps, tps[1:]))


def write_sweep_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["I_B", "t_p", "c_p", "status"])
    for r in rows:
        w.writerow([f"{r.bias:g}",
                    "" if math.isnan(r.tp) else f"{r.tp:.6f}",
                    "" if math.isnan(r.cp) else f"{r.cp:.6f}",
                    r.status])
