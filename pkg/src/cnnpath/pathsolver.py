"""Iterative wave-based path search.

Each iteration starts a wave at the target, watches the four neighbours of
the current reference cell, moves the reference to whichever neighbour the
wave reaches first, then resets the network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .analytics import NESW
from .lattice import CouplingMap, GridParams, GridState, ShapeError, _check_cell
from .obstacles import TemplateImage, build_coupling
from .physics import ReactionCurve, nominal_curve
from .wavesim import (WINNER_THRESHOLD, CrossingLog, Excitation, Stop, _stable, measure_tp,
                      run_wave)

TIMEOUT_SAFETY = 1.5
QUIET_FACTOR = 5.0
TIE_FRACTION = 0.01

REACHED = "reached"
NO_PATH = "no-path"
BUDGET = "budget-exceeded"


class NoCrossing(LookupError):
    """No watched neighbour crossed the threshold during the episode."""


class SolverError(RuntimeError):
    pass


@dataclass
class PathProblem:
    """A start/target pair on a template or a per-iteration map provider.

    ``map_provider(iteration, reference)`` must return a :class:`CouplingMap`
    and is queried once per iteration; ``target_provider(iteration)`` may move
    the target between iterations. ``tp_estimate`` defaults to a corridor
    measurement at the problem bias.
    """

    start: tuple
    target: tuple
    template: TemplateImage | None = None
    params: GridParams = field(default_factory=GridParams)
    curve: ReactionCurve = field(default_factory=nominal_curve)
    threshold: float = WINNER_THRESHOLD
    coupling_mode: str = "threshold"
    coupling_threshold: float = 127
    coupling_alpha: float = 1.0
    excitation: Excitation = field(default_factory=Excitation)
    map_provider: Callable | None = None
    target_provider: Callable | None = None
    tp_estimate: float | None = None
    tie_eps: float | None = None
    safety: float = TIMEOUT_SAFETY
    active_set: bool = True

    def __post_init__(self):
        self.start = _check_cell(self.start, self.params.shape)
        self.target = _check_cell(self.target, self.params.shape)
        if self.template is None and self.map_provider is None:
            raise ValueError("a path problem needs a template or a map provider")
        if self.template is not None:
            if self.template.shape != self.params.shape:
                raise ShapeError(f"template is {self.template.shape}, grid is {self.params.shape}")
            free = self.template.free_mask()
            for name, cell in (("start", self.start), ("target", self.target)):
                if not free[cell]:
                    raise ValueError(f"{name} cell {cell} lies on an obstacle")

    def coupling(self, iteration, reference):
        if self.map_provider is not None:
            cmap = self.map_provider(iteration, reference)
            cmap.check(self.params)
            return cmap
        if not hasattr(self, "_static"):
            self._static = build_coupling(self.template, self.params, self.coupling_mode,
                                          self.coupling_threshold, self.coupling_alpha)
        return self._static


@dataclass(frozen=True)
class IterationResult:
    winner: tuple
    crossing_time: float
    duration: float
    tie: bool = False


@dataclass
class PathSolution:
    start: tuple
    target: tuple
    outcome: str
    path: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    tp_estimate: float = math.nan

    @property
    def steps(self):
        return len(self.path)

    @property
    def total_time(self):
        """Sum of winner crossing times over all iterations, in ns."""
        return math.fsum(it.crossing_time for it in self.iterations)

    def to_dict(self):
        return {
            "outcome": self.outcome,
            "start": list(self.start),
            "target": list(self.target),
            "steps": self.steps,
            "path": [list(c) for c in self.path],
            "total_time_ns": self.total_time,
            "tp_estimate_ns": self.tp_estimate,
            "iterations": [
                {"winner": list(it.winner), "crossing_time_ns": it.crossing_time,
                 "duration_ns": it.duration, "tie": it.tie}
                for it in self.iterations
            ],
        }


def neighbors_nesw(cell, shape):
    i, j = cell
    return [(i + di, j + dj) for di, dj in NESW
            if 0 <= i + di < shape[0] and 0 <= j + dj < shape[1]]


def coupled_neighbors(cell, coupling):
    return [nb for nb in neighbors_nesw(cell, coupling.shape) if coupling.edge(cell, nb) > 0]


def detect_winner(log, reference, tie_eps, candidates=None, duration=None):
    """Neighbour of ``reference`` with the earliest crossing.

    Crossings within ``tie_eps`` of the earliest count as a tie, which is
    settled by north, east, south, west order.
    """
    shape = log.times.shape
    cells = neighbors_nesw(tuple(reference), shape) if candidates is None else list(candidates)
    times = [(cell, log.time(cell)) for cell in cells]
    times = [(cell, t) for cell, t in times if t is not None]
    if not times:
        raise NoCrossing(f"no neighbour of {tuple(reference)} crossed {log.threshold} V")
    best = min(t for _, t in times)
    tied = [(cell, t) for cell, t in times if t - best <= tie_eps]
    cell, t = tied[0]
    end = log.end if duration is None else duration
    return IterationResult(cell, t - log.start, end - log.start, len(tied) > 1)


def timeout_bound(params, tp_estimate, free_cells=None, safety=TIMEOUT_SAFETY):
    """Upper bound in ns on a single front traversal."""
    if not tp_estimate > 0:
        raise ValueError("t_p estimate must be positive")
    total = params.rows * params.cols
    cells = total if free_cells is None else min(int(free_cells), total)
    return cells * tp_estimate * safety


def _free_cells(problem, coupling):
    if problem.template is not None:
        return int(np.count_nonzero(problem.template.free_mask()))
    # component of the target in the coupling graph bounds any traversal
    from .analytics import ObstacleGraph, bfs_distances
    return int(np.count_nonzero(bfs_distances(ObstacleGraph.from_coupling(coupling),
                                              problem.target) >= 0))


def solve_path(problem, *, on_episode=None, frame_every=None, on_frame=None):
    """Run the wave iterations until the target is reached or ruled out.

    ``on_episode(iteration, state, log)`` sees every finished episode;
    ``on_frame(iteration, state)`` receives snapshots every ``frame_every`` ns.
    """
    params = problem.params
    stable = _stable(problem.curve, params.bias)
    if not stable.excitable:
        raise SolverError(f"bias {params.bias} uA does not leave the network excitable "
                          f"(peak current {problem.curve.peak[1]:.3f} uA)")
    tp = problem.tp_estimate
    if tp is None:
        tp = measure_tp(params, problem.curve, problem.threshold,
                        excitation=problem.excitation).tp
    tie_eps = TIE_FRACTION * tp if problem.tie_eps is None else problem.tie_eps

    rc = problem.start
    tc = problem.target
    solution = PathSolution(problem.start, problem.target, REACHED, tp_estimate=tp)
    cap = params.rows * params.cols
    for iteration in range(cap + 1):
        if problem.target_provider is not None:
            tc = _check_cell(problem.target_provider(iteration), params.shape)
            solution.target = tc
        if rc == tc:
            solution.outcome = REACHED
            return solution
        if iteration == cap:
            break
        coupling = problem.coupling(iteration, rc)
        watch = tuple(coupled_neighbors(rc, coupling))
        if not watch:
            solution.outcome = NO_PATH
            return solution
        budget = timeout_bound(params, tp, _free_cells(problem, coupling), problem.safety)
        state = GridState(np.full(params.shape, stable.low), 0.0)
        frame_cb = None
        if on_frame is not None:
            def frame_cb(s, _it=iteration):
                on_frame(_it, s)
        state, log = run_wave(
            state, coupling, params, problem.curve, problem.threshold,
            Stop(watch=watch, watch_all=False, linger=tie_eps, budget=budget,
                 quiet=QUIET_FACTOR * tp),
            sources=[tc], excitation=problem.excitation, active_set=problem.active_set,
            frame_every=frame_every if frame_cb else None, on_frame=frame_cb)
        if on_episode is not None:
            on_episode(iteration, state, log)
        try:
            result = detect_winner(log, rc, tie_eps, candidates=watch)
        except NoCrossing:
            solution.outcome = NO_PATH
            return solution
        solution.iterations.append(result)
        solution.path.append(result.winner)
        rc = result.winner
    solution.outcome = BUDGET
    return solution
