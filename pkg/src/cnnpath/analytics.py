"""Closed-form solve-time predictions and the breadth-first path oracle."""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass

import numpy as np

NESW = ((-1, 0), (0, 1), (1, 0), (0, -1))


@dataclass(frozen=True)
class ObstacleGraph:
    """4-neighbour graph with an edge wherever the coupling is nonzero."""

    rows: int
    cols: int
    horizontal: np.ndarray
    vertical: np.ndarray

    @classmethod
    def from_coupling(cls, coupling):
        n, m = coupling.shape
        return cls(n, m, coupling.horizontal > 0, coupling.vertical > 0)

    def has_edge(self, a, b):
        (i, j), (k, l) = sorted([tuple(a), tuple(b)])
        if i == k and l == j + 1:
            return bool(self.horizontal[i, j])
        if j == l and k == i + 1:
            return bool(self.vertical[i, j])
        return False

    def neighbors(self, cell):
        i, j = cell
        if i > 0 and self.vertical[i - 1, j]:
            yield (i - 1, j)
        if j < self.cols - 1 and self.horizontal[i, j]:
            yield (i, j + 1)
        if i < self.rows - 1 and self.vertical[i, j]:
            yield (i + 1, j)
        if j > 0 and self.horizontal[i, j - 1]:
            yield (i, j - 1)


def bfs_distances(graph, source):
    """Step distance from ``source`` to every cell; -1 where unreachable."""
    dist = np.full((graph.rows, graph.cols), -1, dtype=np.int64)
    source = tuple(source)
    dist[source] = 0
    queue = deque([source])
    while queue:
        cell = queue.popleft()
        d = dist[cell] + 1
        for nb in graph.neighbors(cell):
            if dist[nb] < 0:
                dist[nb] = d
                queue.append(nb)
    return dist


def bfs_shortest(graph, start, goal):
    """Shortest 4-neighbour step count, or ``None`` if unreachable."""
    for i, j in (start, goal):
        if not (0 <= i < graph.rows and 0 <= j < graph.cols):
            raise IndexError(f"cell {(i, j)} outside {graph.rows}x{graph.cols} grid")
    d = int(bfs_distances(graph, start)[tuple(goal)])
    return None if d < 0 else d


def predict_solution_time(steps, tp):
    """Total wave time for a ``steps``-long solution: sum of (P-1) + ... + 1 transitions."""
    if steps < 0:
        raise ValueError("path length must be non-negative")
    return steps * (steps - 1) * tp / 2.0


def worst_case_time(rows, cols, tp):
    """Solve time at the longest plausible path, P = rows*cols/2."""
    if rows < 1 or cols < 1:
        raise ValueError("array dimensions must be positive")
    cells = rows * cols
    return cells * (cells / 2.0 - 1.0) * tp / 4.0


@dataclass(frozen=True)
class PathReport:
    start: tuple
    target: tuple
    outcome: str
    solver_steps: int | None
    oracle_steps: int | None
    equal: bool
    legal: bool
    progress: bool

    FIELDS = ("start", "target", "outcome", "solver_steps", "oracle_steps", "equal", "legal",
              "progress")

    def row(self):
        return [f"{self.start[0]}:{self.start[1]}", f"{self.target[0]}:{self.target[1]}",
                self.outcome, "" if self.solver_steps is None else self.solver_steps,
                "" if self.oracle_steps is None else self.oracle_steps,
                int(self.equal), int(self.legal), int(self.progress)]

    def summary(self):
        verdict = "ok" if (self.equal and self.legal and self.progress) else "MISMATCH"
        return (f"{self.start} -> {self.target}: {self.outcome}, solver P={self.solver_steps}, "
                f"oracle={self.oracle_steps}, legal={self.legal}, progress={self.progress} "
                f"[{verdict}]")


def compare_path(solution, graph):
    """Check a solver result against the BFS oracle.

    ``equal`` holds when the solver reached the target in the shortest step
    count, or when both agree the target is unreachable. Dynamic problems
    (target or map changing mid-solve) are outside what this compares.
    """
    start, target = tuple(solution.start), tuple(solution.target)
    dist = bfs_distances(graph, target)
    oracle = None if dist[start] < 0 else int(dist[start])
    if solution.outcome == "reached":
        equal = oracle == solution.steps
    elif solution.outcome == "no-path":
        equal = oracle is None
    else:
        equal = False
    cells = [start, *solution.path]
    legal = all(graph.has_edge(a, b) for a, b in zip(cells, cells[1:]))
    progress = all(dist[b] >= 0 and dist[b] == dist[a] - 1 for a, b in zip(cells, cells[1:]))
    steps = solution.steps if solution.outcome == "reached" else None
    return PathReport(start, target, solution.outcome, steps, oracle, equal, legal, progress)


def write_reports_csv(reports, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PathReport.FIELDS)
    for r in reports:
        w.writerow(r.row())
