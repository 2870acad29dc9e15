"""Voltage lattice, per-edge coupling and the fixed-step RK4 integrator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

ACTIVE_EPS = 1e-9
VMAX_PGM = 1.8


class ShapeError(ValueError):
    """Raised when arrays or cells do not fit the configured grid."""


class DivergenceError(FloatingPointError):
    def __init__(self, cell, t):
        super().__init__(f"non-finite voltage at cell {cell} after t = {t:.6g} ns")
        self.cell = cell
        self.t = t


@dataclass(frozen=True)
class GridParams:
    rows: int = 80
    cols: int = 80
    conductance: float = 25.0   # uS
    capacitance: float = 500.0  # fF
    bias: float = 21.0          # uA
    dt: float = 0.05            # ns

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ShapeError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        for name in ("conductance", "capacitance", "bias", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def shape(self):
        return (self.rows, self.cols)

    def replace(self, **changes):
        fields = dict(rows=self.rows, cols=self.cols, conductance=self.conductance,
                      capacitance=self.capacitance, bias=self.bias, dt=self.dt)
        fields.update(changes)
        return GridParams(**fields)


@dataclass(frozen=True)
class CouplingMap:
    """One conductance per undirected edge.

    ``horizontal[i, j]`` joins ``(i, j)`` and ``(i, j+1)``;
    ``vertical[i, j]`` joins ``(i, j)`` and ``(i+1, j)``.
    """

    horizontal: np.ndarray
    vertical: np.ndarray

    def __post_init__(self):
        h = np.array(self.horizontal, dtype=float)
        v = np.array(self.vertical, dtype=float)
        if h.ndim != 2 or v.ndim != 2:
            raise ShapeError("conductance arrays must be 2-D")
        if h.shape[0] != v.shape[0] + 1 or v.shape[1] != h.shape[1] + 1:
            raise ShapeError(f"inconsistent edge arrays {h.shape} / {v.shape}")
        if np.any(h < 0) or np.any(v < 0) or not (np.all(np.isfinite(h)) and np.all(np.isfinite(v))):
            raise ValueError("conductances must be finite and non-negative")
        h.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "horizontal", h)
        object.__setattr__(self, "vertical", v)

    @classmethod
    def uniform(cls, params, g=None):
        g = params.conductance if g is None else g
        n, m = params.shape
        return cls(np.full((n, m - 1), g), np.full((n - 1, m), g))

    @property
    def shape(self):
        return (self.horizontal.shape[0], self.vertical.shape[1])

    def edge(self, a, b):
        """Conductance between 4-neighbours ``a`` and ``b``."""
        (i, j), (k, l) = sorted([tuple(a), tuple(b)])
        if i == k and l == j + 1:
            return float(self.horizontal[i, j])
        if j == l and k == i + 1:
            return float(self.vertical[i, j])
        raise ShapeError(f"cells {a} and {b} are not 4-neighbours")

    def neighbor_conductances(self):
        """Per-cell conductances toward N, S, W, E (zero where no edge)."""
        n, m = self.shape
        gn = np.zeros((n, m))
        gs = np.zeros((n, m))
        gw = np.zeros((n, m))
        ge = np.zeros((n, m))
        gn[1:, :] = self.vertical
        gs[:-1, :] = self.vertical
        gw[:, 1:] = self.horizontal
        ge[:, :-1] = self.horizontal
        return gn, gs, gw, ge

    def check(self, params):
        if self.shape != params.shape:
            raise ShapeError(f"coupling map is {self.shape}, grid is {params.shape}")


@dataclass
class GridState:
    v: np.ndarray
    t: float = 0.0

    def copy(self):
        return GridState(self.v.copy(), self.t)


def _check_cell(cell, shape):
    i, j = cell
    if not (0 <= i < shape[0] and 0 <= j < shape[1]):
        raise ShapeError(f"cell {tuple(cell)} outside grid {shape}")
    return int(i), int(j)


def uniform_init(params, stable):
    """Every cell at the low stable state, clock at zero."""
    if stable.low is None:
        raise ValueError("bias has no low stable state")
    return GridState(np.full(params.shape, float(stable.low)), 0.0)


def excite(state, cell, stable):
    """Program ``cell`` to the high stable state."""
    i, j = _check_cell(cell, state.v.shape)
    out = state.copy()
    out.v[i, j] = stable.high
    return out


def rhs(state, coupling, params, curve, stim=None):
    """dv/dt in volts per nanosecond for every cell."""
    v = np.ascontiguousarray(state.v, dtype=float)
    if v.shape != params.shape:
        raise ShapeError(f"state is {v.shape}, grid is {params.shape}")
    coupling.check(params)
    stim = np.zeros(v.shape) if stim is None else np.ascontiguousarray(stim, dtype=float)
    out = np.empty_like(v)
    ones = np.ones(v.shape, dtype=bool)
    _kernels.derivative(v, out, *coupling.neighbor_conductances(), ones, ~ones, stim,
                        float(params.bias), float(params.capacitance), *curve.kernel_args())
    return out


class Integrator:
    """Fixed-step RK4 over a lattice with optional source clamps and stimuli.

    The integrator owns nothing but the static problem description; states
    are passed in and returned so runs stay reproducible.
    """

    def __init__(self, coupling, params, curve, *, active_set=False, levels=()):
        coupling.check(params)
        self.params = params
        self.curve = curve
        self.coupling = coupling
        self._g = coupling.neighbor_conductances()
        self._curve_args = curve.kernel_args()
        self.active_set = active_set
        self.levels = np.array([float(x) for x in levels if x is not None])

    def run(self, state, nsteps, *, clamp=None, clamp_until=0.0, stim=None, stim_until=0.0,
            threshold=np.inf, cross=None, watch=None, watch_all=False, linger=0.0,
            quiet=0.0, aux=None, origin=None, offset=0):
        """Advance ``state`` in place; returns ``(steps_taken, status)``.

        ``origin`` and ``offset`` place the call inside a longer episode
        (episode start time and steps already taken) so the clock does not
        depend on how the episode is split into calls.
        """
        p = self.params
        shape = p.shape
        if state.v.shape != shape:
            raise ShapeError(f"state is {state.v.shape}, grid is {shape}")
        if not (state.v.flags.c_contiguous and state.v.dtype == np.float64):
            state.v = np.ascontiguousarray(state.v, dtype=np.float64)
        if clamp is None:
            clamp_mask = np.zeros(shape, dtype=bool)
            clamp_val = np.zeros(shape)
        else:
            clamp_mask, clamp_val = clamp
        stim = np.zeros(shape) if stim is None else np.ascontiguousarray(stim, dtype=float)
        cross = np.full(shape, np.nan) if cross is None else cross
        watch = np.zeros(shape, dtype=bool) if watch is None else watch
        aux = np.array([state.t, np.nan, -1.0]) if aux is None else aux
        if origin is None:
            origin, offset = state.t, 0
        t, taken, status = _kernels.integrate(
            state.v, float(origin), int(offset), int(nsteps), float(p.dt), *self._g,
            float(p.bias), float(p.capacitance), *self._curve_args,
            clamp_mask, clamp_val, float(clamp_until), stim, float(stim_until),
            float(threshold), cross, watch, bool(watch_all), float(linger), float(quiet), aux,
            bool(self.active_set and self.levels.size), self.levels, ACTIVE_EPS)
        state.t = t
        if status == _kernels.DIVERGED:
            flat = int(aux[2])
            raise DivergenceError(divmod(flat, shape[1]), t)
        return taken, status


def step(state, coupling, params, curve):
    """One RK4 step of ``params.dt``; returns a new state."""
    out = state.copy()
    Integrator(coupling, params, curve).run(out, 1)
    return out


def advance(state, coupling, params, curve, nsteps):
    out = state.copy()
    Integrator(coupling, params, curve).run(out, nsteps)
    return out


def to_pgm_pixels(v, vmax=VMAX_PGM):
    """Map 0..vmax volts linearly onto 0..255 grey levels."""
    return np.clip(np.rint(np.asarray(v) / vmax * 255.0), 0, 255).astype(np.uint8)
