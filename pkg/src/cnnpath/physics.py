"""Cell I-V response, equilibria and slope calibration.

Units throughout the package: volts, microamperes, microsiemens and
femtofarads, which makes the native clock nanoseconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Anchors of the default cubic: published equilibria at the nominal bias.
V_LOW = 0.97
V_HIGH = 1.75
V_MID = 1.14
BIAS0 = 21.0
# Slope of the default cubic, from calibrate_slope(16.92, nominal params).
DEFAULT_SLOPE = 492.464015604283

SCAN_STEP = 1e-3
ROOT_TOL = 1e-6


class CurveError(ValueError):
    """Raised for a malformed or non-N-shaped reaction curve."""


class CalibrationError(RuntimeError):
    """Raised when no slope reproduces the requested transition interval.

    ``trace`` holds every ``(slope, t_p)`` pair that was evaluated.
    """

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = list(trace)


@dataclass(frozen=True)
class ReactionCurve:
    """Nonlinear cell current ``J(v)`` in microamperes.

    A cubic curve is ``bias0 + slope*(v - r1)*(v - r2)*(v - r3)`` with
    ``roots = (r1, r2, r3)``. A piecewise curve interpolates linearly between
    ``points`` (``(v, J)`` pairs) and extrapolates with its end segments.
    """

    kind: str
    slope: float = 0.0
    roots: tuple = (V_LOW, V_MID, V_HIGH)
    bias0: float = BIAS0
    points: tuple = ()
    _extrema: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "cubic":
            r1, r2, r3 = self.roots
            if not self.slope > 0:
                raise CurveError(f"cubic slope must be positive, got {self.slope}")
            if not r1 < r2 < r3:
                raise CurveError(f"cubic roots must be strictly increasing, got {self.roots}")
            # J'(v) = slope * (3v^2 - 2 s1 v + s2)
            s1 = r1 + r2 + r3
            s2 = r1 * r2 + r1 * r3 + r2 * r3
            disc = math.sqrt(s1 * s1 - 3.0 * s2)
            extrema = ((s1 - disc) / 3.0, (s1 + disc) / 3.0)
        elif self.kind == "piecewise":
            extrema = _piecewise_extrema(self.points)
        else:
            raise CurveError(f"unknown curve kind {self.kind!r}")
        object.__setattr__(self, "_extrema", extrema)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "cubic":
            r1, r2, r3 = self.roots
            out = self.bias0 + self.slope * (v - r1) * (v - r2) * (v - r3)
        else:
            xs, ys, slopes = self._segments()
            k = np.clip(np.searchsorted(xs, v, side="right") - 1, 0, slopes.size - 1)
            out = ys[k] + slopes[k] * (v - xs[k])
        return out if out.ndim else float(out)

    def derivative(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "cubic":
            r1, r2, r3 = self.roots
            s1 = r1 + r2 + r3
            s2 = r1 * r2 + r1 * r3 + r2 * r3
            out = self.slope * (3.0 * v * v - 2.0 * s1 * v + s2)
        else:
            xs, _, slopes = self._segments()
            out = slopes[np.clip(np.searchsorted(xs, v, side="right") - 1, 0, slopes.size - 1)]
        return out if out.ndim else float(out)

    @property
    def peak(self):
        """``(v_peak, J_p)`` of the local maximum."""
        v = self._extrema[0]
        return v, self(v)

    @property
    def valley(self):
        """``(v_valley, J_valley)`` of the local minimum."""
        v = self._extrema[1]
        return v, self(v)

    def in_range(self, v):
        if self.kind == "cubic":
            return True
        return self.points[0][0] <= v <= self.points[-1][0]

    def _segments(self):
        pts = np.asarray(self.points, dtype=float)
        xs, ys = pts[:, 0], pts[:, 1]
        return xs, ys, np.diff(ys) / np.diff(xs)

    def kernel_args(self):
        """Array form consumed by the compiled integrator."""
        if self.kind == "cubic":
            cpar = np.array([self.bias0, self.slope, *self.roots], dtype=float)
            dummy = np.zeros(2)
            return 0, cpar, dummy, dummy, np.zeros(1)
        xs, ys, slopes = self._segments()
        return 1, np.zeros(5), np.ascontiguousarray(xs), np.ascontiguousarray(ys), slopes


def _piecewise_extrema(points):
    if len(points) < 4:
        raise CurveError("a piecewise curve needs at least 4 breakpoints")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or not np.all(np.isfinite(pts)):
        raise CurveError("breakpoints must be finite (v, J) pairs")
    if np.any(np.diff(pts[:, 0]) <= 0):
        raise CurveError("breakpoint voltages must be strictly increasing")
    slopes = np.diff(pts[:, 1]) / np.diff(pts[:, 0])
    signs = np.sign(slopes[slopes != 0])
    runs = [s for k, s in enumerate(signs) if k == 0 or s != signs[k - 1]]
    if runs != [1.0, -1.0, 1.0] or slopes[0] <= 0 or slopes[-1] <= 0:
        raise CurveError("piecewise curve must rise, fall, then rise (N shape)")
    # extrema sit on the breakpoints where the slope sign flips
    nz = np.flatnonzero(slopes != 0)
    k_peak = next(nz[q + 1] for q in range(len(nz) - 1) if slopes[nz[q]] > 0 > slopes[nz[q + 1]])
    k_valley = next(nz[q + 1] for q in range(len(nz) - 1) if slopes[nz[q]] < 0 < slopes[nz[q + 1]])
    return float(pts[k_peak, 0]), float(pts[k_valley, 0])


def cubic_curve(slope=DEFAULT_SLOPE, low=V_LOW, mid=V_MID, high=V_HIGH, bias0=BIAS0):
    return ReactionCurve("cubic", slope=float(slope), roots=(float(low), float(mid), float(high)),
                         bias0=float(bias0))


def nominal_curve():
    """The calibrated default cubic."""
    return cubic_curve()


def piecewise_curve(points):
    pts = tuple((float(v), float(j)) for v, j in points)
    return ReactionCurve("piecewise", points=pts)


def load_piecewise(path):
    """Read a two-column ``v J`` text file; ``#`` starts a comment."""
    points = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise CurveError(f"{path}:{lineno}: expected two columns, got {len(parts)}")
        try:
            points.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise CurveError(f"{path}:{lineno}: not a number: {line!r}") from None
    return piecewise_curve(points)


def reaction_current(curve, v, *, with_flag=False):
    """Evaluate ``J(v)``.

    With ``with_flag=True`` returns ``(J, extrapolated)``, where
    ``extrapolated`` is set when a piecewise curve is evaluated outside its
    breakpoint range.
    """
    j = curve(v)
    if with_flag:
        return j, not curve.in_range(v)
    return j


@dataclass(frozen=True)
class StableStates:
    low: float | None
    mid: float | None
    high: float | None
    excitable: bool
    margin: float
    roots: tuple = ()

    @property
    def monostable(self):
        return len(self.roots) == 1


def _bisect(g, a, b):
    ga = g(a)
    if ga == 0.0:
        return a
    while True:
        c = 0.5 * (a + b)
        if c <= a or c >= b:
            break
        gc = g(c)
        if gc == 0.0:
            return c
        if (gc < 0) == (ga < 0):
            a, ga = c, gc
        else:
            b = c
    # refined to float resolution, far below ROOT_TOL
    return a if abs(ga) <= abs(g(b)) else b


def _scan_bounds(curve, bias):
    if curve.kind == "cubic":
        lo, hi = curve.roots[0] - 0.5, curve.roots[2] + 0.5
    else:
        lo, hi = curve.points[0][0], curve.points[-1][0]
    while curve(lo) >= bias:
        lo -= 0.5
    while curve(hi) <= bias:
        hi += 0.5
    return lo, hi


def stable_states(curve, bias):
    """Equilibria of an isolated cell, ``J(v) = bias``, in ascending order.

    Roots are bracketed by a scan at ``SCAN_STEP`` volts (with the curve's
    extrema added as scan nodes so near-tangent pairs are never merged) and
    refined by bisection.
    """
    if not bias > 0:
        raise ValueError(f"bias current must be positive, got {bias}")
    v_peak, j_peak = curve.peak
    v_valley, j_valley = curve.valley
    margin = j_peak - bias

    def g(v):
        return curve(v) - bias

    lo, hi = _scan_bounds(curve, bias)
    grid = np.unique(np.concatenate([np.arange(lo, hi, SCAN_STEP), [hi, v_peak, v_valley]]))
    vals = curve(grid) - bias
    roots = []
    for k in range(grid.size - 1):
        if vals[k] == 0.0:
            roots.append(float(grid[k]))
        elif vals[k] * vals[k + 1] < 0:
            roots.append(_bisect(g, float(grid[k]), float(grid[k + 1])))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))

    if abs(margin) < ROOT_TOL:
        upper = [r for r in roots if r > v_valley]
        return StableStates(v_peak, v_peak, upper[-1] if upper else None, False, margin,
                            tuple(roots))
    if abs(j_valley - bias) < ROOT_TOL:
        lower = [r for r in roots if r < v_peak]
        return StableStates(lower[0] if lower else None, v_valley, v_valley, False, margin,
                            tuple(roots))
    if len(roots) == 3:
        low, mid, high = roots
        return StableStates(low, mid, high, margin > 0, margin, tuple(roots))
    (root,) = roots
    if root > v_peak:
        return StableStates(None, None, root, False, margin, tuple(roots))
    return StableStates(root, None, None, False, margin, tuple(roots))


def calibrate_slope(target_tp, params, *, threshold=1.2, low=V_LOW, mid=V_MID, high=V_HIGH,
                    bias0=BIAS0, start=100.0, rtol=1e-3, bracket=(1.0, 1e5)):
    """Choose the cubic slope whose corridor transition interval is ``target_tp``.

    The slope is doubled or halved from ``start`` until the measured ``t_p``
    brackets the target, then bisected (geometrically) until the relative
    error drops below ``rtol``. A wave that fails to propagate counts as
    infinitely slow.
    """
    from .wavesim import MeasurementError, measure_tp

    if not target_tp > 0:
        raise ValueError(f"target t_p must be positive, got {target_tp}")
    trace = []

    def tp_of(a):
        curve = cubic_curve(a, low, mid, high, bias0)
        try:
            tp = measure_tp(params, curve, threshold).tp
        except MeasurementError:
            tp = math.inf
        trace.append((a, tp))
        return tp

    a_min, a_max = bracket
    a = float(start)
    tp = tp_of(a)
    if tp == target_tp:
        return cubic_curve(a, low, mid, high, bias0)
    # t_p falls as the slope grows
    grow = tp > target_tp
    while True:
        b = a * 2.0 if grow else a / 2.0
        if not a_min <= b <= a_max:
            raise CalibrationError(
                f"no slope in [{a_min:g}, {a_max:g}] gives t_p = {target_tp:g} ns", trace)
        tb = tp_of(b)
        if (tb <= target_tp) == grow:
            break
        a, tp = b, tb
    weak, strong = (a, b) if grow else (b, a)
    best = min(((weak, tp if grow else tb), (strong, tb if grow else tp)),
               key=lambda p: abs(p[1] - target_tp))
    for _ in range(60):
        if abs(best[1] - target_tp) <= rtol * target_tp:
            break
        c = math.sqrt(weak * strong)
        tc = tp_of(c)
        if abs(tc - target_tp) < abs(best[1] - target_tp):
            best = (c, tc)
        if tc > target_tp:
            weak = c
        else:
            strong = c
        if strong / weak - 1.0 < 1e-12:
            break
    return cubic_curve(best[0], low, mid, high, bias0)
