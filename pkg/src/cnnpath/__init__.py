"""Excitable cellular nonlinear network simulator for wave-based 2D path planning."""

from .analytics import (ObstacleGraph, bfs_shortest, compare_path, predict_solution_time,
                        worst_case_time)
from .lattice import (CouplingMap, DivergenceError, GridParams, GridState, ShapeError, excite,
                      rhs, step, uniform_init)
from .obstacles import TemplateImage, build_coupling, load_pgm, make_fixture, save_pgm
from .pathsolver import (IterationResult, PathProblem, PathSolution, detect_winner, solve_path,
                         timeout_bound)
from .physics import (CalibrationError, ReactionCurve, StableStates, calibrate_slope,
                      cubic_curve, load_piecewise, nominal_curve, piecewise_curve,
                      reaction_current, stable_states)
from .wavesim import (CrossingLog, Excitation, MeasurementError, SpeedMeasurement, Stop,
                      measure_tp, run_wave, sweep_bias)

__version__ = "0.1.0"
