"""Command-line entry point.

Exit codes: 0 success / target reached, 2 no path, 3 iteration budget
exceeded, 4 configuration error, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analytics
from .config import ConfigError, load_config, write_curve
from .lattice import DivergenceError, to_pgm_pixels
from .obstacles import FIXTURES, PGMError, make_fixture, overlay_path, save_pgm
from .pathsolver import BUDGET, NO_PATH, PathProblem, SolverError, solve_path
from .physics import CalibrationError, calibrate_slope
from .wavesim import (MeasurementError, is_decreasing, measure_tp, sweep_bias,
                      write_sweep_csv)

EXIT_OK = 0
EXIT_NO_PATH = 2
EXIT_BUDGET = 3
EXIT_CONFIG = 4
EXIT_NUMERIC = 5

log = logging.getLogger("cnnpath")


def _outdir(cfg):
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg.out_dir


def cmd_calibrate(cfg, args):
    target = cfg.target_tp if args.target_tp is None else args.target_tp
    if not target > 0:
        raise ConfigError(f"target t_p must be positive, got {target}")
    try:
        curve = calibrate_slope(target, cfg.params, threshold=cfg.threshold,
                                low=float(cfg.curve_spec["low"]), mid=float(cfg.curve_spec["mid"]),
                                high=float(cfg.curve_spec["high"]),
                                bias0=float(cfg.curve_spec["bias0"]))
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        for a, tp in exc.trace:
            print(f"  slope {a:.6g} uA/V^3 -> t_p {tp:.6g} ns", file=sys.stderr)
        return EXIT_NUMERIC
    m = measure_tp(cfg.params, curve, cfg.threshold)
    path = _outdir(cfg) / "curve.ini"
    write_curve(path, curve)
    peak_v, peak_j = curve.peak
    print(f"slope      {curve.slope:.10g} uA/V^3")
    print(f"t_p        {m.tp:.4f} ns (target {target:g} ns, {100 * (m.tp / target - 1):+.2f}%)")
    print(f"c_p        {m.cp:.2f} cells/us")
    print(f"J_p        {peak_j:.4f} uA at {peak_v:.4f} V")
    print(f"curve file {path}")
    return EXIT_OK


def cmd_speed(cfg, args):
    biases = cfg.biases if args.bias is None else args.bias
    rows = sweep_bias(biases, cfg.params, cfg.curve, cfg.threshold)
    path = _outdir(cfg) / "speed.csv"
    with open(path, "w", newline="") as fh:
        write_sweep_csv(rows, fh)
    for r in rows:
        print(f"I_B {r.bias:6.2f} uA  t_p {r.tp:9.4f} ns  c_p {r.cp:8.3f} cells/us  {r.status}")
    if len(rows) > 1:
        print("t_p strictly decreasing:", "yes" if is_decreasing(rows) else "no")
    print(f"wrote {path}")
    return EXIT_OK


def _default_points(img, kind):
    free = np.argwhere(img.free_mask())
    if kind == "sealed":
        n, m = img.shape
        return tuple(int(x) for x in free[0]), (n // 2, m // 2)
    return tuple(int(x) for x in free[0]), tuple(int(x) for x in free[-1])


def cmd_solve(cfg, args):
    img = cfg.template()
    start, target = _default_points(img, cfg.fixture if not cfg.template_path else "")
    start = cfg.start or start
    target = cfg.target or target
    problem = PathProblem(start=start, target=target, template=img, params=cfg.params,
                          curve=cfg.curve, threshold=cfg.threshold,
                          coupling_mode=cfg.coupling_mode,
                          coupling_threshold=cfg.coupling_threshold,
                          coupling_alpha=cfg.coupling_alpha, excitation=cfg.excitation,
                          active_set=cfg.active_set)
    out = _outdir(cfg)
    frames = None
    if cfg.frame_every > 0:
        frames = out / "frames"
        frames.mkdir(exist_ok=True)

    def on_frame(iteration, state):
        # frames from the first iteration only: the full propagation picture
        if iteration == 0:
            save_pgm(frames / f"frame_{int(round(state.t)):07d}.pgm", to_pgm_pixels(state.v))

    solution = solve_path(problem, frame_every=cfg.frame_every if frames else None,
                          on_frame=on_frame if frames else None)
    graph = analytics.ObstacleGraph.from_coupling(problem.coupling(0, start))
    report = analytics.compare_path(solution, graph)
    payload = solution.to_dict()
    payload["oracle_steps"] = report.oracle_steps
    payload["predicted_time_ns"] = analytics.predict_solution_time(solution.steps,
                                                                   solution.tp_estimate)
    (out / "solution.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    save_pgm(out / "overlay.pgm", overlay_path(img, solution.path, start, target))
    print(f"outcome    {solution.outcome}")
    print(f"steps      {solution.steps} (oracle {report.oracle_steps})")
    print(f"sim time   {solution.total_time:.2f} ns")
    print(f"wrote      {out / 'solution.json'}")
    if solution.outcome == NO_PATH:
        return EXIT_NO_PATH
    if solution.outcome == BUDGET:
        return EXIT_BUDGET
    return EXIT_OK


def cmd_predict(cfg, args):
    tp = args.tp
    if tp is None or tp <= 0:
        raise ConfigError("--tp must be a positive number of ns")
    if args.steps is None and args.rows is None:
        raise ConfigError("give --steps and/or --rows/--cols")
    if args.steps is not None:
        if args.steps < 0:
            raise ConfigError("--steps must be non-negative")
        ts = analytics.predict_solution_time(args.steps, tp)
        print(f"T_s      {ts / 1000.0:.2f} us  ({ts:.1f} ns, P = {args.steps})")
    if args.rows is not None:
        cols = args.rows if args.cols is None else args.cols
        if args.rows < 1 or cols < 1:
            raise ConfigError("--rows/--cols must be positive")
        tm = analytics.worst_case_time(args.rows, cols, tp)
        print(f"T_s,max  {tm / 1e6:.2f} ms  ({tm:.1f} ns, {args.rows}x{cols} array)")
    return EXIT_OK


def cmd_fixture(cfg, args):
    img = make_fixture(args.kind, cfg.params.rows, cfg.params.cols, cfg.seed)
    path = Path(args.output) if args.output else _outdir(cfg) / f"{args.kind}.pgm"
    save_pgm(path, img, binary=not args.ascii)
    print(f"wrote {path}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="cnnpath", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="INI run configuration")
    common.add_argument("-s", "--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one configuration value (repeatable)")
    common.add_argument("-o", "--out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", parents=[common], help="fit the cubic slope to a target t_p")
    p.add_argument("--target-tp", type=float)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("speed", parents=[common], help="transition interval versus bias")
    p.add_argument("--bias", type=float, nargs="*", help="bias currents in uA")
    p.set_defaults(func=cmd_speed)

    p = sub.add_parser("solve", parents=[common], help="run the wave path solver")
    p.add_argument("--start", help="row,col")
    p.add_argument("--target", help="row,col")
    p.add_argument("--frame-every", type=float, help="dump PGM frames every N ns")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("predict", parents=[common], help="closed-form solve-time estimates")
    p.add_argument("--steps", type=int)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--tp", type=float, default=16.92)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("fixture", parents=[common], help="write a procedural template image")
    p.add_argument("kind", choices=FIXTURES)
    p.add_argument("--output")
    p.add_argument("--ascii", action="store_true", help="write P2 instead of P5")
    p.set_defaults(func=cmd_fixture)
    return parser


def _overrides(args):
    extra = list(args.set)
    if args.out:
        extra.append(f"output.dir={args.out}")
    for name, key in (("start", "problem.start"), ("target", "problem.target"),
                      ("frame_every", "output.frame_every")):
        value = getattr(args, name, None)
        if value is not None:
            extra.append(f"{key}={value}")
    return extra


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command in ("solve", "speed", "calibrate"):
            states = cfg.validate()
            log.debug("stable states at %g uA: %s", cfg.params.bias, states)
        return args.func(cfg, args)
    except (DivergenceError, MeasurementError, SolverError, CalibrationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, PGMError, FileNotFoundError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
