"""Run configuration: an INI file plus ``section.key=value`` overrides."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import physics
from .lattice import GridParams
from .obstacles import load_pgm, make_fixture
from .physics import ReactionCurve, cubic_curve, load_piecewise, stable_states
from .wavesim import WINNER_THRESHOLD, Excitation


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "grid": {"rows": "21", "cols": "21", "conductance": "25", "capacitance": "500",
             "bias": "21", "dt": "0.05"},
    "curve": {"kind": "cubic", "slope": repr(physics.DEFAULT_SLOPE), "low": repr(physics.V_LOW),
              "mid": repr(physics.V_MID), "high": repr(physics.V_HIGH),
              "bias0": repr(physics.BIAS0), "file": "", "from": ""},
    "wave": {"threshold": repr(WINNER_THRESHOLD), "excitation": "program", "hold": "inf",
             "stim_current": "30", "stim_duration": "5", "active_set": "yes"},
    "coupling": {"mode": "threshold", "threshold": "127", "alpha": "1.0"},
    "problem": {"fixture": "room", "template": "", "seed": "0", "start": "", "target": ""},
    "speed": {"biases": "18 19 20 21 22 23"},
    "calibrate": {"target_tp": "16.92"},
    "output": {"dir": "out", "frame_every": "0"},
}


def _cell(text, name):
    try:
        i, j = (int(x) for x in text.replace(":", ",").split(","))
    except ValueError:
        raise ConfigError(f"{name} must be 'row,col', got {text!r}") from None
    return (i, j)


@dataclass
class RunConfig:
    params: GridParams
    curve: ReactionCurve
    threshold: float
    excitation: Excitation
    active_set: bool
    coupling_mode: str
    coupling_threshold: float
    coupling_alpha: float
    fixture: str
    template_path: str
    seed: int
    start: tuple | None
    target: tuple | None
    biases: list = field(default_factory=list)
    target_tp: float = 16.92
    out_dir: Path = Path("out")
    frame_every: float = 0.0
    curve_spec: dict = field(default_factory=dict)

    def template(self):
        if self.template_path:
            img = load_pgm(self.template_path)
            if img.shape != self.params.shape:
                raise ConfigError(f"template {self.template_path} is {img.shape}, "
                                  f"grid is {self.params.shape}")
            return img
        return make_fixture(self.fixture, self.params.rows, self.params.cols, self.seed)

    def validate(self):
        st = stable_states(self.curve, self.params.bias)
        if st.low is None or st.high is None:
            raise ConfigError(f"bias {self.params.bias} uA is not bistable for this curve "
                              f"(equilibria {', '.join(f'{r:.4f}' for r in st.roots)} V)")
        if not st.low < self.threshold < st.high:
            raise ConfigError(f"winner threshold {self.threshold} V must lie strictly between "
                              f"V_L = {st.low:.4f} V and V_H = {st.high:.4f} V")
        return st


def read_ini(path=None, overrides=()):
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_dict(DEFAULTS)
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, option = key.strip().partition(".")
        if not (sep and dot and section and option):
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, option, value.strip())
    return cp


def _curve(cp):
    sec = cp["curve"]
    if sec.get("from"):
        other = configparser.ConfigParser(interpolation=None)
        if not other.read(sec["from"]) or not other.has_section("curve"):
            raise ConfigError(f"curve file {sec['from']} has no [curve] section")
        merged = dict(sec)
        merged.update(other["curve"])
        merged["from"] = ""
        sec = merged
    kind = sec.get("kind", "cubic")
    try:
        if kind == "cubic":
            curve = cubic_curve(float(sec["slope"]), float(sec["low"]), float(sec["mid"]),
                                float(sec["high"]), float(sec["bias0"]))
        elif kind == "piecewise":
            if not sec.get("file"):
                raise ConfigError("piecewise curve needs [curve] file")
            curve = load_piecewise(sec["file"])
        else:
            raise ConfigError(f"unknown curve kind {kind!r}")
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad curve specification: {exc}") from None
    return curve, dict(sec)


def load_config(path=None, overrides=()):
    cp = read_ini(path, overrides)
    try:
        g = cp["grid"]
        params = GridParams(int(g["rows"]), int(g["cols"]), float(g["conductance"]),
                            float(g["capacitance"]), float(g["bias"]), float(g["dt"]))
        curve, spec = _curve(cp)
        w = cp["wave"]
        excitation = Excitation(w["excitation"], float(w["hold"]), float(w["stim_current"]),
                                float(w["stim_duration"]))
        c = cp["coupling"]
        pr = cp["problem"]
        template_path = pr["template"]
        if template_path:
            if not Path(template_path).is_file():
                raise ConfigError(f"template {template_path} not found")
            rows, cols = load_pgm(template_path).shape
            if "rows" not in _explicit(cp, path, overrides):
                params = params.replace(rows=rows, cols=cols)
        cfg = RunConfig(
            params=params,
            curve=curve,
            threshold=float(w["threshold"]),
            excitation=excitation,
            active_set=cp.getboolean("wave", "active_set"),
            coupling_mode=c["mode"],
            coupling_threshold=float(c["threshold"]),
            coupling_alpha=float(c["alpha"]),
            fixture=pr["fixture"],
            template_path=template_path,
            seed=int(pr["seed"]),
            start=_cell(pr["start"], "start") if pr["start"] else None,
            target=_cell(pr["target"], "target") if pr["target"] else None,
            biases=[float(x) for x in cp["speed"]["biases"].replace(",", " ").split()],
            target_tp=float(cp["calibrate"]["target_tp"]),
            out_dir=Path(cp["output"]["dir"]),
            frame_every=float(cp["output"]["frame_every"]),
            curve_spec=spec,
        )
    except ConfigError:
        raise
    except (KeyError, ValueError, configparser.Error) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    if cfg.coupling_mode not in ("threshold", "proportional"):
        raise ConfigError(f"unknown coupling mode {cfg.coupling_mode!r}")
    if not (cfg.threshold > 0 and math.isfinite(cfg.threshold)):
        raise ConfigError("winner threshold must be positive")
    return cfg


def _explicit(cp, path, overrides):
    keys = set()
    if path is not None:
        raw = configparser.ConfigParser(interpolation=None)
        raw.read(path)
        if raw.has_section("grid"):
            keys.update(raw["grid"].keys())
    for item in overrides:
        key = item.partition("=")[0].strip()
        if key.startswith("grid."):
            keys.add(key[5:])
    return keys


def write_curve(path, curve):
    cp = configparser.ConfigParser(interpolation=None)
    if curve.kind == "cubic":
        cp["curve"] = {"kind": "cubic", "slope": repr(curve.slope), "low": repr(curve.roots[0]),
                       "mid": repr(curve.roots[1]), "high": repr(curve.roots[2]),
                       "bias0": repr(curve.bias0)}
    else:
        raise ValueError("only cubic curves are written as curve files")
    with open(path, "w") as fh:
        cp.write(fh)
