"""Experiment configuration files.

An experiment is an INI file with four sections::

    [problem]
    family = pla
    g = power 0.5              ; power THETA | power_plus_constant THETA A | log
    f = linear 1               ; power P | linear M | saturating M | constant C
    coef.a = constant 1        ; constant V | distance_power SIGN BETA
    lambda = 4.9
    mu = 0
    grad_exponent = 2

    [mesh]
    geometry = interval        ; interval | radial
    n = 1001
    grading = 1
    dimension = 1

    [action]
    name = bracket
    param = lambda
    lo = 4.9
    hi = 16.8

    [output]
    dir = out/bracket
    plots = true

Lists are comma separated. A list may also be written ``geom A B K`` or
``lin A B K`` for K log- or linearly spaced points. Unknown sections and
keys are rejected.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ProblemError
from .mesh import Mesh, build_mesh
from .problem import CoefficientSpec, FSpec, GSpec, ProblemInstance

ACTIONS = ("solve", "sweep", "bracket", "atlas", "blowup", "fold", "rate", "h1", "hyp", "eig", "lm-check")

PROBLEM_KEYS = {"family", "g", "f", "lambda", "mu", "grad_exponent"}
MESH_KEYS = {"geometry", "n", "grading", "dimension"}
OUTPUT_KEYS = {"dir", "plots", "stem"}

# action name -> allowed parameter keys
ACTION_KEYS = {
    "solve": set(),
    "sweep": {"param", "grid", "warm_start"},
    "bracket": {"param", "lo", "hi", "width_tol"},
    "atlas": {"lambda_grid", "mu_grid"},
    "blowup": {"factors", "window"},
    "fold": {"lambda_grid", "centers", "rel_width"},
    "rate": {"window", "expected"},
    "h1": {"n_list"},
    "hyp": set(),
    "eig": {"tol"},
    "lm-check": {"s_values", "levels"},
}


@dataclass
class ExperimentConfig:
    problem: ProblemInstance
    geometry: str
    n: int
    grading: float
    dimension: int
    action: str
    params: dict = field(default_factory=dict)
    out_dir: str = "out"
    plots: bool = True
    stem: str = ""
    raw: dict = field(default_factory=dict)

    def mesh(self, n: int | None = None) -> Mesh:
        return build_mesh(self.geometry, self.n if n is None else n, self.grading, self.dimension)

    @property
    def name(self) -> str:
        return self.stem or self.action

    def resolved(self) -> dict:
        """Every setting after defaults and overrides, for embedding in outputs."""
        return {
            "problem": self.problem.to_dict(),
            "mesh": {"geometry": self.geometry, "n": self.n, "grading": self.grading, "dimension": self.dimension},
            "action": {"name": self.action, **{k: _plain(v) for k, v in sorted(self.params.items())}},
            "output": {"dir": self.out_dir, "plots": self.plots, "stem": self.stem},
        }


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return list(v)
    return v


def _float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _bool(text: str, key: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def parse_list(text: str, key: str) -> np.ndarray:
    words = text.split()
    if words and words[0] in ("geom", "lin"):
        if len(words) != 4:
            raise ConfigError(f"{key}: expected '{words[0]} START STOP COUNT'")
        a, b, k = _float(words[1], key), _float(words[2], key), _int(words[3], key)
        if words[0] == "geom":
            if not (a > 0 and b > 0):
                raise ConfigError(f"{key}: geometric spacing needs positive ends")
            return np.geomspace(a, b, k)
        return np.linspace(a, b, k)
    items = [w.strip() for w in text.split(",") if w.strip()]
    if not items:
        raise ConfigError(f"{key}: empty list")
    return np.array([_float(w, key) for w in items])


def parse_g(text: str) -> GSpec:
    w = text.split()
    try:
        if w == ["log"]:
            return GSpec.log()
        if len(w) == 2 and w[0] == "power":
            return GSpec.power(float(w[1]))
        if len(w) == 3 and w[0] == "power_plus_constant":
            return GSpec.power_plus_constant(float(w[1]), float(w[2]))
    except (ValueError, ProblemError) as exc:
        raise ConfigError(f"g: {exc}") from None
    raise ConfigError(f"g: cannot parse {text!r}")


def parse_f(text: str) -> FSpec:
    w = text.split()
    makers = {"power": FSpec.power, "linear": FSpec.linear, "saturating": FSpec.saturating,
              "constant": FSpec.constant}
    if len(w) != 2 or w[0] not in makers:
        raise ConfigError(f"f: cannot parse {text!r}")
    try:
        return makers[w[0]](float(w[1]))
    except (ValueError, ProblemError) as exc:
        raise ConfigError(f"f: {exc}") from None


def parse_coefficient(text: str, key: str) -> CoefficientSpec:
    w = text.split()
    try:
        if len(w) == 2 and w[0] == "constant":
            return CoefficientSpec.constant(float(w[1]))
        if len(w) == 3 and w[0] == "distance_power":
            return CoefficientSpec.distance_power(float(w[1]), float(w[2]))
    except (ValueError, ProblemError) as exc:
        raise ConfigError(f"{key}: {exc}") from None
    raise ConfigError(f"{key}: cannot parse {text!r}")


def _apply_overrides(parser: configparser.ConfigParser, overrides) -> None:
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        if "." not in key:
            raise ConfigError(f"override key {key!r} must be section.key")
        section, name = key.strip().split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, name.strip(), value.strip())


def read_text(text: str, overrides=None, default_action: str | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str  # keep coefficient names like K case sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    _apply_overrides(parser, overrides)
    if default_action and parser.has_section("action") and not parser.has_option("action", "name"):
        parser.set("action", "name", default_action)
    return _build(parser)


def load(path, overrides=None, default_action: str | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return read_text(text, overrides, default_action)


def _build(parser: configparser.ConfigParser) -> ExperimentConfig:
    unknown = set(parser.sections()) - {"problem", "mesh", "action", "output"}
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    for name in ("problem", "mesh", "action"):
        if not parser.has_section(name):
            raise ConfigError(f"missing section [{name}]")

    prob = dict(parser.items("problem"))
    coef_keys = {k for k in prob if k.startswith("coef.")}
    bad = set(prob) - PROBLEM_KEYS - coef_keys
    if bad:
        raise ConfigError(f"unknown [problem] keys: {sorted(bad)}")
    for key in ("family", "g"):
        if key not in prob:
            raise ConfigError(f"[problem] needs {key}")
    coefficients = {k[5:]: parse_coefficient(prob[k], k) for k in sorted(coef_keys)}
    kwargs = dict(family=prob["family"].strip(), g=parse_g(prob["g"]), coefficients=coefficients,
                  lam=_float(prob.get("lambda", "1"), "lambda"), mu=_float(prob.get("mu", "0"), "mu"),
                  grad_exponent=_float(prob.get("grad_exponent", "2"), "grad_exponent"))
    if "f" in prob:
        kwargs["f"] = parse_f(prob["f"])
    try:
        problem = ProblemInstance(**kwargs)
    except ProblemError as exc:
        raise ConfigError(f"[problem]: {exc}") from None

    mesh = dict(parser.items("mesh"))
    bad = set(mesh) - MESH_KEYS
    if bad:
        raise ConfigError(f"unknown [mesh] keys: {sorted(bad)}")
    geometry = mesh.get("geometry", "interval").strip()
    n = _int(mesh.get("n", "1001"), "n")
    grading = _float(mesh.get("grading", "1"), "grading")
    dimension = _int(mesh.get("dimension", "1"), "dimension")
    try:
        build_mesh(geometry, n, grading, dimension)
    except ProblemError as exc:
        raise ConfigError(f"[mesh]: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"[mesh]: {exc}") from None

    act = dict(parser.items("action"))
    action = act.pop("name", "").strip()
    if action not in ACTIONS:
        raise ConfigError(f"unknown action {action!r}; choose from {', '.join(ACTIONS)}")
    bad = set(act) - ACTION_KEYS[action]
    if bad:
        raise ConfigError(f"unknown [action] keys for {action}: {sorted(bad)}")
    params = _action_params(action, act)

    out = dict(parser.items("output")) if parser.has_section("output") else {}
    bad = set(out) - OUTPUT_KEYS
    if bad:
        raise ConfigError(f"unknown [output] keys: {sorted(bad)}")
    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    return ExperimentConfig(problem, geometry, n, grading, dimension, action, params,
                            out.get("dir", "out").strip(), _bool(out.get("plots", "true"), "plots"),
                            out.get("stem", "").strip(), raw)


def _window(text: str, key: str) -> tuple[float, float]:
    vals = parse_list(text, key)
    if vals.size != 2 or not 0 < vals[0] < vals[1]:
        raise ConfigError(f"{key}: expected 'D_MIN, D_MAX' with 0 < D_MIN < D_MAX")
    return float(vals[0]), float(vals[1])


def _action_params(action: str, act: dict) -> dict:
    p: dict = {}
    if action == "sweep":
        p["param"] = act.get("param", "lambda").strip()
        if "grid" not in act:
            raise ConfigError("sweep needs grid")
        p["grid"] = parse_list(act["grid"], "grid")
        p["warm_start"] = _bool(act.get("warm_start", "true"), "warm_start")
    elif action == "bracket":
        p["param"] = act.get("param", "lambda").strip()
        for key in ("lo", "hi"):
            if key not in act:
                raise ConfigError(f"bracket needs {key}")
            p[key] = _float(act[key], key)
        p["width_tol"] = _float(act.get("width_tol", "0.01"), "width_tol")
    elif action == "atlas":
        for key in ("lambda_grid", "mu_grid"):
            if key not in act:
                raise ConfigError(f"atlas needs {key}")
            p[key] = parse_list(act[key], key)
    elif action == "blowup":
        p["factors"] = parse_list(act.get("factors", "0.9, 0.99, 0.999"), "factors")
        p["window"] = _window(act.get("window", "0.25, 0.5"), "window")
    elif action == "fold":
        p["lambda_grid"] = parse_list(act.get("lambda_grid", "geom 1e-2 1e3 26"), "lambda_grid")
        p["centers"] = parse_list(act["centers"], "centers") if "centers" in act else None
        p["rel_width"] = _float(act.get("rel_width", "0.01"), "rel_width")
    elif action == "rate":
        p["window"] = _window(act["window"], "window") if "window" in act else None
        p["expected"] = _float(act["expected"], "expected") if "expected" in act else None
    elif action == "h1":
        n_list = parse_list(act.get("n_list", "501, 1001, 2001"), "n_list")
        if n_list.size < 3 or np.any(n_list != np.round(n_list)):
            raise ConfigError("n_list needs at least three integers")
        p["n_list"] = [int(v) for v in n_list]
    elif action == "eig":
        p["tol"] = _float(act.get("tol", "1e-12"), "tol")
    elif action == "lm-check":
        p["s_values"] = parse_list(act.get("s_values", "0.25, 0.5, 0.75, 1.25, 1.5, 2"), "s_values")
        p["levels"] = _int(act.get("levels", "4"), "levels")
        if p["levels"] < 3:
            raise ConfigError("levels must be at least 3")
    for key, value in p.items():
        if isinstance(value, float) and not math.isfinite(value):
            raise ConfigError(f"{key} must be finite")
    return p
