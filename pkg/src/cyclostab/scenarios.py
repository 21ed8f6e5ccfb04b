"""Scenario files: parsing, validation, built-in scenarios and execution.

A scenario is a YAML mapping.  Every key is validated; unknown keys are
errors reported with the line they appear on.  See ``BUILTINS`` for
complete examples of each kind.
"""

from __future__ import annotations

import copy
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, CyclostabError, ValidationError
from .lyapunov import LyapunovWeights, certify_gains, monitor_decrease
from .model import (
    KINDS,
    CompartmentalSystem,
    LinearCyclicSystem,
    NonlinearCyclicSystem,
    ScalarFn,
    check_conditions,
)
from .ode import detect_oscillation, simulate_ode
from .pde import SpatialGrid, equilibrium_solve, field_norm, simulate_pde
from .secant import (
    analysis_report,
    diagonal_scaling,
    normalize,
    secant_satisfied,
)

SCENARIO_KINDS = ("analyze", "simulate-pde", "simulate-ode", "simulate-compartmental")


# ----------------------------------------------------------------------
# YAML loading with line numbers


class _LineDict(dict):
    line = None
    key_lines: dict = {}


class _LineList(list):
    line = None
    item_lines: list = []


class _Loader(yaml.SafeLoader):
    pass


# YAML 1.1 reads 1e-4 as a float but 1e4 and 1.0e300 as strings; accept both
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


def _construct_mapping(loader, node):
    loader.flatten_mapping(node)
    out = _LineDict()
    out.line = node.start_mark.line + 1
    out.key_lines = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", key_node.start_mark.line + 1)
        out[key] = loader.construct_object(value_node, deep=True)
        out.key_lines[key] = key_node.start_mark.line + 1
    return out


def _construct_sequence(loader, node):
    out = _LineList(loader.construct_object(child, deep=True) for child in node.value)
    out.line = node.start_mark.line + 1
    out.item_lines = [child.start_mark.line + 1 for child in node.value]
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)
_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_SEQUENCE_TAG, _construct_sequence)


def load_yaml(text):
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ConfigError(f"malformed YAML: {exc.problem}", line) from None
    if not isinstance(data, dict):
        raise ConfigError("a scenario must be a mapping", 1)
    return data


def _line(container, key=None):
    if key is not None and isinstance(container, dict):
        return getattr(container, "key_lines", {}).get(key, getattr(container, "line", None))
    if key is not None and isinstance(container, list):
        lines = getattr(container, "item_lines", [])
        return lines[key] if key < len(lines) else getattr(container, "line", None)
    return getattr(container, "line", None)


def _section(data, key, allowed, required=False):
    if key not in data:
        if required:
            raise ConfigError(f"missing required section {key!r}", _line(data))
        return _LineDict()
    value = data[key]
    if not isinstance(value, dict):
        raise ConfigError(f"{key!r} must be a mapping", _line(data, key))
    _reject_unknown(value, allowed, key)
    return value


def _reject_unknown(mapping, allowed, where):
    for key in mapping:
        if key not in allowed:
            raise ConfigError(
                f"unknown key {key!r} in {where} (allowed: {', '.join(sorted(allowed))})",
                _line(mapping, key),
            )


def _number(container, key, value, positive=False, allow_auto=False, label=None):
    label = label or repr(key)
    if allow_auto and value == "auto":
        return "auto"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{label} must be a number, got {value!r}", _line(container, key))
    value = float(value)
    if not math.isfinite(value) or (positive and value <= 0):
        raise ConfigError(f"{label} must be {'positive and ' if positive else ''}finite", _line(container, key))
    return value


def _vector(container, key, length=None, positive=False):
    value = container[key]
    if not isinstance(value, list):
        raise ConfigError(f"{key!r} must be a list of numbers", _line(container, key))
    out = [
        _number(value, i, v, positive=positive, label=f"entry {i} of {key!r}") for i, v in enumerate(value)
    ]
    if length is not None and len(out) != length:
        raise ConfigError(f"{key!r} needs {length} entries, got {len(out)}", _line(container, key))
    return out


def _integer(container, key, minimum):
    value = container[key]
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{key!r} must be an integer >= {minimum}", _line(container, key))
    return value


# ----------------------------------------------------------------------
# parsed scenario


@dataclass
class Scenario:
    name: str
    kind: str
    description: str = ""
    system: object = None
    equilibrium: object = None
    grid: SpatialGrid | None = None
    t_end: float = 1.0
    dt: object = "auto"
    cadence: float | None = None
    initial: np.ndarray | None = None
    k_max: int = 20
    interval: list | None = None
    samples: int = 201
    monitor: dict | None = None
    oscillation: dict | None = None
    csv_stride: int = 1
    outputs: dict = field(default_factory=dict)
    guess: np.ndarray | None = None
    initial_absolute: bool = False
    linear: LinearCyclicSystem | None = None


_FN_KEYS = {"kind", "params", "shift", "scale", "table"}


def parse_fn(spec, container, key):
    line = _line(container, key)
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return ScalarFn.constant(float(spec))
    if not isinstance(spec, dict):
        raise ConfigError("a nonlinearity is a mapping with 'kind' and 'params'", line)
    _reject_unknown(spec, _FN_KEYS, "nonlinearity")
    kind = spec.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown nonlinearity kind {kind!r} (allowed: {', '.join(KINDS)})", _line(spec, "kind") or line)
    try:
        params = tuple(_vector(spec, "params")) if "params" in spec else ()
        table = ()
        if "table" in spec:
            rows = spec["table"]
            if not isinstance(rows, list) or not all(isinstance(r, list) and len(r) == 2 for r in rows):
                raise ConfigError("'table' must be a list of [x, y] pairs", _line(spec, "table"))
            table = tuple((_number(r, 0, r[0]), _number(r, 1, r[1])) for r in rows)
        fn = ScalarFn(kind, params, table=table)
        if "shift" in spec:
            fn = fn.shifted(_number(spec, "shift", spec["shift"]), center=False)
        if "scale" in spec:
            fn = fn.scaled(_number(spec, "scale", spec["scale"]))
    except ValidationError as exc:
        raise ConfigError(str(exc), line) from None
    return fn


def _fn_list(system, key, n=None):
    value = system[key]
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key!r} must be a nonempty list of nonlinearities", _line(system, key))
    if n is not None and len(value) != n:
        raise ConfigError(f"{key!r} needs {n} entries, got {len(value)}", _line(system, key))
    return tuple(parse_fn(v, value, i) for i, v in enumerate(value))


_SYSTEM_KEYS = {"a", "b", "c", "f", "g", "h", "flux", "compartments", "equilibrium", "guess"}


def _parse_system(data, kind):
    system = _section(data, "system", _SYSTEM_KEYS, required=True)
    linear_keys = {"a", "b"} & set(system)
    if linear_keys:
        for key in ("f", "g", "h", "flux"):
            if key in system:
                raise ConfigError(f"{key!r} cannot be combined with linear 'a'/'b'", _line(system, key))
        if linear_keys != {"a", "b"}:
            raise ConfigError("a linear system needs both 'a' and 'b'", _line(system))
        a = _vector(system, "a", positive=True)
        b = _vector(system, "b", len(a), positive=True)
        c = _vector(system, "c", len(a), positive=True) if "c" in system else None
        lin = LinearCyclicSystem(a, b, c)
        linear = lin
        sys = lin if kind == "analyze" else lin.to_nonlinear()
        if kind in ("simulate-ode", "simulate-compartmental"):
            sys = sys.without_diffusion()
    else:
        linear = None
        for key in ("f", "g"):
            if key not in system:
                raise ConfigError("system needs 'f' and 'g' (or linear 'a' and 'b')", _line(system))
        f = _fn_list(system, "f")
        g = _fn_list(system, "g", len(f))
        h = _fn_list(system, "h", len(f)) if "h" in system else None
        if kind == "simulate-pde" and h is None:
            raise ConfigError("simulate-pde needs diffusion functions 'h' (or linear 'c')", _line(system))
        if kind != "simulate-pde" and h is not None and kind != "analyze":
            raise ConfigError("'h' applies only to simulate-pde", _line(system, "h"))
        sys = NonlinearCyclicSystem(f, g, h)
    if kind == "simulate-compartmental":
        if "compartments" not in system or "flux" not in system:
            raise ConfigError("simulate-compartmental needs 'compartments' and 'flux'", _line(system))
        m = _integer(system, "compartments", 1)
        flux = system["flux"]
        if isinstance(flux, dict):
            mu = parse_fn(flux, system, "flux")
            sys = CompartmentalSystem.uniform(sys, m, mu)
        elif isinstance(flux, list):
            if len(flux) != m - 1:
                raise ConfigError(f"'flux' needs {m - 1} rows", _line(system, "flux"))
            rows = []
            for j, row in enumerate(flux):
                if not isinstance(row, list) or len(row) != sys.n:
                    raise ConfigError(f"flux row {j} needs {sys.n} entries", _line(flux, j))
                rows.append(tuple(parse_fn(v, row, i) for i, v in enumerate(row)))
            sys = CompartmentalSystem(sys, tuple(rows))
        else:
            raise ConfigError("'flux' is a nonlinearity or a list of rows", _line(system, "flux"))
    elif "flux" in system or "compartments" in system:
        key = "flux" if "flux" in system else "compartments"
        raise ConfigError(f"{key!r} applies only to simulate-compartmental", _line(system, key))

    equilibrium = None
    if "equilibrium" in system:
        eq = system["equilibrium"]
        if eq == "auto":
            equilibrium = "auto"
        elif isinstance(eq, list):
            n = sys.n
            equilibrium = np.array(_vector(system, "equilibrium", n))
        else:
            raise ConfigError("'equilibrium' is 'auto' or a list of numbers", _line(system, "equilibrium"))
    guess = None
    if "guess" in system:
        guess = np.array(_vector(system, "guess", sys.n))
    return sys, equilibrium, guess, linear


_TERM_KEYS = {"const", "poly", "cos", "sin", "amp"}


def _eval_term(term, container, key, xi):
    line = _line(container, key)
    if isinstance(term, (int, float)) and not isinstance(term, bool):
        return np.full_like(xi, float(term))
    if not isinstance(term, dict):
        raise ConfigError("an initial-profile term is a number or a template mapping", line)
    _reject_unknown(term, _TERM_KEYS, "initial-profile term")
    heads = [k for k in ("const", "poly", "cos", "sin") if k in term]
    if len(heads) != 1:
        raise ConfigError("a term has exactly one of const, poly, cos, sin", _line(term) or line)
    head = heads[0]
    if "amp" in term and head in ("const", "poly"):
        raise ConfigError(f"'amp' applies to cos and sin terms, not {head}", _line(term, "amp"))
    if head == "const":
        return np.full_like(xi, _number(term, "const", term["const"]))
    if head == "poly":
        coeffs = _vector(term, "poly")
        return np.polynomial.polynomial.polyval(xi, coeffs)
    k = _number(term, head, term[head])
    amp = _number(term, "amp", term["amp"]) if "amp" in term else 1.0
    wave = np.cos if head == "cos" else np.sin
    return amp * wave(k * math.pi * xi)


def _parse_initial(data, sc, n_state):
    init = _section(data, "initial", {"fields", "state", "absolute"}, required=True)
    absolute = init.get("absolute", False)
    if not isinstance(absolute, bool):
        raise ConfigError("'absolute' must be true or false", _line(init, "absolute"))
    if sc.kind == "simulate-pde":
        if "fields" not in init:
            raise ConfigError("simulate-pde needs 'initial.fields'", _line(init))
        fields = init["fields"]
        if not isinstance(fields, list) or len(fields) != n_state:
            raise ConfigError(f"'fields' needs {n_state} component profiles", _line(init, "fields"))
        xi = sc.grid.nodes
        rows = []
        for i, comp in enumerate(fields):
            terms = comp if isinstance(comp, list) else [comp]
            holder = comp if isinstance(comp, list) else fields
            idx = range(len(terms)) if isinstance(comp, list) else [i]
            rows.append(sum(_eval_term(t, holder, j, xi) for t, j in zip(terms, idx)))
        return np.array(rows), absolute
    if "state" not in init:
        raise ConfigError(f"{sc.kind} needs 'initial.state'", _line(init))
    return np.array(_vector(init, "state", n_state)), absolute


def parse_scenario(data, name="scenario"):
    """Validate a loaded mapping and build a :class:`Scenario`."""
    top = {
        "name", "description", "kind", "system", "grid", "integrator", "initial",
        "analysis", "monitor", "oscillation", "outputs",
    }
    _reject_unknown(data, top, "scenario")
    kind = data.get("kind")
    if kind not in SCENARIO_KINDS:
        raise ConfigError(f"'kind' must be one of {', '.join(SCENARIO_KINDS)}", _line(data, "kind") or 1)
    sc = Scenario(name=str(data.get("name", name)), kind=kind, description=str(data.get("description", "")))
    try:
        sc.system, sc.equilibrium, sc.guess, sc.linear = _parse_system(data, kind)
    except ValidationError as exc:
        raise ConfigError(str(exc), _line(data, "system")) from None
    analysis = _section(data, "analysis", {"k_max", "interval", "samples"})
    if "k_max" in analysis:
        sc.k_max = _integer(analysis, "k_max", 0)
    if "samples" in analysis:
        sc.samples = _integer(analysis, "samples", 10)
    if "interval" in analysis:
        sc.interval = _vector(analysis, "interval", 2)
        if not sc.interval[0] < sc.interval[1]:
            raise ConfigError("'interval' needs lo < hi", _line(analysis, "interval"))
    outputs = _section(data, "outputs", {"csv", "json", "csv_stride"})
    for key in ("csv", "json"):
        if key in outputs:
            if not isinstance(outputs[key], (str, bool)):
                raise ConfigError(f"outputs.{key} is a file name or false", _line(outputs, key))
            sc.outputs[key] = outputs[key]
    if "csv_stride" in outputs:
        sc.csv_stride = _integer(outputs, "csv_stride", 1)
    if kind == "analyze":
        for key in ("grid", "integrator", "initial", "monitor", "oscillation"):
            if key in data:
                raise ConfigError(f"{key!r} does not apply to analyze", _line(data, key))
        if not isinstance(sc.system, LinearCyclicSystem) and sc.interval is None:
            raise ConfigError("analyzing a nonlinear system needs 'analysis.interval'", _line(data, "system"))
        return sc

    integ = _section(data, "integrator", {"t_end", "dt", "cadence"}, required=True)
    if "t_end" not in integ:
        raise ConfigError("integrator needs 't_end'", _line(integ))
    sc.t_end = _number(integ, "t_end", integ["t_end"], positive=True)
    if "dt" in integ:
        sc.dt = _number(integ, "dt", integ["dt"], positive=True, allow_auto=True)
    if "cadence" in integ:
        sc.cadence = _number(integ, "cadence", integ["cadence"], positive=True)
    if kind == "simulate-pde":
        grid = _section(data, "grid", {"N"})
        try:
            sc.grid = SpatialGrid(_integer(grid, "N", 3) if "N" in grid else 101)
        except ValidationError as exc:
            raise ConfigError(str(exc), _line(grid, "N")) from None
    elif "grid" in data:
        raise ConfigError("'grid' applies only to simulate-pde", _line(data, "grid"))
    n_state = sc.system.n * (sc.system.m if isinstance(sc.system, CompartmentalSystem) else 1)
    sc.initial, sc.initial_absolute = _parse_initial(data, sc, n_state if kind != "simulate-pde" else sc.system.n)

    if "monitor" in data:
        mon = _section(data, "monitor", {"gains", "rate_coefficient"})
        gains = mon.get("gains", "certify")
        if isinstance(gains, list):
            gains = _vector(mon, "gains", sc.system.n, positive=True)
        elif gains != "certify":
            raise ConfigError("monitor.gains is 'certify' or a list of gains", _line(mon, "gains"))
        coef = _number(mon, "rate_coefficient", mon["rate_coefficient"], positive=True) if "rate_coefficient" in mon else 0.5
        sc.monitor = {"gains": gains, "rate_coefficient": coef}
    if "oscillation" in data:
        osc = _section(data, "oscillation", {"coordinates", "window", "min_peaks", "trend_band"})
        coords = osc.get("coordinates", [0])
        if not isinstance(coords, list) or not all(isinstance(c, int) and 0 <= c < n_state for c in coords):
            raise ConfigError(f"oscillation.coordinates are indices below {n_state}", _line(osc, "coordinates"))
        sc.oscillation = {
            "coordinates": list(coords),
            "window": _number(osc, "window", osc["window"], positive=True) if "window" in osc else 0.5,
            "min_peaks": _integer(osc, "min_peaks", 1) if "min_peaks" in osc else 3,
            "trend_band": _number(osc, "trend_band", osc["trend_band"], positive=True) if "trend_band" in osc else 0.01,
        }
    return sc


def load_scenario(path_or_text, overrides=None, name=None):
    """Parse a scenario file (or YAML text), optionally deep-merging ``overrides`` on top."""
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        path = Path(path_or_text)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
        name = name or path.stem
    else:
        text = path_or_text
    data = load_yaml(text)
    if overrides:
        data = merge(data, overrides)
    return parse_scenario(data, name or "scenario")


def merge(base, over):
    """Recursive merge of mappings; ``over`` wins, line numbers follow the winning value."""
    out = copy.copy(base)
    if not hasattr(out, "key_lines"):
        out = _LineDict(out)
    out.key_lines = dict(getattr(base, "key_lines", {}))
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = value
        if key in getattr(over, "key_lines", {}):
            out.key_lines[key] = over.key_lines[key]
    return out


# ----------------------------------------------------------------------
# built-in scenarios

BUILTINS = {
    "counterexample": (
        "three-stage loop with a steep saturating feedback: limit cycle beside a stable equilibrium",
        """\
kind: simulate-ode
system:
  f:
    - {kind: linear, params: [1]}
    - {kind: linear, params: [1]}
    - {kind: linear, params: [1]}
  g:
    - {kind: linear, params: [1]}
    - {kind: linear, params: [1]}
    - {kind: exp_sat, params: [10, 0.1, 25], scale: -1}
  equilibrium: auto
  guess: [1, 1, 1]
integrator: {t_end: 300, dt: 0.001, cadence: 0.01}
initial: {state: [1.2, 1.2, 1.2], absolute: true}
analysis: {interval: [0.1, 6]}
oscillation: {coordinates: [0, 1, 2], window: 0.5}
outputs: {csv_stride: 10}
""",
    ),
    "two-compartment": (
        "two weakly coupled copies of the counterexample: equal periods, disparate amplitudes",
        """\
kind: simulate-compartmental
system:
  f:
    - {kind: linear, params: [1]}
    - {kind: linear, params: [1]}
    - {kind: linear, params: [1]}
  g:
    - {kind: linear, params: [1]}
    - {kind: linear, params: [1]}
    - {kind: exp_sat, params: [10, 0.1, 25], scale: -1}
  equilibrium: auto
  guess: [1, 1, 1]
  compartments: 2
  flux: {kind: linear, params: [1.0e-4]}
integrator: {t_end: 4000, dt: 0.001, cadence: 0.05}
initial: {state: [1.4945, 1.3844, 1.0877, 1, 1, 1], absolute: true}
oscillation: {coordinates: [0, 3], window: 0.5}
outputs: {csv_stride: 20}
""",
    ),
    "mapk-pde": (
        "MAPK cascade with inhibitory feedback and slow diffusion, decaying to its equilibrium",
        """\
kind: simulate-pde
system:
  f:
    - {kind: michaelis_menten, params: [1, 1]}
    - {kind: michaelis_menten, params: [1, 1]}
    - {kind: michaelis_menten, params: [1, 1]}
  g:
    - {kind: linear, params: [0.4]}
    - {kind: linear, params: [0.4]}
    - {kind: inhibitory_hill, params: [0.4, 1], scale: -1}
  h: [0.001, 0.001, 0.001]
  equilibrium: auto
grid: {N: 101}
integrator: {t_end: 200, dt: auto, cadence: 0.05}
initial:
  absolute: true
  fields:
    - {poly: [0, 0, 16, 0, -32, 0, 16]}
    - [{const: 5}, {cos: 1}]
    - {const: 2}
analysis: {interval: [0, 1]}
monitor: {gains: certify, rate_coefficient: 0.5}
outputs: {csv_stride: 20}
""",
    ),
    "linear-rd": (
        "linear reaction-diffusion loop a = b = c = 1 with its modal certificate",
        """\
kind: simulate-pde
system:
  a: [1, 1, 1]
  b: [1, 1, 1]
  c: [1, 1, 1]
grid: {N: 51}
integrator: {t_end: 5, dt: auto, cadence: 0.01}
initial:
  fields:
    - [{const: 0.5}, {cos: 1, amp: 1}]
    - {sin: 0.5, amp: -1}
    - {poly: [0, 1, -1]}
analysis: {k_max: 20}
monitor: {gains: certify, rate_coefficient: 0.5}
outputs: {csv_stride: 5}
""",
    ),
}


def list_scenarios():
    return [(name, desc) for name, (desc, _) in BUILTINS.items()]


def builtin(name, overrides=None):
    if name not in BUILTINS:
        raise ConfigError(f"unknown scenario {name!r} (available: {', '.join(BUILTINS)})")
    return load_scenario(BUILTINS[name][1], overrides=overrides, name=name)


# ----------------------------------------------------------------------
# execution


@dataclass
class RunResult:
    scenario: Scenario
    report: dict
    trajectory: object = None


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _linearization(sys, x_bar):
    """Secant verdict for the loop linearized at ``x_bar`` (original coordinates)."""
    n = sys.n
    a = [float(sys.f[i].derivative(x_bar[i])) for i in range(n)]
    b = [float(sys.g[i].derivative(x_bar[i])) for i in range(n)]
    if not all(v > 0 for v in a + b):
        return {"a": a, "b": b, "cyclic": False}
    verdict = secant_satisfied(normalize(LinearCyclicSystem(a, b)).gains)
    return {
        "a": a,
        "b": b,
        "cyclic": True,
        "product": verdict.product,
        "threshold": _finite(verdict.threshold),
        "holds": verdict.holds,
    }


def _resolve_equilibrium(sc, base):
    if sc.equilibrium is None:
        return None
    if isinstance(sc.equilibrium, str):
        return equilibrium_solve(base, guess=sc.guess).x
    return np.asarray(sc.equilibrium, dtype=float)


def _shift_system(sys, x_bar):
    if x_bar is None:
        return sys
    if isinstance(sys, CompartmentalSystem):
        return CompartmentalSystem(sys.base.shifted(x_bar), sys.flux)
    return sys.shifted(x_bar)


def _analyze(sc):
    sys = sc.system
    if isinstance(sys, LinearCyclicSystem):
        return analysis_report(sys, sc.k_max)
    report = check_conditions(sys, tuple(sc.interval), samples=sc.samples)
    out = {"conditions": report.to_dict(), "conditions_hold": report.holds}
    if report.c2.holds:
        scaling = diagonal_scaling(report.gains())
        out.update(
            gains=list(scaling.gains),
            product=scaling.verdict.product,
            threshold=_finite(scaling.verdict.threshold),
            holds=scaling.verdict.holds,
            lambda_min=scaling.lambda_min,
            d=scaling.d.tolist(),
        )
    return out


def _interval_conditions(sc, shifted, x_bar):
    """Conditions and gains over ``analysis.interval`` (original coordinates) for each stage."""
    lo, hi = sc.interval
    offset = np.zeros(shifted.n) if x_bar is None else x_bar
    bounds = [(lo - xb, hi - xb) for xb in offset]
    cond = check_conditions(shifted, bounds, samples=sc.samples)
    out = {"interval": [lo, hi], "conditions_hold": cond.holds, "gains": list(cond.gamma)}
    if cond.c2.holds:
        verdict = secant_satisfied(cond.gains())
        out.update(product=verdict.product, threshold=_finite(verdict.threshold), holds=verdict.holds)
    return out


def run_scenario(sc: Scenario):
    """Execute a parsed scenario and return its report (and trajectory for simulations)."""
    report = {"scenario": sc.name, "kind": sc.kind}
    if sc.kind == "analyze":
        report.update(_analyze(sc))
        return RunResult(sc, report)

    compartmental = isinstance(sc.system, CompartmentalSystem)
    base = sc.system.base if compartmental else sc.system
    x_bar = _resolve_equilibrium(sc, base)
    shifted = _shift_system(sc.system, x_bar)
    if x_bar is not None:
        report["equilibrium"] = x_bar.tolist()
        report["linearization"] = _linearization(base, x_bar)
    init = np.array(sc.initial, dtype=float)
    if getattr(sc, "initial_absolute", False) and x_bar is not None:
        if sc.kind == "simulate-pde":
            init = init - x_bar[:, None]
        else:
            init = init - np.tile(x_bar, init.size // x_bar.size)

    if sc.kind == "simulate-pde":
        traj = simulate_pde(shifted, sc.grid, init, sc.t_end, dt=sc.dt, cadence=sc.cadence)
        final = traj.final
        report["final"] = {
            "max_abs": np.abs(final).max(axis=1).tolist(),
            "l2": field_norm(final, sc.grid, "L2", per_component=True).tolist(),
        }
        if sc.linear is not None:
            report["modal"] = analysis_report(sc.linear, sc.k_max)
    else:
        traj = simulate_ode(shifted, init, sc.t_end, dt=sc.dt, cadence=sc.cadence)
        report["final"] = {"max_abs": float(np.abs(traj.final).max())}
    if sc.interval is not None:
        report["interval_conditions"] = _interval_conditions(sc, shifted.base if compartmental else shifted, x_bar)
    report["meta"] = {k: v for k, v in traj.meta.items()}

    if sc.monitor is not None:
        grid = sc.grid if sc.kind == "simulate-pde" else None
        if sc.monitor["gains"] == "certify":
            gains, _ = certify_gains(shifted, traj, grid)
        else:
            gains = sc.monitor["gains"]
        weights = LyapunovWeights.from_gains(gains)
        g = (shifted.base if compartmental else shifted).g
        mon = monitor_decrease(traj, weights, g, grid, rate_coefficient=sc.monitor["rate_coefficient"])
        report["monitor"] = {"gains": list(weights.gamma), "d": list(weights.d), **mon.to_dict()}

    if sc.oscillation is not None:
        osc = {}
        for c in sc.oscillation["coordinates"]:
            r = detect_oscillation(
                traj, c, window=sc.oscillation["window"], min_peaks=sc.oscillation["min_peaks"],
                trend_band=sc.oscillation["trend_band"],
            )
            osc[str(c)] = {
                "oscillating": r.oscillating, "period": r.period, "peaks": r.peaks,
                "min": r.min, "max": r.max, "amplitude": r.amplitude, "trend": r.trend,
            }
        report["oscillation"] = osc
    return RunResult(sc, report, traj)


# ----------------------------------------------------------------------
# output


def _fmt(v):
    return repr(float(v))


def write_csv(result: RunResult, stream):
    """Write the trajectory; fields as ``t, xi, psi_1..`` rows, ODE states as ``t, x_j_i`` rows."""
    sc, traj = result.scenario, result.trajectory
    stride = sc.csv_stride
    idx = list(range(0, len(traj), stride))
    if idx[-1] != len(traj) - 1:
        idx.append(len(traj) - 1)
    eq = result.report.get("equilibrium")
    if sc.kind == "simulate-pde":
        n = traj.states.shape[1]
        if eq is not None:
            stream.write("# psi are deviations from the equilibrium " + " ".join(_fmt(v) for v in eq) + "\n")
        stream.write(",".join(["t", "xi"] + [f"psi_{i + 1}" for i in range(n)]) + "\n")
        xi = sc.grid.nodes
        for k in idx:
            t = _fmt(traj.times[k])
            state = traj.states[k]
            for j, x in enumerate(xi):
                stream.write(",".join([t, _fmt(x)] + [_fmt(v) for v in state[:, j]]) + "\n")
        return
    sys = sc.system
    m = sys.m if isinstance(sys, CompartmentalSystem) else 1
    n = sys.n
    comment = f"# compartment-major: x_j_i is species i in compartment j (m = {m}, n = {n})"
    if eq is not None:
        comment += "; values are deviations from the equilibrium " + " ".join(_fmt(v) for v in eq)
    stream.write(comment + "\n")
    stream.write(",".join(["t"] + [f"x_{j + 1}_{i + 1}" for j in range(m) for i in range(n)]) + "\n")
    for k in idx:
        stream.write(",".join([_fmt(traj.times[k])] + [_fmt(v) for v in traj.states[k]]) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report_json(result: RunResult):
    return json.dumps(_jsonable(result.report), indent=2, sort_keys=True) + "\n"


def write_outputs(result: RunResult, out_dir):
    """Write ``<name>.json`` and, for simulations, ``<name>.csv``; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sc = result.scenario
    paths = []
    json_name = sc.outputs.get("json", f"{sc.name}.json")
    if json_name:
        p = out_dir / json_name
        p.write_text(report_json(result))
        paths.append(p)
    csv_name = sc.outputs.get("csv", f"{sc.name}.csv")
    if result.trajectory is not None and csv_name:
        p = out_dir / csv_name
        buf = io.StringIO()
        write_csv(result, buf)
        p.write_text(buf.getvalue())
        paths.append(p)
    return paths


__all__ = [
    "BUILTINS",
    "CyclostabError",
    "RunResult",
    "Scenario",
    "builtin",
    "list_scenarios",
    "load_scenario",
    "parse_scenario",
    "report_json",
    "run_scenario",
    "write_csv",
    "write_outputs",
]
