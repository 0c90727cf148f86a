"""Experiment configuration: a sectioned key-value format with a fixed schema.

A config is INI text read with :mod:`configparser` (keys are case-sensitive)::

    [run]
    scenario = uhke

    [kernel]
    kind = fractional
    alpha = 1.0

    [lattice]
    d = 1
    h = 0.02
    L = 40

    [schedule]
    eta = 0
    s = 1

Every key, its type, range and default is listed in :data:`SCHEMA`;
``heatlab print-schema`` renders it. Validation errors are
:class:`~heatlab.errors.ConfigError` instances carrying the line, the key and
the reason.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import ConfigError
from .kernels import PRESETS

SCENARIOS = ("uhke", "ondiag", "meyer", "offdiag-trunc", "h-inequality", "weighted-estimate",
             "decay", "linfty-l2", "li-yau", "mixed", "coercivity")
ALL = "all"

#: Scenario-specific keys of ``[params]`` that must be present.
REQUIRED_PARAMS = {
    "meyer": ("rhos",),
    "offdiag-trunc": ("rho",),
    "h-inequality": ("rho",),
    "weighted-estimate": ("rho",),
    "decay": ("rho", "sigmas"),
    "linfty-l2": ("pairs",),
}

DEFAULT_TAU_RULE = "h^alpha/4"
_TAU_RULE = re.compile(r"^\s*h\^alpha\s*(?:/\s*(?P<div>[0-9.eE+-]+)|\*\s*(?P<mul>[0-9.eE+-]+))?\s*$")


# ---------------------------------------------------------------------------
# value parsers


def _float(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None
    if not math.isfinite(x):
        raise ValueError(f"expected a finite number, got {text!r}")
    return x


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text: str) -> tuple:
    items = [s for s in re.split(r"[,\s]+", text.strip()) if s]
    if not items:
        raise ValueError("expected at least one number")
    return tuple(_float(s) for s in items)


def _points(text: str) -> tuple:
    """``"0; 5"`` in one dimension, ``"0 0; 2 1"`` in two."""
    pts = [s for s in text.split(";") if s.strip()]
    if not pts:
        raise ValueError("expected at least one point")
    return tuple(_floats(p) for p in pts)


def _pairs(text: str) -> tuple:
    """``"R rho; R rho"``."""
    out = _points(text)
    if any(len(p) != 2 for p in out):
        raise ValueError("expected ';'-separated pairs 'R rho'")
    return out


def _nu(text: str):
    if text.strip().lower() == "search":
        return "search"
    return _float(text)


def _str(text: str) -> str:
    return text.strip()


def parse_tau_rule(text: str) -> float:
    """Factor ``f`` of a rule ``tau <= f h^alpha`` written ``h^alpha/4`` or ``h^alpha*0.25``.

    >>> parse_tau_rule("h^alpha/4")
    0.25
    """
    m = _TAU_RULE.match(text)
    if not m:
        raise ValueError(f"tau_rule must look like 'h^alpha/4' or 'h^alpha*0.25', got {text!r}")
    if m.group("div") is not None:
        div = _float(m.group("div"))
        if not div > 0:
            raise ValueError("tau_rule divisor must be positive")
        f = 1.0 / div
    elif m.group("mul") is not None:
        f = _float(m.group("mul"))
    else:
        f = 1.0
    if not f > 0:
        raise ValueError("tau_rule factor must be positive")
    return f


# ---------------------------------------------------------------------------
# schema


@dataclass(frozen=True)
class Key:
    """One schema entry. ``check`` returns a reason string when the value is out of range."""

    section: str
    name: str
    kind: str
    parse: Callable[[str], Any]
    default: Any = None
    required: bool = False
    doc: str = ""
    check: Optional[Callable[[Any], Optional[str]]] = None


def _interval(lo, hi, lo_open=True, hi_open=True, label=None):
    def check(x):
        vals = x if isinstance(x, tuple) else (x,)
        flat = [v for p in vals for v in (p if isinstance(p, tuple) else (p,))]
        for v in flat:
            bad_lo = v <= lo if lo_open else v < lo
            bad_hi = v >= hi if hi_open else v > hi
            if bad_lo or bad_hi:
                return f"out of {label}"
        return None
    return check


def _choice(options):
    def check(x):
        return None if x in options else f"must be one of {', '.join(map(str, options))}"
    return check


_POS = _interval(0, math.inf, label="(0,inf)")

SCHEMA: tuple[Key, ...] = (
    Key("run", "scenario", "choice", _str, required=True,
        doc="scenario to execute: " + " | ".join(SCENARIOS + (ALL,)),
        check=_choice(SCENARIOS + (ALL,))),
    Key("run", "seed", "int", _int, 0, doc="seed for random initial data",
        check=_interval(0, math.inf, lo_open=False, label="[0,inf)")),
    Key("run", "refine", "bool", _bool, True, doc="run the h/2 and tau/2 refinements"),
    Key("run", "dense_cap", "int", _int, 4096, doc="largest cell count for dense operators",
        check=_interval(1, math.inf, lo_open=False, label="[1,inf)")),

    Key("kernel", "kind", "choice", _str, "fractional", doc="kernel preset: " + " | ".join(PRESETS),
        check=_choice(PRESETS)),
    Key("kernel", "alpha", "float", _float, required=True, doc="order alpha",
        check=_interval(0, 2, label="(0,2)")),
    Key("kernel", "Lambda", "float", _float, 1.0, doc="upper constant Lambda", check=_POS),
    Key("kernel", "lambda", "float", _float, None, doc="declared coercivity constant (default Lambda)",
        check=_POS),
    Key("kernel", "horizon_T", "float", _float, 10.0, doc="time horizon T of the kernel", check=_POS),
    Key("kernel", "aperture", "float", _float, None, doc="cone half-aperture in (0, pi/2) (default pi/4)",
        check=_interval(0, math.pi / 2, label="(0,pi/2)")),
    Key("kernel", "axis", "floats", _floats, None, doc="cone axis (default e1)"),
    Key("kernel", "period", "float", _float, None, doc="oscillation period (default 1)", check=_POS),

    Key("lattice", "d", "int", _int, required=True, doc="dimension (1 or 2)", check=_choice((1, 2))),
    Key("lattice", "h", "float", _float, required=True, doc="spacing h", check=_POS),
    Key("lattice", "L", "float", _float, required=True, doc="torus period L (a multiple of h)", check=_POS),

    Key("schedule", "eta", "float", _float, 0.0, doc="start time eta",
        check=_interval(0, math.inf, lo_open=False, label="[0,inf)")),
    Key("schedule", "s", "float", _float, required=True, doc="end time s > eta", check=_POS),
    Key("schedule", "m", "int", _int, None, doc="number of steps (overrides tau_rule)",
        check=_interval(1, math.inf, lo_open=False, label="[1,inf)")),
    Key("schedule", "tau_rule", "rule", _str, DEFAULT_TAU_RULE,
        doc="step rule tau <= f h^alpha, written h^alpha/4 or h^alpha*0.25 (phi(h) for mixed)"),

    Key("params", "sources", "points", _points, None, doc="';'-separated source points (default origin)"),
    Key("params", "probe_radius", "float", _float, None, doc="ratio probe radius (default L/8)", check=_POS),
    Key("params", "wrap_threshold", "float", _float, 0.25, doc="largest heat-kernel mass beyond L/4",
        check=_interval(0, 1, hi_open=False, label="(0,1]")),
    Key("params", "rho", "float", _float, None, doc="truncation radius rho", check=_POS),
    Key("params", "rhos", "floats", _floats, None, doc="truncation radii of the Meyer sweep", check=_POS),
    Key("params", "nu", "nu", _nu, "search", doc="weight parameter nu > 1, or 'search'"),
    Key("params", "C", "float", _float, None, doc="H-inequality constant (default 8 Lambda)",
        check=_interval(0, math.inf, lo_open=False, label="[0,inf)")),
    Key("params", "dt_factor", "float", _float, 0.125, doc="s - eta = dt_factor rho^alpha / nu",
        check=_interval(0, 0.25, hi_open=False, label="(0,1/4]")),
    Key("params", "center", "floats", _floats, None, doc="weight center y (default origin)"),
    Key("params", "dts", "floats", _floats, None, doc="elapsed times of the on-diagonal sweep "
        "(default (s-eta) x 1/4, 1/2, 1)", check=_POS),
    Key("params", "sigmas", "floats", _floats, None, doc="exclusion radii of the decay sweep", check=_POS),
    Key("params", "width", "float", _float, None, doc="width of the outside-ball data (default sigma)",
        check=_POS),
    Key("params", "n_random", "int", _int, 20, doc="number of random initial data",
        check=_interval(0, math.inf, lo_open=False, label="[0,inf)")),
    Key("params", "pairs", "pairs", _pairs, None, doc="';'-separated (R, rho) pairs for linfty-l2",
        check=_POS),
    Key("params", "t0", "float", _float, None, doc="cylinder top time for linfty-l2 (default s)", check=_POS),
    Key("params", "ts", "floats", _floats, (0.25, 0.5, 1.0, 2.0), doc="times of the Li-Yau checks",
        check=_POS),
    Key("params", "ball_radius", "float", _float, None, doc="coercivity ball radius (default L/8)",
        check=_POS),
    Key("params", "t", "float", _float, None, doc="coercivity time (default s)", check=_POS),

    Key("mixed", "phi", "choice", _str, "two-regime", doc="scale function: pure | two-regime",
        check=_choice(("pure", "two-regime"))),
    Key("mixed", "alpha", "float", _float, None, doc="exponent of a pure phi (default kernel alpha)",
        check=_interval(0, 2, label="(0,2)")),
    Key("mixed", "alpha1", "float", _float, 0.5, doc="small-scale exponent of a two-regime phi",
        check=_interval(0, 2, label="(0,2)")),
    Key("mixed", "alpha2", "float", _float, 1.5, doc="large-scale exponent of a two-regime phi",
        check=_interval(0, 2, label="(0,2)")),
    Key("mixed", "Lambda", "float", _float, 1.0, doc="mixed kernel constant", check=_POS),
    Key("mixed", "Rs", "floats", _floats, (0.5, 1.0, 2.0, 4.0), doc="radii of the integral checks",
        check=_POS),
    Key("mixed", "cross_check", "bool", _bool, True, doc="run the pure-phi cross-check"),
)

SECTIONS = ("run", "kernel", "lattice", "schedule", "params", "mixed")


def schema_text() -> str:
    """Human-readable schema (the output of ``heatlab print-schema``)."""
    lines = ["# heatlab experiment config schema", "# key = default  ; type, description", ""]
    for section in SECTIONS:
        lines.append(f"[{section}]")
        for key in SCHEMA:
            if key.section != section:
                continue
            if key.required:
                default = "<required>"
            elif key.default is None:
                default = "<unset>"
            else:
                default = _render(key.default)
            lines.append(f"{key.name} = {default}  ; {key.kind}, {key.doc}")
        lines.append("")
    lines.append("# scenario-specific required keys of [params]:")
    for scen, keys in REQUIRED_PARAMS.items():
        lines.append(f"#   {scen}: {', '.join(keys)}")
    lines.append(f"#   all: {', '.join(sorted({k for v in REQUIRED_PARAMS.values() for k in v}))}")
    return "\n".join(lines) + "\n"


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(" ".join(_render(x) for x in p) for p in v)
        return ", ".join(_render(x) for x in v)
    return str(v)


# ---------------------------------------------------------------------------
# parsed config


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration; ``values[section][key]`` holds every schema key (defaults filled in)."""

    values: dict
    source_text: str = field(default="", repr=False, compare=False)

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    @property
    def scenario(self) -> str:
        return self.values["run"]["scenario"]

    @property
    def scenarios(self) -> tuple:
        return SCENARIOS if self.scenario == ALL else (self.scenario,)

    @property
    def tau_factor(self) -> float:
        return parse_tau_rule(self.values["schedule"]["tau_rule"])

    def echo(self) -> dict:
        """Config echo for reports: every key with its effective value."""
        return {s: {k: v for k, v in self.values[s].items()} for s in SECTIONS}


def _line_map(text: str) -> dict:
    lines, section = {}, None
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]$", s)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), i)
            continue
        m = re.match(r"^([^=:\s][^=:]*?)\s*[=:]", s)
        if m and section is not None and not raw[:1].isspace():
            lines[(section, m.group(1).strip())] = i
    return lines


def parse_config(source) -> ExperimentConfig:
    """Parse and validate a config from a path or from inline text.

    Parameters
    ----------
    source : str or pathlib.Path
        A path to an existing file, or the config text itself (any string
        containing a newline or a ``[section]`` header).

    Raises
    ------
    ConfigError
        With ``line``, ``key`` and ``reason`` set where known: unknown scenario or
        key, out-of-range value, missing required key, or malformed text.
    """
    text = _read_source(source)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.DuplicateOptionError as e:
        raise ConfigError(f"duplicate key in [{e.section}]", key=e.option, line=e.lineno) from None
    except configparser.DuplicateSectionError as e:
        raise ConfigError(f"duplicate section [{e.section}]", line=e.lineno) from None
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("text before the first [section] header", line=e.lineno) from None
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ConfigError("malformed line", line=line) from None
    lines = _line_map(text)
    known = {(k.section, k.name) for k in SCHEMA}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", line=lines.get((section, None)))
        for name in parser[section]:
            if (section, name) not in known:
                raise ConfigError(f"unknown key in [{section}]", key=name, line=lines.get((section, name)))

    values = {s: {} for s in SECTIONS}
    for key in SCHEMA:
        line = lines.get((key.section, key.name))
        if parser.has_option(key.section, key.name):
            raw = parser.get(key.section, key.name)
            try:
                v = key.parse(raw)
            except ValueError as e:
                raise ConfigError(str(e), key=key.name, line=line) from None
            if key.check is not None:
                reason = key.check(v)
                if reason:
                    raise ConfigError(f"{key.name} {reason}", key=key.name, line=line)
        elif key.required:
            raise ConfigError(f"missing required key in [{key.section}]", key=key.name,
                              line=lines.get((key.section, None)))
        else:
            v = key.default
        values[key.section][key.name] = v
    _cross_validate(values, lines)
    return ExperimentConfig(values, text)


def _read_source(source) -> str:
    if isinstance(source, Path):
        return _read_file(source)
    if "\n" in source or source.lstrip().startswith("["):
        return source
    return _read_file(Path(source))


def _read_file(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {str(path)!r}: {e.strerror}") from None


def _cross_validate(values: dict, lines: dict):
    run, ker, lat, sch, par = (values[s] for s in ("run", "kernel", "lattice", "schedule", "params"))
    at = lambda sec, k: lines.get((sec, k))
    if sch["s"] <= sch["eta"]:
        raise ConfigError("s must exceed eta", key="s", line=at("schedule", "s"))
    if sch["s"] > ker["horizon_T"]:
        raise ConfigError("s exceeds the kernel horizon horizon_T", key="s", line=at("schedule", "s"))
    try:
        parse_tau_rule(sch["tau_rule"])
    except ValueError as e:
        raise ConfigError(str(e), key="tau_rule", line=at("schedule", "tau_rule")) from None
    n = lat["L"] / lat["h"]
    if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 2:
        raise ConfigError("L must be an integer multiple (>= 2) of h", key="L", line=at("lattice", "L"))
    if ker["lambda"] is not None and ker["lambda"] > ker["Lambda"]:
        raise ConfigError("lambda cannot exceed Lambda", key="lambda", line=at("kernel", "lambda"))
    if ker["kind"] != "cone":
        for k in ("aperture", "axis"):
            if ker[k] is not None:
                raise ConfigError(f"{k} applies only to kind = cone", key=k, line=at("kernel", k))
    if ker["kind"] != "time-oscillating" and ker["period"] is not None:
        raise ConfigError("period applies only to kind = time-oscillating", key="period",
                          line=at("kernel", "period"))
    if ker["axis"] is not None and len(ker["axis"]) != lat["d"]:
        raise ConfigError(f"axis needs {lat['d']} coordinates", key="axis", line=at("kernel", "axis"))
    if par["sources"] is None:
        par["sources"] = ((0.0,) * lat["d"],)
    if any(len(p) != lat["d"] for p in par["sources"]):
        raise ConfigError(f"every point needs {lat['d']} coordinates", key="sources", line=at("params", "sources"))
    if par["center"] is not None and len(par["center"]) != lat["d"]:
        raise ConfigError(f"center needs {lat['d']} coordinates", key="center", line=at("params", "center"))
    nu = par["nu"]
    if nu != "search" and not nu > 1:
        raise ConfigError("nu out of (1,inf)", key="nu", line=at("params", "nu"))
    scen = run["scenario"]
    needed = REQUIRED_PARAMS.get(scen, ()) if scen != ALL else tuple(
        dict.fromkeys(k for v in REQUIRED_PARAMS.values() for k in v))
    for k in needed:
        if par[k] is None:
            raise ConfigError(f"scenario {scen} requires [params] {k}", key=k,
                              line=lines.get(("params", None)) or lines.get(("run", "scenario")))
