"""Report records and their JSON/CSV serialization.

Every check in heatlab returns either a :class:`CheckReport` (report-only
inequality checks) or a :class:`BoundReport` (fitted-constant comparisons
against an analytic reference). Both serialize to plain JSON with a stable
key order so that identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np


def to_jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values.

    NaN becomes ``None``; infinities become the strings ``"inf"``/``"-inf"``.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


@dataclass
class CheckReport:
    """Outcome of a report-only check.

    ``values`` holds the check-specific numbers (min slack, worst point, ...).
    """

    check: str
    params: dict
    passed: bool
    values: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"check": self.check, "params": self.params}
        out.update(self.values)
        out["pass"] = bool(self.passed)
        return to_jsonable(out)

    def __bool__(self):
        return bool(self.passed)


@dataclass
class BoundReport:
    """Pointwise ratio statistics of a computed quantity against a reference bound.

    Attributes
    ----------
    check : str
        Bound name.
    params : dict
        Parameter record of the run.
    fitted_constant : float
        Max ratio computed/reference at the base resolution.
    max_ratio_location : list
        Coordinates (or sweep key) where the max ratio was attained.
    refinement_drift : dict
        Relative change of the fitted constant under each refinement performed.
    passed : bool
        Whether the threshold stated by the check was met.
    details : dict
        Extra diagnostics (per-sweep fits, excluded cell counts, ...).
    """

    check: str
    params: dict
    fitted_constant: float
    max_ratio_location: Any
    refinement_drift: dict
    passed: bool
    details: dict = field(default_factory=dict)
    #: Arrays for CSV profile dumps (name -> (distance, p, reference)); not serialized.
    profiles: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not (self.fitted_constant >= 0 or math.isnan(self.fitted_constant)):
            raise ValueError("max ratio must be nonnegative")

    def to_dict(self) -> dict:
        return to_jsonable({
            "check": self.check,
            "params": self.params,
            "fitted_constant": self.fitted_constant,
            "max_ratio_location": self.max_ratio_location,
            "refinement_drift": self.refinement_drift,
            "details": self.details,
            "pass": bool(self.passed),
        })

    def __bool__(self):
        return bool(self.passed)


def relative_drift(base: float, refined: float) -> float:
    """|refined - base| / |base|; ``inf`` when the base is zero and refined is not."""
    if base == refined:
        return 0.0
    if base == 0:
        return math.inf
    return abs(refined - base) / abs(base)


PROFILE_COLUMNS = ("distance", "p", "reference", "ratio")


def write_profile_csv(path, distance, p, reference) -> Path:
    """Write a profile dump with columns ``distance, p, reference, ratio`` sorted by distance."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    distance = np.asarray(distance, dtype=float).ravel()
    p = np.asarray(p, dtype=float).ravel()
    reference = np.asarray(reference, dtype=float).ravel()
    order = np.argsort(distance, kind="stable")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PROFILE_COLUMNS)
        for i in order:
            ratio = p[i] / reference[i] if reference[i] > 0 else math.nan
            writer.writerow([repr(float(distance[i])), repr(float(p[i])),
                             repr(float(reference[i])), repr(float(ratio))])
    return path


def read_profile_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != PROFILE_COLUMNS:
            raise ValueError(f"{path}: not a profile CSV (header {header!r})")
        rows = [[float(v) for v in row] for row in reader]
    arr = np.array(rows, dtype=float).reshape(-1, len(PROFILE_COLUMNS))
    return {name: arr[:, i] for i, name in enumerate(PROFILE_COLUMNS)}
