"""Backward-Euler evolution and discrete fundamental solutions.

One step from ``t_n`` to ``t_{n+1} = t_n + tau`` solves

    (I - tau G(t_{n+1})) u^{n+1} = u^n

with the generator frozen at the step's end time. ``I - tau G`` is a
symmetric M-matrix with unit column sums, so every step preserves mass and
nonnegativity. The product of the step inverses is the discrete propagator
``P(s, eta)``; its entries divided by the cell volume are the discrete heat
kernel ``p(x_i, s; x_j, eta)``.

Translation-invariant kernels are stepped in Fourier space (each step divides
by ``1 - tau * symbol``); others use Cholesky solves of the dense step matrix.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import DomainError, InputError, ParameterError, PreconditionError, ResourceError, ShapeError
from .lattice import DENSE_CAP, Lattice, assemble_generator, circulant_matrix
from .parallel import ordered_map
from .reports import CheckReport

CACHE_ENV = "HEATLAB_CACHE"
CACHE_MAGIC = b"HEATLABP"
CACHE_VERSION = 1
# Columns per independent block when materializing a dense propagator.
COLUMN_BLOCK = 256
MAX_PRINCIPLE_TOL = 1e-14


@dataclass(frozen=True)
class Schedule:
    """Uniform time grid ``eta = t_0 < t_1 < ... < t_m = s``.

    Examples
    --------
    >>> Schedule(0.0, 1.0, 4).tau
    0.25
    """

    start: float
    end: float
    steps: int

    def __post_init__(self):
        if not self.start >= 0:
            raise ParameterError(f"start time must be >= 0, got {self.start}")
        if not self.end > self.start:
            raise ParameterError(f"end time {self.end} must exceed start {self.start}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ParameterError(f"steps must be a positive integer, got {self.steps}")

    @property
    def tau(self) -> float:
        return (self.end - self.start) / self.steps

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def times(self) -> np.ndarray:
        """Step end times ``t_1, ..., t_m`` (``t_m`` equals ``end`` exactly)."""
        t = self.start + self.duration * np.arange(1, self.steps + 1) / self.steps
        t[-1] = self.end
        return t

    def refine(self) -> "Schedule":
        """Same interval with twice as many steps."""
        return Schedule(self.start, self.end, 2 * self.steps)

    def split(self, n: int) -> tuple["Schedule", "Schedule"]:
        """Schedules for the first ``n`` steps and the remaining ``m - n`` steps."""
        if not 0 < n < self.steps:
            raise ParameterError(f"split index must lie in 1..{self.steps - 1}")
        mid = float(self.start + self.duration * n / self.steps)
        return Schedule(self.start, mid, n), Schedule(mid, self.end, self.steps - n)

    @classmethod
    def auto(cls, k, lat: Lattice, start: float, end: float, factor: float = 0.25) -> "Schedule":
        """Smallest step count with ``tau <= factor * scale(h)``; ``scale(h)`` is ``h^alpha`` or ``phi(h)``."""
        tau_max = factor * k.scale(lat.spacing)
        return cls(start, end, max(1, math.ceil((end - start) / tau_max - 1e-9)))

    def describe(self) -> dict:
        return {"eta": self.start, "s": self.end, "m": self.steps, "tau": self.tau}


@dataclass
class GridField:
    """Values on the cells of a lattice at one time."""

    lattice: Lattice
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = self.lattice.field(self.values)
        if not np.all(np.isfinite(self.values)):
            raise InputError("field contains non-finite values")

    @property
    def mass(self) -> float:
        return float(np.sum(self.values) * self.lattice.cell_volume)

    def at(self, cell) -> float:
        return float(self.values.ravel()[self.lattice.flat_index(cell)])


def _values(lat: Lattice, u) -> np.ndarray:
    if isinstance(u, GridField):
        if u.lattice != lat:
            raise ShapeError("field lives on a different lattice")
        u = u.values
    arr = lat.field(u).astype(float, copy=True)
    if np.any(np.isnan(arr)):
        raise InputError("initial data contains NaN")
    if not np.all(np.isfinite(arr)):
        raise InputError("initial data contains infinite values")
    return arr


def _check_horizon(k, sched: Schedule):
    if sched.end > k.params.horizon_T * (1 + 1e-12):
        raise DomainError(f"schedule end {sched.end} exceeds the horizon T = {k.params.horizon_T}")


class _Stepper:
    """Applies backward-Euler steps of one kernel on one lattice."""

    def __init__(self, k, lat: Lattice, sched: Schedule, dense_cap: int = DENSE_CAP):
        _check_horizon(k, sched)
        self.k, self.lat, self.sched = k, lat, sched
        self.spectral = k.translation_invariant
        self.dense_cap = dense_cap
        self._frozen = None

    def _operator(self, t):
        if self._frozen is not None and not self.k.time_dependent:
            return self._frozen
        g = assemble_generator(self.k, self.lat, t, dense_cap=self.dense_cap)
        tau = self.sched.tau
        if self.spectral:
            op = 1.0 - tau * g.symbol
        else:
            A = np.eye(self.lat.cell_count) - tau * g.dense
            op = scipy.linalg.cho_factor(A, lower=False, check_finite=False)
        self._frozen = op
        return op

    def run(self, u, return_trajectory=False):
        """Advance ``u`` (array of lattice shape) through all steps."""
        lat = self.lat
        traj = [u.copy()] if return_trajectory else None
        if self.spectral:
            U = np.fft.rfftn(u)
            for t in self.sched.times:
                U = U / self._operator(t)
                if return_trajectory:
                    traj.append(np.fft.irfftn(U, s=lat.shape, axes=tuple(range(lat.dim))))
            out = np.fft.irfftn(U, s=lat.shape, axes=tuple(range(lat.dim)))
        else:
            v = u.ravel()
            for t in self.sched.times:
                v = scipy.linalg.cho_solve(self._operator(t), v, check_finite=False)
                if return_trajectory:
                    traj.append(v.reshape(lat.shape))
            out = v.reshape(lat.shape)
        return (out, traj) if return_trajectory else out

    def run_columns(self, X):
        """Advance every column of ``X`` (shape ``N x M``) through all steps."""
        if self.spectral:
            U = np.fft.rfftn(X.T.reshape((-1,) + self.lat.shape), axes=range(1, self.lat.dim + 1))
            for t in self.sched.times:
                U = U / self._operator(t)
            out = np.fft.irfftn(U, s=self.lat.shape, axes=range(1, self.lat.dim + 1))
            return out.reshape(X.shape[1], -1).T
        for t in self.sched.times:
            X = scipy.linalg.cho_solve(self._operator(t), X, check_finite=False)
        return X


def evolve(k, lat: Lattice, sched: Schedule, u0, return_trajectory: bool = False,
           dense_cap: int = DENSE_CAP):
    """Solve the Cauchy problem from ``sched.start`` to ``sched.end``.

    Parameters
    ----------
    k : JumpKernel
    lat : Lattice
    sched : Schedule
    u0 : GridField or array_like
        Initial data on ``lat``.
    return_trajectory : bool
        Also return the list of fields at ``t_0, ..., t_m``.

    Returns
    -------
    GridField, or (GridField, list of ndarray)

    Raises
    ------
    InputError
        If ``u0`` contains NaN.
    """
    u = _values(lat, u0)
    stepper = _Stepper(k, lat, sched, dense_cap)
    if return_trajectory:
        out, traj = stepper.run(u, return_trajectory=True)
        return GridField(lat, out, sched.end), traj
    return GridField(lat, stepper.run(u), sched.end)


def delta(lat: Lattice, source) -> np.ndarray:
    """Discrete delta ``1_{source} / h^d``."""
    u = np.zeros(lat.cell_count)
    u[lat.flat_index(source)] = 1.0 / lat.cell_volume
    return u.reshape(lat.shape)


def fundamental_solution(k, lat: Lattice, sched: Schedule, source, dense_cap: int = DENSE_CAP) -> GridField:
    """``p(., s; x_source, eta)`` as a field; integrates to one."""
    return evolve(k, lat, sched, delta(lat, source), dense_cap=dense_cap)


@dataclass
class Propagator:
    """Materialized solution operator ``P(s, eta)``.

    ``operator[i, j]`` is the weight cell ``j`` sends to cell ``i``; columns sum to one.
    :attr:`density` rescales by ``1/h^d`` so that ``sum_i density[i, j] h^d = 1``.
    """

    lattice: Lattice
    schedule: Schedule
    kernel_tag: str
    operator: np.ndarray

    @property
    def density(self) -> np.ndarray:
        return self.operator / self.lattice.cell_volume

    def column(self, source) -> np.ndarray:
        """Heat kernel ``p(., s; x_source, eta)`` reshaped to the lattice."""
        j = self.lattice.flat_index(source)
        return self.density[:, j].reshape(self.lattice.shape)

    def header(self) -> dict:
        lat, sc = self.lattice, self.schedule
        return {"d": lat.dim, "h": lat.spacing, "L": lat.period, "eta": sc.start, "s": sc.end,
                "m": sc.steps, "kernel": self.kernel_tag, "version": CACHE_VERSION}


def build_propagator(k, lat: Lattice, sched: Schedule, dense_cap: int = DENSE_CAP,
                     cache_dir=None) -> Propagator:
    """Materialize ``P(s, eta)`` as an ``N x N`` matrix.

    Translation-invariant kernels need a single evolution (the matrix is
    circulant). Otherwise the identity is pushed through every step in
    fixed blocks of :data:`COLUMN_BLOCK` columns.

    If ``cache_dir`` (or the ``HEATLAB_CACHE`` environment variable) names a
    directory, results are read from and written to a binary cache there.

    Raises
    ------
    ResourceError
        If ``N`` exceeds ``dense_cap``; use :func:`fundamental_solution` per source instead.
    """
    N = lat.cell_count
    if N > dense_cap:
        raise ResourceError(
            f"propagator with {N} cells exceeds the dense cap {dense_cap}; "
            "use fundamental_solution per source")
    _check_horizon(k, sched)
    header = Propagator(lat, sched, k.tag, np.empty((0, 0))).header()
    cache_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV) or None
    path = None
    if cache_dir:
        path = Path(cache_dir) / cache_filename(header)
        if path.exists():
            cached_header, matrix = read_propagator_cache(path)
            if cached_header == header:
                return Propagator(lat, sched, k.tag, matrix)
    stepper = _Stepper(k, lat, sched, dense_cap)
    if stepper.spectral:
        e0 = np.zeros(lat.shape)
        e0.flat[0] = 1.0
        col = stepper.run(e0)
        # P[i, j] = col[x_i - x_j]
        P = circulant_matrix(lat, col).T.copy()
    else:
        blocks = [range(a, min(a + COLUMN_BLOCK, N)) for a in range(0, N, COLUMN_BLOCK)]

        def run_block(cols):
            X = np.zeros((N, len(cols)))
            X[list(cols), np.arange(len(cols))] = 1.0
            return _Stepper(k, lat, sched, dense_cap).run_columns(X)

        P = np.hstack(ordered_map(run_block, blocks))
    prop = Propagator(lat, sched, k.tag, P)
    if path is not None:
        write_propagator_cache(path, prop)
    return prop


def exact_propagator(k, lat: Lattice, sched: Schedule, dense_cap: int = DENSE_CAP) -> Propagator:
    """Oracle ``exp((s - eta) G)`` for a time-independent kernel (dense matrix exponential)."""
    if k.time_dependent:
        raise ParameterError("the matrix-exponential oracle needs a time-independent kernel")
    g = assemble_generator(k, lat, sched.end, dense_cap=dense_cap)
    return Propagator(lat, sched, k.tag, scipy.linalg.expm(sched.duration * g.matrix(dense_cap)))


def max_asymmetry(P: np.ndarray) -> float:
    """``max |P - P^T|``."""
    return float(np.max(np.abs(P - P.T)))


def cache_filename(header: dict) -> str:
    digest = hashlib.sha256(json.dumps(header, sort_keys=True).encode()).hexdigest()[:20]
    return f"propagator-{digest}.bin"


def write_propagator_cache(path, prop: Propagator) -> Path:
    """Binary layout: magic, uint32 header length, UTF-8 JSON header, float64 little-endian matrix."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    head = json.dumps(prop.header(), sort_keys=True).encode()
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        fh.write(np.ascontiguousarray(prop.operator, dtype="<f8").tobytes())
    os.replace(tmp, path)
    return path


def read_propagator_cache(path) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(len(CACHE_MAGIC)) != CACHE_MAGIC:
            raise InputError(f"{path}: not a heatlab propagator cache")
        (n,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(n).decode())
        data = np.frombuffer(fh.read(), dtype="<f8")
    N = int(round(header["L"] / header["h"])) ** header["d"]
    if header.get("version") != CACHE_VERSION or data.size != N * N:
        raise InputError(f"{path}: incompatible cache (version {header.get('version')})")
    return header, data.reshape(N, N).astype(float)


def check_maximum_principle(k, lat: Lattice, sched: Schedule, u0) -> CheckReport:
    """Check that ``u0 <= 0`` stays ``<= 0`` at every step.

    Passes iff the largest positive value seen is at most ``1e-14 * max|u0|``.
    """
    u = _values(lat, u0)
    if np.any(u > 0):
        raise PreconditionError("maximum-principle check needs u0 <= 0")
    _, traj = evolve(k, lat, sched, u, return_trajectory=True)
    excursion = max(0.0, max(float(np.max(v)) for v in traj))
    scale = float(np.max(np.abs(u)))
    worst_step = int(np.argmax([np.max(v) for v in traj]))
    return CheckReport(
        "maximum-principle", {"kernel": k.tag, "lattice": lat.describe(), "schedule": sched.describe()},
        excursion <= MAX_PRINCIPLE_TOL * scale,
        {"max_positive_excursion": excursion, "scale": scale, "worst_step": worst_step})


def positive_support_radius(field: GridField, source) -> float:
    """Largest distance from ``source`` at which the field is still strictly positive."""
    lat = field.lattice
    r = lat.distances_from(lat.cell_coords(source))
    pos = field.values > 0
    return float(np.max(r[pos])) if np.any(pos) else 0.0


def write_field_csv(path, field: GridField) -> Path:
    """CSV with columns ``cell, x0[, x1], value``; floats written with ``repr``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lat = field.lattice
    pts = lat.coords.reshape(-1, lat.dim)
    vals = field.values.ravel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell"] + [f"x{a}" for a in range(lat.dim)] + ["value"])
        for i in range(lat.cell_count):
            w.writerow([i] + [repr(float(c)) for c in pts[i]] + [repr(float(vals[i]))])
    return path


def read_field_csv(path, lat: Lattice, time: float = 0.0) -> GridField:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    expected = ["cell"] + [f"x{a}" for a in range(lat.dim)] + ["value"]
    if not rows or rows[0] != expected:
        raise InputError(f"{path}: expected header {expected}")
    vals = np.full(lat.cell_count, np.nan)
    for row in rows[1:]:
        vals[lat.flat_index(int(row[0]))] = float(row[-1])
    if np.any(np.isnan(vals)):
        raise InputError(f"{path}: missing cells")
    return GridField(lat, vals, time)
