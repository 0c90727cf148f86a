"""Truncated carré du champ, the exponential weight ``H`` and the weighted L^2 estimate.

For a center ``y``, radius ``rho``, times ``eta < s`` and ``nu > 1`` with
``s - eta <= rho^alpha / (4 nu)`` put

    [t]  = 2(s - eta) - (t - eta),
    a(t) = rho^alpha / (nu [t])  (> 1 on [eta, s]),
    H(t, x) = exp(-log a(t) * max(|x - y| / (3 rho), 1)).

``H`` is radially nonincreasing, nonincreasing in ``t`` and satisfies

    C Gamma_rho(H^{1/2}, H^{1/2}) <= -d_t H

once ``nu`` is large enough for the given ``C``. The weighted energy
``W(t) = sum H(t) u(t)^2 h^d`` of a solution of the truncated problem then
never exceeds its initial value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError, PreconditionError
from .lattice import RADIUS_RTOL, Lattice
from .reports import CheckReport
from .semigroup import Schedule, _values, evolve

#: Number of uniform times in ``[eta, s]`` sampled by :func:`check_H_inequality`.
N_TIMES = 64
H_SLACK_RTOL = 1e-10
WEIGHTED_RTOL = 1e-6
NU_CAP = 2 ** 20
#: Default ratio ``(s - eta) nu / rho^alpha`` in :func:`search_nu` (half the admissible maximum 1/4).
DT_FACTOR = 1 / 8
# Values below this multiple of max|u0| are indistinguishable from FFT round-off.
ROUNDOFF_FLOOR = 1e-13


@dataclass(frozen=True)
class WeightParams:
    """Parameters of the weight ``H``.

    ``alpha`` enters the smallness condition ``s - eta <= rho^alpha / (4 nu)``.
    """

    center: tuple
    rho: float
    eta: float
    s: float
    nu: float
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.rho > 0:
            raise ParameterError("rho must be positive")
        if not self.nu > 1:
            raise ParameterError(f"nu must exceed 1, got {self.nu}")
        if not 0 < self.alpha < 2:
            raise ParameterError("alpha must lie in (0, 2)")
        if not self.s > self.eta >= 0:
            raise ParameterError("need 0 <= eta < s")
        if self.s - self.eta > self.rho ** self.alpha / (4 * self.nu) * (1 + 1e-12):
            raise PreconditionError(
                f"smallness condition violated: s - eta = {self.s - self.eta} > "
                f"rho^alpha/(4 nu) = {self.rho ** self.alpha / (4 * self.nu)}")

    def bracket(self, t):
        return 2 * (self.s - self.eta) - (np.asarray(t, dtype=float) - self.eta)

    def base(self, t):
        """``a(t) = rho^alpha / (nu [t])``."""
        return self.rho ** self.alpha / (self.nu * self.bracket(t))

    def describe(self) -> dict:
        return {"y": list(self.center), "rho": self.rho, "eta": self.eta, "s": self.s,
                "nu": self.nu, "alpha": self.alpha}


def carre_du_champ_trunc(lat: Lattice, f, alpha: float, rho: float) -> np.ndarray:
    """``Gamma_rho(f, f)(x_i) = sum_{0 < |x_i - x_j| <= rho} (f_i - f_j)^2 |x_i - x_j|^{-d-alpha} h^d``.

    Raises
    ------
    DomainError
        If ``rho >= L/2`` (the ball would wrap around the torus).

    Examples
    --------
    >>> lat = Lattice(1, 1.0, 16.0)
    >>> f = np.zeros(16); f[0] = 1.0
    >>> float(carre_du_champ_trunc(lat, f, 1.0, 2.5)[0])
    2.5
    """
    if not 0 < alpha < 2:
        raise ParameterError("alpha must lie in (0, 2)")
    if not rho > 0:
        raise ParameterError("rho must be positive")
    if rho >= lat.period / 2:
        raise DomainError(f"rho = {rho} >= L/2 = {lat.period / 2}: the ball wraps around the torus")
    f = lat.field(f)
    r = lat.offset_distances
    inside = (r <= rho * (1 + RADIUS_RTOL)) & (r > 0)
    out = np.zeros(lat.shape)
    hd = lat.cell_volume
    axes = tuple(range(lat.dim))
    for idx in zip(*np.nonzero(inside)):
        shift = tuple(-int(i) for i in idx)
        # rolled[x] = f[x + offset]
        diff = f - np.roll(f, shift, axis=axes)
        out += diff * diff * (r[idx] ** (-lat.dim - alpha) * hd)
    return out


def _distance(lat: Lattice, wp: WeightParams) -> np.ndarray:
    return lat.distances_from(np.asarray(wp.center))


def _log_base(wp: WeightParams, t) -> float:
    a = float(wp.base(t))
    if not a > 1:
        raise PreconditionError(f"base rho^alpha/(nu[t]) = {a} <= 1 at t = {t}")
    return math.log(a)


def weight_H(lat: Lattice, wp: WeightParams, t: float) -> np.ndarray:
    """``H(t, .)`` on the lattice (minimum-image distance to the center)."""
    if not wp.eta <= t <= wp.s:
        raise DomainError(f"t = {t} outside [eta, s] = [{wp.eta}, {wp.s}]")
    expo = np.maximum(_distance(lat, wp) / (3 * wp.rho), 1.0)
    return np.exp(-_log_base(wp, t) * expo)


def dH_dt(lat: Lattice, wp: WeightParams, t: float) -> np.ndarray:
    """Analytic ``d_t H = -H max(r/(3 rho), 1) / [t]``.

    Inner branch: ``-nu / rho^alpha``; outer branch (including the seam ``r = 3 rho``):
    ``-H r / (3 rho [t])``.
    """
    r = _distance(lat, wp)
    H = weight_H(lat, wp, t)
    br = float(wp.bracket(t))
    inner = r < 3 * wp.rho
    return np.where(inner, -wp.nu / wp.rho ** wp.alpha, -H * r / (3 * wp.rho * br))


def check_H_inequality(lat: Lattice, wp: WeightParams, alpha: float, C: float,
                       n_times: int = N_TIMES) -> CheckReport:
    """Minimum slack of ``-d_t H - C Gamma_rho(H^{1/2}, H^{1/2})`` over all cells and ``n_times`` times.

    Passes iff the minimum slack is at least ``-1e-10 * scale`` with
    ``scale = max(-d_t H)`` over the samples. The report splits the minimum by
    ``|x - y| <= 2 rho``, ``(2 rho, 3 rho]`` and ``> 3 rho``.
    """
    if C < 0:
        raise ParameterError("C must be nonnegative")
    r = _distance(lat, wp)
    cases = {"case1": r <= 2 * wp.rho, "case2": (r > 2 * wp.rho) & (r <= 3 * wp.rho), "case3": r > 3 * wp.rho}
    per_case = {name: {"min_slack": math.inf, "max_gamma": 0.0, "cells": int(m.sum())} for name, m in cases.items()}
    worst = (math.inf, None, None)
    scale = 0.0
    for t in np.linspace(wp.eta, wp.s, n_times):
        H = weight_H(lat, wp, t)
        gam = carre_du_champ_trunc(lat, np.sqrt(H), alpha, wp.rho)
        minus_dt = -dH_dt(lat, wp, t)
        slack = minus_dt - C * gam
        scale = max(scale, float(np.max(minus_dt)))
        i = int(np.argmin(slack))
        if slack.flat[i] < worst[0]:
            worst = (float(slack.flat[i]), float(t), lat.coords.reshape(-1, lat.dim)[i].tolist())
        for name, m in cases.items():
            if m.any():
                pc = per_case[name]
                pc["min_slack"] = min(pc["min_slack"], float(np.min(slack[m])))
                pc["max_gamma"] = max(pc["max_gamma"], float(np.max(gam[m])))
    passed = worst[0] >= -H_SLACK_RTOL * scale
    return CheckReport(
        "h-inequality", {"lattice": lat.describe(), "weight": wp.describe(), "C": C, "n_times": n_times},
        passed, {"min_slack": worst[0], "scale": scale, "relative_min_slack": worst[0] / scale,
                 "worst_point": {"t": worst[1], "x": worst[2]}, "cases": per_case})


def weight_for(center, rho: float, alpha: float, nu: float, eta: float = 0.0,
               dt_factor: float = DT_FACTOR) -> WeightParams:
    """Weight with ``s - eta = dt_factor * rho^alpha / nu``."""
    return WeightParams(center, rho, eta, eta + dt_factor * rho ** alpha / nu, nu, alpha)


def search_nu(lat: Lattice, center, rho: float, alpha: float, C: float, eta: float = 0.0,
              dt_factor: float = DT_FACTOR, cap: float = NU_CAP) -> CheckReport:
    """Smallest ``nu`` in ``2, 4, 8, ..., cap`` passing :func:`check_H_inequality`.

    For each candidate the time window is ``s - eta = dt_factor * rho^alpha / nu``.
    After a success the next candidate ``2 nu`` is re-checked as a monotonicity
    spot check. A failed search returns ``nu = None``, which signals a
    discretization too coarse for the requested ``C``.
    """
    if C < 0:
        raise ParameterError("C must be nonnegative")
    if not 0 < dt_factor <= 0.25:
        raise ParameterError("dt_factor must lie in (0, 1/4]")
    tried = []
    nu = 2.0
    while nu <= cap:
        rep = check_H_inequality(lat, weight_for(center, rho, alpha, nu, eta, dt_factor), alpha, C)
        tried.append({"nu": nu, "relative_min_slack": rep.values["relative_min_slack"], "pass": rep.passed})
        if rep.passed:
            again = check_H_inequality(lat, weight_for(center, rho, alpha, 2 * nu, eta, dt_factor), alpha, C)
            return CheckReport(
                "search-nu", {"lattice": lat.describe(), "rho": rho, "alpha": alpha, "C": C,
                              "dt_factor": dt_factor, "cap": cap},
                True, {"nu": nu, "tried": tried, "monotone_at_2nu": again.passed,
                       "min_slack": rep.values["min_slack"], "scale": rep.values["scale"]})
        nu *= 2
    return CheckReport(
        "search-nu", {"lattice": lat.describe(), "rho": rho, "alpha": alpha, "C": C,
                      "dt_factor": dt_factor, "cap": cap},
        False, {"nu": None, "tried": tried, "reason": "cap exceeded; discretization too coarse"})


def weighted_energy(lat: Lattice, wp: WeightParams, t: float, u) -> float:
    """``W(t) = sum H(t, .) u^2 h^d``."""
    return float(np.sum(weight_H(lat, wp, t) * lat.field(u) ** 2) * lat.cell_volume)


def _check_match(k_trunc, sched: Schedule, wp: WeightParams):
    if k_trunc.trunc_radius is None or k_trunc.trunc_radius > wp.rho * (1 + 1e-12):
        raise PreconditionError("kernel must be truncated at radius <= rho")
    if not (math.isclose(sched.start, wp.eta, abs_tol=1e-14) and math.isclose(sched.end, wp.s, rel_tol=1e-12)):
        raise PreconditionError("schedule (eta, s) must match the weight parameters")
    if not math.isclose(k_trunc.params.alpha, wp.alpha):
        raise PreconditionError("weight alpha differs from the kernel's alpha")


def default_C(k) -> float:
    """Default constant ``C = 8 Lambda`` of the weighted estimate."""
    return 8.0 * k.params.Lambda


def check_weighted_estimate(k_trunc, lat: Lattice, sched: Schedule, u0, wp: WeightParams,
                            C: float | None = None) -> CheckReport:
    """Check ``max_t W(t) <= W(eta) (1 + 1e-6)`` over all step boundaries.

    The H-inequality is certified at ``C`` (default ``8 Lambda``) first.

    Raises
    ------
    PreconditionError
        If the kernel/schedule do not match ``wp`` or the H-inequality is not certified.
    """
    _check_match(k_trunc, sched, wp)
    C = default_C(k_trunc) if C is None else C
    cert = check_H_inequality(lat, wp, wp.alpha, C)
    if not cert.passed:
        raise PreconditionError(
            f"H-inequality not certified at C = {C}, nu = {wp.nu}: "
            f"relative min slack {cert.values['relative_min_slack']:.3e}")
    u = _values(lat, u0)
    _, traj = evolve(k_trunc, lat, sched, u, return_trajectory=True)
    times = np.concatenate([[sched.start], sched.times])
    W = np.array([weighted_energy(lat, wp, t, v) for t, v in zip(times, traj)])
    W0 = W[0]
    imax = int(np.argmax(W))
    passed = bool(W[imax] <= W0 * (1 + WEIGHTED_RTOL))
    return CheckReport(
        "weighted-estimate", {"kernel": k_trunc.tag, "lattice": lat.describe(), "schedule": sched.describe(),
                              "weight": wp.describe(), "C": C},
        passed, {"W_eta": W0, "max_W": float(W[imax]), "argmax_t": float(times[imax]),
                 "max_relative_increase": float(W[imax] / W0 - 1) if W0 > 0 else 0.0,
                 "certificate_min_slack": cert.values["relative_min_slack"]})


def decay_rhs(dt: float, sigma: float, rho: float, nu: float, alpha: float, d: int, l2norm: float) -> float:
    """Constant-free right-hand side
    ``dt^{-d/(2 alpha)} 2^{sigma/(6 rho)} a^{-sigma/(6 rho) + 1/2 + d/(2 alpha)} ||u0||``, ``a = rho^alpha/(nu dt)``.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    a = rho ** alpha / (nu * dt)
    e = sigma / (6 * rho)
    return dt ** (-d / (2 * alpha)) * 2 ** e * a ** (-e + 0.5 + d / (2 * alpha)) * l2norm


def outside_ball_data(lat: Lattice, center, sigma: float, width: float | None = None) -> np.ndarray:
    """Indicator of ``sigma < |x - y| <= sigma + width`` (``width=None``: everything outside ``B_sigma``)."""
    r = lat.distances_from(np.asarray(center, dtype=float).reshape(lat.dim))
    m = r > sigma * (1 + RADIUS_RTOL)
    if width is not None:
        m &= r <= (sigma + width) * (1 + RADIUS_RTOL)
    return m.astype(float)


def random_nonnegative_data(lat: Lattice, n: int, seed: int = 0) -> list:
    """``n`` fields with i.i.d. uniform ``[0, 1)`` cell values from ``numpy.random.default_rng(seed)``."""
    rng = np.random.default_rng(seed)
    return [rng.random(lat.shape) for _ in range(n)]


def decay_estimate_check(k_trunc, lat: Lattice, sched: Schedule, sigmas, center, nu: float,
                         width: float | None = None, spread_cap: float = 50.0) -> CheckReport:
    """Ratio ``|u(s, y)| / RHS`` across a sweep of exclusion radii ``sigma``.

    For each ``sigma`` the solution starts from :func:`outside_ball_data`. Passes
    iff ``max ratio / median ratio <= spread_cap``; the observed log-slope of
    ``|u(s, y)|`` in ``sigma`` is recorded next to the exponent of the bound.
    """
    rho = k_trunc.trunc_radius
    if rho is None:
        raise PreconditionError("decay estimate needs a truncated kernel")
    alpha, d = k_trunc.params.alpha, lat.dim
    dt = sched.duration
    if dt > rho ** alpha / (4 * nu) * (1 + 1e-12):
        raise PreconditionError("need s - eta <= rho^alpha / (4 nu)")
    y = np.asarray(center, dtype=float).reshape(d)
    yc = lat.cell_of(y)
    rows = []
    for sigma in sigmas:
        u0 = outside_ball_data(lat, y, sigma, width)
        l2 = math.sqrt(float(np.sum(u0 ** 2)) * lat.cell_volume)
        if l2 == 0:
            raise PreconditionError(f"sigma = {sigma} leaves no initial data on the torus")
        u = evolve(k_trunc, lat, sched, u0).values.ravel()[yc]
        rhs = decay_rhs(dt, sigma, rho, nu, alpha, d, l2)
        rows.append({"sigma": float(sigma), "u_sy": float(abs(u)), "rhs": rhs, "ratio": float(abs(u)) / rhs,
                     "at_roundoff_floor": bool(abs(u) <= ROUNDOFF_FLOOR * np.max(u0))})
    ratios = np.array([r["ratio"] for r in rows])
    med = float(np.median(ratios))
    spread = float(np.max(ratios) / med) if med > 0 else math.inf
    sig = np.array([r["sigma"] for r in rows])
    us = np.array([r["u_sy"] for r in rows])
    slope = None
    if len(rows) >= 2 and np.all(us > 0):
        slope = float(np.polyfit(sig / (6 * rho), np.log(us), 1)[0])
    a = rho ** alpha / (nu * dt)
    return CheckReport(
        "decay", {"kernel": k_trunc.tag, "lattice": lat.describe(), "schedule": sched.describe(),
                  "nu": nu, "center": y.tolist(), "width": width},
        spread <= spread_cap,
        {"fitted_constant": float(np.max(ratios)), "spread": spread, "rows": rows,
         "observed_log_slope_per_sigma_over_6rho": slope, "bound_log_slope": math.log(2) - math.log(a)})
