"""Pointwise checks of the heat-kernel bounds on computed discrete heat kernels.

The constants in the bounds are existential, so every check fits the
smallest constant that makes the bound hold at the base resolution and then
requires that constant to be stable:

* under one spatial refinement ``h -> h/2`` and one temporal refinement
  ``tau -> tau/2`` (relative drift below 20%), or
* across a parameter sweep (``max / median`` below a stated spread).

Also contains the two Li–Yau computations: the equality case for the
Gauss–Weierstrass kernel and the violation of its nonlocal analog by the
fractional heat kernel at the origin.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

from .errors import DomainError, ParameterError, PreconditionError
from .kernels import check_upper_bound, truncate
from .lattice import RADIUS_RTOL, Lattice
from .reports import BoundReport, CheckReport, relative_drift
from .semigroup import Schedule, delta, evolve, fundamental_solution
from .stable import cauchy_density, stable_density

REFINE_DRIFT = 0.20
SWEEP_SPREAD = 10.0
UNDERFLOW = 1e-300
#: Default wrap-around threshold: mass of ``p`` beyond ``L/4`` from the source.
WRAP_THRESHOLD = 0.25
#: Ratios are fitted on cells within ``PROBE_FRACTION * L`` of the source.
PROBE_FRACTION = 1 / 8


# ---------------------------------------------------------------------------
# references


def reference_uhke_r(r, dt: float, alpha: float, d: int):
    """``dt^{-d/alpha} (1 + r^alpha / dt)^{-(d + alpha)/alpha}`` at distance ``r``."""
    if not dt > 0:
        raise DomainError("elapsed time must be positive")
    r = np.asarray(r, dtype=float)
    return dt ** (-d / alpha) * (1 + r ** alpha / dt) ** (-(d + alpha) / alpha)


def reference_uhke(x, y, dt: float, alpha: float, d: int):
    """Constant-free upper bound ``(s-eta)^{-d/alpha} (1 + |x-y|^alpha/(s-eta))^{-(d+alpha)/alpha}``.

    >>> float(reference_uhke(0.0, 1.0, 1.0, 1.0, 1))
    0.25
    """
    z = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    r = np.abs(z) if d == 1 and z.ndim == 0 else np.sqrt(np.sum(np.atleast_1d(z) ** 2, axis=-1))
    return reference_uhke_r(r, dt, alpha, d)


def reference_offdiag_trunc_r(r, dt: float, rho: float, nu: float, alpha: float, d: int):
    """``dt^{-d/alpha} 2^{r/(12 rho)} a^{-r/(12 rho) + 1/2 + d/(2 alpha)}`` with ``a = rho^alpha/(nu dt)``."""
    if not dt > 0:
        raise DomainError("elapsed time must be positive")
    r = np.asarray(r, dtype=float)
    a = rho ** alpha / (nu * dt)
    e = r / (12 * rho)
    return dt ** (-d / alpha) * 2.0 ** e * a ** (-e + 0.5 + d / (2 * alpha))


# ---------------------------------------------------------------------------
# helpers


def wrap_indicator(field_values: np.ndarray, lat: Lattice, source) -> float:
    """Mass of a heat-kernel column beyond distance ``L/4`` from its source."""
    r = lat.distances_from(lat.cell_coords(source))
    return float(np.sum(field_values[r > lat.period / 4]) * lat.cell_volume)


def _source_point(lat: Lattice, source) -> np.ndarray:
    return lat.cell_coords(source)


def _probe_mask(lat: Lattice, src_pt, probe_radius):
    return lat.distances_from(src_pt) <= probe_radius * (1 + RADIUS_RTOL)


def _ratio_fit(k, lat, sched, sources, ref_fn, probe_radius, wrap_threshold, dense_cap):
    """Max of ``p / ref`` over sources and probe cells; returns (fit, location, profiles, wrap)."""
    best, loc, profiles, wraps = -math.inf, None, {}, []
    for s in sources:
        pt = _source_point(lat, s)
        src = lat.cell_of(pt)
        p = fundamental_solution(k, lat, sched, src, dense_cap=dense_cap).values
        w = wrap_indicator(p, lat, src)
        wraps.append(w)
        if w > wrap_threshold:
            raise PreconditionError(
                f"wrap-around mass {w:.3e} beyond L/4 exceeds {wrap_threshold}; "
                f"increase L (currently {lat.period}), e.g. to {2 * lat.period}")
        r = lat.distances_from(pt)
        m = _probe_mask(lat, pt, probe_radius)
        ref = ref_fn(r[m])
        ratio = p[m] / ref
        i = int(np.argmax(ratio))
        if ratio[i] > best:
            best = float(ratio[i])
            loc = {"source": pt.tolist(), "x": lat.coords[m][i].tolist(), "distance": float(r[m][i])}
        profiles[f"source{len(profiles)}"] = (r[m], p[m], ref)
    return best, loc, profiles, max(wraps)


def _refined_runs(k, lat, sched, sources, ref_fn, probe_radius, wrap_threshold, dense_cap, refine):
    base, loc, profiles, wrap = _ratio_fit(k, lat, sched, sources, ref_fn, probe_radius, wrap_threshold, dense_cap)
    drift, fits = {}, {"base": base}
    pts = [_source_point(lat, s) for s in sources]
    if refine:
        fine = lat.refine()
        fits["h/2"] = _ratio_fit(k, fine, sched, [fine.cell_of(p) for p in pts], ref_fn,
                                 probe_radius, wrap_threshold, dense_cap)[0]
        fits["tau/2"] = _ratio_fit(k, lat, sched.refine(), sources, ref_fn,
                                   probe_radius, wrap_threshold, dense_cap)[0]
        drift = {key: relative_drift(base, v) for key, v in fits.items() if key != "base"}
    return base, loc, profiles, wrap, drift, fits


def _spread(values) -> float:
    v = np.asarray(values, dtype=float)
    if np.all(v == 0):
        return 1.0
    med = float(np.median(v))
    return float(np.max(v) / med) if med > 0 else math.inf


def _params(k, lat, sched, **extra):
    out = {"kernel": k.tag, "lattice": lat.describe(), "schedule": sched.describe()}
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# global bound


def verify_uhke(k, lat: Lattice, sched: Schedule, sources, refine: bool = True,
                probe_radius: float | None = None, wrap_threshold: float = WRAP_THRESHOLD,
                dense_cap: int = 4096) -> BoundReport:
    """Fit ``c`` in ``p <= c (s-eta)^{-d/alpha}(1 + |x-y|^alpha/(s-eta))^{-(d+alpha)/alpha}``.

    Ratios are taken on cells within ``probe_radius`` (default ``L/8``) of each
    source. Passes iff the fit is finite and drifts by less than 20% under
    ``h -> h/2`` and under ``tau -> tau/2``.

    Raises
    ------
    PreconditionError
        If the kernel violates its upper bound, or the wrap-around mass of a
        column exceeds ``wrap_threshold``.
    """
    ub = check_upper_bound(k)
    if not ub.passed:
        raise PreconditionError(f"kernel violates its upper bound (max ratio {ub.values['max_ratio']})")
    probe_radius = lat.period * PROBE_FRACTION if probe_radius is None else probe_radius
    alpha, d, dt = k.params.alpha, lat.dim, sched.duration
    ref_fn = lambda r: reference_uhke_r(r, dt, alpha, d)
    base, loc, profiles, wrap, drift, fits = _refined_runs(
        k, lat, sched, sources, ref_fn, probe_radius, wrap_threshold, dense_cap, refine)
    passed = math.isfinite(base) and all(v < REFINE_DRIFT for v in drift.values())
    return BoundReport("uhke", _params(k, lat, sched, probe_radius=probe_radius), base, loc, drift, passed,
                       {"fits": fits, "wrap_mass": wrap, "wrap_threshold": wrap_threshold}, profiles)


# ---------------------------------------------------------------------------
# on-diagonal bound


def verify_ondiag(k, lat: Lattice, dts, source=0, eta: float = 0.0, refine: bool = True,
                  rho: float | None = None, dense_cap: int = 4096) -> BoundReport:
    """Fit ``c`` in ``p(x, s; x, eta) <= c (s-eta)^{-d/alpha}`` over a sweep of ``s - eta``.

    Each elapsed time uses :meth:`Schedule.auto`. With ``rho`` the truncated
    kernel is used and ``log(p_rho dt^{d/alpha})`` is regressed on
    ``rho^{-alpha} dt``; the clipped slope is reported as ``c_hat`` and the fit
    is taken on ``p_rho dt^{d/alpha} exp(-c_hat rho^{-alpha} dt)``.
    Passes iff the fit is finite and drifts by less than 20% under ``h -> h/2``.
    """
    kk = truncate(k, rho) if rho is not None else k
    alpha, d = k.params.alpha, lat.dim
    dts = [float(t) for t in dts]
    pt = _source_point(lat, source)

    def products(L_):
        src = L_.cell_of(pt)
        vals = []
        for dt in dts:
            sc = Schedule.auto(kk, L_, eta, eta + dt)
            p = fundamental_solution(kk, L_, sc, src, dense_cap=dense_cap)
            vals.append(p.at(src) * dt ** (d / alpha))
        return np.array(vals)

    def fit(prod):
        c_hat = 0.0
        x = np.array(dts) * (rho ** (-alpha) if rho is not None else 0.0)
        if rho is not None and len(dts) >= 2:
            c_hat = max(0.0, float(np.polyfit(x, np.log(prod), 1)[0]))
        adj = prod * np.exp(-c_hat * x)
        return float(np.max(adj)), int(np.argmax(adj)), c_hat

    prod = products(lat)
    c, i, c_hat = fit(prod)
    drift, fits = {}, {"base": c}
    if refine:
        c_f = fit(products(lat.refine()))[0]
        fits["h/2"] = c_f
        drift["h/2"] = relative_drift(c, c_f)
    selfsim = [abs(prod[j + 1] / prod[j] - 1) for j in range(len(prod) - 1)]
    passed = math.isfinite(c) and all(v < REFINE_DRIFT for v in drift.values())
    name = "ondiag" if rho is None else "ondiag-trunc"
    return BoundReport(
        name, {"kernel": kk.tag, "lattice": lat.describe(), "dts": dts, "eta": eta, "source": pt.tolist()},
        c, {"dt": dts[i]}, drift, passed,
        {"fits": fits, "products": prod.tolist(), "c_hat": c_hat,
         "max_successive_deviation": max(selfsim) if selfsim else 0.0})


# ---------------------------------------------------------------------------
# Meyer decomposition


def meyer_fits(p: np.ndarray, p_rho: np.ndarray, rho: float, dt: float, alpha: float, d: int):
    """Return ``(c1, c2, excluded_cells)``.

    ``c1 = max (p - p_rho)_+ rho^{d+alpha} / dt`` and
    ``c2 = max log(p_rho / p) rho^alpha / dt`` over cells where both exceed ``1e-300``.
    """
    c1 = float(np.max(np.maximum(p - p_rho, 0.0))) * rho ** (d + alpha) / dt
    ok = (p > UNDERFLOW) & (p_rho > UNDERFLOW)
    c2 = float(np.max(np.log(p_rho[ok] / p[ok]))) * rho ** alpha / dt if ok.any() else math.nan
    return c1, max(c2, 0.0), int(np.size(ok) - np.count_nonzero(ok))


def verify_meyer(k, lat: Lattice, sched: Schedule, rhos, source=0, refine_tau: bool = True,
                 dense_cap: int = 4096) -> tuple[BoundReport, BoundReport]:
    """Fit both Meyer constants for each ``rho`` of a sweep.

    Returns the pair of reports for ``p <= p_rho + c1 (s-eta) rho^{-d-alpha}`` and
    ``p_rho <= exp(c2 rho^{-alpha} (s-eta)) p``. Each passes iff every fit is
    finite and ``max / median <= 10`` across the sweep. ``rho`` must be below
    ``L/4`` unless it is at least the torus diameter (then ``p_rho = p``).
    The second report also records the drift of ``c2`` under ``tau -> tau/2``.
    """
    alpha, d, dt = k.params.alpha, lat.dim, sched.duration
    src = lat.flat_index(source)
    for rho in rhos:
        if lat.period / 4 <= rho < lat.diameter:
            raise PreconditionError(f"rho = {rho} must be < L/4 = {lat.period / 4} (or >= the diameter)")

    def run(sc):
        p = fundamental_solution(k, lat, sc, src, dense_cap=dense_cap).values
        out = []
        for rho in rhos:
            p_rho = fundamental_solution(truncate(k, rho), lat, sc, src, dense_cap=dense_cap).values
            out.append(meyer_fits(p, p_rho, rho, dt, alpha, d))
        return out

    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="truncation radius")
        rows = run(sched)
        rows_tau = run(sched.refine()) if refine_tau else None
    c1s = [r[0] for r in rows]
    c2s = [r[1] for r in rows]
    excl = [r[2] for r in rows]
    params = _params(k, lat, sched, rhos=[float(r) for r in rhos], source=src)
    s1, s2 = _spread(c1s), _spread(c2s)
    i1, i2 = int(np.argmax(c1s)), int(np.argmax(c2s))
    drift2 = {}
    if rows_tau is not None:
        drift2 = {"tau/2": relative_drift(max(c2s), max(r[1] for r in rows_tau))}
        growth = (max(r[1] for r in rows_tau) - max(c2s)) / max(c2s) if max(c2s) > 0 else 0.0
    rep1 = BoundReport("meyer-nontrunc-trunc", params, max(c1s), {"rho": float(rhos[i1])}, {},
                       all(math.isfinite(c) for c in c1s) and s1 <= SWEEP_SPREAD,
                       {"per_rho": c1s, "spread": s1})
    rep2 = BoundReport("meyer-trunc-nontrunc", params, max(c2s), {"rho": float(rhos[i2])}, drift2,
                       all(math.isfinite(c) for c in c2s) and s2 <= SWEEP_SPREAD,
                       {"per_rho": c2s, "spread": s2, "excluded_cells": excl,
                        "tau_growth": growth if rows_tau is not None else None})
    return rep1, rep2


# ---------------------------------------------------------------------------
# off-diagonal bound for the truncated kernel


def verify_offdiag_trunc(k, lat: Lattice, sched: Schedule, rho: float, nu: float, sources=(0,),
                         refine: bool = True, probe_radius: float | None = None,
                         dense_cap: int = 4096) -> BoundReport:
    """Fit ``c`` in ``p_rho <= c (s-eta)^{-d/alpha} 2^{r/(12 rho)} a^{-r/(12 rho) + 1/2 + d/(2 alpha)}``.

    Requires ``s - eta <= rho^alpha / (4 nu)``. Passes iff finite and stable
    (< 20% drift) under ``h -> h/2`` and ``tau -> tau/2``.
    """
    alpha, d, dt = k.params.alpha, lat.dim, sched.duration
    if dt > rho ** alpha / (4 * nu) * (1 + 1e-12):
        raise PreconditionError(f"need s - eta <= rho^alpha/(4 nu) = {rho ** alpha / (4 * nu)}")
    kk = truncate(k, rho)
    probe_radius = lat.period * PROBE_FRACTION if probe_radius is None else probe_radius
    ref_fn = lambda r: reference_offdiag_trunc_r(r, dt, rho, nu, alpha, d)
    base, loc, profiles, wrap, drift, fits = _refined_runs(
        kk, lat, sched, list(sources), ref_fn, probe_radius, math.inf, dense_cap, refine)
    passed = math.isfinite(base) and all(v < REFINE_DRIFT for v in drift.values())
    return BoundReport("offdiag-trunc", _params(kk, lat, sched, rho=rho, nu=nu, probe_radius=probe_radius),
                       base, loc, drift, passed, {"fits": fits, "wrap_mass": wrap}, profiles)


# ---------------------------------------------------------------------------
# truncated L-infinity / L^2 estimate


def linfty_l2_sides(lat: Lattice, times, traj, t0: float, x0, R: float, rho: float, alpha: float):
    """Both sides of the truncated L^inf-L^2 inequality on stored time levels.

    LHS: ``sup u`` over ``(t0 - (R/2)^alpha, t0] x B_{R/2}(x0)``.
    RHS without constant: ``(rho/R)^{d/2} R^{-d/2} sup_t ||u(t)||_{L^2(B_{2 rho}(x0))}``
    with ``t`` in ``(t0 - R^alpha, t0]``.
    """
    d = lat.dim
    times = np.asarray(times)
    x0 = np.asarray(x0, dtype=float).reshape(d)
    rr = lat.distances_from(x0)
    inner = rr <= R / 2 * (1 + RADIUS_RTOL)
    outer = rr <= 2 * rho * (1 + RADIUS_RTOL)
    tol = 1e-12 * max(1.0, abs(t0))
    half = (times > t0 - (R / 2) ** alpha + tol) & (times <= t0 + tol)
    full = (times > t0 - R ** alpha + tol) & (times <= t0 + tol)
    if not half.any():
        raise PreconditionError("no stored time level inside the half cylinder; refine the schedule")
    if not inner.any():
        raise PreconditionError("B_{R/2}(x0) contains no cell; refine the lattice")
    lhs = max(float(np.max(traj[i][inner])) for i in np.flatnonzero(half))
    l2 = max(math.sqrt(float(np.sum(traj[i][outer] ** 2)) * lat.cell_volume) for i in np.flatnonzero(full))
    rhs = (rho ** alpha / R ** alpha) ** (d / (2 * alpha)) * R ** (-d / 2) * l2
    return lhs, rhs


def verify_linfty_l2(k, lat: Lattice, sched: Schedule, pairs, u0=None, t0: float | None = None,
                     x0=None) -> BoundReport:
    """Fit ``C`` of the truncated L^inf-L^2 estimate over a sweep of ``(R, rho)`` pairs.

    For each pair the kernel is truncated at ``rho`` and the solution from
    ``u0`` (default: the heat-kernel column at ``x0``) is evolved on ``sched``.
    Requires ``R <= rho/2``, ``R <= t0^{1/alpha}``, ``(t0 - R^alpha, t0]`` inside
    the schedule and ``2 rho < L/2``. Passes iff all fits are finite and
    ``max / median <= 10``.
    """
    alpha, d = k.params.alpha, lat.dim
    t0 = sched.end if t0 is None else float(t0)
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float).reshape(d)
    u_init = delta(lat, lat.cell_of(x0)) if u0 is None else u0
    times = np.concatenate([[sched.start], sched.times])
    rows = []
    for R, rho in pairs:
        if R > rho / 2 * (1 + 1e-12) or R > t0 ** (1 / alpha) * (1 + 1e-12):
            raise PreconditionError(f"need R <= rho/2 and R <= t0^(1/alpha); got R={R}, rho={rho}")
        if t0 - R ** alpha < sched.start - 1e-12 or t0 > sched.end + 1e-12:
            raise PreconditionError("cylinder leaves the schedule")
        if 2 * rho >= lat.period / 2:
            raise PreconditionError("B_{2 rho} wraps around the torus")
        _, traj = evolve(truncate(k, rho), lat, sched, u_init, return_trajectory=True)
        lhs, rhs = linfty_l2_sides(lat, times, traj, t0, x0, R, rho, alpha)
        rows.append({"R": float(R), "rho": float(rho), "lhs": lhs, "rhs": rhs, "C": lhs / rhs if rhs > 0 else math.inf})
    Cs = [r["C"] for r in rows]
    sp = _spread(Cs)
    i = int(np.argmax(Cs))
    return BoundReport("linfty-l2", _params(k, lat, sched, t0=t0, x0=x0.tolist()), float(Cs[i]),
                       {"R": rows[i]["R"], "rho": rows[i]["rho"]}, {},
                       all(math.isfinite(c) for c in Cs) and sp <= SWEEP_SPREAD, {"rows": rows, "spread": sp})


# ---------------------------------------------------------------------------
# Li–Yau computations


def gauss_weierstrass(t, x, d: int = 1):
    """``w(t, x) = t^{-d/2} exp(-|x|^2 / (4t))``; ``x`` has shape ``(..., d)`` (or scalar for d = 1)."""
    x = np.asarray(x, dtype=float)
    r2 = x ** 2 if (d == 1 and (x.ndim == 0 or x.shape[-1] != 1)) else np.sum(x ** 2, axis=-1)
    return t ** (-d / 2) * np.exp(-r2 / (4 * t))


def _central(f, z, delta_):
    return (f(z + delta_) - f(z - delta_)) / (2 * delta_)


def _derivative(f, z, delta_, richardson=True):
    d1 = _central(f, z, delta_)
    if not richardson:
        return d1
    d2 = _central(f, z, delta_ / 2)
    return (4 * d2 - d1) / 3


def li_yau_residual(t: float, x, d: int = 1, delta_: float = 1e-3, richardson: bool = True) -> float:
    """``|grad log w|^2 - d/(2t) - d_t log w`` for the Gauss–Weierstrass kernel, by finite differences.

    Steps are relative: ``delta_ * t`` in time and ``delta_ * max(1, |x|)`` in space.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    logw = lambda tt, xx: -(d / 2) * math.log(tt) - float(np.sum(xx ** 2)) / (4 * tt)
    dt_log = _derivative(lambda tt: logw(tt, x), t, delta_ * t, richardson)
    hx = delta_ * max(1.0, float(np.max(np.abs(x))))
    grad2 = 0.0
    for a in range(d):
        e = np.zeros(d)
        e[a] = 1.0
        g = _derivative(lambda s: logw(t, x + s * e), 0.0, hx, richardson)
        grad2 += g * g
    return grad2 - d / (2 * t) - dt_log


def li_yau_local_check(ts, xs, d: int = 1, delta_: float = 1e-3, tol: float = 1e-8) -> CheckReport:
    """Gauss–Weierstrass Li–Yau residual on a ``(t, x)`` grid; passes iff ``max |residual| <= tol``.

    Also records the step-halving ratio of the plain centered scheme (near 4 for second order).
    """
    ts = [float(t) for t in ts]
    if min(ts) <= 0:
        raise DomainError("t must be positive")
    res, worst = 0.0, None
    for t in ts:
        for x in xs:
            r = abs(li_yau_residual(t, x, d, delta_))
            if r >= res:
                res, worst = r, {"t": t, "x": np.atleast_1d(x).tolist()}
    t_c, x_c = ts[0], np.atleast_1d(xs[-1])
    e1 = abs(li_yau_residual(t_c, x_c, d, 1e-2, richardson=False))
    e2 = abs(li_yau_residual(t_c, x_c, d, 5e-3, richardson=False))
    return CheckReport("li-yau-local", {"d": d, "ts": ts, "n_x": len(xs), "delta": delta_}, res <= tol,
                       {"max_abs_residual": res, "worst_point": worst,
                        "plain_fd_halving_ratio": e1 / e2 if e2 > 0 else math.inf})


def fractional_w(t, r, alpha: float, d: int):
    """Heat kernel of ``(-Delta)^{alpha/2}`` (symbol ``exp(-t|xi|^alpha)``): closed form at ``alpha = 1``."""
    if alpha == 1:
        return cauchy_density(t, r, c=1.0, d=d)
    return stable_density(t, r, alpha, d=d, c=1.0)


def _gamma_at_origin(t, alpha, d, w_fn):
    w0 = float(w_fn(t, 0.0))
    sq0 = math.sqrt(w0)
    surface = 2.0 if d == 1 else 2 * math.pi
    f = lambda r: (sq0 - math.sqrt(max(float(w_fn(t, r)), 0.0))) ** 2 * r ** (-1 - alpha)
    scale = t ** (1 / alpha)
    pieces = [(0.0, scale), (scale, 10 * scale), (10 * scale, 1e3 * scale), (1e3 * scale, math.inf)]
    total, err = 0.0, 0.0
    # convergence is judged from the summed error estimate by the caller
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in pieces:
            v, e = integrate.quad(f, lo, hi, limit=400, epsabs=1e-15, epsrel=1e-11)
            total += v
            err += e
    return surface * total, surface * err, w0


def li_yau_nonlocal_violation(alpha: float = 1.0, d: int = 1, ts=(0.25, 0.5, 1.0, 2.0),
                              delta_: float = 1e-3, floor: float = 1e-6, identity_tol: float = 1e-6) -> CheckReport:
    """Certify that the fractional heat kernel violates the nonlocal Li–Yau inequality at ``x = 0``.

    For each ``t``: (i) ``|d/(alpha t) + d_t log w(t, 0)| <= identity_tol`` by
    Richardson-extrapolated differences; (ii) ``Gamma^alpha(w^{1/2}, w^{1/2})(t, 0)``
    by radial quadrature, required to be at least ``floor * w(t, 0) / t``;
    (iii) the radial identity ``(d/(alpha t)) w + d_t w = -(|x|/(alpha t)) d_r w``
    at a few ``x != 0`` (relative residual recorded).

    Raises
    ------
    PreconditionError
        If the quadrature error estimate exceeds ``1e-6`` of the value.
    """
    if not 0 < alpha < 2:
        raise ParameterError("alpha must lie in (0, 2)")
    w_fn = lambda t, r: float(np.asarray(fractional_w(t, np.asarray(r, dtype=float), alpha, d)))
    rows, ok = [], True
    for t in ts:
        t = float(t)
        ident = d / (alpha * t) + _derivative(lambda tt: math.log(w_fn(tt, 0.0)), t, delta_ * t)
        gam, err, w0 = _gamma_at_origin(t, alpha, d, w_fn)
        if err > 1e-6 * abs(gam):
            raise PreconditionError(f"Gamma quadrature not converged at t = {t}: error {err:.2e} vs value {gam:.2e}")
        radial = []
        for x in (0.5 * t ** (1 / alpha), t ** (1 / alpha), 3 * t ** (1 / alpha)):
            lhs = d / (alpha * t) * w_fn(t, x) + _derivative(lambda tt: w_fn(tt, x), t, delta_ * t)
            rhs = -(x / (alpha * t)) * _derivative(lambda rr: w_fn(t, rr), x, delta_ * x)
            radial.append(abs(lhs - rhs) / abs(rhs))
        row_ok = abs(ident) <= identity_tol and gam >= floor * w0 / t
        ok &= row_ok
        rows.append({"t": t, "identity_residual": ident, "gamma": gam, "gamma_error": err,
                     "gamma_floor": floor * w0 / t, "w0": w0, "radial_identity_rel_residual": max(radial),
                     "violation_certified": row_ok})
    return CheckReport("li-yau-nonlocal", {"alpha": alpha, "d": d, "ts": [float(t) for t in ts]}, ok,
                       {"rows": rows})
