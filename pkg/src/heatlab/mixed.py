"""Mixed-type kernels built from a weak scaling function, on Euclidean space.

With Lebesgue volume ``mu(B_r) = omega_d r^d`` (``omega_1 = 2``, ``omega_2 = pi``)
a scale function ``phi`` defines the kernel

    k(x, y) = Lambda / (omega_d r^d phi(r)),   r = |x - y|,

and the heat-kernel reference

    min( mu(B_{phi^{-1}(dt)})^{-1},  dt / (mu(B_r) phi(r)) ).

Radial integrals use ``int_{R^d} f(|z|) dz = d omega_d int_0^inf f(r) r^{d-1} dr``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError, ParameterError, PreconditionError
from .kernels import JumpKernel, KernelParams, check_upper_bound, make_preset
from .lattice import RADIUS_RTOL, Lattice
from .reports import BoundReport, CheckReport, relative_drift
from .semigroup import Schedule, delta, evolve
from .verify import (PROBE_FRACTION, REFINE_DRIFT, SWEEP_SPREAD, WRAP_THRESHOLD, _params, _refined_runs,
                     _spread, reference_uhke_r, verify_uhke)

OMEGA = {1: 2.0, 2: math.pi}
QUAD_RTOL = 1e-10


def ball_volume(r, d: int):
    """``omega_d r^d``."""
    return OMEGA[d] * np.asarray(r, dtype=float) ** d


@dataclass(frozen=True)
class ScaleFunction:
    """Strictly increasing ``phi`` with ``phi(0) = 0`` and ``phi(1) = 1``.

    ``kind='pure'``: ``r^alpha1``. ``kind='two-regime'``: ``r^alpha1`` on ``[0, 1]`` and
    ``r^alpha2`` beyond. Both satisfy the weak scaling condition with ``C_scale = 1``.
    """

    kind: str
    alpha1: float
    alpha2: float
    C_scale: float = 1.0

    def __post_init__(self):
        for a in (self.alpha1, self.alpha2):
            if not 0 < a < 2:
                raise ParameterError(f"scaling exponent out of (0,2): {a}")
        if self.alpha1 > self.alpha2:
            raise ParameterError("need alpha1 <= alpha2")
        if self.kind == "pure" and self.alpha1 != self.alpha2:
            raise ParameterError("pure scale function has a single exponent")
        if self.kind not in ("pure", "two-regime"):
            raise ParameterError(f"unknown scale function kind {self.kind!r}")

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise DomainError("phi is defined for r >= 0")
        return np.where(r <= 1, r ** self.alpha1, r ** self.alpha2)

    __call__ = evaluate

    def inverse(self, t):
        """``phi^{-1}`` in closed form per branch (``phi(1) = 1`` is the seam)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("phi^{-1} is defined for t >= 0")
        return np.where(t <= 1, t ** (1 / self.alpha1), t ** (1 / self.alpha2))

    @property
    def breakpoints(self) -> tuple:
        return () if self.kind == "pure" else (1.0,)

    def tag(self) -> str:
        if self.kind == "pure":
            return f"pure(alpha={self.alpha1})"
        return f"two-regime(alpha1={self.alpha1},alpha2={self.alpha2})"

    def check_scaling(self, n: int = 41) -> CheckReport:
        """Verify ``C^{-1}(R/r)^{a1} <= phi(R)/phi(r) <= C (R/r)^{a2}`` and the inverse round trip on a dyadic grid."""
        r = 2.0 ** np.linspace(-10, 10, n)
        rr, RR = np.meshgrid(r, r, indexing="ij")
        m = rr <= RR
        q = (self.evaluate(RR) / self.evaluate(rr))[m]
        lo = (RR / rr)[m] ** self.alpha1 / self.C_scale
        hi = (RR / rr)[m] ** self.alpha2 * self.C_scale
        tol = 1e-12
        ok_scale = bool(np.all(q >= lo * (1 - tol)) and np.all(q <= hi * (1 + tol)))
        roundtrip = float(np.max(np.abs(self.inverse(self.evaluate(r)) / r - 1)))
        return CheckReport("phi-scaling", {"phi": self.tag(), "C_scale": self.C_scale}, ok_scale and roundtrip <= 1e-12,
                           {"roundtrip_max_rel_error": roundtrip, "scaling_ok": ok_scale})


def make_phi(kind: str, alpha: float | None = None, alpha1: float | None = None,
             alpha2: float | None = None) -> ScaleFunction:
    """``make_phi('pure', alpha=1)`` or ``make_phi('two-regime', alpha1=0.5, alpha2=1.5)``.

    >>> float(make_phi("two-regime", alpha1=0.5, alpha2=1.5)(4.0))
    8.0
    """
    if kind == "pure":
        if alpha is None:
            raise ParameterError("pure scale function needs alpha")
        return ScaleFunction("pure", alpha, alpha)
    if kind == "two-regime":
        if alpha1 is None or alpha2 is None:
            raise ParameterError("two-regime scale function needs alpha1 and alpha2")
        return ScaleFunction("two-regime", alpha1, alpha2)
    raise ParameterError(f"unknown scale function kind {kind!r}")


def make_mixed_kernel(phi: ScaleFunction, Lambda: float = 1.0, d: int = 1, horizon_T: float = 10.0) -> JumpKernel:
    """Time-independent kernel ``Lambda / (omega_d r^d phi(r))`` saturating its own upper bound.

    The declared ``alpha`` of the returned kernel is ``phi.alpha1``.
    """
    params = KernelParams(alpha=phi.alpha1, Lambda=Lambda, horizon_T=horizon_T, dim=d)

    def bound(r):
        return Lambda / (ball_volume(r, d) * phi(r))

    def f(t, x, y):
        return bound(np.sqrt(np.sum((y - x) ** 2, axis=-1)))

    return JumpKernel(params, "mixed-phi", f, bound=bound, phi=phi, options={"phi": phi.tag()})


def mixed_integrals(phi: ScaleFunction, Lambda: float, d: int, R: float):
    """Quadrature of ``int_{B_R} |z|^2 k`` and ``int_{B_R^c} k``; returns ``(I1, I2, err1, err2)``."""
    c = d * Lambda
    pts = [b for b in phi.breakpoints if 0 < b < R]
    f1 = lambda r: r / float(phi(r)) if r > 0 else 0.0
    I1, e1 = integrate.quad(f1, 0.0, R, points=pts or None, limit=200, epsabs=0, epsrel=1e-13)
    f2 = lambda r: 1.0 / (r * float(phi(r)))
    I2, e2 = 0.0, 0.0
    edges = [R] + [b for b in phi.breakpoints if b > R]
    for lo, hi in zip(edges, edges[1:] + [math.inf]):
        v, e = integrate.quad(f2, lo, hi, limit=200, epsabs=0, epsrel=1e-13)
        I2 += v
        e2 += e
    return c * I1, c * I2, c * e1, c * e2


def mixed_integrals_pure(alpha: float, Lambda: float, d: int, R: float):
    """Closed forms ``d Lambda R^{2-alpha}/(2-alpha)`` and ``d Lambda/(alpha R^alpha)`` for ``phi = r^alpha``."""
    return d * Lambda * R ** (2 - alpha) / (2 - alpha), d * Lambda / (alpha * R ** alpha)


def check_mixed_integrals(k: JumpKernel, phi: ScaleFunction, Rs) -> CheckReport:
    """Fit ``c1 = I1 phi(R)/R^2`` and ``c2 = I2 phi(R)`` over a sweep of ``R``.

    Passes iff all fits are finite and each has ``max / median <= 10``. For a
    pure ``phi`` the quadrature is compared with the closed forms.

    Raises
    ------
    PreconditionError
        If a quadrature error estimate exceeds ``1e-10`` of its value.
    """
    Lam, d = k.params.Lambda, k.dim
    rows = []
    for R in Rs:
        R = float(R)
        I1, I2, e1, e2 = mixed_integrals(phi, Lam, d, R)
        if e1 > QUAD_RTOL * I1 or e2 > QUAD_RTOL * I2:
            raise PreconditionError(f"radial quadrature not converged at R = {R}")
        row = {"R": R, "I1": I1, "I2": I2, "c1": I1 * float(phi(R)) / R ** 2, "c2": I2 * float(phi(R))}
        if phi.kind == "pure":
            J1, J2 = mixed_integrals_pure(phi.alpha1, Lam, d, R)
            row["closed_form_rel_error"] = max(abs(I1 / J1 - 1), abs(I2 / J2 - 1))
        rows.append(row)
    c1 = [r["c1"] for r in rows]
    c2 = [r["c2"] for r in rows]
    drifts = [max(relative_drift(a["c1"], b["c1"]), relative_drift(a["c2"], b["c2"])) for a, b in zip(rows, rows[1:])]
    values = {"rows": rows, "spread_c1": _spread(c1), "spread_c2": _spread(c2),
              "max_consecutive_drift": max(drifts) if drifts else 0.0}
    if phi.kind == "pure":
        values["max_closed_form_rel_error"] = max(r["closed_form_rel_error"] for r in rows)
    ok = all(math.isfinite(c) for c in c1 + c2) and values["spread_c1"] <= SWEEP_SPREAD and values["spread_c2"] <= SWEEP_SPREAD
    return CheckReport("mixed-integrals", {"kernel": k.tag, "Rs": [float(R) for R in Rs]}, ok, values)


def reference_mixed_r(r, dt: float, phi: ScaleFunction, d: int):
    """``min(mu(B_{phi^{-1}(dt)})^{-1}, dt / (mu(B_r) phi(r)))``; the second term is ``inf`` at ``r = 0``."""
    if not dt > 0:
        raise DomainError("elapsed time must be positive")
    r = np.asarray(r, dtype=float)
    on = 1.0 / ball_volume(phi.inverse(dt), d)
    with np.errstate(divide="ignore"):
        off = np.where(r > 0, dt / (ball_volume(r, d) * phi(r)), np.inf)
    return np.minimum(on, off)


def reference_mixed(x, y, dt: float, phi: ScaleFunction, d: int):
    z = np.atleast_1d(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
    return reference_mixed_r(np.sqrt(np.sum(z ** 2, axis=-1)), dt, phi, d)


def volume_factor_bounds(alpha: float, d: int) -> tuple[float, float]:
    """Range of ``reference_uhke / reference_mixed`` for ``phi = r^alpha``: ``[omega_d 2^{-(d+alpha)/alpha}, omega_d]``."""
    return OMEGA[d] * 2.0 ** (-(d + alpha) / alpha), OMEGA[d]


def linfty_l1_fit(k: JumpKernel, lat: Lattice, sched: Schedule, source, phi: ScaleFunction) -> dict:
    """``C2 = sup p * mu(B_R)`` over ``(s - phi(R/2), s] x B_{R/2}(source)`` with ``R = phi^{-1}(s - eta)``.

    Mass is one at every step, so this is the constant of the L^inf-L^1 estimate
    applied to a heat-kernel column.
    """
    d = lat.dim
    R = float(phi.inverse(sched.duration))
    src = lat.flat_index(source)
    pt = lat.cell_coords(src)
    _, traj = evolve(k, lat, sched, delta(lat, src), return_trajectory=True)
    times = np.concatenate([[sched.start], sched.times])
    half_t = times > sched.end - float(phi(R / 2)) + 1e-12
    ball = lat.distances_from(pt) <= R / 2 * (1 + RADIUS_RTOL)
    if not ball.any():
        raise PreconditionError("B_{R/2} contains no cell; refine the lattice")
    sup = max(float(np.max(traj[i][ball])) for i in np.flatnonzero(half_t))
    masses = [float(np.sum(v) * lat.cell_volume) for v in traj]
    return {"R": R, "sup": sup, "C2": sup * float(ball_volume(R, d)), "max_mass": max(masses),
            "steps_in_half_cylinder": int(half_t.sum())}


def verify_mixed(k: JumpKernel, lat: Lattice, sched: Schedule, sources, refine: bool = True,
                 probe_radius: float | None = None, wrap_threshold: float = WRAP_THRESHOLD,
                 dense_cap: int = 4096) -> BoundReport:
    """Fit ``c`` in ``p <= c min(mu(B_{phi^{-1}(dt)})^{-1}, dt/(mu(B_r) phi(r)))``.

    Passes iff the fit is finite, drifts by less than 20% under ``h -> h/2`` and
    ``tau -> tau/2``, and the L^inf-L^1 constant is finite for every source.
    """
    phi = k.phi
    if phi is None:
        raise ParameterError("verify_mixed needs a mixed-type kernel")
    ub = check_upper_bound(k)
    if not ub.passed:
        raise PreconditionError(f"kernel violates its upper bound (max ratio {ub.values['max_ratio']})")
    probe_radius = lat.period * PROBE_FRACTION if probe_radius is None else probe_radius
    d, dt = lat.dim, sched.duration
    ref_fn = lambda r: reference_mixed_r(r, dt, phi, d)
    base, loc, profiles, wrap, drift, fits = _refined_runs(
        k, lat, sched, list(sources), ref_fn, probe_radius, wrap_threshold, dense_cap, refine)
    l1 = [linfty_l1_fit(k, lat, sched, s, phi) for s in sources]
    ok_l1 = all(math.isfinite(r["C2"]) for r in l1)
    passed = math.isfinite(base) and all(v < REFINE_DRIFT for v in drift.values()) and ok_l1
    return BoundReport("mixed", _params(k, lat, sched, phi=phi.tag(), probe_radius=probe_radius), base, loc, drift,
                       passed, {"fits": fits, "wrap_mass": wrap, "linfty_l1": l1,
                                "linfty_l1_C2": max(r["C2"] for r in l1)}, profiles)


def pure_cross_check(alpha: float, lat: Lattice, sched: Schedule, sources, Lambda: float = 1.0,
                     refine: bool = True, tol: float = 0.20) -> CheckReport:
    """Compare the mixed and fractional pipelines on the same kernel.

    With ``phi = r^alpha`` and mixed constant ``omega_d Lambda`` the mixed kernel
    equals ``Lambda |z|^{-d-alpha}``. The two fitted constants then satisfy
    ``c_mixed / c_uhke`` in :func:`volume_factor_bounds`; the check allows
    ``tol`` relative slack on that interval and requires identical verdicts.
    """
    d = lat.dim
    phi = make_phi("pure", alpha=alpha)
    km = make_mixed_kernel(phi, Lambda=OMEGA[d] * Lambda, d=d)
    kf = make_preset("fractional", KernelParams(alpha=alpha, Lambda=Lambda, dim=d))
    rm = verify_mixed(km, lat, sched, sources, refine=refine)
    ru = verify_uhke(kf, lat, sched, sources, refine=refine)
    q = rm.fitted_constant / ru.fitted_constant
    lo, hi = volume_factor_bounds(alpha, d)
    ok = (lo / (1 + tol) <= q <= hi * (1 + tol)) and rm.passed == ru.passed
    return CheckReport("mixed-pure-cross-check", {"alpha": alpha, "lattice": lat.describe(), "schedule": sched.describe()},
                       ok, {"c_mixed": rm.fitted_constant, "c_uhke": ru.fitted_constant, "ratio": q,
                            "volume_factor_range": [lo, hi], "tolerance": tol,
                            "mixed_pass": rm.passed, "uhke_pass": ru.passed})
