"""Scenario dispatch and artifact writing for ``heatlab run``.

A run writes into its output directory:

``report.json``
    Config echo, version stamp, one JSON record per check, machine-readable
    failure reasons and the overall ``pass`` flag. Byte-identical for an
    identical config and version.
``timing.json``
    Wall-clock seconds per scenario (kept apart so ``report.json`` stays
    deterministic).
``profiles/<check>_<name>.csv``
    Ratio profiles with columns ``distance, p, reference, ratio``.
``plots/<check>_<name>.svg``
    Rendered profiles (see :mod:`heatlab.plots`).
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .aronson import (check_H_inequality, check_weighted_estimate, decay_estimate_check, default_C,
                      outside_ball_data, random_nonnegative_data, search_nu, weight_for, WeightParams)
from .config import ExperimentConfig
from .errors import HeatlabError, PreconditionError
from .kernels import (KernelParams, check_coercivity, check_symmetry, check_upper_bound, make_preset,
                      truncate)
from .lattice import Lattice
from .mixed import (check_mixed_integrals, make_mixed_kernel, make_phi, pure_cross_check, verify_mixed)
from .parallel import pinned_blas, set_workers
from .plots import emit_plots
from .reports import BoundReport, CheckReport, dumps, write_profile_csv
from .semigroup import Schedule
from .verify import (li_yau_local_check, li_yau_nonlocal_violation, verify_linfty_l2, verify_meyer,
                     verify_offdiag_trunc, verify_ondiag, verify_uhke)

REPORT_FILE = "report.json"
TIMING_FILE = "timing.json"
PROFILE_DIR = "profiles"
PLOT_DIR = "plots"

#: x-grid of the local Li–Yau residual check.
LI_YAU_XS = tuple(np.linspace(-3.0, 3.0, 13))


@dataclass
class RunReport:
    """Outcome of one ``heatlab run``."""

    config: dict
    records: list
    failures: list
    passed: bool
    version: str = __version__
    wall_time: dict = field(default_factory=dict)
    profiles: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {"heatlab_version": self.version, "config": self.config, "records": self.records,
                "failures": self.failures, "partial": any("error" in f for f in self.failures),
                "pass": bool(self.passed)}

    @property
    def exit_status(self) -> int:
        return 0 if self.passed else 1


# ---------------------------------------------------------------------------
# construction from a config


@dataclass
class _Setup:
    cfg: ExperimentConfig
    kernel: object
    lattice: Lattice
    schedule: Schedule
    sources: list
    center: np.ndarray

    @property
    def refine(self) -> bool:
        return self.cfg["run"]["refine"]

    @property
    def dense_cap(self) -> int:
        return self.cfg["run"]["dense_cap"]

    def auto_schedule(self, k, start, end) -> Schedule:
        m = self.cfg["schedule"]["m"]
        if m is not None and (start, end) == (self.schedule.start, self.schedule.end):
            return Schedule(start, end, m)
        return Schedule.auto(k, self.lattice, start, end, self.cfg.tau_factor)


def build_setup(cfg: ExperimentConfig) -> _Setup:
    ker, lat_c, sch = cfg["kernel"], cfg["lattice"], cfg["schedule"]
    params = KernelParams(alpha=ker["alpha"], Lambda=ker["Lambda"], lambda_=ker["lambda"],
                          horizon_T=ker["horizon_T"], dim=lat_c["d"])
    opts = {}
    for key in ("aperture", "axis", "period"):
        if ker[key] is not None:
            opts[key] = ker[key]
    k = make_preset(ker["kind"], params, opts)
    lat = Lattice(lat_c["d"], lat_c["h"], lat_c["L"])
    if sch["m"] is not None:
        sched = Schedule(sch["eta"], sch["s"], sch["m"])
    else:
        sched = Schedule.auto(k, lat, sch["eta"], sch["s"], cfg.tau_factor)
    sources = [lat.cell_of(p) for p in cfg["params"]["sources"]]
    c = cfg["params"]["center"]
    center = np.zeros(lat.dim) if c is None else np.asarray(c, dtype=float)
    return _Setup(cfg, k, lat, sched, sources, center)


# ---------------------------------------------------------------------------
# scenarios; each returns a list of CheckReport / BoundReport


def _nu_and_window(st: _Setup, rho: float):
    """``(nu, records, weight)``; ``nu = search`` ties the window to the search result."""
    par = st.cfg["params"]
    alpha = st.kernel.params.alpha
    C = default_C(st.kernel) if par["C"] is None else par["C"]
    eta = st.schedule.start
    if par["nu"] == "search":
        rep = search_nu(st.lattice, st.center, rho, alpha, C, eta=eta, dt_factor=par["dt_factor"])
        if rep.values["nu"] is None:
            return None, [rep], None
        nu = rep.values["nu"]
        return nu, [rep], weight_for(st.center, rho, alpha, nu, eta, par["dt_factor"])
    nu = par["nu"]
    return nu, [], WeightParams(st.center, rho, eta, st.schedule.end, nu, alpha)


def _weight_schedule(st: _Setup, wp: WeightParams, k) -> Schedule:
    if (wp.eta, wp.s) == (st.schedule.start, st.schedule.end):
        return st.schedule
    return Schedule.auto(k, st.lattice, wp.eta, wp.s, st.cfg.tau_factor)


def scenario_uhke(st: _Setup):
    k = st.kernel
    par = st.cfg["params"]
    return [check_upper_bound(k), check_symmetry(k),
            verify_uhke(k, st.lattice, st.schedule, st.sources, refine=st.refine,
                        probe_radius=par["probe_radius"], wrap_threshold=par["wrap_threshold"],
                        dense_cap=st.dense_cap)]


def scenario_ondiag(st: _Setup):
    par = st.cfg["params"]
    dt = st.schedule.duration
    dts = par["dts"] if par["dts"] is not None else (dt / 4, dt / 2, dt)
    out = [verify_ondiag(st.kernel, st.lattice, dts, source=st.sources[0], eta=st.schedule.start,
                         refine=st.refine, dense_cap=st.dense_cap)]
    if par["rho"] is not None:
        out.append(verify_ondiag(st.kernel, st.lattice, dts, source=st.sources[0], eta=st.schedule.start,
                                 refine=st.refine, rho=par["rho"], dense_cap=st.dense_cap))
    return out


def scenario_meyer(st: _Setup):
    return list(verify_meyer(st.kernel, st.lattice, st.schedule, st.cfg["params"]["rhos"],
                             source=st.sources[0], refine_tau=st.refine, dense_cap=st.dense_cap))


def scenario_offdiag_trunc(st: _Setup):
    rho = st.cfg["params"]["rho"]
    nu, out, wp = _nu_and_window(st, rho)
    if wp is None:
        return out
    kk = truncate(st.kernel, rho)
    sched = _weight_schedule(st, wp, kk)
    out.append(verify_offdiag_trunc(st.kernel, st.lattice, sched, rho, nu, sources=st.sources,
                                    refine=st.refine, probe_radius=st.cfg["params"]["probe_radius"],
                                    dense_cap=st.dense_cap))
    return out


def scenario_h_inequality(st: _Setup):
    par = st.cfg["params"]
    rho = par["rho"]
    C = default_C(st.kernel) if par["C"] is None else par["C"]
    nu, out, wp = _nu_and_window(st, rho)
    if wp is not None:
        out.append(check_H_inequality(st.lattice, wp, st.kernel.params.alpha, C))
    return out


def scenario_weighted_estimate(st: _Setup):
    par = st.cfg["params"]
    rho = par["rho"]
    C = default_C(st.kernel) if par["C"] is None else par["C"]
    nu, out, wp = _nu_and_window(st, rho)
    if wp is None:
        return out
    kk = truncate(st.kernel, rho)
    sched = _weight_schedule(st, wp, kk)
    data = [("random", i, u) for i, u in enumerate(random_nonnegative_data(st.lattice, par["n_random"],
                                                                           st.cfg["run"]["seed"]))]
    sigmas = par["sigmas"] if par["sigmas"] is not None else (rho,)
    data += [("outside-ball", s, outside_ball_data(st.lattice, st.center, s, par["width"])) for s in sigmas]
    rows, ok = [], True
    for family, tag, u0 in data:
        if not np.any(u0):
            raise PreconditionError(f"outside-ball data for sigma = {tag} is empty on this torus")
        rep = check_weighted_estimate(kk, st.lattice, sched, u0, wp, C)
        rows.append({"family": family, "id": tag, "max_relative_increase": rep.values["max_relative_increase"],
                     "W_eta": rep.values["W_eta"], "pass": rep.passed})
        ok &= rep.passed
    worst = max(rows, key=lambda r: r["max_relative_increase"])
    out.append(CheckReport("weighted-estimate",
                           {"kernel": kk.tag, "lattice": st.lattice.describe(), "schedule": sched.describe(),
                            "weight": wp.describe(), "C": C, "seed": st.cfg["run"]["seed"]},
                           ok, {"max_relative_increase": worst["max_relative_increase"],
                                "worst": {"family": worst["family"], "id": worst["id"]}, "rows": rows}))
    return out


def scenario_decay(st: _Setup):
    par = st.cfg["params"]
    rho = par["rho"]
    nu, out, wp = _nu_and_window(st, rho)
    if wp is None:
        return out
    kk = truncate(st.kernel, rho)
    sched = _weight_schedule(st, wp, kk)
    out.append(decay_estimate_check(kk, st.lattice, sched, par["sigmas"], st.center, nu, par["width"]))
    return out


def scenario_linfty_l2(st: _Setup):
    par = st.cfg["params"]
    return [verify_linfty_l2(st.kernel, st.lattice, st.schedule, par["pairs"], t0=par["t0"], x0=st.center)]


def scenario_li_yau(st: _Setup):
    par = st.cfg["params"]
    d = st.lattice.dim
    xs = LI_YAU_XS if d == 1 else [np.array([x, 0.5 * x]) for x in LI_YAU_XS]
    return [li_yau_local_check(par["ts"], xs, d=d),
            li_yau_nonlocal_violation(st.kernel.params.alpha, d, par["ts"])]


def scenario_mixed(st: _Setup):
    mc = st.cfg["mixed"]
    d = st.lattice.dim
    if mc["phi"] == "pure":
        phi = make_phi("pure", alpha=mc["alpha"] if mc["alpha"] is not None else st.kernel.params.alpha)
    else:
        phi = make_phi("two-regime", alpha1=mc["alpha1"], alpha2=mc["alpha2"])
    km = make_mixed_kernel(phi, Lambda=mc["Lambda"], d=d, horizon_T=st.kernel.params.horizon_T)
    sched = st.auto_schedule(km, st.schedule.start, st.schedule.end)
    par = st.cfg["params"]
    out = [phi.check_scaling(), check_mixed_integrals(km, phi, mc["Rs"]),
           verify_mixed(km, st.lattice, sched, st.sources, refine=st.refine,
                        probe_radius=par["probe_radius"], wrap_threshold=par["wrap_threshold"],
                        dense_cap=st.dense_cap)]
    if mc["cross_check"]:
        out.append(pure_cross_check(st.kernel.params.alpha, st.lattice, st.schedule, st.sources,
                                    Lambda=st.kernel.params.Lambda, refine=st.refine))
    return out


def scenario_coercivity(st: _Setup):
    par = st.cfg["params"]
    r = par["ball_radius"] if par["ball_radius"] is not None else st.lattice.period / 8
    t = par["t"] if par["t"] is not None else st.schedule.end
    return [check_coercivity(st.kernel, st.lattice, r, t)]


SCENARIO_FUNCS = {
    "uhke": scenario_uhke,
    "ondiag": scenario_ondiag,
    "meyer": scenario_meyer,
    "offdiag-trunc": scenario_offdiag_trunc,
    "h-inequality": scenario_h_inequality,
    "weighted-estimate": scenario_weighted_estimate,
    "decay": scenario_decay,
    "linfty-l2": scenario_linfty_l2,
    "li-yau": scenario_li_yau,
    "mixed": scenario_mixed,
    "coercivity": scenario_coercivity,
}


# ---------------------------------------------------------------------------
# driver


def _failure_reason(rec: dict) -> str:
    for key in ("reason", "message"):
        if key in rec:
            return str(rec[key])
    if "refinement_drift" in rec and rec["refinement_drift"]:
        return "threshold not met (fitted constant, drift or sweep spread)"
    return "threshold not met"


def run(cfg: ExperimentConfig, threads: int | None = 1) -> RunReport:
    """Execute every scenario of ``cfg`` and collect the records.

    Module refusals (:class:`~heatlab.errors.HeatlabError`) become failed records
    carrying the error type and message; the remaining scenarios still run.
    ``threads`` caps the worker pool and never changes the numbers.
    """
    set_workers(threads)
    records, failures, profiles, timing = [], [], {}, {}
    with pinned_blas(), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        st = build_setup(cfg)
        for name in cfg.scenarios:
            t0 = time.perf_counter()
            try:
                reps = SCENARIO_FUNCS[name](st)
            except HeatlabError as e:
                rec = {"scenario": name, "check": name, "error": type(e).__name__, "message": str(e),
                       "pass": False}
                records.append(rec)
                failures.append({"scenario": name, "check": name, "error": type(e).__name__,
                                 "reason": str(e)})
                timing[name] = time.perf_counter() - t0
                continue
            for rep in reps:
                rec = {"scenario": name, **rep.to_dict()}
                records.append(rec)
                if not rep.passed:
                    failures.append({"scenario": name, "check": rec["check"], "reason": _failure_reason(rec)})
                if isinstance(rep, BoundReport):
                    for pname, prof in rep.profiles.items():
                        profiles[f"{rep.check}_{pname}"] = prof
            timing[name] = time.perf_counter() - t0
    return RunReport(cfg.echo(), records, failures, not failures, wall_time=timing, profiles=profiles)


def write_outputs(report: RunReport, out_dir, plots: bool = True) -> Path:
    """Write ``report.json``, ``timing.json``, profile CSVs and (optionally) SVG plots into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / PROFILE_DIR).mkdir(exist_ok=True)
    for name in sorted(report.profiles):
        r, p, ref = report.profiles[name]
        write_profile_csv(out / PROFILE_DIR / f"{name}.csv", r, p, ref)
    data = report.to_dict()
    data["profiles"] = [f"{PROFILE_DIR}/{n}.csv" for n in sorted(report.profiles)]
    (out / REPORT_FILE).write_text(dumps(data))
    (out / TIMING_FILE).write_text(dumps({"wall_time_seconds": report.wall_time,
                                          "total": math.fsum(report.wall_time.values())}))
    if plots and report.profiles:
        emit_plots(out)
    return out
