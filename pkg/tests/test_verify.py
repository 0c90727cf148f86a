import math

import numpy as np
import pytest

from heatlab.errors import DomainError, ParameterError, PreconditionError
from heatlab.kernels import KernelParams, custom_kernel, make_preset
from heatlab.lattice import Lattice
from heatlab.semigroup import Schedule
from heatlab.verify import (gauss_weierstrass, li_yau_local_check, li_yau_nonlocal_violation, li_yau_residual,
                            linfty_l2_sides, reference_offdiag_trunc_r, reference_uhke, reference_uhke_r,
                            verify_linfty_l2, verify_meyer, verify_offdiag_trunc, verify_ondiag, verify_uhke,
                            wrap_indicator)

# run geometry shared with the smoke preset
LAT = Lattice(1, 0.125, 32.0)


@pytest.fixture(scope="module")
def frac():
    return make_preset("fractional", KernelParams(alpha=1.0))


@pytest.fixture(scope="module")
def sched(frac):
    return Schedule.auto(frac, LAT, 0.0, 1.0)


# ---------------------------------------------------------------------------
# references


def test_reference_uhke_values():
    assert float(reference_uhke(0.0, 1.0, 1.0, 1.0, 1)) == pytest.approx(0.25)
    assert float(reference_uhke([0.0, 0.0], [0.0, 0.0], 0.5, 1.5, 2)) == pytest.approx(0.5 ** (-2 / 1.5))
    # far field: dt |x - y|^{-d-alpha}
    r, dt = 1e8, 0.3
    assert float(reference_uhke_r(r, dt, 0.7, 1)) == pytest.approx(dt * r ** -1.7, rel=1e-5)
    with pytest.raises(DomainError):
        reference_uhke_r(1.0, 0.0, 1.0, 1)


def test_offdiag_reference_weaker_than_ondiag_at_zero():
    dt, rho, nu = 0.1, 2.0, 2.0
    a = rho / (nu * dt)
    val = float(reference_offdiag_trunc_r(0.0, dt, rho, nu, 1.0, 1))
    assert val == pytest.approx(dt ** -1 * a ** 1.0)
    assert val > float(reference_uhke_r(0.0, dt, 1.0, 1))


def test_wrap_indicator_uniform():
    u = np.ones(LAT.shape) / LAT.period
    assert wrap_indicator(u, LAT, 0) == pytest.approx(0.5, abs=LAT.spacing / LAT.period)


# ---------------------------------------------------------------------------
# global bound


def test_uhke_baseline(frac, sched):
    rep = verify_uhke(frac, LAT, sched, [0])
    assert rep.passed
    assert rep.fitted_constant == pytest.approx(1.0689515782361259, rel=1e-9)
    assert set(rep.refinement_drift) == {"h/2", "tau/2"}
    assert all(v < 0.2 for v in rep.refinement_drift.values())
    d = rep.to_dict()
    assert list(d) == ["check", "params", "fitted_constant", "max_ratio_location", "refinement_drift",
                       "details", "pass"]


def test_uhke_sources_translation_invariant(frac, sched):
    a = verify_uhke(frac, LAT, sched, [0], refine=False)
    b = verify_uhke(frac, LAT, sched, [77], refine=False)
    assert a.fitted_constant == pytest.approx(b.fitted_constant, rel=1e-10)


def test_uhke_wrap_guard(frac):
    small = Lattice(1, 0.125, 4.0)
    with pytest.raises(PreconditionError, match="wrap-around"):
        verify_uhke(frac, small, Schedule.auto(frac, small, 0.0, 1.0), [0], refine=False)


def test_uhke_rejects_kernel_above_bound():
    p = KernelParams(alpha=1.0)
    base = make_preset("fractional", p)
    k = custom_kernel(p, lambda t, x, y: 2 * base.func(t, x, y), translation_invariant=True,
                      time_dependent=False)
    with pytest.raises(PreconditionError):
        verify_uhke(k, LAT, Schedule(0.0, 1.0, 4), [0], refine=False)


# ---------------------------------------------------------------------------
# on-diagonal bound


def test_ondiag_baseline_and_self_similarity(frac):
    rep = verify_ondiag(frac, LAT, [0.25, 0.5, 1.0])
    assert rep.passed
    assert rep.fitted_constant == pytest.approx(0.13005058748658516, rel=1e-9)
    assert rep.details["max_successive_deviation"] <= 0.10
    assert np.all(np.isfinite(rep.details["products"]))


def test_ondiag_truncated_variant(frac):
    rep = verify_ondiag(frac, LAT, [0.25, 0.5, 1.0], rho=2.0)
    assert rep.check == "ondiag-trunc" and rep.passed
    assert rep.details["c_hat"] >= 0
    prods = np.array(rep.details["products"])
    x = np.array([0.25, 0.5, 1.0]) / 2.0
    assert rep.fitted_constant == pytest.approx(np.max(prods * np.exp(-rep.details["c_hat"] * x)))


# ---------------------------------------------------------------------------
# Meyer decomposition


def test_meyer_baseline(frac, sched):
    r1, r2 = verify_meyer(frac, LAT, sched, [1.0, 2.0, 4.0])
    assert r1.passed and r2.passed
    assert r1.fitted_constant == pytest.approx(0.18637027861375224, rel=1e-9)
    assert r2.fitted_constant == pytest.approx(1.2282826146480512, rel=1e-9)
    assert r1.details["spread"] <= 10 and r2.details["spread"] <= 10
    # c2 does not grow by more than 20% when tau is halved
    assert r2.details["tau_growth"] <= 0.2


def test_meyer_beyond_diameter_is_exactly_zero(frac, sched):
    r1, r2 = verify_meyer(frac, LAT, sched, [100.0], refine_tau=False)
    assert r1.fitted_constant == 0.0 and r2.fitted_constant == 0.0


def test_meyer_refuses_wrapping_radius(frac, sched):
    with pytest.raises(PreconditionError):
        verify_meyer(frac, LAT, sched, [10.0])


# ---------------------------------------------------------------------------
# truncated off-diagonal bound


def test_offdiag_trunc_baseline(frac):
    sched = Schedule.auto(frac, LAT, 0.0, 0.125)
    rep = verify_offdiag_trunc(frac, LAT, sched, 2.0, 2.0)
    assert rep.passed
    assert rep.fitted_constant == pytest.approx(0.021967889890960907, rel=1e-9)
    assert rep.refinement_drift["h/2"] < 0.2


def test_offdiag_trunc_precondition(frac, sched):
    with pytest.raises(PreconditionError):
        verify_offdiag_trunc(frac, LAT, sched, 2.0, 2.0)


# ---------------------------------------------------------------------------
# L-infinity / L^2


def test_linfty_l2_constant_closed_form(frac, sched):
    rep = verify_linfty_l2(frac, LAT, sched, [(1.0, 2.0)], u0=np.ones(LAT.shape))
    cells = np.sum(LAT.distances_from([0.0]) <= 4.0 * (1 + 1e-12))
    expected = 1.0 / ((2.0 / 1.0) ** 0.5 * 1.0 ** -0.5 * math.sqrt(cells * LAT.spacing))
    assert rep.fitted_constant == pytest.approx(expected, rel=1e-10)


def test_linfty_l2_baseline(frac, sched):
    rep = verify_linfty_l2(frac, LAT, sched, [(0.5, 1.0), (1.0, 2.0), (1.0, 4.0)])
    assert rep.passed
    assert rep.fitted_constant == pytest.approx(0.31663424948072416, rel=1e-9)
    assert rep.details["spread"] <= 10


@pytest.mark.parametrize("pair", [(2.0, 2.0), (1.5, 4.0), (1.0, 10.0)])
def test_linfty_l2_preconditions(frac, sched, pair):
    with pytest.raises(PreconditionError):
        verify_linfty_l2(frac, LAT, sched, [pair])


def test_linfty_l2_sides_need_time_levels():
    traj = [np.ones(LAT.shape)] * 2
    with pytest.raises(PreconditionError):
        linfty_l2_sides(LAT, [0.0, 1.0], traj, 0.5, [0.0], 0.1, 1.0, 1.0)


# ---------------------------------------------------------------------------
# Li–Yau


def test_gauss_weierstrass_values():
    assert float(gauss_weierstrass(2.0, 0.0)) == pytest.approx(2 ** -0.5)
    assert float(gauss_weierstrass(1.0, np.array([1.0, 1.0]), d=2)) == pytest.approx(math.exp(-0.5))


@pytest.mark.parametrize("d", [1, 2])
def test_li_yau_local(d):
    xs = [np.full(d, x) for x in np.linspace(-3, 3, 7)]
    rep = li_yau_local_check([0.25, 1.0, 4.0], xs, d=d)
    assert rep.passed
    assert rep.values["max_abs_residual"] <= 1e-8
    assert rep.values["plain_fd_halving_ratio"] == pytest.approx(4.0, rel=0.02)


def test_li_yau_residual_at_center_is_zero():
    assert abs(li_yau_residual(0.5, 0.0)) < 1e-10


def test_li_yau_nonlocal_alpha1():
    rep = li_yau_nonlocal_violation(1.0, 1, (0.25, 0.5, 1.0, 2.0))
    assert rep.passed
    for row in rep.values["rows"]:
        assert abs(row["identity_residual"]) <= 1e-6
        assert row["gamma"] >= row["gamma_floor"] > 0
        assert row["radial_identity_rel_residual"] <= 1e-6
        assert row["w0"] == pytest.approx(1 / (math.pi * row["t"]))


@pytest.mark.parametrize("alpha,d", [(0.5, 1), (1.5, 1), (1.0, 2)])
def test_li_yau_nonlocal_other_orders(alpha, d):
    assert li_yau_nonlocal_violation(alpha, d, (0.5, 1.0)).passed


def test_li_yau_validation():
    with pytest.raises(DomainError):
        li_yau_local_check([0.0], [0.0])
    with pytest.raises(ParameterError):
        li_yau_nonlocal_violation(2.0)
