import math

import numpy as np
import pytest

from heatlab.aronson import (DT_FACTOR, NU_CAP, WeightParams, carre_du_champ_trunc, check_H_inequality,
                             check_weighted_estimate, dH_dt, decay_estimate_check, decay_rhs, default_C,
                             outside_ball_data, random_nonnegative_data, search_nu, weight_H, weight_for,
                             weighted_energy)
from heatlab.errors import DomainError, ParameterError, PreconditionError
from heatlab.kernels import KernelParams, make_preset, truncate
from heatlab.lattice import Lattice
from heatlab.semigroup import Schedule

LAT = Lattice(1, 0.05, 40.0)


@pytest.fixture(scope="module")
def k_trunc():
    return truncate(make_preset("fractional", KernelParams(alpha=1.0)), 2.0)


# ---------------------------------------------------------------------------
# truncated carre du champ


def test_gamma_single_cell_example():
    lat = Lattice(1, 1.0, 16.0)
    f = np.zeros(lat.shape)
    f[0] = 1.0
    gam = carre_du_champ_trunc(lat, f, 1.0, 2.5)
    # neighbours at distance 1, 1, 2, 2 inside rho = 2.5
    assert gam[0] == pytest.approx(1 + 1 + 0.25 + 0.25)


def test_gamma_brute_force_2d():
    lat = Lattice(2, 0.5, 6.0)
    f = np.random.default_rng(0).random(lat.shape)
    rho, alpha = 1.2, 0.8
    pts = lat.coords.reshape(-1, 2)
    fv = f.ravel()
    i = 17
    r = lat.distances_from(pts[i]).ravel()
    m = (r > 0) & (r <= rho)
    brute = np.sum((fv[i] - fv[m]) ** 2 * r[m] ** (-2 - alpha)) * lat.cell_volume
    assert carre_du_champ_trunc(lat, f, alpha, rho).ravel()[i] == pytest.approx(brute, rel=1e-10)


def test_gamma_constant_and_scaling():
    lat = Lattice(1, 0.25, 16.0)
    f = np.random.default_rng(1).random(lat.shape)
    assert np.allclose(carre_du_champ_trunc(lat, np.full(lat.shape, 4.0), 1.0, 2.0), 0, atol=1e-12)
    assert np.allclose(carre_du_champ_trunc(lat, 3 * f, 1.0, 2.0), 9 * carre_du_champ_trunc(lat, f, 1.0, 2.0))


def test_gamma_radius_domain():
    lat = Lattice(1, 0.25, 16.0)
    with pytest.raises(DomainError):
        carre_du_champ_trunc(lat, np.ones(lat.shape), 1.0, 8.0)


# ---------------------------------------------------------------------------
# the weight


def test_weight_params_validation():
    with pytest.raises(ParameterError):
        WeightParams([0.0], 2.0, 0.0, 0.1, 1.0, 1.0)
    with pytest.raises(PreconditionError):
        WeightParams([0.0], 2.0, 0.0, 1.0, 2.0, 1.0)
    wp = WeightParams([0.0], 2.0, 0.0, 0.25, 2.0, 1.0)
    assert wp.base(0.0) == pytest.approx(2.0 / (2 * 2.0 * 0.25))


def test_weight_branches():
    rho, nu, s = 2.0, 2.0, 0.2
    wp = WeightParams([0.0], rho, 0.0, s, nu, 1.0)
    lat = Lattice(1, 0.5, 40.0)
    r = lat.distances_from([0.0])
    for t in (0.0, 0.1, 0.2):
        H = weight_H(lat, wp, t)
        a = rho / (nu * (2 * s - t))
        assert np.allclose(H[r <= 3 * rho], 1 / a)
    H0 = weight_H(lat, wp, 0.0)
    i = int(np.argmin(np.abs(r - 6 * rho)))
    assert H0[i] == pytest.approx((rho / (2 * nu * s)) ** -2)


def test_weight_monotone_in_distance_and_time():
    wp = weight_for([0.0], 2.0, 1.0, 2.0)
    lat = Lattice(1, 0.5, 40.0)
    r = lat.distances_from([0.0])
    order = np.argsort(r, kind="stable")
    ts = np.linspace(wp.eta, wp.s, 9)
    Hs = [weight_H(lat, wp, t) for t in ts]
    for H in Hs:
        assert np.all(np.diff(H[order]) <= 1e-15)
        assert np.all((H > 0) & (H <= 1))
    # H decreases in t everywhere (strictly outside 3 rho as well as inside)
    for H1, H2 in zip(Hs, Hs[1:]):
        assert np.all(H2 < H1)


def test_dH_dt_matches_finite_difference():
    wp = weight_for([0.0], 2.0, 1.0, 3.0)
    lat = Lattice(1, 0.25, 40.0)
    t, e = 0.5 * (wp.eta + wp.s), 1e-6
    fd = (weight_H(lat, wp, t + e) - weight_H(lat, wp, t - e)) / (2 * e)
    assert np.allclose(dH_dt(lat, wp, t), fd, rtol=1e-6, atol=1e-12)
    r = lat.distances_from([0.0])
    inner = r < 3 * wp.rho
    assert np.allclose(dH_dt(lat, wp, t)[inner], -wp.nu / wp.rho)


def test_case1_interior_has_zero_gamma():
    wp = weight_for([0.0], 2.0, 1.0, 2.0)
    rep = check_H_inequality(LAT, wp, 1.0, 8.0)
    # cells within rho of the centre see only the constant branch
    H = weight_H(LAT, wp, wp.eta)
    gam = carre_du_champ_trunc(LAT, np.sqrt(H), 1.0, wp.rho)
    r = LAT.distances_from([0.0])
    assert np.allclose(gam[r <= wp.rho], 0, atol=1e-14)
    assert rep.values["cases"]["case1"]["min_slack"] > 0


# ---------------------------------------------------------------------------
# H-inequality and nu search


@pytest.mark.parametrize("nu", [1.5, 2.0, 64.0])
def test_C_zero_always_passes(nu):
    wp = weight_for([0.0], 2.0, 1.0, nu)
    rep = check_H_inequality(LAT, wp, 1.0, 0.0)
    assert rep.passed and rep.values["min_slack"] > 0


def test_search_nu_C_zero_returns_two():
    assert search_nu(LAT, [0.0], 2.0, 1.0, 0.0).values["nu"] == 2.0


def test_search_nu_baseline_C1():
    # fixed baseline: d = 1, alpha = 1, rho = 2, s - eta = rho^alpha / (8 nu)
    rep = search_nu(LAT, [0.0], 2.0, 1.0, 1.0)
    assert rep.passed
    assert rep.values["nu"] == 2.0
    assert rep.values["monotone_at_2nu"]
    assert rep.values["tried"][0]["relative_min_slack"] == pytest.approx(0.025900336600844884, rel=1e-8)


def test_search_nu_cap_reported():
    rep = search_nu(LAT, [0.0], 2.0, 1.0, 1e6, cap=16)
    assert not rep.passed and rep.values["nu"] is None
    assert [row["nu"] for row in rep.values["tried"]] == [2.0, 4.0, 8.0, 16.0]


def test_search_nu_validation():
    with pytest.raises(ParameterError):
        search_nu(LAT, [0.0], 2.0, 1.0, -1.0)
    with pytest.raises(ParameterError):
        search_nu(LAT, [0.0], 2.0, 1.0, 1.0, dt_factor=0.5)


def test_defaults():
    assert DT_FACTOR == 1 / 8 and NU_CAP == 2 ** 20
    assert default_C(make_preset("fractional", KernelParams(alpha=1.0, Lambda=0.5))) == 4.0


# ---------------------------------------------------------------------------
# weighted estimate


def _weighted_setup(k_trunc):
    wp = weight_for([0.0], 2.0, 1.0, 2.0)
    return wp, Schedule.auto(k_trunc, LAT, wp.eta, wp.s)


def test_weighted_zero_data(k_trunc):
    wp, sched = _weighted_setup(k_trunc)
    rep = check_weighted_estimate(k_trunc, LAT, sched, np.zeros(LAT.shape), wp)
    assert rep.passed and rep.values["W_eta"] == 0 and rep.values["max_W"] == 0


def test_weighted_random_data(k_trunc):
    wp, sched = _weighted_setup(k_trunc)
    for u0 in random_nonnegative_data(LAT, 3, seed=0):
        rep = check_weighted_estimate(k_trunc, LAT, sched, u0, wp)
        assert rep.passed
        assert rep.values["max_relative_increase"] <= 0


def test_weighted_outside_ball_quarter_period(k_trunc):
    wp, sched = _weighted_setup(k_trunc)
    u0 = outside_ball_data(LAT, [0.0], LAT.period / 4)
    rep = check_weighted_estimate(k_trunc, LAT, sched, u0, wp)
    assert rep.passed
    # W(eta) is at most the largest weight on the support times the squared L^2 norm
    r = LAT.distances_from([0.0])
    h_sup = float(np.max(weight_H(LAT, wp, wp.eta)[u0 > 0]))
    assert h_sup == pytest.approx(wp.base(wp.eta) ** (-np.min(r[u0 > 0]) / (3 * wp.rho)))
    assert h_sup < 0.1
    assert rep.values["W_eta"] <= h_sup * np.sum(u0 ** 2) * LAT.cell_volume * (1 + 1e-12)


def test_weighted_requires_matching_setup(k_trunc):
    wp, sched = _weighted_setup(k_trunc)
    with pytest.raises(PreconditionError):
        check_weighted_estimate(truncate(make_preset("fractional", KernelParams(alpha=1.0)), 3.0), LAT, sched,
                                np.ones(LAT.shape), wp)
    with pytest.raises(PreconditionError):
        check_weighted_estimate(k_trunc, LAT, Schedule(0.0, 0.1, 4), np.ones(LAT.shape), wp)
    with pytest.raises(PreconditionError):
        check_weighted_estimate(k_trunc, LAT, sched, np.ones(LAT.shape), wp, C=1e6)


def test_random_data_reproducible():
    a = random_nonnegative_data(LAT, 2, seed=5)
    b = random_nonnegative_data(LAT, 2, seed=5)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert all(x.min() >= 0 for x in a)


# ---------------------------------------------------------------------------
# decay estimate


def test_decay_rhs_sigma_zero():
    dt, rho, nu = 0.1, 2.0, 2.0
    a = rho / (nu * dt)
    assert decay_rhs(dt, 0.0, rho, nu, 1.0, 1, 1.0) == pytest.approx(dt ** -0.5 * a ** 1.0)


def test_decay_rhs_factor_relaxes_with_rho():
    # at fixed a = rho^alpha/(nu dt) the exponential factor (2/a)^{sigma/(6 rho)} grows with rho
    nu, a, sigma = 2.0, 8.0, 12.0
    f = []
    for rho in (1.0, 2.0, 4.0):
        dt = rho / (nu * a)
        f.append(decay_rhs(dt, sigma, rho, nu, 1.0, 1, 1.0) / decay_rhs(dt, 0.0, rho, nu, 1.0, 1, 1.0))
    assert f[0] < f[1] < f[2] < 1


def test_decay_sweep_baseline(k_trunc):
    wp, sched = _weighted_setup(k_trunc)
    rep = decay_estimate_check(k_trunc, LAT, sched, [4.0, 8.0, 16.0], [0.0], wp.nu)
    rows = rep.values["rows"]
    # the constant-free bound holds with a wide margin at every sigma
    assert all(0 <= r["ratio"] < 1e-5 for r in rows)
    assert [r["at_roundoff_floor"] for r in rows] == [False, False, True]
    # the lattice solution decays much faster than the bound, so the spread cap is not met
    assert not rep.passed
    assert rep.values["spread"] == pytest.approx(11475.469842523085, rel=1e-3)


def test_decay_within_two_rho_is_stable(k_trunc):
    wp, sched = _weighted_setup(k_trunc)
    rep = decay_estimate_check(k_trunc, LAT, sched, [2.0, 3.0, 4.0], [0.0], wp.nu)
    assert rep.passed
    assert rep.values["spread"] == pytest.approx(7.755852828027174, rel=1e-6)


def test_decay_preconditions(k_trunc):
    full = make_preset("fractional", KernelParams(alpha=1.0))
    with pytest.raises(PreconditionError):
        decay_estimate_check(full, LAT, Schedule(0.0, 0.1, 2), [4.0], [0.0], 2.0)
    with pytest.raises(PreconditionError):
        decay_estimate_check(k_trunc, LAT, Schedule(0.0, 1.0, 2), [4.0], [0.0], 2.0)
    with pytest.raises(PreconditionError):
        decay_estimate_check(k_trunc, LAT, Schedule(0.0, 0.1, 2), [40.0], [0.0], 2.0)


def test_outside_ball_data_width():
    u = outside_ball_data(LAT, [0.0], 4.0, width=1.0)
    r = LAT.distances_from([0.0])
    assert np.all(u[(r > 4.0) & (r <= 5.0)] == 1)
    assert np.all(u[(r <= 4.0) | (r > 5.0 + 1e-9)] == 0)
