import math

import numpy as np
import pytest

from heatlab.errors import DomainError, ParameterError
from heatlab.kernels import check_symmetry, check_upper_bound
from heatlab.lattice import Lattice
from heatlab.mixed import (OMEGA, ScaleFunction, ball_volume, check_mixed_integrals, linfty_l1_fit,
                           make_mixed_kernel, make_phi, mixed_integrals, mixed_integrals_pure, pure_cross_check,
                           reference_mixed, reference_mixed_r, verify_mixed, volume_factor_bounds)
from heatlab.semigroup import Schedule
from heatlab.verify import reference_uhke_r

LAT = Lattice(1, 0.125, 32.0)
TWO = make_phi("two-regime", alpha1=0.5, alpha2=1.5)


# ---------------------------------------------------------------------------
# scale functions


def test_phi_values():
    pure = make_phi("pure", alpha=1.0)
    assert float(pure(2.0)) == 2.0
    assert float(pure.inverse(0.5)) == 0.5
    assert float(TWO(4.0)) == pytest.approx(8.0)
    assert float(TWO(0.25)) == pytest.approx(0.5)
    assert float(TWO(0.0)) == 0.0 and float(TWO(1.0)) == 1.0


@pytest.mark.parametrize("phi", [make_phi("pure", alpha=0.7), TWO])
def test_phi_scaling_and_inverse(phi):
    rep = phi.check_scaling()
    assert rep.passed
    assert rep.values["roundtrip_max_rel_error"] <= 1e-12
    r = 2.0 ** np.linspace(-8, 8, 33)
    assert np.all(np.diff(phi(r)) > 0)


@pytest.mark.parametrize("kw", [dict(kind="pure"), dict(kind="two-regime", alpha1=0.5),
                                dict(kind="cubic", alpha=1.0)])
def test_make_phi_validation(kw):
    with pytest.raises(ParameterError):
        make_phi(**kw)


def test_scale_function_validation():
    with pytest.raises(ParameterError):
        ScaleFunction("two-regime", 1.5, 0.5)
    with pytest.raises(ParameterError):
        ScaleFunction("pure", 1.0, 1.5)
    with pytest.raises(DomainError):
        TWO(-1.0)


def test_ball_volume():
    assert float(ball_volume(3.0, 1)) == 6.0
    assert float(ball_volume(2.0, 2)) == pytest.approx(4 * math.pi)


# ---------------------------------------------------------------------------
# kernels


def test_pure_mixed_kernel_formula():
    k = make_mixed_kernel(make_phi("pure", alpha=0.8), Lambda=3.0, d=1)
    assert float(k.evaluate(0.5, 0.0, 2.0)) == pytest.approx(3.0 / (2 * 2.0 ** 1.8))
    assert k.params.alpha == 0.8


def test_two_regime_kernel_branches():
    k = make_mixed_kernel(TWO, d=1)
    near = [float(k.evaluate(0.5, 0.0, r)) for r in (0.01, 0.02)]
    far = [float(k.evaluate(0.5, 0.0, r)) for r in (10.0, 20.0)]
    assert near[0] / near[1] == pytest.approx(2 ** 1.5)
    assert far[0] / far[1] == pytest.approx(2 ** 2.5)
    assert k.params.alpha == 0.5


@pytest.mark.parametrize("d", [1, 2])
def test_mixed_kernel_bound_and_symmetry(d):
    k = make_mixed_kernel(TWO, d=d)
    assert check_upper_bound(k).values["max_ratio"] == pytest.approx(1.0)
    assert check_symmetry(k).passed


# ---------------------------------------------------------------------------
# integral estimates


@pytest.mark.parametrize("alpha,d", [(0.5, 1), (1.0, 1), (1.5, 2)])
def test_integrals_match_closed_form(alpha, d):
    phi = make_phi("pure", alpha=alpha)
    for R in (0.3, 1.0, 4.0):
        I1, I2, _, _ = mixed_integrals(phi, 2.0, d, R)
        J1, J2 = mixed_integrals_pure(alpha, 2.0, d, R)
        assert I1 == pytest.approx(J1, rel=1e-8)
        assert I2 == pytest.approx(J2, rel=1e-8)


def test_pure_fits_are_scale_free():
    phi = make_phi("pure", alpha=1.2)
    rep = check_mixed_integrals(make_mixed_kernel(phi), phi, [0.5, 1.0, 2.0, 4.0])
    assert rep.passed
    assert rep.values["max_closed_form_rel_error"] <= 1e-8
    assert rep.values["max_consecutive_drift"] < 0.1


def test_two_regime_fits_across_the_break():
    rep = check_mixed_integrals(make_mixed_kernel(TWO), TWO, [0.25, 0.5, 1.0, 2.0, 4.0])
    assert rep.passed
    assert all(math.isfinite(r["c1"]) and math.isfinite(r["c2"]) for r in rep.values["rows"])
    assert rep.values["spread_c1"] <= 10 and rep.values["spread_c2"] <= 10


# ---------------------------------------------------------------------------
# references


def test_reference_mixed_on_diagonal():
    dt = 0.3
    assert float(reference_mixed_r(0.0, dt, TWO, 1)) == pytest.approx(1 / (2 * float(TWO.inverse(dt))))
    assert float(reference_mixed([0.0, 0.0], [0.0, 0.0], dt, TWO, 2)) == pytest.approx(
        1 / (math.pi * float(TWO.inverse(dt)) ** 2))


def test_reference_mixed_far_branch():
    dt, r = 0.3, 50.0
    assert float(reference_mixed_r(r, dt, TWO, 1)) == pytest.approx(dt / (2 * r * float(TWO(r))))


@pytest.mark.parametrize("alpha,d", [(0.5, 1), (1.0, 1), (1.5, 1), (1.0, 2)])
def test_pure_reference_matches_uhke_up_to_volume_factor(alpha, d):
    phi = make_phi("pure", alpha=alpha)
    r = np.concatenate([[0.0], 2.0 ** np.linspace(-6, 6, 49)])
    q = reference_uhke_r(r, 0.7, alpha, d) / reference_mixed_r(r, 0.7, phi, d)
    lo, hi = volume_factor_bounds(alpha, d)
    assert np.all(q >= lo * (1 - 1e-12)) and np.all(q <= hi * (1 + 1e-12))
    assert 0.25 <= lo and hi <= 4
    assert OMEGA[d] == hi


# ---------------------------------------------------------------------------
# bound checks


@pytest.fixture(scope="module")
def mixed_run():
    k = make_mixed_kernel(TWO, d=1)
    sched = Schedule.auto(k, LAT, 0.0, 1.0)
    return k, sched, verify_mixed(k, LAT, sched, [0])


def test_verify_mixed_baseline(mixed_run):
    _, sched, rep = mixed_run
    assert sched.steps == 12
    assert rep.passed
    assert rep.fitted_constant == pytest.approx(1.1798511102548954, rel=1e-9)
    assert all(v < 0.2 for v in rep.refinement_drift.values())


def test_linfty_l1_constant(mixed_run):
    k, sched, rep = mixed_run
    fit = linfty_l1_fit(k, LAT, sched, 0, TWO)
    assert math.isfinite(fit["C2"]) and fit["C2"] > 0
    assert fit["max_mass"] == pytest.approx(1.0, rel=1e-12)
    assert rep.details["linfty_l1_C2"] == pytest.approx(fit["C2"])


def test_verify_mixed_needs_phi():
    from heatlab.kernels import KernelParams, make_preset

    with pytest.raises(ParameterError):
        verify_mixed(make_preset("fractional", KernelParams(alpha=1.0)), LAT, Schedule(0.0, 1.0, 4), [0])


def test_pure_cross_check_agrees():
    rep = pure_cross_check(1.0, LAT, Schedule(0.0, 1.0, 32), [0])
    assert rep.passed
    lo, hi = rep.values["volume_factor_range"]
    assert lo / 1.2 <= rep.values["ratio"] <= hi * 1.2
    assert rep.values["mixed_pass"] == rep.values["uhke_pass"]
