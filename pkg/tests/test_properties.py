"""Invariants over randomly drawn kernels, lattices and data."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from heatlab.aronson import carre_du_champ_trunc
from heatlab.kernels import KernelParams, make_preset
from heatlab.lattice import Lattice, assemble_generator, dirichlet_form
from heatlab.mixed import make_phi, reference_mixed_r
from heatlab.semigroup import Schedule, build_propagator, evolve
from heatlab.verify import reference_uhke_r

SETTINGS = settings(max_examples=25, deadline=None)

alphas = st.floats(0.2, 1.8)
cells = st.sampled_from([8, 16, 32])


def lattice(n, h=0.25):
    return Lattice(1, h, n * h)


def preset(kind, alpha):
    return make_preset(kind, KernelParams(alpha=alpha, dim=1))


kinds = st.sampled_from(["fractional", "time-oscillating"])


@SETTINGS
@given(alpha=alphas, n=cells, kind=kinds, t=st.floats(0.01, 5.0))
def test_generator_symmetric_with_zero_row_sums(alpha, n, kind, t):
    G = assemble_generator(preset(kind, alpha), lattice(n), t).matrix()
    assert np.allclose(G, G.T, rtol=0, atol=1e-12 * np.abs(G).max())
    assert np.all(np.abs(G.sum(axis=1)) <= 1e-10 * np.abs(G).max())
    off = G - np.diag(np.diag(G))
    assert np.all(off >= 0)


@SETTINGS
@given(alpha=alphas, n=cells, scale=st.floats(-5, 5), data=st.data())
def test_energy_nonnegative_and_quadratic(alpha, n, scale, data):
    lat = lattice(n)
    u = data.draw(arrays(float, lat.shape, elements=st.floats(-10, 10)))
    g = assemble_generator(preset("fractional", alpha), lat, 1.0)
    e = dirichlet_form(g, u, u)
    assert e >= -1e-10 * max(1.0, float(np.sum(u * u)))
    assert dirichlet_form(g, scale * u, scale * u) == pytest.approx(scale ** 2 * e, rel=1e-9, abs=1e-9)


@SETTINGS
@given(alpha=alphas, n=cells, kind=kinds, steps=st.integers(1, 6), data=st.data())
def test_mass_conserved_and_positivity_preserved(alpha, n, kind, steps, data):
    lat = lattice(n)
    u0 = data.draw(arrays(float, lat.shape, elements=st.floats(0, 100)))
    out = evolve(preset(kind, alpha), lat, Schedule(0.0, 1.0, steps), u0)
    m0 = float(np.sum(u0) * lat.cell_volume)
    assert abs(out.mass - m0) <= 1e-12 * max(1.0, m0)
    assert out.values.min() >= -1e-14 * max(1.0, float(u0.max()))


@SETTINGS
@given(alpha=alphas, n=st.sampled_from([8, 16]), kind=kinds)
def test_propagator_is_stochastic(alpha, n, kind):
    P = build_propagator(preset(kind, alpha), lattice(n), Schedule(0.5, 1.5, 3)).operator
    assert np.allclose(P.sum(axis=0), 1.0, rtol=0, atol=1e-12)
    assert P.min() >= -1e-14


@SETTINGS
@given(alpha=alphas, rho=st.floats(0.3, 3.0), data=st.data())
def test_gamma_nonnegative_and_quadratic(alpha, rho, data):
    lat = lattice(32)
    f = data.draw(arrays(float, lat.shape, elements=st.floats(-10, 10)))
    gam = carre_du_champ_trunc(lat, f, alpha, rho)
    assert np.all(gam >= 0)
    np.testing.assert_allclose(carre_du_champ_trunc(lat, 3 * f, alpha, rho), 9 * gam, rtol=1e-12, atol=1e-300)
    assert np.all(carre_du_champ_trunc(lat, f + 7.0, alpha, rho) == pytest.approx(gam, rel=1e-9, abs=1e-9))


@SETTINGS
@given(alpha=alphas, dt=st.floats(0.01, 10), d=st.sampled_from([1, 2]))
def test_references_decrease_in_distance(alpha, dt, d):
    r = np.linspace(0, 50, 201)
    assert np.all(np.diff(reference_uhke_r(r, dt, alpha, d)) <= 0)
    phi = make_phi("two-regime", alpha1=min(alpha, 1.0), alpha2=max(alpha, 1.0))
    assert np.all(np.diff(reference_mixed_r(r, dt, phi, d)) <= 1e-15)


@SETTINGS
@given(a1=st.floats(0.1, 1.9), a2=st.floats(0.1, 1.9), r=st.floats(1e-6, 1e6))
def test_phi_inverse_roundtrip(a1, a2, r):
    lo, hi = sorted((a1, a2))
    phi = make_phi("two-regime", alpha1=lo, alpha2=hi)
    assert float(phi.inverse(phi(r))) == pytest.approx(r, rel=1e-10)
