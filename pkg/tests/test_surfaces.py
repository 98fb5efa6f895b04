import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asymflat.errors import DegenerateSurface, NonSpacelikeMeanCurvature
from asymflat.idata import (
    Flat,
    GraphSlice,
    GraphSliceSpec,
    SchwarzschildAreal,
    SchwarzschildIsotropic,
)
from asymflat.sphere import n_modes, quad_sphere
from asymflat.surfaces import (
    NODE_COLUMNS,
    SphereGraph,
    curvature_functional,
    normalize_mode,
    safe_surface_geometry,
    surface_geometry,
    surface_geometry_batch,
)

Q12 = quad_sphere(12)
SLICE = GraphSlice(GraphSliceSpec(1.0, beta=0.2, gamma=0.2, a=(0.3, -0.4, 0.5)))


def _bumpy(radius, L, seed, amp=0.05, center=(0.0, 0.0, 0.0)):
    rng = np.random.default_rng(seed)
    c = np.zeros(n_modes(L))
    c[0] = radius * np.sqrt(4 * np.pi)
    c[1:] = amp * radius * rng.standard_normal(c.size - 1) / np.arange(2, c.size + 1)
    return SphereGraph(np.asarray(center, dtype=float), c)


class FlippedK:
    """Same metric, opposite second fundamental form."""

    def __init__(self, inner):
        self.inner = inner

    def sample(self, x, order=2):
        s = self.inner.sample(x, order=order)
        return dataclasses.replace(s, K=-s.K)


def test_flat_round_sphere():
    geo = surface_geometry(Flat(), SphereGraph.round(7.0, 4), Q12)
    assert np.allclose(geo.H, 2 / 7, rtol=1e-14)
    assert geo.area_g == pytest.approx(4 * np.pi * 49, rel=1e-14)
    assert abs(geo.hawking_mass) < 1e-13
    assert np.allclose(geo.barycenter, 0, atol=1e-13)


def test_areal_round_sphere():
    r = 20.0
    geo = surface_geometry(SchwarzschildAreal(1.0), SphereGraph.round(r, 4), Q12)
    assert np.allclose(geo.H, 2 * np.sqrt(1 - 2 / r) / r, rtol=1e-13)
    assert geo.hawking_mass == pytest.approx(1.0, rel=1e-12)


def test_isotropic_round_sphere():
    # phi^4 delta: H = phi^-2 (2/r + 4 phi'/phi), area 4 pi r^2 phi^4
    m, r = 2.0, 15.0
    phi = 1 + m / (2 * r)
    dphi = -m / (2 * r * r)
    geo = surface_geometry(SchwarzschildIsotropic(m), SphereGraph.round(r, 4), Q12)
    assert np.allclose(geo.H, phi**-2 * (2 / r + 4 * dphi / phi), rtol=1e-13)
    assert geo.area_g == pytest.approx(4 * np.pi * r * r * phi**4, rel=1e-13)
    assert geo.hawking_mass == pytest.approx(m, rel=1e-12)


def test_translation_covariance_in_flat_space():
    g0 = _bumpy(5.0, 6, 1)
    g1 = SphereGraph(np.array([3.0, -1.0, 2.0]), g0.coeffs)
    a, b = surface_geometry(Flat(), g0, Q12), surface_geometry(Flat(), g1, Q12)
    assert np.allclose(a.H, b.H, atol=1e-13)
    assert np.allclose(b.barycenter - a.barycenter, [3.0, -1.0, 2.0], atol=1e-12)


def test_first_variation_of_area():
    # dA/de along x -> x + e f w equals the integral of H f g(w, nu)
    L = 6
    quad = quad_sphere(16)
    g0 = _bumpy(40.0, L, 2)
    f = np.random.default_rng(3).standard_normal(n_modes(L))
    geo = surface_geometry(SLICE, g0, quad)
    w = quad.directions
    predicted = quad.integrate(geo.H * (quad.synthesize(f, L) * np.einsum("ni,ni->n", w, geo.nu_dn)) * geo.dA_g)
    h = 1e-4
    ap = surface_geometry(SLICE, SphereGraph(g0.center, g0.coeffs + h * f), quad).area_g
    am = surface_geometry(SLICE, SphereGraph(g0.center, g0.coeffs - h * f), quad).area_g
    assert (ap - am) / (2 * h) == pytest.approx(predicted, rel=1e-7)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 0.15))
def test_flat_hawking_mass_nonpositive(seed, amp):
    geo = surface_geometry(Flat(), _bumpy(3.0, 6, seed, amp), quad_sphere(16))
    assert geo.hawking_mass <= 1e-12


def test_spectral_convergence_in_quadrature_band():
    g = _bumpy(30.0, 4, 4, amp=0.02)
    a = surface_geometry(SLICE, g, quad_sphere(24))
    b = surface_geometry(SLICE, g, quad_sphere(48))
    assert a.area_g == pytest.approx(b.area_g, rel=1e-12)
    assert a.hawking_mass == pytest.approx(b.hawking_mass, rel=1e-8)


def test_spacetime_mean_curvature_even_in_K():
    g = _bumpy(60.0, 6, 5)
    a = surface_geometry(SLICE, g, Q12)
    b = surface_geometry(FlippedK(SLICE), g, Q12)
    assert np.allclose(a.trSigmaK, -b.trSigmaK)
    assert np.allclose(curvature_functional(a, "STCMC"), curvature_functional(b, "STCMC"), rtol=1e-14)
    assert np.allclose(curvature_functional(a, "CE+"), curvature_functional(b, "CE-"), rtol=1e-14)


def test_mode_ordering_and_time_symmetric_reduction():
    g = _bumpy(60.0, 6, 6)
    geo = surface_geometry(SLICE, g, Q12)
    assert np.all(curvature_functional(geo, "STCMC") <= curvature_functional(geo, "CMC"))
    assert np.abs(geo.trSigmaK).max() > 0
    geo0 = surface_geometry(SchwarzschildAreal(1.0), g, Q12)
    for mode in ("CE+", "CE-", "STCMC"):
        assert np.allclose(curvature_functional(geo0, mode), geo0.H, rtol=1e-14)


def test_trace_identity():
    geo = surface_geometry(SLICE, _bumpy(50.0, 6, 7), Q12)
    assert np.allclose(geo.trSigmaK, geo.trgK - geo.K_nn, atol=1e-15)


def test_timelike_mean_curvature_raises():
    geo = surface_geometry(SLICE, _bumpy(50.0, 4, 8), Q12)
    geo = dataclasses.replace(geo, trSigmaK=geo.H * 1.5)
    with pytest.raises(NonSpacelikeMeanCurvature):
        curvature_functional(geo, "STCMC")
    assert np.all(np.isnan(geo.node_table()[:, -1]))


def test_node_table():
    geo = surface_geometry(SLICE, _bumpy(50.0, 4, 9), Q12)
    tab = geo.node_table()
    assert tab.shape == (Q12.size, len(NODE_COLUMNS))
    assert np.allclose(tab[:, 2:5], geo.x)
    assert np.allclose(tab[:, -1], geo.spacetime_H)


def test_batch_matches_single():
    graphs = [_bumpy(30.0 + k, 4, k) for k in range(3)]
    for g, geo in zip(graphs, surface_geometry_batch(SLICE, graphs, Q12)):
        assert np.array_equal(geo.H, surface_geometry(SLICE, g, Q12).H)


def test_degenerate_surfaces():
    with pytest.raises(DegenerateSurface):
        safe_surface_geometry(SchwarzschildAreal(1.0), SphereGraph.round(1.5, 2), Q12)
    with pytest.raises(ValueError):
        surface_geometry(Flat(), SphereGraph.round(1.0, 20), Q12)
    with pytest.raises(ValueError):
        SphereGraph(np.zeros(3), np.ones(5))


def test_mode_names():
    assert normalize_mode("stcmc") == "STCMC"
    assert normalize_mode("ce_plus") == "CE+"
    with pytest.raises(ValueError):
        normalize_mode("willmore")


def test_contains():
    g = SphereGraph.round(5.0, 2, center=(1.0, 0.0, 0.0))
    gap = g.contains(np.array([[1.0, 0.0, 3.0], [7.0, 0.0, 0.0]]))
    assert gap == pytest.approx([2.0, -1.0])
