import numpy as np
import pytest

from asymflat.charges import (
    avalos_diagnostics,
    charge_report,
    charges_at,
    extrapolate,
    charge_ladder,
    geometric_ladder,
    parity_diagnostics,
)
from asymflat.errors import EnergyTooSmall, NotTimeSymmetric
from asymflat.idata import (
    ConformalBump,
    Flat,
    GraphSlice,
    GraphSliceSpec,
    PowerTail,
    SchwarzschildAreal,
    SchwarzschildIsotropic,
    Transformed,
    random_rotation,
)
from asymflat.sphere import quad_sphere

Q16 = quad_sphere(16)
LADDER = geometric_ladder(10.0, 7)


def test_flat_charges_vanish():
    s = charges_at(Flat(), 10.0, Q16)
    assert s.E == 0 and np.all(s.P == 0)
    assert np.all(s.J_RT == 0) and np.all(s.J_M == 0)
    assert s.z_flag == "E~0" and np.all(np.isnan(s.Z_BORT))


def test_flat_strict_energy():
    with pytest.raises(EnergyTooSmall):
        charges_at(Flat(), 10.0, Q16, strict=True)


@pytest.mark.parametrize("r", [5.0, 10.0, 80.0])
def test_areal_finite_radius_energy(r):
    # flux of the areal metric: E(r) = m / (1 - 2m/r)
    assert charges_at(SchwarzschildAreal(1.0), r, Q16).E == pytest.approx(1 / (1 - 2 / r), rel=1e-13)


@pytest.mark.parametrize("r", [3.0, 10.0, 80.0])
def test_isotropic_finite_radius_energy(r):
    # g = phi^4 delta gives E(r) = m phi^3 with phi = 1 + m/(2r)
    m = 2.0
    s = charges_at(SchwarzschildIsotropic(m), r, Q16)
    assert s.E == pytest.approx(m * (1 + m / (2 * r)) ** 3, rel=1e-13)


def test_schwarzschild_report():
    rep = charge_report(SchwarzschildAreal(1.0), LADDER, Q16)
    assert rep.E == pytest.approx(1.0, abs=1e-4)
    assert np.abs(rep.vector("P")).max() <= 1e-8
    assert rep.M == pytest.approx(1.0, abs=1e-4)
    assert not rep.dense


def test_isotropic_center_oracle():
    # the isotropic mass sits at y = 0, i.e. at x = -Q^T b
    rng = np.random.default_rng(4)
    Q = random_rotation(rng)
    b = np.array([3.0, -2.0, 1.0])
    fam = Transformed(Q, b, SchwarzschildIsotropic(1.0))
    rep = charge_report(fam, geometric_ladder(40.0, 7), Q16)
    assert np.allclose(rep.vector("Z_BORT"), -Q.T @ b, atol=1e-6)
    assert rep.E == pytest.approx(1.0, abs=1e-6)


def test_fast_decay_has_no_charges():
    fam = SchwarzschildIsotropic(0.0, (PowerTail(0.3, 1.5),))
    rep = charge_report(fam, geometric_ladder(10.0, 10), Q16)
    assert abs(rep.E) <= max(1e-4, 2 * rep.limits["E"].uncertainty)
    assert rep.samples[-1].E < rep.samples[0].E / 10
    assert np.abs(rep.vector("P")).max() < 1e-12


def test_angular_momenta_agree_without_parity_violation():
    for fam in (SchwarzschildAreal(1.0), GraphSlice(GraphSliceSpec(1.0))):
        rep = extrapolate(charge_ladder(fam, LADDER * 4, Q16))
        assert np.abs(rep.vector("J_RT")).max() < 1e-8
        assert np.abs(rep.vector("J_M")).max() < 1e-8


def test_band_doubling_changes_little():
    fam = GraphSlice(GraphSliceSpec(1.0, beta=0.2, gamma=0.1, a=(0.2, 0.4, -0.3)))
    a = charges_at(fam, 150.0, quad_sphere(16))
    b = charges_at(fam, 150.0, quad_sphere(32))
    for name in ("P", "Z_BORT", "Z0", "J_RT", "J_M"):
        assert np.abs(getattr(a, name) - getattr(b, name)).max() < 1e-9
    assert abs(a.E - b.E) < 1e-9


def test_momentum_rotates():
    rng = np.random.default_rng(11)
    inner = GraphSlice(GraphSliceSpec(1.0, beta=0.2, gamma=0.3, a=(0.5, 0.0, 0.2)))
    Q = random_rotation(rng)
    a = charges_at(inner, 200.0, Q16)
    b = charges_at(Transformed(Q, np.zeros(3), inner), 200.0, Q16)
    assert b.E == pytest.approx(a.E, rel=1e-12)
    assert np.allclose(b.P, Q.T @ a.P, atol=1e-14)
    assert np.allclose(b.J_RT, Q.T @ a.J_RT, atol=1e-12)


def test_graph_slice_center_oscillates_but_corrected_center_decays():
    r = np.geomspace(100, 1e4, 25)
    samples = charge_ladder(GraphSlice(GraphSliceSpec(1.0)), r, Q16)
    rep = extrapolate(samples)
    assert rep.limits["Z_BORT1"].log_periodic
    assert rep.limits["Z_BORT1"].amplitude == pytest.approx(1 / 3, rel=0.15)
    zc = np.array([s.Z_STCMC[0] for s in rep.samples])
    assert np.max(np.abs(zc) * r) < 1.0


def test_parity_flat():
    rep = parity_diagnostics(Flat(), LADDER, quad_sphere(8))
    assert all(np.all(v == 0) for v in rep.norms.values())
    assert rep.verdicts["strong-RT"]


def test_parity_schwarzschild():
    rep = parity_diagnostics(SchwarzschildAreal(1.0), LADDER, quad_sphere(8))
    assert np.all(rep.norms["g_odd"] == 0)
    assert rep.tau == pytest.approx(1.0, abs=0.05)
    assert rep.verdicts["strong-RT"] and rep.verdicts["asymptotically-Schwarzschildean"]


def test_parity_graph_slice_fails_regge_teitelboim():
    rep = parity_diagnostics(GraphSlice(GraphSliceSpec(1.0)), LADDER, quad_sphere(8))
    assert rep.verdicts["plain-AE"]
    assert not rep.verdicts["weak-RT"]
    assert not rep.verdicts["strong-RT"]


def test_avalos_flat_and_vacuum():
    rep = avalos_diagnostics(Flat(), LADDER, quad_sphere(4))
    assert np.all(rep.scal_cumulative == 0) and np.all(rep.cotton_cumulative == 0)
    rep = avalos_diagnostics(SchwarzschildIsotropic(1.0), LADDER, quad_sphere(4))
    assert rep.max_abs_scal < 1e-12
    assert rep.max_abs_cotton < 1e-5


def test_avalos_bump_converges():
    fam = SchwarzschildIsotropic(1.0, (ConformalBump(0.05, (25.0, 0.0, 0.0), 10.0),))
    rep = avalos_diagnostics(fam, LADDER, quad_sphere(8), radial_nodes=8)
    assert rep.scal_cumulative[-1] > 0
    # the bump lies inside r < 40: later annuli add nothing to the Scal integral
    assert rep.scal_annuli[-1] < 1e-30 * rep.scal_annuli.max()
    assert np.isfinite(rep.scal_norm) and np.isfinite(rep.cotton_norm)


def test_avalos_requires_time_symmetry():
    with pytest.raises(NotTimeSymmetric):
        avalos_diagnostics(GraphSlice(GraphSliceSpec(1.0)), LADDER, quad_sphere(4))
    with pytest.raises(ValueError):
        avalos_diagnostics(Flat(), LADDER, quad_sphere(4), sigma_w=-0.5)
