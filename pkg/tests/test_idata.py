import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asymflat.errors import DomainError, NonSpacelikeSlice
from asymflat.idata import (
    ConformalBump,
    Flat,
    GraphSlice,
    GraphSliceSpec,
    PowerTail,
    SchwarzschildAreal,
    SchwarzschildIsotropic,
    Transformed,
    eval as eval_data,
    random_rotation,
)

FAMILIES = [
    Flat(),
    SchwarzschildAreal(1.0),
    SchwarzschildAreal(-0.5),
    SchwarzschildIsotropic(1.0, (ConformalBump(0.05, (30.0, 0.0, 0.0), 8.0), PowerTail(0.2, 1.5))),
    GraphSlice(GraphSliceSpec(1.0)),
    GraphSlice(GraphSliceSpec(1.0, beta=0.3, gamma=0.2, a=(0.3, -0.2, 0.5))),
    GraphSlice(GraphSliceSpec(2.0, beta=None, gamma=-0.5)),
]


def _points(n, rmin, rmax, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    return v * rng.uniform(rmin, rmax, n)[:, None]


def test_areal_component():
    s = eval_data(SchwarzschildAreal(1.0), np.array([10.0, 0.0, 0.0]))
    assert s.g[0, 0] == pytest.approx(1.25, rel=1e-15)
    assert s.g[1, 1] == 1.0


def test_areal_is_spherical_line_element():
    # g(v, v) for radial and tangential unit vectors: 1/(1-2m/r) and 1
    x = _points(10, 5, 100, 1)
    s = SchwarzschildAreal(1.0).sample(x, order=1)
    r = np.linalg.norm(x, axis=1)
    xh = x / r[:, None]
    assert np.allclose(np.einsum("nij,ni,nj->n", s.g, xh, xh), 1 / (1 - 2 / r), rtol=1e-14)
    t = np.cross(xh, [0.0, 0.0, 1.0])
    t /= np.linalg.norm(t, axis=1)[:, None]
    assert np.allclose(np.einsum("nij,ni,nj->n", s.g, t, t), 1.0, rtol=1e-14)


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.name)
def test_first_derivatives_against_differences(fam):
    x = _points(8, 40, 400, 2)
    s = fam.sample(x, order=2)
    h = 1e-4 * np.linalg.norm(x, axis=1)
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1
        gp = fam.sample(x + h[:, None] * e, order=1).g
        gm = fam.sample(x - h[:, None] * e, order=1).g
        fd = (gp - gm) / (2 * h[:, None, None])
        assert np.abs(s.dg[..., k] - fd).max() < 1e-6 * np.abs(s.dg).max() + 1e-14


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.name)
def test_second_derivatives_symmetric(fam):
    s = fam.sample(_points(5, 40, 400, 4), order=2)
    assert np.allclose(s.ddg, np.swapaxes(s.ddg, -1, -2), atol=1e-16)
    assert np.allclose(s.g, np.swapaxes(s.g, -1, -2))
    assert np.allclose(s.K, np.swapaxes(s.K, -1, -2))


def test_isotropic_conformal_factor():
    fam = SchwarzschildIsotropic(2.0)
    x = np.array([[4.0, 0.0, 0.0]])
    assert fam.sample(x, order=1).g[0, 1, 1] == pytest.approx((1 + 0.25) ** 4)


def test_bump_is_compact():
    bump = ConformalBump(1.0, (0.0, 0.0, 0.0), 2.0)
    v, dv = bump.value_grad(np.array([[2.5, 0, 0], [0.0, 1.0, 0.0]]))
    assert v[0] == 0 and np.all(dv[0] == 0)
    assert v[1] == pytest.approx(np.exp(1 - 1 / (1 - 0.25)))


def test_domain_errors():
    with pytest.raises(DomainError):
        SchwarzschildAreal(1.0).sample(np.array([1.0, 0.5, 0.0]))
    with pytest.raises(DomainError):
        SchwarzschildIsotropic(1.0).sample(np.array([0.3, 0.0, 0.0]))
    with pytest.raises(DomainError):
        Flat().sample(np.zeros(3))


def test_steep_graph_rejected():
    fam = GraphSlice(GraphSliceSpec(1.0, beta=None, gamma=0.45, a=(30.0, 0.0, 0.0)))
    with pytest.raises(NonSpacelikeSlice):
        fam.sample(np.array([[50.0, 0.0, 0.0]]), order=1)


def test_graph_slice_spec_validation():
    with pytest.raises(ValueError):
        GraphSliceSpec(0.0)
    with pytest.raises(ValueError):
        GraphSliceSpec(1.0, beta=0.5)
    with pytest.raises(ValueError):
        GraphSliceSpec(1.0, gamma=0.7)


def test_graph_slice_zero_profile_is_schwarzschild():
    spec = GraphSliceSpec(1.0, beta=None, gamma=0.0, a=(0.0, 0.0, 0.0))
    x = _points(6, 10, 100, 5)
    a = GraphSlice(spec).sample(x, order=1)
    b = SchwarzschildAreal(1.0).sample(x, order=1)
    assert np.allclose(a.g, b.g, atol=1e-15)
    assert np.abs(a.K).max() < 1e-15


def test_graph_slice_profile_derivatives():
    spec = GraphSliceSpec(1.0, beta=0.0, gamma=0.2, a=(0.3, 0.1, -0.4))
    x = _points(5, 20, 200, 6)
    f, df, ddf = spec.profile(x)
    h = 1e-5
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fp, dfp, _ = spec.profile(x + e)
        fm, dfm, _ = spec.profile(x - e)
        assert np.allclose((fp - fm) / (2 * h), df[:, k], rtol=1e-7, atol=1e-12)
        assert np.allclose((dfp - dfm) / (2 * h), ddf[:, :, k], rtol=1e-6, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_transformed_is_pullback(seed):
    # oracle: tensor transformation law applied by hand
    rng = np.random.default_rng(seed)
    Q = random_rotation(rng)
    b = rng.normal(size=3) * 5
    inner = GraphSlice(GraphSliceSpec(1.0, gamma=0.1, a=(0.2, 0.5, -0.1)))
    fam = Transformed(Q, b, inner)
    x = _points(4, 50, 300, seed)
    s = fam.sample(x, order=1)
    y = x @ Q.T + b
    t = inner.sample(y, order=1)
    assert np.allclose(s.g, np.einsum("ai,bj,nab->nij", Q, Q, t.g), atol=1e-14)
    assert np.allclose(s.K, np.einsum("ai,bj,nab->nij", Q, Q, t.K), atol=1e-14)


def test_rotation_is_proper():
    Q = random_rotation(np.random.default_rng(0))
    assert np.allclose(Q.T @ Q, np.eye(3))
    assert np.linalg.det(Q) == pytest.approx(1.0)


def test_transformed_rejects_non_orthogonal():
    with pytest.raises(ValueError):
        Transformed(np.diag([1.0, 2.0, 1.0]), np.zeros(3), Flat())


def test_single_point_shapes():
    s = GraphSlice(GraphSliceSpec(1.0)).sample(np.array([30.0, 1.0, 2.0]))
    assert s.g.shape == (3, 3) and s.dg.shape == (3, 3, 3)
    assert s.ddg.shape == (3, 3, 3, 3) and s.dK.shape == (3, 3, 3)
