"""Analytic initial data families in asymptotic Cartesian coordinates.

Every family provides the metric ``g`` and its first derivatives in closed
form, together with the extrinsic curvature ``K``.  Second derivatives of
``g`` and first derivatives of ``K`` are obtained by fourth-order central
differences (step ``max(1, r) * 1e-5``) of those closed forms.

``K`` is the second fundamental form with respect to the future-directed
unit normal, ``K(X, Y) = <D_X n, Y>``.  Units G = c = 1.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMetric, DomainError, NonSpacelikeSlice

HORIZON_MARGIN = 1e-3
FD_STEP = 1e-5

_I3 = np.eye(3)


# --------------------------------------------------------------------------
# samples
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InitialDataSample:
    """Values of (g, K) and derivatives at one point or a batch of points.

    Array layout: ``dg[..., i, j, k] = d_k g_ij``,
    ``ddg[..., i, j, k, l] = d_l d_k g_ij``, ``dK[..., i, j, k] = d_k K_ij``.
    ``ddg`` and ``dK`` are ``None`` for first-order samples.
    """

    x: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    K: np.ndarray
    ddg: np.ndarray = None
    dK: np.ndarray = None

    @property
    def batched(self):
        return self.g.ndim == 3

    def __len__(self):
        return self.g.shape[0] if self.batched else 1

    def at(self, n):
        """The n-th point of a batched sample."""
        pick = lambda a: None if a is None else a[n]
        return InitialDataSample(
            pick(self.x), pick(self.g), pick(self.dg), pick(self.K), pick(self.ddg), pick(self.dK)
        )

    def as_batch(self):
        if self.batched:
            return self
        lift = lambda a: None if a is None else a[None]
        return InitialDataSample(
            lift(self.x), lift(self.g), lift(self.dg), lift(self.K), lift(self.ddg), lift(self.dK)
        )


@dataclass(frozen=True, eq=False)
class SpacetimeSample:
    """Schwarzschild spacetime metric in coordinates (t, x1, x2, x3).

    ``dgbar[..., mu, nu, lam] = d_lam gbar_{mu nu}``.
    """

    gbar: np.ndarray
    dgbar: np.ndarray


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _as_points(x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != 3:
        raise ValueError("points must have 3 components")
    if not np.all(np.isfinite(x)):
        raise DomainError("non-finite point")
    return x, single


def _radius(x):
    r = np.sqrt(np.einsum("ni,ni->n", x, x))
    if np.any(r <= 0.0):
        raise DomainError("r = |x| must be positive")
    return r


def _check_positive(g):
    d1 = g[:, 0, 0]
    d2 = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] * g[:, 1, 0]
    d3 = np.linalg.det(g)
    if np.any(d1 <= 0) or np.any(d2 <= 0) or np.any(d3 <= 0) or not np.all(np.isfinite(g)):
        raise DegenerateMetric("metric is not positive definite")


def _radial_tensor(x):
    """Unit radial vector, xh xh^T and d_k xh_i = (delta_ik - xh_i xh_k)/r."""
    r = _radius(x)
    xh = x / r[:, None]
    P = np.einsum("ni,nj->nij", xh, xh)
    dxh = (_I3[None] - P) / r[:, None, None]
    return r, xh, P, dxh


def _fd_first(fn, x, h):
    """d/dx_k of fn(x) by a 4th-order central stencil; new last axis is k."""
    cols = []
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        step = h[:, None] * e[None]
        fp1, fm1 = fn(x + step), fn(x - step)
        fp2, fm2 = fn(x + 2 * step), fn(x - 2 * step)
        hk = h.reshape((-1,) + (1,) * (fp1.ndim - 1))
        cols.append((-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * hk))
    return np.stack(cols, axis=-1)


def fd_step(x):
    return np.maximum(1.0, np.sqrt(np.einsum("ni,ni->n", x, x))) * FD_STEP


# --------------------------------------------------------------------------
# families
# --------------------------------------------------------------------------

class DataFamily:
    """Base class: subclasses implement ``metric`` and ``extrinsic``."""

    name = "abstract"
    time_symmetric = False

    @property
    def mass_hint(self):
        """Mass parameter when the family has one (used for seeds), else None."""
        return None

    def check_domain(self, x):
        _radius(x)

    def metric(self, x):
        """(g, dg) at a batch of points, closed form."""
        raise NotImplementedError

    def extrinsic(self, x):
        raise NotImplementedError

    def sample(self, x, order=2):
        x, single = _as_points(x)
        self.check_domain(x)
        g, dg = self.metric(x)
        _check_positive(g)
        K = self.extrinsic(x)
        ddg = dK = None
        if order >= 2:
            h = fd_step(x)
            ddg = _fd_first(lambda y: self.metric(y)[1], x, h)
            ddg = 0.5 * (ddg + np.swapaxes(ddg, -1, -2))
            if self.time_symmetric:
                dK = np.zeros(K.shape + (3,))
            else:
                dK = _fd_first(self.extrinsic, x, h)
        s = InitialDataSample(x, g, dg, K, ddg, dK)
        return s.at(0) if single else s


@dataclass(frozen=True)
class Flat(DataFamily):
    name = "flat"
    time_symmetric = True

    def metric(self, x):
        n = x.shape[0]
        return np.broadcast_to(_I3, (n, 3, 3)).copy(), np.zeros((n, 3, 3, 3))

    def extrinsic(self, x):
        return np.zeros((x.shape[0], 3, 3))


def _schwarzschild_areal_metric(m, x):
    r, xh, P, dxh = _radial_tensor(x)
    psi = 2.0 * m / (r - 2.0 * m)
    dpsi = -2.0 * m / (r - 2.0 * m) ** 2
    g = _I3[None] + psi[:, None, None] * P
    dg = (
        dpsi[:, None, None, None] * np.einsum("nk,nij->nijk", xh, P)
        + psi[:, None, None, None]
        * (np.einsum("nik,nj->nijk", dxh, xh) + np.einsum("ni,njk->nijk", xh, dxh))
    )
    return g, dg


def _areal_domain(m, x):
    r = _radius(x)
    if m > 0 and np.any(r < 2.0 * m * (1.0 + HORIZON_MARGIN)):
        raise DomainError(f"r must exceed 2m(1+{HORIZON_MARGIN:g}) = {2*m*(1+HORIZON_MARGIN):g}")
    return r


@dataclass(frozen=True)
class SchwarzschildAreal(DataFamily):
    """t = const slice, g_m = N^-2 dr^2 + r^2 dOmega^2 in Cartesian components."""

    m: float
    name = "schwarzschild_areal"
    time_symmetric = True

    @property
    def mass_hint(self):
        return self.m

    def check_domain(self, x):
        _areal_domain(self.m, x)

    def metric(self, x):
        return _schwarzschild_areal_metric(self.m, x)

    def extrinsic(self, x):
        return np.zeros((x.shape[0], 3, 3))


@dataclass(frozen=True)
class ConformalBump:
    """Smooth compactly supported term A * exp(1 - 1/(1 - s^2)), s = |x - c|/w."""

    amplitude: float
    center: tuple = (0.0, 0.0, 0.0)
    width: float = 1.0

    def value_grad(self, x):
        d = x - np.asarray(self.center, dtype=float)[None]
        s2 = np.einsum("ni,ni->n", d, d) / self.width**2
        inside = s2 < 1.0
        u = np.where(inside, 1.0 - s2, 1.0)
        val = np.where(inside, self.amplitude * np.exp(1.0 - 1.0 / u), 0.0)
        grad = (-2.0 * val / (self.width**2 * u**2))[:, None] * d
        return val, grad


@dataclass(frozen=True)
class PowerTail:
    """Spherically symmetric term A * r^-p."""

    amplitude: float
    power: float

    def value_grad(self, x):
        r = _radius(x)
        val = self.amplitude * r ** (-self.power)
        grad = (-self.power * val / r**2)[:, None] * x
        return val, grad


@dataclass(frozen=True)
class SchwarzschildIsotropic(DataFamily):
    """Conformally flat time-symmetric data g = phi^4 delta, phi = 1 + m/(2r) + extras.

    With no extra terms this is the Schwarzschild slice in isotropic
    coordinates.  ``terms`` holds :class:`ConformalBump` / :class:`PowerTail`
    perturbations of the conformal factor.
    """

    m: float
    terms: tuple = ()
    name = "schwarzschild_isotropic"
    time_symmetric = True

    @property
    def mass_hint(self):
        return self.m

    def check_domain(self, x):
        r = _radius(x)
        rh = 0.5 * abs(self.m) * (1.0 + HORIZON_MARGIN)
        if self.m != 0 and np.any(r < rh):
            raise DomainError(f"isotropic radius must exceed {rh:g}")

    def conformal_factor(self, x):
        r = _radius(x)
        phi = 1.0 + 0.5 * self.m / r
        dphi = (-0.5 * self.m / r**3)[:, None] * x
        for term in self.terms:
            v, dv = term.value_grad(x)
            phi = phi + v
            dphi = dphi + dv
        return phi, dphi

    def metric(self, x):
        phi, dphi = self.conformal_factor(x)
        g = (phi**4)[:, None, None] * _I3[None]
        dg = 4.0 * (phi**3)[:, None, None, None] * np.einsum("ij,nk->nijk", _I3, dphi)
        return g, dg

    def extrinsic(self, x):
        return np.zeros((x.shape[0], 3, 3))


@dataclass(frozen=True)
class GraphSliceSpec:
    """Graph t = f(x) in the Schwarzschild spacetime of mass m.

    f = f_even(r) + <x, a> r^(gamma - 1), with f_even = sin(ln r) when
    ``beta == 0``, r^beta for other beta < 1/2, and absent for ``beta=None``.
    """

    m: float
    beta: float = 0.0
    gamma: float = 0.0
    a: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if self.m == 0:
            raise ValueError("graph slices need m != 0")
        if self.beta is not None and not self.beta < 0.5:
            raise ValueError("beta must be < 1/2")
        if not self.gamma < 0.5:
            raise ValueError("gamma must be < 1/2")
        if len(self.a) != 3 or not np.all(np.isfinite(self.a)):
            raise ValueError("a must be a finite 3-vector")

    def profile(self, x):
        """f, grad f, Hess f at a batch of points."""
        r, xh, P, _ = _radial_tensor(x)
        Q = _I3[None] - P
        n = x.shape[0]
        f = np.zeros(n)
        df = np.zeros((n, 3))
        ddf = np.zeros((n, 3, 3))
        if self.beta is not None:
            if self.beta == 0:
                lr = np.log(r)
                F, F1, F2 = np.sin(lr), np.cos(lr) / r, -(np.sin(lr) + np.cos(lr)) / r**2
            else:
                b = self.beta
                F, F1, F2 = r**b, b * r ** (b - 1), b * (b - 1) * r ** (b - 2)
            f += F
            df += F1[:, None] * xh
            ddf += F2[:, None, None] * P + (F1 / r)[:, None, None] * Q
        a = np.asarray(self.a, dtype=float)
        if np.any(a != 0):
            c = self.gamma
            u = x @ a
            v = r ** (c - 1)
            v1 = (c - 1) * r ** (c - 2)
            v2 = (c - 1) * (c - 2) * r ** (c - 3)
            f += u * v
            df += v[:, None] * a[None] + (u * v1)[:, None] * xh
            ddf += v1[:, None, None] * (
                np.einsum("i,nj->nij", a, xh) + np.einsum("ni,j->nij", xh, a)
            ) + u[:, None, None] * (v2[:, None, None] * P + (v1 / r)[:, None, None] * Q)
        return f, df, ddf


def spacetime_metric(m, t, x):
    """Schwarzschild spacetime metric -N^2 dt^2 + g_m at (t, x); static in t."""
    x, single = _as_points(x)
    r = _areal_domain(m, x)
    g, dg = _schwarzschild_areal_metric(m, x)
    n = x.shape[0]
    N2 = 1.0 - 2.0 * m / r
    dN2 = (2.0 * m / r**3)[:, None] * x
    gbar = np.zeros((n, 4, 4))
    gbar[:, 0, 0] = -N2
    gbar[:, 1:, 1:] = g
    dgbar = np.zeros((n, 4, 4, 4))
    dgbar[:, 0, 0, 1:] = -dN2
    dgbar[:, 1:, 1:, 1:] = dg
    s = SpacetimeSample(gbar, dgbar)
    return SpacetimeSample(gbar[0], dgbar[0]) if single else s


def spacetime_christoffel(st):
    """Gamma^mu_{alpha beta} of a batched SpacetimeSample, index [n, mu, a, b]."""
    ginv = np.linalg.inv(st.gbar)
    d = st.dgbar
    low = 0.5 * (
        np.einsum("nvba->nvab", d) + np.einsum("nvab->nvab", d) - np.einsum("nabv->nvab", d)
    )
    n = low.shape[0]
    return np.matmul(ginv, low.reshape(n, 4, 16)).reshape(n, 4, 4, 4)


def graph_slice_data(spec, x, order=2):
    """Induced data (g_f, K_f) on the slice t = f(x); see :class:`GraphSlice`."""
    return GraphSlice(spec).sample(x, order=order)


@dataclass(frozen=True)
class GraphSlice(DataFamily):
    spec: GraphSliceSpec
    name = "graph_slice"

    @property
    def mass_hint(self):
        return self.spec.m

    def check_domain(self, x):
        _areal_domain(self.spec.m, x)

    def metric(self, x):
        m = self.spec.m
        r = _radius(x)
        gm, dgm = _schwarzschild_areal_metric(m, x)
        _, df, ddf = self.spec.profile(x)
        N2 = 1.0 - 2.0 * m / r
        # |df|^2 in g_m, whose inverse is delta - (2m/r) xh xh
        df_r = np.einsum("ni,ni->n", df, x) / r
        if np.any(N2 * (np.einsum("ni,ni->n", df, df) - 2.0 * m / r * df_r**2) >= 1.0):
            raise NonSpacelikeSlice("1 - N^2 |df|^2 <= 0")
        dN2 = (2.0 * m / r**3)[:, None] * x
        dfdf = np.einsum("ni,nj->nij", df, df)
        g = gm - N2[:, None, None] * dfdf
        dg = dgm - (
            np.einsum("nk,nij->nijk", dN2, dfdf)
            + N2[:, None, None, None]
            * (np.einsum("nik,nj->nijk", ddf, df) + np.einsum("ni,njk->nijk", df, ddf))
        )
        return g, dg

    def extrinsic(self, x):
        m = self.spec.m
        f, df, ddf = self.spec.profile(x)
        st = spacetime_metric(m, 0.0, x)
        gbar = st.gbar if st.gbar.ndim == 3 else st.gbar[None]
        dgbar = st.dgbar if st.dgbar.ndim == 4 else st.dgbar[None]
        st = SpacetimeSample(gbar, dgbar)
        gam4 = spacetime_christoffel(st)
        gm = gbar[:, 1:, 1:]
        N2 = -gbar[:, 0, 0]
        norm2 = 1.0 / N2 - np.einsum("nij,ni,nj->n", np.linalg.inv(gm), df, df)
        if np.any(norm2 * N2 <= 0):
            raise NonSpacelikeSlice("1 - N^2 |df|^2 <= 0")
        alpha = 1.0 / np.sqrt(norm2)
        n = x.shape[0]
        T = np.zeros((n, 3, 4))
        T[:, :, 0] = df
        T[:, :, 1:] = _I3[None]
        nlow = np.empty((n, 4))
        nlow[:, 0] = -alpha
        nlow[:, 1:] = alpha[:, None] * df
        # contract the normal first: K_ij = -n_m (T_i^a T_j^b Gamma^m_ab + delta^m_0 f_ij)
        G = np.einsum("nm,nmab->nab", nlow, gam4)
        K = -(T @ G @ np.swapaxes(T, 1, 2)) - nlow[:, 0, None, None] * ddf
        return 0.5 * (K + np.swapaxes(K, 1, 2))


@dataclass(frozen=True, eq=False)
class Transformed(DataFamily):
    """Pullback of ``inner`` under the rigid motion y = Q x + b."""

    Q: np.ndarray
    b: np.ndarray
    inner: DataFamily
    name = "transformed"

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if Q.shape != (3, 3) or np.abs(Q.T @ Q - _I3).max() > 1e-13:
            raise ValueError("Q must be orthogonal")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "b", b.reshape(3))

    @property
    def time_symmetric(self):
        return self.inner.time_symmetric

    @property
    def mass_hint(self):
        return self.inner.mass_hint

    def _map(self, x):
        return x @ self.Q.T + self.b[None]

    def check_domain(self, x):
        self.inner.check_domain(self._map(x))

    def metric(self, x):
        g, dg = self.inner.metric(self._map(x))
        Q = self.Q
        return (
            np.einsum("ai,bj,nab->nij", Q, Q, g, optimize=True),
            np.einsum("ai,bj,ck,nabc->nijk", Q, Q, Q, dg, optimize=True),
        )

    def extrinsic(self, x):
        K = self.inner.extrinsic(self._map(x))
        return np.einsum("ai,bj,nab->nij", self.Q, self.Q, K, optimize=True)

    def sample(self, x, order=2):
        x, single = _as_points(x)
        s = self.inner.sample(self._map(x), order=order)
        Q = self.Q
        out = InitialDataSample(
            x,
            np.einsum("ai,bj,nab->nij", Q, Q, s.g, optimize=True),
            np.einsum("ai,bj,ck,nabc->nijk", Q, Q, Q, s.dg, optimize=True),
            np.einsum("ai,bj,nab->nij", Q, Q, s.K, optimize=True),
            None if s.ddg is None
            else np.einsum("ai,bj,ck,dl,nabcd->nijkl", Q, Q, Q, Q, s.ddg, optimize=True),
            None if s.dK is None
            else np.einsum("ai,bj,ck,nabc->nijk", Q, Q, Q, s.dK, optimize=True),
        )
        return out.at(0) if single else out


def eval(family, x, order=2):  # noqa: A001 - mirrors the operation name
    """Sample ``family`` at a point (3,) or batch (N, 3)."""
    return family.sample(x, order=order)


def rigid_transform(family, Q, b):
    return Transformed(Q, b, family)


def random_rotation(rng):
    """Haar-random proper rotation."""
    A = rng.standard_normal((3, 3))
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(R))[None]
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q
