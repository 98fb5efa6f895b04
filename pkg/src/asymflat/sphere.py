"""Gauss-Legendre x uniform-longitude quadrature and real spherical harmonics.

Real orthonormal harmonics without the Condon-Shortley phase::

    Y_l0        = P_l^0(cos t)
    Y_lm, m>0   = sqrt(2) P_l^m(cos t) cos(m p)
    Y_l,-m      = sqrt(2) P_l^m(cos t) sin(m p)

with ``P_l^m`` normalised so that the harmonics are orthonormal on the unit
sphere.  Modes are flattened as ``index = l*l + l + m``.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre


def mode_index(l, m):
    return l * l + l + m


def n_modes(L):
    return (L + 1) ** 2


def mode_degrees(L):
    """Degree ``l`` of every flattened mode index."""
    return np.concatenate([np.full(2 * l + 1, l) for l in range(L + 1)])


def mode_orders(L):
    return np.concatenate([np.arange(-l, l + 1) for l in range(L + 1)])


def _legendre_table(L, theta, derivatives=True):
    """Normalised P_l^m(cos theta) and its first two theta-derivatives.

    Returns arrays of shape (L+1, L+1, N) indexed ``[l, m]``; entries with
    ``m > l`` are zero.  Derivative nodes must avoid the poles.
    """
    theta = np.asarray(theta, dtype=float)
    x = np.cos(theta)
    s = np.sin(theta)
    p = np.zeros((L + 1, L + 1, theta.size))
    p[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, L + 1):
        p[m, m] = np.sqrt((2 * m + 1) / (2.0 * m)) * s * p[m - 1, m - 1]
    for m in range(0, L):
        p[m + 1, m] = np.sqrt(2 * m + 3.0) * x * p[m, m]
    for m in range(0, L + 1):
        for l in range(m + 2, L + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            p[l, m] = a * (x * p[l - 1, m] - b * p[l - 2, m])
    if not derivatives:
        return p, None, None

    dp = np.zeros_like(p)
    for l in range(1, L + 1):
        for m in range(0, l + 1):
            c = np.sqrt((2 * l + 1.0) * (l * l - m * m) / (2 * l - 1.0)) if m < l else 0.0
            prev = p[l - 1, m] if m <= l - 1 else 0.0
            dp[l, m] = (l * x * p[l, m] - c * prev) / s
    ddp = np.zeros_like(p)
    cot = x / s
    for l in range(L + 1):
        for m in range(l + 1):
            ddp[l, m] = -cot * dp[l, m] - (l * (l + 1) - m * m / s**2) * p[l, m]
    return p, dp, ddp


def real_sh(L, theta, phi, derivatives=False):
    """Real harmonics up to degree ``L`` at the points (theta, phi).

    Returns ``Y`` with shape (N, M).  With ``derivatives=True`` returns the
    tuple ``(Y, Y_t, Y_p, Y_tt, Y_tp, Y_pp)``.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    p, dp, ddp = _legendre_table(L, theta, derivatives)
    M = n_modes(L)
    shape = (theta.size, M)
    Y = np.empty(shape)
    if derivatives:
        Yt, Yp, Ytt, Ytp, Ypp = (np.empty(shape) for _ in range(5))
    r2 = np.sqrt(2.0)
    for l in range(L + 1):
        Y[:, mode_index(l, 0)] = p[l, 0]
        if derivatives:
            k = mode_index(l, 0)
            Yt[:, k] = dp[l, 0]
            Ytt[:, k] = ddp[l, 0]
            Yp[:, k] = 0.0
            Ytp[:, k] = 0.0
            Ypp[:, k] = 0.0
        for m in range(1, l + 1):
            c, s = np.cos(m * phi), np.sin(m * phi)
            kc, ks = mode_index(l, m), mode_index(l, -m)
            Y[:, kc] = r2 * p[l, m] * c
            Y[:, ks] = r2 * p[l, m] * s
            if derivatives:
                Yt[:, kc] = r2 * dp[l, m] * c
                Yt[:, ks] = r2 * dp[l, m] * s
                Ytt[:, kc] = r2 * ddp[l, m] * c
                Ytt[:, ks] = r2 * ddp[l, m] * s
                Yp[:, kc] = -m * r2 * p[l, m] * s
                Yp[:, ks] = m * r2 * p[l, m] * c
                Ytp[:, kc] = -m * r2 * dp[l, m] * s
                Ytp[:, ks] = m * r2 * dp[l, m] * c
                Ypp[:, kc] = -m * m * Y[:, kc]
                Ypp[:, ks] = -m * m * Y[:, ks]
    if derivatives:
        return Y, Yt, Yp, Ytt, Ytp, Ypp
    return Y


@dataclass(frozen=True, eq=False)
class SphereQuadrature:
    """Product quadrature on the unit sphere.

    ``L_max + 1`` Gauss-Legendre nodes in cos(theta) times ``2 L_max + 1``
    equispaced longitudes; exact for products of two harmonics of degree
    at most ``L_max``.
    """

    L_max: int
    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def nodes(self):
        return np.column_stack([self.theta, self.phi])

    @property
    def size(self):
        return self.theta.size

    @property
    def directions(self):
        """Unit vectors omega at the nodes, shape (N, 3)."""
        if "omega" not in self._cache:
            st = np.sin(self.theta)
            self._cache["omega"] = np.column_stack(
                [st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)]
            )
        return self._cache["omega"]

    def frame(self):
        """omega and its theta/phi derivatives at the nodes."""
        if "frame" not in self._cache:
            t, p = self.theta, self.phi
            ct, st, cp, sp = np.cos(t), np.sin(t), np.cos(p), np.sin(p)
            w = self.directions
            wt = np.column_stack([ct * cp, ct * sp, -st])
            wp = np.column_stack([-st * sp, st * cp, np.zeros_like(t)])
            wtt = -w
            wtp = np.column_stack([-ct * sp, ct * cp, np.zeros_like(t)])
            wpp = np.column_stack([-st * cp, -st * sp, np.zeros_like(t)])
            self._cache["frame"] = (w, wt, wp, wtt, wtp, wpp)
        return self._cache["frame"]

    def basis(self, L=None, derivatives=False):
        """Harmonic matrices at the nodes (cached)."""
        L = self.L_max if L is None else L
        key = ("Y", L, derivatives)
        if key not in self._cache:
            self._cache[key] = real_sh(L, self.theta, self.phi, derivatives=derivatives)
        return self._cache[key]

    def integrate(self, values):
        """Integrate node values over the unit sphere (leading axis = nodes)."""
        return np.tensordot(self.weights, values, axes=(0, 0))

    def analyze(self, values, L=None):
        """Harmonic coefficients of node values (last axis = nodes)."""
        Y = self.basis(L)
        return (np.asarray(values) * self.weights) @ Y

    def synthesize(self, coeffs, L=None):
        Y = self.basis(L)
        return np.asarray(coeffs) @ Y.T


@lru_cache(maxsize=16)
def quad_sphere(L_max):
    """Quadrature with band limit ``L_max`` (cached; treat as read-only)."""
    L_max = int(L_max)
    if L_max < 2:
        raise ValueError("L_max must be at least 2")
    x, wx = roots_legendre(L_max + 1)
    nphi = 2 * L_max + 1
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    theta = np.arccos(x)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    ww = np.outer(wx, np.full(nphi, 2.0 * np.pi / nphi))
    return SphereQuadrature(L_max, tt.ravel(), pp.ravel(), ww.ravel())
