"""Closed surfaces written as radial graphs x(w) = a + rho(w) w over the unit sphere."""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateSurface, DomainError, NonSpacelikeMeanCurvature
from .sphere import mode_index, n_modes, real_sh

MODES = ("CMC", "STCMC", "CE+", "CE-")


def normalize_mode(mode):
    key = str(mode).strip().upper()
    aliases = {"CEPLUS": "CE+", "CE_PLUS": "CE+", "CEMINUS": "CE-", "CE_MINUS": "CE-"}
    key = aliases.get(key, key)
    if key not in MODES:
        raise ValueError(f"unknown curvature mode {mode!r}")
    return key


@dataclass(frozen=True, eq=False)
class SphereGraph:
    center: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        c = np.asarray(self.coeffs, dtype=float).ravel()
        L = int(round(np.sqrt(c.size))) - 1
        if n_modes(L) != c.size:
            raise ValueError(f"{c.size} coefficients is not a full band (L+1)^2")
        object.__setattr__(self, "coeffs", c)

    @property
    def L(self):
        return int(round(np.sqrt(self.coeffs.size))) - 1

    @classmethod
    def round(cls, radius, L, center=(0.0, 0.0, 0.0)):
        c = np.zeros(n_modes(L))
        c[0] = radius * np.sqrt(4.0 * np.pi)
        return cls(np.asarray(center, dtype=float), c)

    @property
    def mean_radius(self):
        return float(self.coeffs[0] / np.sqrt(4.0 * np.pi))

    def with_band(self, L):
        """Same surface truncated or zero-padded to band limit ``L``."""
        c = np.zeros(n_modes(L))
        k = min(c.size, self.coeffs.size)
        c[:k] = self.coeffs[:k]
        return SphereGraph(self.center, c)

    def scaled(self, factor):
        return SphereGraph(self.center * factor, self.coeffs * factor)

    def radius_at(self, directions):
        """rho at arbitrary unit vectors (shape (n, 3))."""
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        theta = np.arccos(np.clip(d[:, 2], -1.0, 1.0))
        phi = np.arctan2(d[:, 1], d[:, 0])
        return real_sh(self.L, theta, phi) @ self.coeffs

    def contains(self, points):
        """Signed radial gap rho(d) - |p - a| (positive strictly inside)."""
        d = np.atleast_2d(points) - self.center
        dist = np.sqrt(np.einsum("ni,ni->n", d, d))
        return self.radius_at(d / dist[:, None]) - dist


@dataclass(frozen=True, eq=False)
class SurfaceGeom:
    graph: SphereGraph
    quad: object
    x: np.ndarray  # node positions
    tangents: np.ndarray  # [n, a, i], a = theta, phi
    h: np.ndarray  # induced metric [n, a, b]
    nu_up: np.ndarray
    nu_dn: np.ndarray
    H: np.ndarray
    trSigmaK: np.ndarray
    trgK: np.ndarray
    K_nn: np.ndarray
    dA_g: np.ndarray  # g-area density w.r.t. the unit-sphere measure
    dA_delta: np.ndarray
    rho: np.ndarray

    @property
    def area_g(self):
        return float(self.quad.integrate(self.dA_g))

    @property
    def area_delta(self):
        return float(self.quad.integrate(self.dA_delta))

    @property
    def barycenter(self):
        return self.quad.integrate(self.x * self.dA_delta[:, None]) / self.area_delta

    @property
    def hawking_mass(self):
        return hawking_mass(self)

    @property
    def spacetime_H(self):
        return curvature_functional(self, "STCMC")

    def node_table(self):
        """Columns theta, phi, x1, x2, x3, H, trSigmaK, spacetime H (NaN if timelike)."""
        rad = self.H**2 - self.trSigmaK**2
        st = np.where(rad > 0, np.sqrt(np.abs(rad)), np.nan)
        return np.column_stack(
            [self.quad.theta, self.quad.phi, self.x, self.H, self.trSigmaK, st]
        )


NODE_COLUMNS = ("theta", "phi", "x1", "x2", "x3", "H", "trSigmaK", "spacetime_H")


def _graph_nodes(graph, quad):
    if graph.L > quad.L_max:
        raise ValueError(f"graph band {graph.L} exceeds quadrature band {quad.L_max}")
    Y, Yt, Yp, Ytt, Ytp, Ypp = quad.basis(graph.L, derivatives=True)
    c = graph.coeffs
    return Y @ c, Yt @ c, Yp @ c, Ytt @ c, Ytp @ c, Ypp @ c


def embedding(graph, quad, rho_derivs=None):
    """Node positions, tangent vectors and second coordinate derivatives."""
    r, rt, rp, rtt, rtp, rpp = _graph_nodes(graph, quad) if rho_derivs is None else rho_derivs
    w, wt, wp, wtt, wtp, wpp = quad.frame()
    x = graph.center + r[:, None] * w
    xt = rt[:, None] * w + r[:, None] * wt
    xp = rp[:, None] * w + r[:, None] * wp
    xtt = rtt[:, None] * w + 2.0 * rt[:, None] * wt + r[:, None] * wtt
    xtp = rtp[:, None] * w + rt[:, None] * wp + rp[:, None] * wt + r[:, None] * wtp
    xpp = rpp[:, None] * w + 2.0 * rp[:, None] * wp + r[:, None] * wpp
    return r, x, np.stack([xt, xp], axis=1), np.stack([xtt, xtp, xpp], axis=1)


def _geometry_from_sample(graph, quad, r, x, xa, xab, s):
    ginv, gam = _kernels.christoffel_batch(s.g, s.dg)
    cols, nu_up, nu_dn, det = _kernels.surface_nodes(xa, xab, quad.directions, s.g, ginv, gam, s.K)
    if not np.all(det > 0) or not np.all(np.isfinite(cols)):
        raise DegenerateSurface("induced metric is not positive definite at every node")
    sin_t = np.sin(quad.theta)
    hd = np.einsum("nai,nbi->nab", xa, xa)
    det_d = hd[:, 0, 0] * hd[:, 1, 1] - hd[:, 0, 1] ** 2
    h = np.einsum("nij,nai,nbj->nab", s.g, xa, xa)
    return SurfaceGeom(
        graph=graph,
        quad=quad,
        x=x,
        tangents=xa,
        h=h,
        nu_up=nu_up,
        nu_dn=nu_dn,
        H=cols[:, 0],
        trSigmaK=cols[:, 1],
        trgK=cols[:, 2],
        K_nn=cols[:, 3],
        dA_g=cols[:, 4] / sin_t,
        dA_delta=np.sqrt(det_d) / sin_t,
        rho=r,
    )


def surface_geometry(family, graph, quad):
    """Geometry of the graph surface at the quadrature nodes."""
    r, x, xa, xab = embedding(graph, quad)
    if np.any(r <= 0):
        raise DegenerateSurface("radial function is not positive at every node")
    s = family.sample(x, order=1)
    return _geometry_from_sample(graph, quad, r, x, xa, xab, s)


def surface_geometry_batch(family, graphs, quad):
    """Geometries of several graphs with a single family evaluation."""
    parts = [embedding(g, quad) for g in graphs]
    for r, *_ in parts:
        if np.any(r <= 0):
            raise DegenerateSurface("radial function is not positive at every node")
    n = quad.size
    s = family.sample(np.concatenate([p[1] for p in parts]), order=1)
    out = []
    for k, (g, (r, x, xa, xab)) in enumerate(zip(graphs, parts)):
        sl = slice(k * n, (k + 1) * n)
        sub = type(s)(x=s.x[sl], g=s.g[sl], dg=s.dg[sl], K=s.K[sl])
        out.append(_geometry_from_sample(g, quad, r, x, xa, xab, sub))
    return out


def curvature_functional(geom, mode):
    mode = normalize_mode(mode)
    if mode == "CMC":
        return geom.H.copy()
    if mode == "CE+":
        return geom.H + geom.trSigmaK
    if mode == "CE-":
        return geom.H - geom.trSigmaK
    rad = geom.H**2 - geom.trSigmaK**2
    if np.any(rad <= 0):
        raise NonSpacelikeMeanCurvature(
            f"H^2 - (tr_Sigma K)^2 <= 0 at {int(np.sum(rad <= 0))} node(s)"
        )
    return np.sqrt(rad)


def hawking_mass(geom):
    area = geom.area_g
    willmore = float(geom.quad.integrate(geom.H**2 * geom.dA_g))
    return float(np.sqrt(area / (16.0 * np.pi)) * (1.0 - willmore / (16.0 * np.pi)))


def barycenter(geom):
    return geom.barycenter


def safe_surface_geometry(family, graph, quad):
    """surface_geometry that reports domain violations as DegenerateSurface."""
    try:
        return surface_geometry(family, graph, quad)
    except DomainError as exc:
        raise DegenerateSurface(f"surface leaves the data domain: {exc}") from exc


__all__ = [
    "MODES",
    "NODE_COLUMNS",
    "SphereGraph",
    "SurfaceGeom",
    "barycenter",
    "curvature_functional",
    "embedding",
    "hawking_mass",
    "mode_index",
    "normalize_mode",
    "surface_geometry",
    "surface_geometry_batch",
]
