"""Pointwise curvature of initial data: connection, Ricci, constraints, Cotton.

All functions accept a single :class:`~asymflat.idata.InitialDataSample` or a
batched one and return arrays with the matching leading shape.  Operators
that need third derivatives of ``g`` (Cotton tensor, gradient of Scal) take
the family and points instead, and differentiate ``ricci`` numerically.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateMetric, DifferentiationBudgetExceeded
from .idata import _as_points

EIGHT_PI = 8.0 * np.pi
SIXTEEN_PI = 16.0 * np.pi
RICCI_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class ConstraintSample:
    rho: np.ndarray
    J: np.ndarray


@dataclass(frozen=True, eq=False)
class OneFormSample:
    A_ST: np.ndarray
    A_CE: np.ndarray


@dataclass(frozen=True, eq=False)
class CottonSample:
    C: np.ndarray
    error_estimate: float = 0.0
    grad_ricci_norm: np.ndarray = None  # |nabla Ric|_delta per point, the natural scale of C


def _batch(s):
    return s.as_batch(), not s.batched


def _unbatch(a, single):
    return a[0] if single else a


def _connection(s):
    g = s.g
    det = np.linalg.det(g)
    if np.any(~np.isfinite(det)) or np.any(det <= 0):
        raise DegenerateMetric("metric is degenerate")
    return _kernels.christoffel_batch(g, s.dg)


def christoffel(s):
    """Gamma^k_ij with layout ``[..., k, i, j]``."""
    b, single = _batch(s)
    _, gam = _connection(b)
    return _unbatch(gam, single)


def inverse_metric(s):
    b, single = _batch(s)
    return _unbatch(np.linalg.inv(b.g), single)


def ricci(s):
    b, single = _batch(s)
    _connection(b)
    ric, _ = _kernels.ricci_batch(b.g, b.dg, b.ddg)
    return _unbatch(ric, single)


def scalar_curvature(s):
    b, single = _batch(s)
    _connection(b)
    _, scal = _kernels.ricci_batch(b.g, b.dg, b.ddg)
    return _unbatch(scal, single)


def covariant_dK(s, ginv=None, gam=None):
    """nabla_k K_ij, layout ``[n, i, j, k]`` (batched input)."""
    if gam is None:
        ginv, gam = _connection(s)
    return (
        s.dK
        - np.einsum("nlki,nlj->nijk", gam, s.K)
        - np.einsum("nlkj,nil->nijk", gam, s.K)
    )


def constraints(s):
    """Energy density rho and momentum density J (a covector)."""
    b, single = _batch(s)
    ginv, gam = _connection(b)
    _, scal = _kernels.ricci_batch(b.g, b.dg, b.ddg)
    K = b.K
    trK = np.einsum("nij,nij->n", ginv, K)
    K2 = np.einsum("nia,njb,nij,nab->n", ginv, ginv, K, K)
    rho = (scal - K2 + trK**2) / SIXTEEN_PI
    nK = covariant_dK(b, ginv, gam)
    divK = np.einsum("nik,nijk->nj", ginv, nK)
    dtrK = np.einsum("nij,nijk->nk", ginv, nK)
    J = (divK - dtrK) / EIGHT_PI
    return ConstraintSample(_unbatch(rho, single), _unbatch(J, single))


def conjugate_momenta(s):
    """(pi, pibar): pi = (tr_g K) g - K and pibar = K - (tr_delta K) delta."""
    b, single = _batch(s)
    ginv = np.linalg.inv(b.g)
    trK = np.einsum("nij,nij->n", ginv, b.K)
    pi = trK[:, None, None] * b.g - b.K
    trd = np.einsum("nii->n", b.K)
    pibar = b.K - trd[:, None, None] * np.eye(3)[None]
    return _unbatch(pi, single), _unbatch(pibar, single)


# --------------------------------------------------------------------------
# third derivatives by nested differencing
# --------------------------------------------------------------------------

def _ricci_at(family, x):
    s = family.sample(x, order=2)
    ric, scal = _kernels.ricci_batch(s.g, s.dg, s.ddg)
    return ric, scal


def ricci_gradient(family, x, step=RICCI_STEP, rtol=1e-4):
    """Coordinate gradients of Ric and Scal with a Richardson error estimate.

    Central differences with steps h and h/2 (h = max(1, r) * step) are
    combined into a fourth-order value.  Returns ``(dRic, dScal, err)`` where
    ``dRic[n, i, j, k] = d_k Ric_ij`` and ``err`` is the largest estimated
    error relative to the local curvature scale.
    """
    x, _ = _as_points(x)
    r = np.sqrt(np.einsum("ni,ni->n", x, x))
    h = np.maximum(1.0, r) * step
    n = x.shape[0]
    ric0, _ = _ricci_at(family, x)

    def central(hh):
        pts = []
        for k in range(3):
            e = np.zeros(3)
            e[k] = 1.0
            pts.append(x + hh[:, None] * e)
            pts.append(x - hh[:, None] * e)
        ric, scal = _ricci_at(family, np.concatenate(pts))
        ric = ric.reshape(6, n, 3, 3)
        scal = scal.reshape(6, n)
        dric = np.stack([(ric[2 * k] - ric[2 * k + 1]) for k in range(3)], axis=-1)
        dscal = np.stack([(scal[2 * k] - scal[2 * k + 1]) for k in range(3)], axis=-1)
        return dric / (2 * hh[:, None, None, None]), dscal / (2 * hh[:, None])

    d1, s1 = central(h)
    d2, s2 = central(0.5 * h)
    dric = d2 + (d2 - d1) / 3.0
    dscal = s2 + (s2 - s1) / 3.0
    err_ric = np.abs(d2 - d1).max(axis=(1, 2, 3)) / 3.0
    err_scal = np.abs(s2 - s1).max(axis=1) / 3.0
    scale = np.abs(dric).max(axis=(1, 2, 3)) + np.abs(ric0).max(axis=(1, 2)) / np.maximum(1.0, r)
    scale = np.maximum(scale, 1e-300)
    rel = np.maximum(err_ric, err_scal) / scale
    worst = float(rel.max()) if rel.size else 0.0
    if worst > rtol:
        raise DifferentiationBudgetExceeded(
            f"Richardson estimate {worst:.2e} exceeds tolerance {rtol:.1e}"
        )
    return dric, dscal, worst


def cotton(family, x, step=RICCI_STEP, rtol=1e-4):
    """Cotton tensor C_ijk = nabla_k Ric_ij - nabla_j Ric_ik - (1/4)(...)."""
    pts, single = _as_points(x)
    s = family.sample(pts, order=2)
    ginv, gam = _connection(s)
    ric, _ = _kernels.ricci_batch(s.g, s.dg, s.ddg)
    dric, dscal, err = ricci_gradient(family, pts, step=step, rtol=rtol)
    nric = (
        dric
        - np.einsum("nlki,nlj->nijk", gam, ric)
        - np.einsum("nlkj,nil->nijk", gam, ric)
    )
    C = (
        nric
        - np.swapaxes(nric, 2, 3)
        - 0.25 * (np.einsum("nk,nij->nijk", dscal, s.g) - np.einsum("nj,nik->nijk", dscal, s.g))
    )
    C = 0.5 * (C - np.swapaxes(C, 2, 3))
    gn = np.sqrt(np.einsum("nijk,nijk->n", nric, nric))
    return CottonSample(C[0] if single else C, err, gn[0] if single else gn)


def local_one_forms(family, x, step=RICCI_STEP, rtol=1e-4):
    """A_ST and A_CE at points.

    Divergences act on the first slot with the g-covariant derivative, and
    (K^2)_ij = K_ia g^ab K_bj.
    """
    pts, single = _as_points(x)
    s = family.sample(pts, order=2)
    ginv, gam = _connection(s)
    _, dscal, _ = ricci_gradient(family, pts, step=step, rtol=rtol)
    K = s.K
    nK = covariant_dK(s, ginv, gam)
    Kup = np.einsum("nia,njb,nab->nij", ginv, ginv, K)
    trK = np.einsum("nij,nij->n", ginv, K)
    dtrK = np.einsum("nij,nijk->nk", ginv, nK)
    dK2 = 2.0 * np.einsum("nij,nijk->nk", Kup, nK)
    dtrK2 = 2.0 * trK[:, None] * dtrK
    divK = np.einsum("nik,nijk->nj", ginv, nK)
    # nabla_k (K^2)_ij = nabla_k K_ia g^ab K_bj + K_ia g^ab nabla_k K_bj
    nK2 = np.einsum("niak,nab,nbj->nijk", nK, ginv, K) + np.einsum(
        "nia,nab,nbjk->nijk", K, ginv, nK
    )
    divK2 = np.einsum("nik,nijk->nj", ginv, nK2)
    dtrK_up = np.einsum("nik,nk->ni", ginv, dtrK)
    div_trK_K = np.einsum("ni,nij->nj", dtrK_up, K) + trK[:, None] * divK
    A_ST = 1.5 * dscal + 0.125 * (dK2 + 20.5 * dtrK2 + 4.0 * divK2 - 14.0 * div_trK_K)
    A_CE = (5.0 / 6.0) * dtrK - 2.0 * divK
    if single:
        return OneFormSample(A_ST[0], A_CE[0])
    return OneFormSample(A_ST, A_CE)
