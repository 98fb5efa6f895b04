"""Pointwise tensor kernels with a numba path and a pure-numpy path.

The numba path is used when numba imports and ``ASYMFLAT_NUMBA`` is not set
to ``0``/``false``/``off``.  Both paths take batched arrays with a leading
point axis and return identical results up to roundoff; the benchmark in
``benchmarks/bench_kernels.py`` compares them.

Index layout (shared with :mod:`asymflat.idata`)::

    g[n, i, j]            g_ij
    dg[n, i, j, k]        d_k g_ij
    ddg[n, i, j, k, l]    d_l d_k g_ij
    gam[n, k, i, j]       Gamma^k_ij
"""

import os

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def _env_wants_numba():
    flag = os.environ.get("ASYMFLAT_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


_BACKEND = "numba" if (HAVE_NUMBA and _env_wants_numba()) else "numpy"


def backend():
    return _BACKEND


def set_backend(name):
    """Switch kernels between ``"numba"`` and ``"numpy"``; returns the old name."""
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    old, _BACKEND = _BACKEND, name
    return old


# --------------------------------------------------------------------------
# Christoffel symbols
# --------------------------------------------------------------------------

def _christoffel_np(g, dg):
    ginv = np.linalg.inv(g)
    low = 0.5 * (
        np.einsum("njli->nlij", dg)
        + np.einsum("nilj->nlij", dg)
        - np.einsum("nijl->nlij", dg)
    )
    gam = np.einsum("nkl,nlij->nkij", ginv, low)
    return ginv, gam


@njit(cache=True)
def _inv3(a, out):
    c00 = a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    c01 = a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]
    c02 = a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]
    det = a[0, 0] * c00 + a[0, 1] * c01 + a[0, 2] * c02
    out[0, 0] = c00 / det
    out[1, 0] = c01 / det
    out[2, 0] = c02 / det
    out[0, 1] = (a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]) / det
    out[1, 1] = (a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]) / det
    out[2, 1] = (a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]) / det
    out[0, 2] = (a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]) / det
    out[1, 2] = (a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]) / det
    out[2, 2] = (a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]) / det
    return det


@njit(cache=True)
def _christoffel_nb(g, dg):
    n = g.shape[0]
    ginv = np.empty((n, 3, 3))
    gam = np.zeros((n, 3, 3, 3))
    low = np.empty((3, 3, 3))
    for p in range(n):
        _inv3(g[p], ginv[p])
        for l in range(3):
            for i in range(3):
                for j in range(3):
                    low[l, i, j] = 0.5 * (dg[p, j, l, i] + dg[p, i, l, j] - dg[p, i, j, l])
        for k in range(3):
            for i in range(3):
                for j in range(i, 3):
                    s = 0.0
                    for l in range(3):
                        s += ginv[p, k, l] * low[l, i, j]
                    gam[p, k, i, j] = s
                    gam[p, k, j, i] = s
    return ginv, gam


def christoffel_batch(g, dg):
    """Inverse metric and Gamma^k_ij for a batch of points."""
    g = np.ascontiguousarray(g, dtype=float)
    dg = np.ascontiguousarray(dg, dtype=float)
    if _BACKEND == "numba":
        return _christoffel_nb(g, dg)
    return _christoffel_np(g, dg)


# --------------------------------------------------------------------------
# Ricci tensor
# --------------------------------------------------------------------------

def _ricci_np(g, dg, ddg):
    ginv, gam = _christoffel_np(g, dg)
    low = 0.5 * (
        np.einsum("njli->nlij", dg)
        + np.einsum("nilj->nlij", dg)
        - np.einsum("nijl->nlij", dg)
    )
    dlow = 0.5 * (
        np.einsum("njlim->nlijm", ddg)
        + np.einsum("niljm->nlijm", ddg)
        - np.einsum("nijlm->nlijm", ddg)
    )
    dginv = -np.einsum("nka,nabm,nbl->nklm", ginv, dg, ginv)
    dgam = np.einsum("nklm,nlij->nkijm", dginv, low) + np.einsum("nkl,nlijm->nkijm", ginv, dlow)
    ric = (
        np.einsum("nkijk->nij", dgam)
        - np.einsum("nkikj->nij", dgam)
        + np.einsum("nkkl,nlij->nij", gam, gam)
        - np.einsum("nkjl,nlik->nij", gam, gam)
    )
    ric = 0.5 * (ric + np.swapaxes(ric, 1, 2))
    scal = np.einsum("nij,nij->n", ginv, ric)
    return ric, scal


@njit(cache=True)
def _ricci_nb(g, dg, ddg):
    n = g.shape[0]
    ric = np.zeros((n, 3, 3))
    scal = np.zeros(n)
    ginv = np.empty((3, 3))
    low = np.empty((3, 3, 3))
    gam = np.empty((3, 3, 3))
    dlow = np.empty((3, 3, 3, 3))
    dginv = np.empty((3, 3, 3))
    dgam = np.empty((3, 3, 3, 3))
    for p in range(n):
        _inv3(g[p], ginv)
        for l in range(3):
            for i in range(3):
                for j in range(3):
                    low[l, i, j] = 0.5 * (dg[p, j, l, i] + dg[p, i, l, j] - dg[p, i, j, l])
                    for m in range(3):
                        dlow[l, i, j, m] = 0.5 * (
                            ddg[p, j, l, i, m] + ddg[p, i, l, j, m] - ddg[p, i, j, l, m]
                        )
        for k in range(3):
            for i in range(3):
                for j in range(3):
                    s = 0.0
                    for l in range(3):
                        s += ginv[k, l] * low[l, i, j]
                    gam[k, i, j] = s
        for k in range(3):
            for l in range(3):
                for m in range(3):
                    s = 0.0
                    for a in range(3):
                        for b in range(3):
                            s -= ginv[k, a] * dg[p, a, b, m] * ginv[b, l]
                    dginv[k, l, m] = s
        for k in range(3):
            for i in range(3):
                for j in range(3):
                    for m in range(3):
                        s = 0.0
                        for l in range(3):
                            s += dginv[k, l, m] * low[l, i, j] + ginv[k, l] * dlow[l, i, j, m]
                        dgam[k, i, j, m] = s
        for i in range(3):
            for j in range(3):
                s = 0.0
                for k in range(3):
                    s += dgam[k, i, j, k] - dgam[k, i, k, j]
                    for l in range(3):
                        s += gam[k, k, l] * gam[l, i, j] - gam[k, j, l] * gam[l, i, k]
                ric[p, i, j] = s
        for i in range(3):
            for j in range(i + 1, 3):
                avg = 0.5 * (ric[p, i, j] + ric[p, j, i])
                ric[p, i, j] = avg
                ric[p, j, i] = avg
        s = 0.0
        for i in range(3):
            for j in range(3):
                s += ginv[i, j] * ric[p, i, j]
        scal[p] = s
    return ric, scal


def ricci_batch(g, dg, ddg):
    """Ricci tensor and scalar curvature for a batch of points."""
    g = np.ascontiguousarray(g, dtype=float)
    dg = np.ascontiguousarray(dg, dtype=float)
    ddg = np.ascontiguousarray(ddg, dtype=float)
    if _BACKEND == "numba":
        return _ricci_nb(g, dg, ddg)
    return _ricci_np(g, dg, ddg)


# --------------------------------------------------------------------------
# Surface geometry at quadrature nodes
# --------------------------------------------------------------------------
# xa[n, a, :]   tangent vectors (a = theta, phi)
# xab[n, c, :]  second coordinate derivatives, c = (tt, tp, pp)
# out columns:  H, trSigmaK, trgK, K(nu,nu), sqrt(det h)

def _surface_np(xa, xab, outward, g, ginv, gam, K):
    nvec = np.cross(xa[:, 0], xa[:, 1])
    sgn = np.sign(np.einsum("ni,ni->n", nvec, outward))
    nvec = nvec * sgn[:, None]
    norm = np.sqrt(np.einsum("nij,ni,nj->n", ginv, nvec, nvec))
    nu_dn = nvec / norm[:, None]
    nu_up = np.einsum("nij,nj->ni", ginv, nu_dn)
    h = np.einsum("nij,nai,nbj->nab", g, xa, xa)
    det = h[:, 0, 0] * h[:, 1, 1] - h[:, 0, 1] * h[:, 1, 0]
    hinv = np.empty_like(h)
    hinv[:, 0, 0] = h[:, 1, 1] / det
    hinv[:, 1, 1] = h[:, 0, 0] / det
    hinv[:, 0, 1] = -h[:, 0, 1] / det
    hinv[:, 1, 0] = -h[:, 1, 0] / det
    pairs = ((0, 0), (0, 1), (1, 1))
    cov = np.empty((xa.shape[0], 3, 3))
    for c, (a, b) in enumerate(pairs):
        cov[:, c] = xab[:, c] + np.einsum("nkij,ni,nj->nk", gam, xa[:, a], xa[:, b])
    sff = np.einsum("nk,nck->nc", nu_dn, cov)
    kt = np.einsum("nij,nai,nbj->nab", K, xa, xa)
    hv = hinv[:, 0, 0] * sff[:, 0] + 2.0 * hinv[:, 0, 1] * sff[:, 1] + hinv[:, 1, 1] * sff[:, 2]
    out = np.empty((xa.shape[0], 5))
    out[:, 0] = -hv
    out[:, 1] = np.einsum("nab,nab->n", hinv, kt)
    out[:, 2] = np.einsum("nij,nij->n", ginv, K)
    out[:, 3] = np.einsum("nij,ni,nj->n", K, nu_up, nu_up)
    out[:, 4] = np.sqrt(np.where(det > 0, det, np.nan))
    return out, nu_up, nu_dn, det


@njit(cache=True)
def _surface_nb(xa, xab, outward, g, ginv, gam, K):
    n = xa.shape[0]
    out = np.empty((n, 5))
    nu_up = np.empty((n, 3))
    nu_dn = np.empty((n, 3))
    dets = np.empty(n)
    nv = np.empty(3)
    cov = np.empty((3, 3))
    for p in range(n):
        t0 = xa[p, 0]
        t1 = xa[p, 1]
        nv[0] = t0[1] * t1[2] - t0[2] * t1[1]
        nv[1] = t0[2] * t1[0] - t0[0] * t1[2]
        nv[2] = t0[0] * t1[1] - t0[1] * t1[0]
        dot = nv[0] * outward[p, 0] + nv[1] * outward[p, 1] + nv[2] * outward[p, 2]
        if dot < 0.0:
            for i in range(3):
                nv[i] = -nv[i]
        q = 0.0
        for i in range(3):
            for j in range(3):
                q += ginv[p, i, j] * nv[i] * nv[j]
        nrm = np.sqrt(q)
        for i in range(3):
            nu_dn[p, i] = nv[i] / nrm
        for i in range(3):
            s = 0.0
            for j in range(3):
                s += ginv[p, i, j] * nu_dn[p, j]
            nu_up[p, i] = s
        h00 = 0.0
        h01 = 0.0
        h11 = 0.0
        for i in range(3):
            for j in range(3):
                gij = g[p, i, j]
                h00 += gij * t0[i] * t0[j]
                h01 += gij * t0[i] * t1[j]
                h11 += gij * t1[i] * t1[j]
        det = h00 * h11 - h01 * h01
        dets[p] = det
        i00 = h11 / det
        i11 = h00 / det
        i01 = -h01 / det
        for c in range(3):
            if c == 0:
                ua = t0
                ub = t0
            elif c == 1:
                ua = t0
                ub = t1
            else:
                ua = t1
                ub = t1
            for k in range(3):
                s = xab[p, c, k]
                for i in range(3):
                    for j in range(3):
                        s += gam[p, k, i, j] * ua[i] * ub[j]
                cov[c, k] = s
        s0 = 0.0
        s1 = 0.0
        s2 = 0.0
        for k in range(3):
            s0 += nu_dn[p, k] * cov[0, k]
            s1 += nu_dn[p, k] * cov[1, k]
            s2 += nu_dn[p, k] * cov[2, k]
        out[p, 0] = -(i00 * s0 + 2.0 * i01 * s1 + i11 * s2)
        k00 = 0.0
        k01 = 0.0
        k11 = 0.0
        trg = 0.0
        knn = 0.0
        for i in range(3):
            for j in range(3):
                kij = K[p, i, j]
                k00 += kij * t0[i] * t0[j]
                k01 += kij * t0[i] * t1[j]
                k11 += kij * t1[i] * t1[j]
                trg += ginv[p, i, j] * kij
                knn += kij * nu_up[p, i] * nu_up[p, j]
        out[p, 1] = i00 * k00 + 2.0 * i01 * k01 + i11 * k11
        out[p, 2] = trg
        out[p, 3] = knn
        out[p, 4] = np.sqrt(det) if det > 0.0 else np.nan
    return out, nu_up, nu_dn, dets


def surface_nodes(xa, xab, outward, g, ginv, gam, K):
    """Mean curvature, tr_Sigma K and friends at surface nodes.

    Returns ``(cols, nu_up, nu_dn, det_h)`` where ``cols`` has the columns
    ``H, trSigmaK, trgK, K(nu,nu), sqrt(det h)``.  ``H`` is positive on round
    spheres for the normal oriented along ``outward``.
    """
    args = [np.ascontiguousarray(a, dtype=float) for a in (xa, xab, outward, g, ginv, gam, K)]
    if _BACKEND == "numba":
        return _surface_nb(*args)
    return _surface_np(*args)
