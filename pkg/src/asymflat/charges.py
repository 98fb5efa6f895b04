"""Flux integrals over coordinate spheres and their limits r -> infinity.

Charges computed on S_r = {|x| = r} with the Euclidean area element:

* energy E and linear momentum P (ADM),
* the Beig-O Murchadha-Regge-Teitelboim center Z_BORT,
* the STCMC correction Z0, built from pi(x, x/r)^2 = r^2 pi(nu, nu)^2 so that
  the integral has the dimension of a length,
* angular momenta J_RT (with pi) and J_M (with pibar), using the rotation
  fields Y^(k) = e_k x x.

Index placement follows the flat convention x_k = x^k.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .curvature import conjugate_momenta, constraints, cotton, ricci, scalar_curvature
from .errors import EnergyTooSmall, NotTimeSymmetric
from .fitting import SeriesLimit, extrapolate_series, loglog_slope
from .idata import _schwarzschild_areal_metric
from .sphere import quad_sphere  # noqa: F401  (re-exported)

ENERGY_EPS = 1e-8
_I3 = np.eye(3)


@dataclass(frozen=True, eq=False)
class ChargeSample:
    r: float
    E: float
    P: np.ndarray
    Z_BORT: np.ndarray
    Z0: np.ndarray
    J_RT: np.ndarray
    J_M: np.ndarray
    E_used: float
    E_source: str
    z_flag: str = ""
    # E-independent numerators: Z_BORT = Z_num / E_used, Z0 = Z0_num / E_used
    Z_num: np.ndarray = field(default=None, repr=False)
    Z0_num: np.ndarray = field(default=None, repr=False)

    @property
    def Z_STCMC(self):
        return self.Z_BORT + self.Z0

    def with_energy(self, E, source):
        """Re-normalise the center fields with a different energy."""
        if abs(E) < ENERGY_EPS:
            nan = np.full(3, np.nan)
            return replace(self, Z_BORT=nan, Z0=nan.copy(), E_used=E, E_source=source, z_flag="E~0")
        return replace(
            self, Z_BORT=self.Z_num / E, Z0=self.Z0_num / E, E_used=E, E_source=source, z_flag=""
        )


def _sphere_points(r, quad):
    w = quad.directions
    return w, r * w


def charges_at(family, r, quad, E=None, strict=False):
    """All flux integrals on the coordinate sphere of radius ``r``.

    ``E`` is the energy used to normalise the center integrals (normally the
    ladder-extrapolated value); when omitted the finite-r energy is used.
    With ``strict=True`` a vanishing energy raises :class:`EnergyTooSmall`
    instead of flagging the center fields.
    """
    r = float(r)
    w, x = _sphere_points(r, quad)
    s = family.sample(x, order=1)
    area = r * r
    g, dg, K = s.g, s.dg, s.K

    div = np.einsum("nklk->nl", dg) - np.einsum("nkkl->nl", dg)
    e_int = np.einsum("nl,nl->n", div, w)
    E_r = area * quad.integrate(e_int) / (16.0 * np.pi)

    pi, pibar = conjugate_momenta(s)
    # K - tr_g(K) g = -pi
    P = -area * quad.integrate(np.einsum("nij,ni->nj", pi, w)) / (8.0 * np.pi)

    gd = g - _I3[None]
    z_int = x * e_int[:, None] - (
        np.einsum("nik,nk->ni", gd, w) - np.einsum("nkk->n", gd)[:, None] * w
    )
    Z_num = area * quad.integrate(z_int) / (16.0 * np.pi)
    pi_xn = r * np.einsum("nij,ni,nj->n", pi, w, w)
    Z0_num = area * quad.integrate(w * (pi_xn**2)[:, None]) / (32.0 * np.pi)

    Y = np.stack([np.cross(np.broadcast_to(_I3[k], x.shape), x) for k in range(3)], axis=1)
    J_RT = area * quad.integrate(np.einsum("nij,nki,nj->nk", pi, Y, w)) / (8.0 * np.pi)
    J_M = area * quad.integrate(np.einsum("nij,nki,nj->nk", pibar, Y, w)) / (8.0 * np.pi)

    sample = ChargeSample(
        r=r,
        E=float(E_r),
        P=P,
        Z_BORT=np.full(3, np.nan),
        Z0=np.full(3, np.nan),
        J_RT=J_RT,
        J_M=J_M,
        E_used=float("nan"),
        E_source="",
        Z_num=Z_num,
        Z0_num=Z0_num,
    )
    if E is None:
        E_use, source = E_r, "finite"
    else:
        E_use, source = float(E), "extrapolated"
    if strict and abs(E_use) < ENERGY_EPS:
        raise EnergyTooSmall(f"|E| = {abs(E_use):.3e} < {ENERGY_EPS:g}")
    return sample.with_energy(E_use, source)


# --------------------------------------------------------------------------
# ladders and extrapolation
# --------------------------------------------------------------------------

def geometric_ladder(r0, count=7, factor=2.0):
    return float(r0) * float(factor) ** np.arange(count)


def log_ladder(r_min, r_max, per_decade=24):
    """Log-equispaced radii with ``per_decade`` points per factor of ten."""
    n = int(round(per_decade * np.log10(r_max / r_min))) + 1
    return np.geomspace(r_min, r_max, n)


def default_ladder(family, count=7):
    m = family.mass_hint or 0.0
    return geometric_ladder(10.0 * max(1.0, 2.0 * abs(m)), count)


VECTOR_FIELDS = ("P", "Z_BORT", "Z0", "Z_STCMC", "J_RT", "J_M")


@dataclass(frozen=True, eq=False)
class ChargeReport:
    samples: list
    limits: dict
    M: float
    M_flag: str
    dense: bool = False

    @property
    def E(self):
        return self.limits["E"].value

    def vector(self, name):
        return np.array([self.limits[f"{name}{k + 1}"].value for k in range(3)])

    @property
    def log_periodic(self):
        return sorted(k for k, v in self.limits.items() if v.log_periodic)


def _series(samples, name):
    if name == "E":
        return np.array([s.E for s in samples])
    return np.array([getattr(s, name) for s in samples])


def extrapolate(samples):
    """Fit every charge series and assemble the report.

    The center fields of the returned samples are re-normalised with the
    extrapolated energy.
    """
    samples = sorted(samples, key=lambda s: s.r)
    r = np.array([s.r for s in samples])
    limits = {"E": extrapolate_series(r, _series(samples, "E"))}
    E = limits["E"].value
    source = "extrapolated"
    samples = [s.with_energy(E, source) for s in samples]
    for name in VECTOR_FIELDS:
        vals = _series(samples, name)
        for k in range(3):
            key = f"{name}{k + 1}"
            if np.all(np.isfinite(vals[:, k])):
                limits[key] = extrapolate_series(r, vals[:, k])
            else:
                limits[key] = SeriesLimit(
                    float("nan"), float("nan"), float("nan"), float("nan"), False,
                    float("nan"), float("nan"), float("nan"), float("nan"), float("nan"), 0,
                )
    P = np.array([limits[f"P{k + 1}"].value for k in range(3)])
    rad = E * E - P @ P
    if rad >= 0:
        M, flag = float(np.sqrt(rad)), ""
    else:
        M, flag = float("nan"), "spacelike energy-momentum"
    return ChargeReport(samples, limits, M, flag)


def charge_ladder(family, radii, quad):
    return [charges_at(family, r, quad) for r in np.sort(np.asarray(radii, dtype=float))]


def charge_report(family, radii=None, quad=None, densify=True, per_decade=24):
    """Charges over a ladder, re-sampled on a dense log ladder if any series oscillates."""
    quad = quad if quad is not None else quad_sphere(24)
    radii = default_ladder(family) if radii is None else np.asarray(radii, dtype=float)
    report = extrapolate(charge_ladder(family, radii, quad))
    if densify and report.log_periodic:
        dense = log_ladder(radii.min(), radii.max(), per_decade)
        if dense.size > radii.size:
            report = replace(extrapolate(charge_ladder(family, dense, quad)), dense=True)
    return report


# --------------------------------------------------------------------------
# parity (Regge-Teitelboim) diagnostics
# --------------------------------------------------------------------------

VANISH = 1e-13
RT_SLACK = 0.05


@dataclass(frozen=True, eq=False)
class ParityReport:
    radii: np.ndarray
    norms: dict  # name -> array of sup-norms over each sphere
    exponents: dict  # name -> (slope, rms residual)
    tau: float
    eta: float
    eta_g: float
    eta_K: float
    tau_AS: float
    mass: float
    rho_odd_trend: np.ndarray
    J_odd_trend: np.ndarray
    verdicts: dict


def _sup_frobenius(a):
    a = a.reshape(a.shape[0], -1)
    return float(np.sqrt(np.einsum("ni,ni->n", a, a)).max())


def _decay(r, values):
    """Fitted decay rate d in values ~ r^-d (inf when identically ~0)."""
    values = np.asarray(values)
    if np.all(values <= VANISH):
        return float("inf"), 0.0
    slope, res = loglog_slope(r, values)
    return -slope, res


def _isotropic_reference(m, x):
    r = np.sqrt(np.einsum("ni,ni->n", x, x))
    # isotropic radius of the areal sphere is not needed: compare in the same chart
    phi = 1.0 + 0.5 * m / r
    return (phi**4)[:, None, None] * _I3[None]


def parity_diagnostics(family, ladder=None, quad=None):
    """Decay rates of g - delta, K, g^odd, K^even and the parity verdicts."""
    quad = quad if quad is not None else quad_sphere(16)
    radii = np.sort(default_ladder(family) if ladder is None else np.asarray(ladder, dtype=float))
    report = extrapolate(charge_ladder(family, radii, quad))
    mass = report.E

    names = ("g-delta", "K", "g_odd", "K_even", "g-g_m")
    norms = {k: [] for k in names}
    rho_shell, J_shell = [], []
    w = quad.directions
    for r in radii:
        x = r * w
        sp = family.sample(x, order=2)
        sm = family.sample(-x, order=2)
        norms["g-delta"].append(_sup_frobenius(sp.g - _I3[None]))
        norms["K"].append(_sup_frobenius(sp.K))
        norms["g_odd"].append(_sup_frobenius(0.5 * (sp.g - sm.g)))
        norms["K_even"].append(_sup_frobenius(0.5 * (sp.K + sm.K)))
        g_areal, _ = _schwarzschild_areal_metric(mass, x) if abs(mass) > 0 else (_I3[None], None)
        g_iso = _isotropic_reference(mass, x)
        norms["g-g_m"].append(
            min(_sup_frobenius(sp.g - g_areal), _sup_frobenius(sp.g - g_iso))
        )
        cp, cm = constraints(sp), constraints(sm)
        rho_odd = 0.5 * (cp.rho - cm.rho)
        J_odd = 0.5 * (cp.J - cm.J)
        rho_shell.append(r * r * quad.integrate(r * np.abs(rho_odd)))
        J_shell.append(r * r * quad.integrate(r * np.sqrt(np.einsum("ni,ni->n", J_odd, J_odd))))
    norms = {k: np.array(v) for k, v in norms.items()}

    def cumulative(shell):
        shell = np.asarray(shell)
        out = np.zeros_like(shell)
        out[1:] = np.cumsum(0.5 * (shell[1:] + shell[:-1]) * np.diff(radii))
        return out

    exps = {k: _decay(radii, v) for k, v in norms.items()}
    tau_g = exps["g-delta"][0]
    tau_K = exps["K"][0] - 1.0
    tau = min(tau_g, tau_K)
    eta_g = exps["g_odd"][0] - 1.0 - tau
    eta_K = exps["K_even"][0] - 2.0 - tau
    eta = min(eta_g, eta_K)
    tau_AS = exps["g-g_m"][0]
    if not np.isfinite(tau):
        eta = eta_g = eta_K = float("inf")
    ae = tau > 0.5 - RT_SLACK
    verdicts = {
        "plain-AE": bool(ae),
        "weak-RT": bool(ae and eta >= 0.5 - RT_SLACK),
        "strong-RT": bool(ae and eta >= 1.0 - RT_SLACK),
        "asymptotically-Schwarzschildean": bool(tau_AS > 1.0 + RT_SLACK and tau_K > 1.0 + RT_SLACK),
    }
    return ParityReport(
        radii=radii,
        norms=norms,
        exponents=exps,
        tau=tau,
        eta=eta,
        eta_g=eta_g,
        eta_K=eta_K,
        tau_AS=tau_AS,
        mass=mass,
        rho_odd_trend=cumulative(rho_shell),
        J_odd_trend=cumulative(J_shell),
        verdicts=verdicts,
    )


# --------------------------------------------------------------------------
# weighted Scal / Cotton integrals for time-symmetric data
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AvalosReport:
    radii: np.ndarray
    epsilon: float
    sigma_w: float
    p: float
    q: float
    scal_annuli: np.ndarray
    cotton_annuli: np.ndarray
    scal_cumulative: np.ndarray
    cotton_cumulative: np.ndarray
    max_abs_scal: float
    max_abs_cotton: float
    # same integrals with |Ric| and |nabla Ric| in place of Scal and C
    scal_reference: float = float("nan")
    cotton_reference: float = float("nan")

    @property
    def scal_relative(self):
        """Scal integral over its reference: near roundoff for vacuum data."""
        return _ratio(self.scal_cumulative[-1], self.scal_reference)

    @property
    def cotton_relative(self):
        """Cotton integral over its reference: near the differencing error for conformally flat data."""
        return _ratio(self.cotton_cumulative[-1], self.cotton_reference)

    @property
    def scal_norm(self):
        return float(self.scal_cumulative[-1] ** (1.0 / self.p)) if self.scal_cumulative.size else 0.0

    @property
    def cotton_norm(self):
        return float(self.cotton_cumulative[-1] ** (1.0 / self.q)) if self.cotton_cumulative.size else 0.0


def _ratio(a, b):
    if a == 0:
        return 0.0
    return float(a / b) if b > 0 else float("inf")


def avalos_diagnostics(family, ladder=None, quad=None, epsilon=0.1, sigma_w=-2.0, p=4.0,
                       radial_nodes=4, cotton_rtol=1e-3):
    """Annulus integrals of |r^eps Scal|^p and |r^-sigma C|^q, q = 3/(6 + sigma).

    Only for time-symmetric data; raises :class:`NotTimeSymmetric` when K
    exceeds 1e-10 anywhere on the ladder spheres.
    """
    if not -3.0 < sigma_w < -1.0:
        raise ValueError("sigma_w must lie in (-3, -1)")
    if p <= 3.0:
        raise ValueError("p must exceed 3")
    quad = quad if quad is not None else quad_sphere(8)
    radii = np.sort(default_ladder(family) if ladder is None else np.asarray(ladder, dtype=float))
    w = quad.directions
    kmax = 0.0
    for r in radii:
        kmax = max(kmax, float(np.abs(family.sample(r * w, order=1).K).max()))
    if kmax > 1e-10:
        raise NotTimeSymmetric(f"max |K| = {kmax:.3e} on the ladder")
    q = 3.0 / (6.0 + sigma_w)
    xg, wg = np.polynomial.legendre.leggauss(radial_nodes)
    scal_ann, cot_ann = [], []
    scal_ref = cot_ref = 0.0
    smax = cmax = 0.0
    for r0, r1 in zip(radii[:-1], radii[1:]):
        rr = 0.5 * (r1 - r0) * xg + 0.5 * (r1 + r0)
        wr = 0.5 * (r1 - r0) * wg
        pts = np.concatenate([ri * w for ri in rr])
        s = family.sample(pts, order=2)
        scal = scalar_curvature(s)
        cs = cotton(family, pts, rtol=cotton_rtol)
        cn = np.sqrt(np.einsum("nijk,nijk->n", cs.C, cs.C))
        ric = ricci(s)
        rn = np.sqrt(np.einsum("nij,nij->n", ric, ric))
        rad = np.repeat(rr, w.shape[0])
        f_s = np.abs(rad**epsilon * scal) ** p
        f_c = np.abs(rad ** (-sigma_w) * cn) ** q
        weights = np.concatenate([wr_i * ri**2 * quad.weights for ri, wr_i in zip(rr, wr)])
        scal_ann.append(float(weights @ f_s))
        cot_ann.append(float(weights @ f_c))
        scal_ref += float(weights @ np.abs(rad**epsilon * rn) ** p)
        cot_ref += float(weights @ np.abs(rad ** (-sigma_w) * cs.grad_ricci_norm) ** q)
        smax = max(smax, float(np.abs(scal).max()))
        cmax = max(cmax, float(cn.max()))
    scal_ann = np.array(scal_ann)
    cot_ann = np.array(cot_ann)
    return AvalosReport(
        radii=radii,
        epsilon=epsilon,
        sigma_w=sigma_w,
        p=p,
        q=q,
        scal_annuli=scal_ann,
        cotton_annuli=cot_ann,
        scal_cumulative=np.cumsum(scal_ann),
        cotton_cumulative=np.cumsum(cot_ann),
        max_abs_scal=smax,
        max_abs_cotton=cmax,
        scal_reference=scal_ref,
        cotton_reference=cot_ref,
    )
