"""Limits of slowly converging sequences indexed by a radius.

Two models are fitted to a series y(r):

* monotone: ``c0 + c1 r^-p (+ c2 r^-(p+1) + c3 r^-(p+2))`` with the leading
  exponent ``p`` in [0.25, 3] found by variable projection; the sub-leading
  terms are only used when there are enough points to keep two degrees of
  freedom,
* log-periodic: ``c0 + A cos(ln r + phi)``, linear in (c0, A cos phi,
  A sin phi).

A series is flagged log-periodic when the residual of the bare monotone model
``c0 + c1 r^-p`` exceeds ten times the residual of the log-periodic one.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import FitFailed

P_MIN, P_MAX = 0.25, 3.0
OSCILLATION_RATIO = 10.0


@dataclass(frozen=True)
class SeriesLimit:
    value: float
    p: float
    residual: float
    stderr: float
    log_periodic: bool
    monotone_residual: float
    cos_residual: float
    amplitude: float
    phase: float
    offset: float
    n_terms: int
    order_spread: float = 0.0  # |c0(n_terms) - c0(n_terms - 1)|

    @property
    def uncertainty(self):
        """Error estimate of the limit: fit residual, standard error of c0, and
        the change of c0 when the last correction term is dropped."""
        return max(self.residual, self.stderr, self.order_spread)


def _design(r, p, n_terms):
    cols = [np.ones_like(r)]
    cols += [r ** (-(p + k)) for k in range(n_terms)]
    return np.column_stack(cols)


def _lsq(A, y):
    # column scaling keeps the normal equations well conditioned over decades
    s = np.abs(A).max(axis=0)
    s[s == 0] = 1.0
    c, *_ = np.linalg.lstsq(A / s, y, rcond=None)
    c = c / s
    res = y - A @ c
    return c, float(res @ res)


def fit_power(r, y, n_terms=1):
    """Best ``(c, p, ssr)`` for ``c0 + sum_k c_k r^-(p+k)``."""
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    grid = np.linspace(P_MIN, P_MAX, 276)
    ssr = np.array([_lsq(_design(r, p, n_terms), y)[1] for p in grid])
    if not np.all(np.isfinite(ssr)):
        raise FitFailed("non-finite residuals in power fit")
    i = int(np.argmin(ssr))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    best_p, best = grid[i], ssr[i]
    if hi > lo:
        res = minimize_scalar(
            lambda p: _lsq(_design(r, p, n_terms), y)[1],
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-10},
        )
        if res.success and res.fun <= best:
            best_p, best = float(res.x), float(res.fun)
    c, ssr_best = _lsq(_design(r, best_p, n_terms), y)
    return c, best_p, ssr_best


def fit_log_periodic(r, y):
    """``(c0, A, phi, ssr)`` for ``c0 + A cos(ln r + phi)`` with A >= 0."""
    lr = np.log(np.asarray(r, dtype=float))
    A = np.column_stack([np.ones_like(lr), np.cos(lr), -np.sin(lr)])
    c, ssr = _lsq(A, np.asarray(y, dtype=float))
    amp = float(np.hypot(c[1], c[2]))
    phase = float(np.arctan2(c[2], c[1]))
    return float(c[0]), amp, phase, ssr


def _c0_stderr(r, y, p, n_terms, ssr):
    A = _design(r, p, n_terms)
    dof = len(y) - A.shape[1] - 1
    if dof <= 0:
        return 0.0
    sigma2 = ssr / dof
    s = np.abs(A).max(axis=0)
    s[s == 0] = 1.0
    As = A / s
    try:
        cov = np.linalg.inv(As.T @ As) * sigma2
    except np.linalg.LinAlgError:
        return float("inf")
    return float(np.sqrt(max(cov[0, 0], 0.0)) / s[0])


def extrapolate_series(r, y):
    """Limit of y(r) as r -> infinity with diagnostics."""
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(r)
    r, y = r[order], y[order]
    n = r.size
    if n < 4:
        raise FitFailed(f"need at least 4 radii, got {n}")
    if not np.all(np.isfinite(y)):
        raise FitFailed("series contains non-finite values")
    scale = float(np.abs(y).max())
    spread = float(np.abs(y - y.mean()).max())
    if spread <= 1e-14 * scale or spread == 0.0:
        return SeriesLimit(float(y[-1]), float("nan"), 0.0, 0.0, False, 0.0, 0.0, 0.0, 0.0, float(y[-1]), 0)

    n_terms = max(1, min(3, n - 4))
    c, p, ssr = fit_power(r, y, n_terms)
    c_mono, _, ssr_mono = fit_power(r, y, 1) if n_terms > 1 else (c, p, ssr)
    spread = 0.0
    if n_terms > 1:
        c_low = c_mono if n_terms == 2 else fit_power(r, y, n_terms - 1)[0]
        spread = abs(float(c[0] - c_low[0]))
    off, amp, phase, ssr_cos = fit_log_periodic(r, y)
    rms = np.sqrt(ssr / n)
    rms_mono = np.sqrt(ssr_mono / n)
    rms_cos = np.sqrt(ssr_cos / n)
    noise_floor = 1e-12 * scale
    oscillating = bool(
        rms_mono > OSCILLATION_RATIO * rms_cos
        and rms_mono > noise_floor
        and amp > OSCILLATION_RATIO * rms_cos
    )
    stderr = _c0_stderr(r, y, p, n_terms, ssr)
    return SeriesLimit(
        value=float(c[0]),
        p=float(p),
        residual=float(rms),
        stderr=stderr,
        log_periodic=oscillating,
        monotone_residual=float(rms_mono),
        cos_residual=float(rms_cos),
        amplitude=amp,
        phase=phase,
        offset=off,
        n_terms=n_terms,
        order_spread=spread,
    )


def loglog_slope(r, y):
    """Least-squares slope of log|y| against log r and its rms residual.

    Returns ``(-inf, 0)`` when y vanishes identically (treated as faster than
    any power).
    """
    r = np.asarray(r, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if np.all(y <= 1e-300):
        return float("-inf"), 0.0
    keep = y > 1e-300
    lr, ly = np.log(r[keep]), np.log(y[keep])
    if lr.size < 2:
        return float("-inf"), 0.0
    A = np.column_stack([np.ones_like(lr), lr])
    c, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ c
    return float(c[1]), float(np.sqrt(res @ res / lr.size))
