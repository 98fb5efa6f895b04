"""Leaves of constant (spacetime) mean curvature or constant expansion, and sweeps over sigma.

A leaf is a :class:`~asymflat.surfaces.SphereGraph`; its unknowns are the
harmonic coefficients of rho with l != 1 together with the center a, which
takes over the role of the three l = 1 (translation) modes.  The inner Newton
iteration solves the l != 1 equations for fixed center; the outer iteration
moves the center along the reduced l = 1 equation

    Phi(a) = R_1(c*(a), a),   dPhi/da = J_1a - J_1c J_cc^{-1} J_ca,

where J is the finite-difference Jacobian of the residual coefficients.  When
that 3x3 Schur complement is numerically zero (translation-invariant data)
the center is undetermined and the solver raises :class:`KernelStuck`.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    DegenerateSurface,
    DomainError,
    EigSolverFailed,
    FitFailed,
    KernelStuck,
    NewtonDiverged,
    NumericalFailure,
)
from .fitting import extrapolate_series, loglog_slope
from .sphere import mode_degrees, n_modes, quad_sphere
from .surfaces import (
    SphereGraph,
    curvature_functional,
    embedding,
    normalize_mode,
    surface_geometry,
)

# smallest admissible singular value of sigma^3 B / 6 (B = center Schur complement)
KERNEL_STIFFNESS_MIN = 1e-5
COLUMN_CHUNK = 48


@dataclass(frozen=True)
class LeafProblem:
    mode: str
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "mode", normalize_mode(self.mode))
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def target(self):
        return 2.0 / self.sigma


@dataclass(frozen=True)
class SolveOptions:
    L_max: int = 24
    newton_rtol: float = 1e-10  # newton_tol = newton_rtol * 2/sigma
    max_newton: int = 30
    center_rtol: float = 1e-10  # center_tol = center_rtol * sigma
    max_center_iters: int = 50
    damping: float = 0.5
    fd_rstep: float = 1e-6  # Jacobian column step = fd_rstep * sigma
    jacobian: str = "once"  # "once" or "always"
    cross_check: bool = False

    def __post_init__(self):
        if self.L_max < 2:
            raise ValueError("L_max must be at least 2")
        for name in ("newton_rtol", "center_rtol", "fd_rstep"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.jacobian not in ("once", "always"):
            raise ValueError("jacobian must be 'once' or 'always'")

    def newton_tol(self, sigma):
        return self.newton_rtol * 2.0 / sigma

    def center_tol(self, sigma):
        return self.center_rtol * sigma


@dataclass(frozen=True, eq=False)
class Leaf:
    problem: LeafProblem
    graph: SphereGraph
    area: float
    area_delta: float
    barycenter: np.ndarray
    hawking_mass: float
    residual: float  # sup-norm of the band-limited residual
    nodal_residual: float  # sup-norm of F - 2/sigma at the nodes
    kernel_projection: float  # norm of the l = 1 residual coefficients
    newton_history: tuple
    center_steps: int
    center_stiffness: np.ndarray  # singular values of sigma^3 B / 6
    area_radius_ratio: float  # (2/H) / sqrt(|Sigma|/4pi) with H = 2/sigma
    area_gradient: np.ndarray = None  # cross-check: dG/da of the area function
    jacobian: np.ndarray = field(default=None, repr=False)

    @property
    def sigma(self):
        return self.problem.sigma


# --------------------------------------------------------------------------
# residual evaluation
# --------------------------------------------------------------------------

def _functional_many(family, quad, mode, embeddings):
    """Curvature functional for several embeddings sharing one family sample."""
    n = quad.size
    x = np.concatenate([e[1] for e in embeddings])
    try:
        s = family.sample(x, order=1)
    except DomainError as exc:
        raise DegenerateSurface(f"surface leaves the data domain: {exc}") from exc
    xa = np.concatenate([e[2] for e in embeddings])
    xab = np.concatenate([e[3] for e in embeddings])
    outward = np.tile(quad.directions, (len(embeddings), 1))
    ginv, gam = _kernels.christoffel_batch(s.g, s.dg)
    cols, _, _, det = _kernels.surface_nodes(xa, xab, outward, s.g, ginv, gam, s.K)
    if not np.all(det > 0) or not np.all(np.isfinite(cols)):
        raise DegenerateSurface("induced metric is not positive definite at every node")

    class _G:  # minimal stand-in accepted by curvature_functional
        pass

    geom = _G()
    geom.H, geom.trSigmaK = cols[:, 0], cols[:, 1]
    return curvature_functional(geom, mode).reshape(len(embeddings), n)


def _rho_derivs(graph, quad):
    Ys = quad.basis(graph.L, derivatives=True)
    return tuple(Y @ graph.coeffs for Y in Ys)


def residual(family, graph, problem, quad):
    """Harmonic coefficients (band ``graph.L``) of F - 2/sigma."""
    F = _functional_many(family, quad, problem.mode, [embedding(graph, quad)])[0]
    return quad.analyze(F - problem.target, graph.L)


def _residual_full(family, graph, problem, quad):
    F = _functional_many(family, quad, problem.mode, [embedding(graph, quad)])[0]
    dev = F - problem.target
    R = quad.analyze(dev, graph.L)
    return R, float(np.abs(dev).max())


def _sup(quad, R, L):
    return float(np.abs(quad.synthesize(R, L)).max())


def jacobian(family, graph, problem, quad, step, columns="solver"):
    """Forward-difference Jacobian of the residual coefficients.

    ``columns="solver"``: the l != 1 coefficients followed by the three center
    components.  ``columns="coeffs"``: every coefficient (no center columns).
    """
    L = graph.L
    deg = mode_degrees(L)
    R0, _ = _residual_full(family, graph, problem, quad)
    base = _rho_derivs(graph, quad)
    Ys = quad.basis(L, derivatives=True)
    if columns == "solver":
        specs = [("c", k) for k in np.flatnonzero(deg != 1)] + [("a", k) for k in range(3)]
    elif columns == "coeffs":
        specs = [("c", k) for k in range(n_modes(L))]
    else:
        raise ValueError(columns)
    J = np.empty((n_modes(L), len(specs)))
    for start in range(0, len(specs), COLUMN_CHUNK):
        chunk = specs[start:start + COLUMN_CHUNK]
        embs = []
        for kind, k in chunk:
            if kind == "c":
                derivs = tuple(b + step * Y[:, k] for b, Y in zip(base, Ys))
                embs.append(embedding(graph, quad, derivs))
            else:
                shift = np.zeros(3)
                shift[k] = step
                moved = SphereGraph(graph.center + shift, graph.coeffs)
                embs.append(embedding(moved, quad, base))
        F = _functional_many(family, quad, problem.mode, embs)
        R = quad.analyze(F - problem.target, L)
        J[:, start:start + len(chunk)] = ((R - R0) / step).T
    return J


# --------------------------------------------------------------------------
# leaf solver
# --------------------------------------------------------------------------

class _Blocks:
    def __init__(self, J, deg, sigma):
        self.rows_c = np.flatnonzero(deg != 1)
        self.rows_1 = np.flatnonzero(deg == 1)
        nc = self.rows_c.size
        self.Jcc = J[self.rows_c, :nc]
        self.Jca = J[self.rows_c, nc:]
        self.J1c = J[self.rows_1, :nc]
        self.J1a = J[self.rows_1, nc:]
        self.lu = np.linalg.inv(self.Jcc)
        self.B = self.J1a - self.J1c @ (self.lu @ self.Jca)
        self.stiffness = np.linalg.svd(sigma**3 * self.B / 6.0, compute_uv=False)


def seed_graph(family, sigma, L):
    m = family.mass_hint
    radius = sigma * (1.0 - m / sigma) if m else sigma
    return SphereGraph.round(radius, L)


def solve_leaf(family, problem, seed=None, opts=None, quad=None):
    """Solve for the leaf with curvature label 2/sigma."""
    opts = opts or SolveOptions()
    quad = quad or quad_sphere(opts.L_max)
    L = opts.L_max
    sigma = problem.sigma
    graph = (seed or seed_graph(family, sigma, L)).with_band(L)
    if np.any(quad.synthesize(graph.coeffs, L) <= 0):
        raise DegenerateSurface("seed radius is not positive")
    deg = mode_degrees(L)
    tol = opts.newton_tol(sigma)
    ctol = opts.center_tol(sigma)
    step = opts.fd_rstep * sigma

    def build(g):
        return _Blocks(jacobian(family, g, problem, quad, step), deg, sigma)

    blocks = build(graph)
    if blocks.stiffness.min() < KERNEL_STIFFNESS_MIN:
        raise KernelStuck(
            "translation modes are degenerate (normalised center stiffness "
            f"{blocks.stiffness.min():.2e}); CMC-type leaves are not unique when the energy vanishes"
        )

    c = graph.coeffs.copy()
    a = graph.center.copy()
    lam = opts.damping
    history = []
    prev_phi = np.inf
    R, nodal = _residual_full(family, SphereGraph(a, c), problem, quad)

    for outer in range(opts.max_center_iters):
        # inner Newton on the l != 1 coefficients
        rises = 0
        res_c = _sup(quad, np.where(deg != 1, R, 0.0), L)
        history.append(_sup(quad, R, L))
        for _ in range(opts.max_newton):
            if res_c <= 0.5 * tol:
                break
            dc = -blocks.lu @ R[blocks.rows_c]
            c[blocks.rows_c] += dc
            R, nodal = _residual_full(family, SphereGraph(a, c), problem, quad)
            new = _sup(quad, np.where(deg != 1, R, 0.0), L)
            history.append(_sup(quad, R, L))
            rises = rises + 1 if new > res_c else 0
            if rises >= 2 or not np.isfinite(new):
                raise NewtonDiverged(f"residual increased twice consecutively (sigma = {sigma:g})")
            res_c = new
            if opts.jacobian == "always" and res_c > 0.5 * tol:
                blocks = build(SphereGraph(a, c))
        else:
            if res_c > 0.5 * tol:
                raise NewtonDiverged(f"no convergence in {opts.max_newton} Newton steps")

        phi = R[blocks.rows_1]
        total = _sup(quad, R, L)
        da = -np.linalg.solve(blocks.B, phi)
        if np.linalg.norm(da) <= ctol and total <= tol:
            # the pending step is inside the linear regime: take it undamped so
            # the damping does not leave a bias of order center_tol behind
            a = a + da
            c[blocks.rows_c] += -(blocks.lu @ (blocks.Jca @ da))
            R, nodal = _residual_full(family, SphereGraph(a, c), problem, quad)
            break
        phi_norm = float(np.linalg.norm(phi))
        if phi_norm < prev_phi:
            lam = min(1.0, 2.0 * lam) if outer > 0 else lam
        else:
            lam = max(lam / 2.0, 1.0 / 64.0)
        prev_phi = phi_norm
        a = a + lam * da
        c[blocks.rows_c] += -lam * (blocks.lu @ (blocks.Jca @ da))
        if opts.jacobian == "always":
            blocks = build(SphereGraph(a, c))
        R, nodal = _residual_full(family, SphereGraph(a, c), problem, quad)
    else:
        raise KernelStuck(f"center iteration did not settle in {opts.max_center_iters} steps")

    graph = SphereGraph(a, c)
    geom = surface_geometry(family, graph, quad)
    area_gradient = _area_gradient(family, graph, quad, step) if opts.cross_check else None
    return Leaf(
        problem=problem,
        graph=graph,
        area=geom.area_g,
        area_delta=geom.area_delta,
        barycenter=geom.barycenter,
        hawking_mass=geom.hawking_mass,
        residual=_sup(quad, R, L),
        nodal_residual=nodal,
        kernel_projection=float(np.linalg.norm(R[blocks.rows_1])),
        newton_history=tuple(history),
        center_steps=outer + 1,
        center_stiffness=blocks.stiffness,
        area_radius_ratio=float(sigma / np.sqrt(geom.area_g / (4.0 * np.pi))),
        area_gradient=area_gradient,
        jacobian=None,
    )


def _area_gradient(family, graph, quad, step):
    """Central-difference gradient of a -> |Sigma(a)|_g with rho held fixed."""
    grad = np.empty(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        up = surface_geometry(family, SphereGraph(graph.center + e, graph.coeffs), quad).area_g
        dn = surface_geometry(family, SphereGraph(graph.center - e, graph.coeffs), quad).area_g
        grad[k] = (up - dn) / (2.0 * step)
    return grad


def quadratic_convergence(history, sigma, C=None):
    """Check r_{k+1} <= C r_k^2 over the last three steps that start below 1e-3 * 2/sigma.

    Residuals are normalised by 2/sigma; steps ending at the roundoff floor
    (1e-13) are skipped.  Returns ``(ok, ratios)``.
    """
    r = np.asarray(history, dtype=float) * sigma / 2.0
    C = 1e3 if C is None else C
    ratios = []
    for k in range(len(r) - 1):
        if r[k] < 1e-3 and r[k + 1] > 1e-13 and r[k] > 0:
            ratios.append(r[k + 1] / r[k] ** 2)
    ratios = ratios[-3:]
    return all(q <= C for q in ratios), ratios


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Foliation:
    mode: str
    sigmas: np.ndarray
    leaves: tuple  # Leaf or None per sigma
    failures: dict  # sigma -> message
    gaps: np.ndarray  # min radial gap between consecutive successful leaves (NaN if n/a)

    @property
    def good(self):
        return [lf for lf in self.leaves if lf is not None]

    @property
    def barycenters(self):
        return np.array([lf.barycenter for lf in self.good]).reshape(-1, 3)

    @property
    def good_sigmas(self):
        return np.array([lf.sigma for lf in self.good])

    @property
    def disjoint(self):
        g = self.gaps[np.isfinite(self.gaps)]
        return bool(np.all(g > 0))


def sigma_grid(sigma_min, sigma_max, per_decade=24):
    n = int(round(per_decade * np.log10(sigma_max / sigma_min))) + 1
    return np.geomspace(sigma_min, sigma_max, n)


def leaf_gap(inner, outer, quad):
    """Minimum over the inner leaf's nodes of the outer leaf's radial clearance."""
    w = quad.directions
    rho = quad.synthesize(inner.graph.coeffs, inner.graph.L)
    pts = inner.graph.center + rho[:, None] * w
    return float(outer.graph.contains(pts).min())


def sweep(family, mode, sigmas, opts=None, quad=None, seed=None):
    opts = opts or SolveOptions()
    quad = quad or quad_sphere(opts.L_max)
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.ndim != 1 or np.any(np.diff(sigmas) <= 0):
        raise ValueError("sigma grid must be strictly increasing")
    leaves, failures, gaps = [], {}, []
    prev = None
    for s in sigmas:
        if prev is not None:
            start = prev.graph.scaled(s / prev.sigma)
        else:
            start = seed or seed_graph(family, s, opts.L_max)
        try:
            leaf = solve_leaf(family, LeafProblem(mode, s), start, opts, quad)
        except NumericalFailure as exc:
            failures[float(s)] = f"{type(exc).__name__}: {exc}"
            leaves.append(None)
            gaps.append(np.nan)
            continue
        gaps.append(leaf_gap(prev, leaf, quad) if prev is not None else np.nan)
        leaves.append(leaf)
        prev = leaf
    return Foliation(normalize_mode(mode), sigmas, tuple(leaves), failures, np.array(gaps))


# --------------------------------------------------------------------------
# center of mass
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CenterReport:
    mode: str
    limits: tuple  # SeriesLimit per component
    converged: bool
    log_periodic: bool
    envelope: float  # C in |z(sigma)| ~ C / sigma (least squares)
    stcmc_gap: np.ndarray = None  # |z(sigma) - (Z_BORT + Z0)(S_sigma)|
    stcmc_gap_slope: float = float("nan")

    @property
    def value(self):
        return np.array([lim.value for lim in self.limits])

    @property
    def uncertainty(self):
        return np.array([lim.uncertainty for lim in self.limits])


def center_limits(fol, family=None, quad=None):
    """Extrapolated barycenter with the oscillation detector of the charge fits."""
    if len(fol.good) < 6:
        raise FitFailed(f"need at least 6 leaves, got {len(fol.good)}")
    s = fol.good_sigmas
    z = fol.barycenters
    limits = tuple(extrapolate_series(s, z[:, k]) for k in range(3))
    osc = any(lim.log_periodic for lim in limits)
    mag = np.sqrt(np.einsum("ni,ni->n", z, z))
    inv = 1.0 / s
    envelope = float(inv @ mag / (inv @ inv))
    gap = None
    slope = float("nan")
    if family is not None and fol.mode == "STCMC":
        from .charges import charges_at, extrapolate, charge_ladder, default_ladder

        quad = quad or quad_sphere(16)
        E = extrapolate(charge_ladder(family, default_ladder(family), quad)).E
        zz = np.array([charges_at(family, sg, quad, E=E).Z_STCMC for sg in s])
        gap = np.sqrt(np.einsum("ni,ni->n", z - zz, z - zz))
        slope = loglog_slope(s, gap)[0]
    return CenterReport(fol.mode, limits, not osc, osc, envelope, gap, slope)


# --------------------------------------------------------------------------
# linearisation spectrum
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StabilityReport:
    eigenvalues: np.ndarray  # mean-zero block (l >= 1), real parts ascending
    eigenvalues_no_l1: np.ndarray  # l >= 2 block
    l1_block: np.ndarray  # eigenvalues of the l = 1 block
    max_imag: float
    smallest: float
    smallest_no_l1: float


def stability_indicator(family, leaf, quad=None, step_rel=1e-6):
    """Spectrum of the solver's linearisation in harmonic coordinates.

    Reported on mean-zero functions (l >= 1), with and without the l = 1
    translation block.  This is the finite-difference linearisation of the
    curvature functional, not a claim about any specific stability operator.
    """
    L = leaf.graph.L
    quad = quad or quad_sphere(L)
    J = jacobian(family, leaf.graph, leaf.problem, quad, step_rel * leaf.sigma, columns="coeffs")
    deg = mode_degrees(L)
    try:
        def eig(idx):
            ev = np.linalg.eigvals(J[np.ix_(idx, idx)])
            return ev[np.argsort(ev.real)]

        full = eig(np.flatnonzero(deg >= 1))
        no1 = eig(np.flatnonzero(deg >= 2))
        l1 = eig(np.flatnonzero(deg == 1))
    except np.linalg.LinAlgError as exc:
        raise EigSolverFailed(str(exc)) from exc
    if not (np.all(np.isfinite(full)) and np.all(np.isfinite(no1))):
        raise EigSolverFailed("non-finite eigenvalues")
    imag = float(max(np.abs(full.imag).max(), np.abs(no1.imag).max()))
    return StabilityReport(
        eigenvalues=full.real,
        eigenvalues_no_l1=no1.real,
        l1_block=l1.real,
        max_imag=imag,
        smallest=float(full.real[0]),
        smallest_no_l1=float(no1.real[0]),
    )
