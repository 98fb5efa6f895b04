"""Charges, centers of mass and asymptotic foliations of asymptotically flat initial data."""

from .charges import (
    ChargeReport,
    ChargeSample,
    avalos_diagnostics,
    charge_report,
    charges_at,
    extrapolate,
    geometric_ladder,
    log_ladder,
    parity_diagnostics,
)
from .curvature import (
    christoffel,
    constraints,
    conjugate_momenta,
    cotton,
    local_one_forms,
    ricci,
    scalar_curvature,
)
from .foliation import (
    Foliation,
    Leaf,
    LeafProblem,
    SolveOptions,
    center_limits,
    residual,
    sigma_grid,
    solve_leaf,
    stability_indicator,
    sweep,
)
from .idata import (
    ConformalBump,
    Flat,
    GraphSlice,
    GraphSliceSpec,
    InitialDataSample,
    PowerTail,
    SchwarzschildAreal,
    SchwarzschildIsotropic,
    Transformed,
    eval,
    rigid_transform,
)
from .sphere import SphereQuadrature, quad_sphere
from .surfaces import (
    SphereGraph,
    SurfaceGeom,
    curvature_functional,
    hawking_mass,
    surface_geometry,
)

__all__ = [name for name in dir() if not name.startswith("_")]
