"""Command-line front end.

    asymflat --config run.cfg [--task TASK] [--out DIR]

Exit codes: 0 success, 1 failed verification or I/O problem, 2 parse error,
3 validation error, 4 numerical failure.  ``ASYMFLAT_THREADS`` caps the
thread count of the numerical libraries.
"""

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from . import charges as ch
from . import foliation as fo
from .config import emit_config, parse_config
from .curvature import constraints, cotton, local_one_forms
from .errors import ConfigError, FitFailed, NumericalFailure, ParseError, ValidationError
from .idata import (
    ConformalBump,
    Flat,
    GraphSlice,
    GraphSliceSpec,
    PowerTail,
    SchwarzschildAreal,
    SchwarzschildIsotropic,
    Transformed,
)
from .sphere import n_modes, quad_sphere
from .surfaces import SphereGraph, surface_geometry

CSV_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3, 4


def _artifact_version():
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


# --------------------------------------------------------------------------
# formatting
# --------------------------------------------------------------------------

def fmt_float(v):
    v = float(v)
    if np.isnan(v):
        return "nan"
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def _json(obj, indent=0):
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if np.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _json(obj.tolist(), indent)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _json(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def to_json(obj):
    return _json(obj) + "\n"


@dataclass(frozen=True, eq=False)
class Table:
    name: str
    columns: tuple
    rows: list

    def csv(self):
        lines = [f"# asymflat table={self.name} version={CSV_VERSION}", ",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_cell(v) for v in row))
        return "\n".join(lines) + "\n"

    def as_json(self):
        return {"name": self.name, "version": CSV_VERSION, "columns": list(self.columns),
                "rows": [list(r) for r in self.rows]}


def _cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt_float(v)


def atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# family construction
# --------------------------------------------------------------------------

def build_family(cfg):
    d = cfg.as_dict()
    variant = d["family.variant"]
    m = d["family.m"]
    if variant == "flat":
        fam = Flat()
    elif variant == "schwarzschild_areal":
        fam = SchwarzschildAreal(m)
    elif variant == "schwarzschild_isotropic":
        terms = []
        if d["family.bump"] is not None:
            amp, cx, cy, cz, w = d["family.bump"]
            terms.append(ConformalBump(amp, (cx, cy, cz), w))
        if d["family.tail"] is not None:
            terms.append(PowerTail(*d["family.tail"]))
        fam = SchwarzschildIsotropic(m, tuple(terms))
    else:
        fam = GraphSlice(GraphSliceSpec(m, d["family.beta"], d["family.gamma"], d["family.a"]))
    Q = np.array(d["family.Q"]).reshape(3, 3)
    b = np.array(d["family.b"])
    if np.any(Q != np.eye(3)) or np.any(b != 0):
        fam = Transformed(Q, b, fam)
    return fam


def _ladder(cfg, family):
    d = cfg.as_dict()
    r0 = d["ladder.r0"]
    if r0 is None:
        r0 = 10.0 * max(1.0, 2.0 * abs(family.mass_hint or 0.0))
    return ch.geometric_ladder(r0, d["ladder.count"], d["ladder.factor"])


def _random_points(cfg):
    d = cfg.as_dict()
    rng = np.random.default_rng(d["seed"])
    n = d["points.count"]
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    r = np.exp(rng.uniform(np.log(d["points.r_min"]), np.log(d["points.r_max"]), n))
    return v * r[:, None]


# --------------------------------------------------------------------------
# tasks
# --------------------------------------------------------------------------

CHARGE_COLUMNS = (
    ("r", "E")
    + tuple(f"P{k}" for k in (1, 2, 3))
    + tuple(f"Z_BORT{k}" for k in (1, 2, 3))
    + tuple(f"Z0_{k}" for k in (1, 2, 3))
    + tuple(f"Z_STCMC{k}" for k in (1, 2, 3))
    + tuple(f"J_RT{k}" for k in (1, 2, 3))
    + tuple(f"J_M{k}" for k in (1, 2, 3))
    + ("E_used",)
)


def _limit_json(lim):
    return {
        "value": lim.value, "p": lim.p, "residual": lim.residual, "stderr": lim.stderr,
        "n_terms": lim.n_terms, "log_periodic": lim.log_periodic,
        "monotone_residual": lim.monotone_residual, "cos_residual": lim.cos_residual,
        "amplitude": lim.amplitude, "phase": lim.phase,
        "order_spread": lim.order_spread, "uncertainty": lim.uncertainty,
    }


def task_charges(cfg, family):
    quad = quad_sphere(cfg["numerics.L_max"])
    rep = ch.charge_report(family, _ladder(cfg, family), quad,
                           per_decade=cfg["ladder.dense_per_decade"])
    rows = [
        [s.r, s.E, *s.P, *s.Z_BORT, *s.Z0, *s.Z_STCMC, *s.J_RT, *s.J_M, s.E_used]
        for s in rep.samples
    ]
    summary = {
        "E": rep.E, "P": rep.vector("P"), "M": rep.M, "M_flag": rep.M_flag,
        "dense_ladder": rep.dense, "log_periodic": rep.log_periodic,
        "limits": {k: _limit_json(v) for k, v in rep.limits.items()},
    }
    return [Table("charges", CHARGE_COLUMNS, rows)], summary


def task_parity(cfg, family):
    quad = quad_sphere(cfg["numerics.L_max"])
    rep = ch.parity_diagnostics(family, _ladder(cfg, family), quad)
    names = list(rep.norms)
    cols = ("r",) + tuple(f"sup_{n}" for n in names) + ("rho_odd_trend", "J_odd_trend")
    rows = [
        [r, *(rep.norms[n][i] for n in names), rep.rho_odd_trend[i], rep.J_odd_trend[i]]
        for i, r in enumerate(rep.radii)
    ]
    summary = {
        "decay_rates": {k: {"rate": v[0], "fit_residual": v[1]} for k, v in rep.exponents.items()},
        "tau": rep.tau, "eta": rep.eta, "eta_g": rep.eta_g, "eta_K": rep.eta_K,
        "tau_AS": rep.tau_AS, "mass": rep.mass, "verdicts": rep.verdicts,
    }
    return [Table("parity", cols, rows)], summary


def task_avalos(cfg, family):
    quad = quad_sphere(cfg["avalos.L_max"])
    rep = ch.avalos_diagnostics(family, _ladder(cfg, family), quad, cfg["avalos.epsilon"],
                                cfg["avalos.sigma_w"], cfg["avalos.p"])
    cols = ("r_inner", "r_outer", "scal_integral", "cotton_integral",
            "scal_cumulative", "cotton_cumulative")
    rows = [
        [rep.radii[i], rep.radii[i + 1], rep.scal_annuli[i], rep.cotton_annuli[i],
         rep.scal_cumulative[i], rep.cotton_cumulative[i]]
        for i in range(rep.scal_annuli.size)
    ]
    summary = {"q": rep.q, "scal_norm": rep.scal_norm, "cotton_norm": rep.cotton_norm,
               "max_abs_scal": rep.max_abs_scal, "max_abs_cotton": rep.max_abs_cotton}
    return [Table("avalos", cols, rows)], summary


FOLIATION_COLUMNS = (
    "sigma", "z1", "z2", "z3", "center1", "center2", "center3", "area", "area_delta",
    "hawking_mass", "residual", "nodal_residual", "kernel_projection", "center_steps",
    "center_stiffness_min", "eig_min", "eig_min_no_l1", "gap_to_previous",
)


def task_foliate(cfg, family):
    d = cfg.as_dict()
    opts = fo.SolveOptions(
        L_max=d["numerics.L_max"], newton_rtol=d["foliate.newton_rtol"],
        max_newton=d["foliate.max_newton"], center_rtol=d["foliate.center_rtol"],
        max_center_iters=d["foliate.max_center_iters"], damping=d["foliate.damping"],
        jacobian=d["foliate.jacobian"],
    )
    quad = quad_sphere(opts.L_max)
    sigmas = fo.sigma_grid(d["foliate.sigma_min"], d["foliate.sigma_max"],
                           d["foliate.points_per_decade"])
    tables, summary = [], {}
    for mode in d["foliate.mode"]:
        fol = fo.sweep(family, mode, sigmas, opts, quad)
        rows = []
        for s, leaf, gap in zip(fol.sigmas, fol.leaves, fol.gaps):
            if leaf is None:
                continue
            if d["foliate.stability"]:
                st = fo.stability_indicator(family, leaf, quad)
                e1, e2 = st.smallest, st.smallest_no_l1
            else:
                e1 = e2 = float("nan")
            rows.append([
                s, *leaf.barycenter, *leaf.graph.center, leaf.area, leaf.area_delta,
                leaf.hawking_mass, leaf.residual, leaf.nodal_residual, leaf.kernel_projection,
                leaf.center_steps, float(leaf.center_stiffness.min()), e1, e2, gap,
            ])
        tag = mode.replace("+", "plus").replace("-", "minus")
        tables.append(Table(f"foliation_{tag}", FOLIATION_COLUMNS, rows))
        entry = {
            "leaves": len(fol.good),
            "failures": {fmt_float(k): v for k, v in fol.failures.items()},
            "disjoint": fol.disjoint,
        }
        try:
            cr = fo.center_limits(fol)
            entry["center_limit"] = {
                "value": cr.value, "uncertainty": cr.uncertainty, "converged": cr.converged,
                "log_periodic": cr.log_periodic, "envelope": cr.envelope,
                "components": [_limit_json(lim) for lim in cr.limits],
            }
        except FitFailed as exc:
            entry["center_limit"] = None
            entry["center_limit_note"] = str(exc)
        summary[mode] = entry
    return tables, summary


def task_local_forms(cfg, family):
    x = _random_points(cfg)
    forms = local_one_forms(family, x)
    s = family.sample(x, order=2)
    cons = constraints(s)
    cols = ("x1", "x2", "x3", "A_ST1", "A_ST2", "A_ST3", "A_CE1", "A_CE2", "A_CE3",
            "rho", "J1", "J2", "J3")
    rows = [
        [*x[i], *forms.A_ST[i], *forms.A_CE[i], cons.rho[i], *cons.J[i]]
        for i in range(x.shape[0])
    ]
    return [Table("local_forms", cols, rows)], {"points": int(x.shape[0])}


def verification_checks(L=24, seed=0):
    """Built-in oracle suite: (name, value, tolerance) triples."""
    rng = np.random.default_rng(seed)
    out = []
    quad = quad_sphere(L)
    Y = quad.basis()
    gram = (Y * quad.weights[:, None]).T @ Y
    out.append(("quadrature orthonormality", float(np.abs(gram - np.eye(n_modes(L))).max()), 1e-12))

    rep = ch.charge_report(SchwarzschildAreal(1.0), ch.geometric_ladder(10.0, 7), quad)
    out.append(("Schwarzschild energy |E - 1|", abs(rep.E - 1.0), 1e-4))

    r0 = 10.0
    geom = surface_geometry(SchwarzschildAreal(1.0), SphereGraph.round(r0, 4), quad)
    H = (2.0 / r0) * np.sqrt(1.0 - 2.0 / r0)
    out.append(("areal sphere mean curvature", float(np.abs(geom.H - H).max()), 1e-10))
    out.append(("areal sphere Hawking mass", abs(geom.hawking_mass - 1.0), 1e-8))

    v = rng.standard_normal((20, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    pts = v * rng.uniform(5.0, 200.0, 20)[:, None]
    C = cotton(SchwarzschildIsotropic(1.0), pts).C
    out.append(("isotropic Schwarzschild Cotton tensor", float(np.abs(C).max()), 1e-5))

    v = rng.standard_normal((50, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    r = rng.uniform(20.0, 2000.0, 50)
    cons = constraints(GraphSlice(GraphSliceSpec(1.0)).sample(v * r[:, None], order=2))
    out.append(("graph slice |rho| r^3", float(np.max(np.abs(cons.rho) * r**3)), 1e-6))
    out.append(("graph slice |J| r^3",
                float(np.max(np.linalg.norm(cons.J, axis=1) * r**3)), 1e-6))
    return out


def task_verify(cfg, family):
    checks = verification_checks(cfg["numerics.L_max"], cfg["seed"])
    rows = [[name, value, tol, bool(value <= tol)] for name, value, tol in checks]
    for name, value, tol, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {fmt_float(value)} (tolerance {tol:g})")
    summary = {"all_passed": all(r[3] for r in rows)}
    return [Table("verify", ("check", "value", "tolerance", "passed"), rows)], summary


TASK_FUNCTIONS = {
    "charges": task_charges,
    "parity": task_parity,
    "avalos": task_avalos,
    "foliate": task_foliate,
    "local-forms": task_local_forms,
    "verify": task_verify,
}


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RunReport:
    config: object
    tables: list
    summary: dict
    provenance: dict
    files: tuple


def provenance(cfg):
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    return {
        "artifact_version": _artifact_version(),
        "timestamp": int(epoch) if epoch and epoch.isdigit() else None,
        "seed": cfg["seed"],
    }


def apply_thread_cap():
    cap = os.environ.get("ASYMFLAT_THREADS")
    if not cap:
        return None
    n = max(1, int(cap))
    try:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def run(cfg, out_dir=None):
    """Execute the configured task and write its CSV/JSON outputs."""
    family = build_family(cfg)
    task = cfg["task"]
    tables, summary = TASK_FUNCTIONS[task](cfg, family)
    out_dir = out_dir or cfg["output.dir"]
    prov = provenance(cfg)
    files = []
    for t in tables:
        path = os.path.join(out_dir, f"{t.name}.csv")
        atomic_write(path, t.csv())
        files.append(path)
    doc = {
        "provenance": prov,
        "config": {k: v for k, v in cfg.values},
        "task": task,
        "tables": [t.as_json() for t in tables],
        "summary": summary,
    }
    path = os.path.join(out_dir, f"{task}.json")
    atomic_write(path, to_json(doc))
    files.append(path)
    atomic_write(os.path.join(out_dir, "config.echo"), emit_config(cfg))
    return RunReport(cfg, tables, summary, prov, tuple(files))


def main(argv=None):
    ap = argparse.ArgumentParser(prog="asymflat", description=__doc__.split("\n")[0])
    ap.add_argument("--config", required=True, help="configuration file")
    ap.add_argument("--task", help="override the task key")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    args = ap.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        cfg = parse_config(text)
        if args.task:
            cfg = parse_config(emit_config(cfg.replace(task=args.task)))
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    limiter = apply_thread_cap()
    try:
        report = run(cfg, args.out)
    except NumericalFailure as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    finally:
        if limiter is not None:
            limiter.restore_original_limits()
    for path in report.files:
        print(path)
    if cfg["task"] == "verify" and not report.summary["all_passed"]:
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
