"""Run configuration: a line-oriented ``key = value`` format with dotted keys.

Grammar::

    file    := { line }
    line    := blank | comment | entry
    comment := '#' any text
    entry   := key '=' value [ '#' comment ]
    key     := section '.' name | name

Values are plain scalars, comma-separated vectors, or the word ``none``.
Every key has a default; unknown keys are rejected.  ``emit_config`` writes
all keys (defaults included) so that ``parse_config(emit_config(c)) == c``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ValidationError

VARIANTS = ("flat", "schwarzschild_areal", "schwarzschild_isotropic", "graph_slice")
TASKS = ("charges", "parity", "avalos", "foliate", "local-forms", "verify")
FOLIATION_MODES = ("cmc", "stcmc", "ce+", "ce-")


def _float(text):
    v = float(text)
    if not np.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(text):
    v = float(text)
    if v != int(v):
        raise ValueError("must be an integer")
    return int(v)


def _vector(n):
    def conv(text):
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != n:
            raise ValueError(f"expected {n} comma-separated numbers")
        return tuple(_float(p) for p in parts)

    return conv


def _optional(conv):
    def wrapped(text):
        if text.strip().lower() == "none":
            return None
        return conv(text)

    return wrapped


def _choice(options):
    def conv(text):
        v = text.strip().lower()
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return v

    return conv


def _modes(text):
    modes = tuple(m.strip().lower() for m in text.split(",") if m.strip())
    if not modes:
        raise ValueError("at least one mode required")
    for m in modes:
        if m not in FOLIATION_MODES:
            raise ValueError(f"unknown mode {m!r}; expected {', '.join(FOLIATION_MODES)}")
    if len(set(modes)) != len(modes):
        raise ValueError("repeated mode")
    return modes


def _bool(text):
    v = text.strip().lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ValueError("must be true or false")


def _string(text):
    v = text.strip()
    if not v:
        raise ValueError("must not be empty")
    return v


# key -> (converter, default)
SCHEMA = {
    "task": (_choice(TASKS), "charges"),
    "seed": (_int, 0),
    "family.variant": (_choice(VARIANTS), "flat"),
    "family.m": (_float, 1.0),
    "family.beta": (_optional(_float), 0.0),
    "family.gamma": (_float, 0.0),
    "family.a": (_vector(3), (1.0, 0.0, 0.0)),
    "family.Q": (_vector(9), (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)),
    "family.b": (_vector(3), (0.0, 0.0, 0.0)),
    "family.bump": (_optional(_vector(5)), None),
    "family.tail": (_optional(_vector(2)), None),
    "numerics.L_max": (_int, 24),
    "ladder.r0": (_optional(_float), None),
    "ladder.count": (_int, 7),
    "ladder.factor": (_float, 2.0),
    "ladder.dense_per_decade": (_int, 24),
    "foliate.mode": (_modes, ("cmc",)),
    "foliate.sigma_min": (_float, 200.0),
    "foliate.sigma_max": (_float, 2000.0),
    "foliate.points_per_decade": (_int, 24),
    "foliate.newton_rtol": (_float, 1e-10),
    "foliate.center_rtol": (_float, 1e-10),
    "foliate.max_newton": (_int, 30),
    "foliate.max_center_iters": (_int, 50),
    "foliate.damping": (_float, 0.5),
    "foliate.jacobian": (_choice(("once", "always")), "once"),
    "foliate.stability": (_bool, False),
    "points.count": (_int, 20),
    "points.r_min": (_float, 20.0),
    "points.r_max": (_float, 2000.0),
    "avalos.epsilon": (_float, 0.1),
    "avalos.sigma_w": (_float, -2.0),
    "avalos.p": (_float, 4.0),
    "avalos.L_max": (_int, 8),
    "output.dir": (_string, "out"),
}


@dataclass(frozen=True)
class RunConfig:
    values: tuple  # sorted (key, value) pairs covering every schema key

    def __getitem__(self, key):
        return dict(self.values)[key]

    def as_dict(self):
        return dict(self.values)

    def replace(self, **updates):
        """Copy with dotted keys given as ``section__name=value``."""
        d = self.as_dict()
        for k, v in updates.items():
            d[k.replace("__", ".")] = v
        return RunConfig(tuple(sorted(d.items())))


def _validate(d):
    def bad(key, msg):
        raise ValidationError(key, msg)

    if d["numerics.L_max"] < 2 or d["numerics.L_max"] > 64:
        bad("numerics.L_max", "must lie in [2, 64]")
    if d["avalos.L_max"] < 2 or d["avalos.L_max"] > 64:
        bad("avalos.L_max", "must lie in [2, 64]")
    if d["seed"] < 0:
        bad("seed", "must be non-negative")
    Q = np.array(d["family.Q"]).reshape(3, 3)
    if np.abs(Q.T @ Q - np.eye(3)).max() > 1e-12 or np.linalg.det(Q) < 0:
        bad("family.Q", "must be a proper rotation (row-major, 9 numbers)")
    variant = d["family.variant"]
    if variant == "graph_slice":
        if d["family.m"] == 0:
            bad("family.m", "graph slices need m != 0")
        if d["family.beta"] is not None and not d["family.beta"] < 0.5:
            bad("family.beta", "must be < 1/2 or none")
        if not d["family.gamma"] < 0.5:
            bad("family.gamma", "must be < 1/2")
    if variant != "schwarzschild_isotropic":
        for key in ("family.bump", "family.tail"):
            if d[key] is not None:
                bad(key, "only available for schwarzschild_isotropic")
    if d["family.bump"] is not None and d["family.bump"][4] <= 0:
        bad("family.bump", "width (fifth entry) must be positive")
    if d["ladder.r0"] is not None and d["ladder.r0"] <= 0:
        bad("ladder.r0", "must be positive")
    if d["ladder.count"] < 4:
        bad("ladder.count", "need at least 4 radii")
    if d["ladder.factor"] <= 1:
        bad("ladder.factor", "must exceed 1")
    if d["ladder.dense_per_decade"] < 6:
        bad("ladder.dense_per_decade", "must be at least 6")
    if not 0 < d["foliate.sigma_min"] < d["foliate.sigma_max"]:
        bad("foliate.sigma_min", "need 0 < sigma_min < sigma_max")
    if d["foliate.points_per_decade"] < 1:
        bad("foliate.points_per_decade", "must be positive")
    for key in ("foliate.newton_rtol", "foliate.center_rtol"):
        if d[key] <= 0:
            bad(key, "must be positive")
    if d["foliate.max_newton"] < 1:
        bad("foliate.max_newton", "must be positive")
    if d["foliate.max_center_iters"] < 1:
        bad("foliate.max_center_iters", "must be positive")
    if not 0 < d["foliate.damping"] <= 1:
        bad("foliate.damping", "must lie in (0, 1]")
    if d["points.count"] < 1:
        bad("points.count", "must be positive")
    if not 0 < d["points.r_min"] <= d["points.r_max"]:
        bad("points.r_min", "need 0 < r_min <= r_max")
    if not -3 < d["avalos.sigma_w"] < -1:
        bad("avalos.sigma_w", "must lie in (-3, -1)")
    if d["avalos.p"] <= 3:
        bad("avalos.p", "must exceed 3")


def parse_config(text):
    """Parse and validate configuration text."""
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParseError("missing key", lineno)
        if not value:
            raise ParseError(f"missing value for {key!r}", lineno)
        if key in seen:
            raise ParseError(f"duplicate key {key!r}", lineno)
        if key not in SCHEMA:
            raise ValidationError(key, "unknown key")
        conv, _ = SCHEMA[key]
        try:
            seen[key] = conv(value)
        except ValueError as exc:
            raise ValidationError(key, str(exc)) from None
    d = {k: default for k, (_, default) in SCHEMA.items()}
    d.update(seen)
    _validate(d)
    return RunConfig(tuple(sorted(d.items())))


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(x if isinstance(x, str) else repr(float(x)) for x in v)
    return str(v)


def emit_config(config):
    """Text form of a config with every key written out."""
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in config.values)


def default_config(**updates):
    return parse_config("").replace(**updates)
