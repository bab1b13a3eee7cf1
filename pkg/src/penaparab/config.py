"""Strict JSON configuration schema and its mapping to problem objects."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .exprlang import ExprError, parse
from .geometry import (
    KIND_DIRICHLET,
    KIND_ROBIN,
    BoundaryPartition,
    MovingDomain,
    Segment,
)
from .transform import LINEAR, SEMILINEAR, ProblemSpec
from .verify import ManufacturedCase

DEFAULT_PENALTY_SCHEDULE = [1.0, 10.0, 100.0, 1000.0, 10000.0]


class ConfigError(ValueError):
    pass


def _require_dict(obj, context):
    if not isinstance(obj, dict):
        raise ConfigError(f"{context} must be a JSON object")
    return obj


def _take(d, context, required=(), optional=()):
    _require_dict(d, context)
    unknown = set(d) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{context}: unknown key(s) {sorted(unknown)}")
    missing = [k for k in required if k not in d]
    if missing:
        raise ConfigError(f"{context}: missing required key(s) {missing}")
    return d


def _number(d, key, context, *, positive=False, nonnegative=False):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{context}.{key} must be a number")
    v = float(v)
    if positive and v <= 0:
        raise ConfigError(f"{context}.{key} must be positive")
    if nonnegative and v < 0:
        raise ConfigError(f"{context}.{key} must be nonnegative")
    return v


def _integer(d, key, context, minimum):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{context}.{key} must be an integer")
    if v < minimum:
        raise ConfigError(f"{context}.{key} must be at least {minimum}")
    return v


def _expression(d, key, context, allowed):
    v = d[key]
    if not isinstance(v, str):
        raise ConfigError(f"{context}.{key} must be an expression string")
    try:
        return parse(v, allowed)
    except ExprError as err:
        raise ConfigError(f"{context}.{key}: {err}") from err


def _segments(items, context, T):
    if not isinstance(items, list) or not items:
        raise ConfigError(f"{context} must be a nonempty list of segments")
    segs = []
    for i, item in enumerate(items):
        seg = _take(item, f"{context}[{i}]", required=("t0", "t1", "kind"))
        kind = seg["kind"]
        if kind not in (KIND_DIRICHLET, KIND_ROBIN):
            raise ConfigError(
                f"{context}[{i}].kind must be '{KIND_DIRICHLET}' or '{KIND_ROBIN}'"
            )
        t0 = _number(seg, "t0", f"{context}[{i}]", nonnegative=True)
        t1 = _number(seg, "t1", f"{context}[{i}]")
        if t1 > T + 1e-12:
            raise ConfigError(f"{context}[{i}].t1 exceeds the horizon T = {T}")
        segs.append(Segment(t0=t0, t1=t1, kind=kind))
    return tuple(sorted(segs, key=lambda s: s.t0))


@dataclass(frozen=True)
class Discretization:
    nx: int
    nt: int
    penalty_schedule: tuple
    picard_tol: float
    picard_max: int


@dataclass(frozen=True)
class Config:
    domain: MovingDomain
    partition: BoundaryPartition
    spec: ProblemSpec
    disc: Discretization
    manufactured: ManufacturedCase | None
    output_dir: str | None
    lipschitz_declared: float

    @property
    def is_semilinear(self):
        return self.spec.is_semilinear


def parse_config(doc):
    """Validate a parsed JSON document and build the problem objects."""
    top = _take(
        doc,
        "config",
        required=("domain", "boundary", "coefficients", "data", "discretization"),
        optional=("manufactured", "output"),
    )

    dom = _take(
        top["domain"],
        "domain",
        required=("a", "b", "T", "slope_max", "width_min"),
    )
    T = _number(dom, "T", "domain", positive=True)
    domain = MovingDomain(
        a=_expression(dom, "a", "domain", {"t"}),
        b=_expression(dom, "b", "domain", {"t"}),
        T=T,
        slope_max=_number(dom, "slope_max", "domain", nonnegative=True),
        width_min=_number(dom, "width_min", "domain", positive=True),
    )

    bnd = _take(top["boundary"], "boundary", required=("left", "right"))
    partition = BoundaryPartition(
        left=_segments(bnd["left"], "boundary.left", T),
        right=_segments(bnd["right"], "boundary.right", T),
    )

    coeff = _take(
        top["coefficients"], "coefficients", required=("a11", "b1", "c", "k")
    )
    csec = _take(
        coeff["c"], "coefficients.c", required=("kind", "expr"), optional=("lipschitz",)
    )
    kind = csec["kind"]
    if kind not in (LINEAR, SEMILINEAR):
        raise ConfigError(
            f"coefficients.c.kind must be '{LINEAR}' or '{SEMILINEAR}'"
        )
    if kind == SEMILINEAR:
        if "lipschitz" not in csec:
            raise ConfigError("coefficients.c.lipschitz is required for the semilinear kind")
        lipschitz = _number(csec, "lipschitz", "coefficients.c", nonnegative=True)
        c_expr = _expression(csec, "expr", "coefficients.c", {"x", "t", "u"})
    else:
        lipschitz = (
            _number(csec, "lipschitz", "coefficients.c", nonnegative=True)
            if "lipschitz" in csec
            else 0.0
        )
        c_expr = _expression(csec, "expr", "coefficients.c", {"x", "t"})

    data = _take(top["data"], "data", optional=("g", "f", "ybar", "y0"))

    def data_expr(key, allowed):
        if key not in data:
            return parse("0", allowed)
        return _expression(data, key, "data", allowed)

    spec = ProblemSpec(
        domain=domain,
        partition=partition,
        a11=_expression(coeff, "a11", "coefficients", {"x", "t"}),
        b1=_expression(coeff, "b1", "coefficients", {"x", "t"}),
        c_kind=kind,
        c=c_expr,
        lipschitz_c=0.0 if kind == LINEAR else lipschitz,
        k=_expression(coeff, "k", "coefficients", {"x", "t"}),
        g=data_expr("g", {"x", "t"}),
        f=data_expr("f", {"x", "t"}),
        ybar=data_expr("ybar", {"x", "t"}),
        y0=data_expr("y0", {"x"}),
    )

    disc_doc = _take(
        top["discretization"],
        "discretization",
        optional=("nx", "nt", "penalty_schedule", "picard_tol", "picard_max"),
    )
    nx = _integer(disc_doc, "nx", "discretization", 2) if "nx" in disc_doc else 32
    nt = _integer(disc_doc, "nt", "discretization", 2) if "nt" in disc_doc else 32
    if "penalty_schedule" in disc_doc:
        sched = disc_doc["penalty_schedule"]
        if not isinstance(sched, list) or not sched:
            raise ConfigError("discretization.penalty_schedule must be a nonempty list")
        try:
            schedule = tuple(float(v) for v in sched)
        except (TypeError, ValueError):
            raise ConfigError("discretization.penalty_schedule must contain numbers") from None
        if any(v <= 0 for v in schedule) or any(
            b <= a for a, b in zip(schedule, schedule[1:])
        ):
            raise ConfigError(
                "discretization.penalty_schedule must be strictly increasing and positive"
            )
    else:
        schedule = tuple(DEFAULT_PENALTY_SCHEDULE)
    disc = Discretization(
        nx=nx,
        nt=nt,
        penalty_schedule=schedule,
        picard_tol=(
            _number(disc_doc, "picard_tol", "discretization", positive=True)
            if "picard_tol" in disc_doc
            else 1e-10
        ),
        picard_max=(
            _integer(disc_doc, "picard_max", "discretization", 1)
            if "picard_max" in disc_doc
            else 30
        ),
    )

    manufactured = None
    if "manufactured" in top:
        man = _take(
            top["manufactured"],
            "manufactured",
            required=("ystar", "ystar_x", "ystar_t", "ystar_xx"),
        )
        manufactured = ManufacturedCase(
            ystar=_expression(man, "ystar", "manufactured", {"x", "t"}),
            ystar_x=_expression(man, "ystar_x", "manufactured", {"x", "t"}),
            ystar_t=_expression(man, "ystar_t", "manufactured", {"x", "t"}),
            ystar_xx=_expression(man, "ystar_xx", "manufactured", {"x", "t"}),
        )

    output_dir = None
    if "output" in top:
        out = _take(top["output"], "output", required=("dir",))
        if not isinstance(out["dir"], str):
            raise ConfigError("output.dir must be a string")
        output_dir = out["dir"]

    return Config(
        domain=domain,
        partition=partition,
        spec=spec,
        disc=disc,
        manufactured=manufactured,
        output_dir=output_dir,
        lipschitz_declared=lipschitz,
    )


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    return parse_config(doc)
