"""Shared builders for the standard test problems."""

import numpy as np
import pytest

from penaparab.exprlang import parse
from penaparab.geometry import BoundaryPartition, MovingDomain, Segment
from penaparab.transform import (
    ProblemSpec,
    build_phi,
    sample_rho,
    select_k1,
    select_k2,
    transform_problem,
)
from penaparab.verify import ManufacturedCase, derive_data

D = "dirichlet"
R = "robin"


def segments(*parts):
    return tuple(Segment(t0, t1, kind) for t0, t1, kind in parts)


def whole(kind, T=1.0):
    return (Segment(0.0, T, kind),)


def static_domain(a=0.0, b=1.0, T=1.0):
    return MovingDomain(
        a=parse(repr(a), {"t"}),
        b=parse(repr(b), {"t"}),
        T=T,
        slope_max=1.0,
        width_min=0.5 * (b - a),
    )


def expanding_domain(T=1.0):
    return MovingDomain(
        a=parse("0", {"t"}),
        b=parse("1+t/2", {"t"}),
        T=T,
        slope_max=1.0,
        width_min=0.9,
    )


def make_spec(
    domain,
    partition,
    a11="1",
    b1="0",
    c_kind="linear",
    c="0",
    lipschitz=0.0,
    k="0",
    g="0",
    f="0",
    ybar="0",
    y0="0",
):
    cvars = {"x", "t", "u"} if c_kind == "semilinear" else {"x", "t"}
    return ProblemSpec(
        domain=domain,
        partition=partition,
        a11=parse(a11, {"x", "t"}),
        b1=parse(b1, {"x", "t"}),
        c_kind=c_kind,
        c=parse(c, cvars),
        lipschitz_c=lipschitz,
        k=parse(k, {"x", "t"}),
        g=parse(g, {"x", "t"}) if isinstance(g, str) else g,
        f=parse(f, {"x", "t"}) if isinstance(f, str) else f,
        ybar=parse(ybar, {"x", "t"}) if isinstance(ybar, str) else ybar,
        y0=parse(y0, {"x"}) if isinstance(y0, str) else y0,
    )


def make_transformed(spec, k1=None, k2=None):
    rho = sample_rho(spec)
    phi = build_phi(spec.domain)
    if k2 is None:
        k2 = select_k2(spec, phi)
    if k1 is None:
        k1 = select_k1(spec, phi, k2, rho)
    return transform_problem(spec, phi, k1, k2, rho)


def heat_case():
    return ManufacturedCase(
        ystar=parse("exp(-t)*sin(pi*x)", {"x", "t"}),
        ystar_x=parse("pi*exp(-t)*cos(pi*x)", {"x", "t"}),
        ystar_t=parse("-exp(-t)*sin(pi*x)", {"x", "t"}),
        ystar_xx=parse("-pi^2*exp(-t)*sin(pi*x)", {"x", "t"}),
    )


@pytest.fixture
def static_heat_dirichlet():
    """Driven heat problem with exact solution exp(-t) sin(pi x), D/D walls."""
    domain = static_domain()
    partition = BoundaryPartition(left=whole(D), right=whole(D))
    skeleton = make_spec(domain, partition)
    spec = derive_data(heat_case(), skeleton)
    return spec, heat_case()


@pytest.fixture
def static_heat_neumann():
    domain = static_domain()
    partition = BoundaryPartition(left=whole(D), right=whole(R))
    skeleton = make_spec(domain, partition)
    spec = derive_data(heat_case(), skeleton)
    return spec, heat_case()
