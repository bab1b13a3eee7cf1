"""Manufactured-solution machinery, an independent FD oracle, and diagnostics.

The manufactured path derives problem data from a chosen exact solution so
discretization errors are exactly measurable.  The oracle is deliberately a
different discretization family (backward-Euler time stepping with centered
finite differences and ghost-point Robin closure on static domains), so a
bug shared with the space-time Galerkin path is unlikely.  The diagnostics
check the qualitative facts the penalty limit guarantees: the weighted
time-derivative energy vanishes, the gradient energy stays bounded, and the
continuation becomes Cauchy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .exprlang import diff_refined, evaluate
from .geometry import KIND_DIRICHLET, SIDE_LEFT, SIDE_RIGHT
from .mesh import TAG_SIGMA1, values_at_tri_q
from .transform import ProblemSpec


class VerifyError(ValueError):
    pass


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact solution with user-supplied derivative expressions."""

    ystar: object
    ystar_x: object
    ystar_t: object
    ystar_xx: object

    def at(self, x, t):
        return evaluate(self.ystar, {"x": x, "t": t})

    def dx(self, x, t):
        return evaluate(self.ystar_x, {"x": x, "t": t})

    def dt(self, x, t):
        return evaluate(self.ystar_t, {"x": x, "t": t})

    def dxx(self, x, t):
        return evaluate(self.ystar_xx, {"x": x, "t": t})

    def consistency_check(self, domain, n=100, seed=20260810, tol=1e-5):
        """Numeric differentiation of ystar must match the supplied derivatives."""
        rng = np.random.default_rng(seed)
        # keep the stencil inside the time slab
        ts = rng.uniform(domain.T * 1e-3, domain.T * (1 - 1e-3), n)
        av = np.atleast_1d(domain.a_at(ts))
        bv = np.atleast_1d(domain.b_at(ts))
        xs = av + rng.uniform(0.0, 1.0, n) * (bv - av)
        checks = (
            ("ystar_x", self.dx(xs, ts), diff_refined(self.ystar, "x", {"x": xs, "t": ts})),
            ("ystar_t", self.dt(xs, ts), diff_refined(self.ystar, "t", {"x": xs, "t": ts})),
            (
                "ystar_xx",
                self.dxx(xs, ts),
                diff_refined(self.ystar_x, "x", {"x": xs, "t": ts}),
            ),
        )
        for name, claimed, numeric in checks:
            scale = np.maximum(np.abs(numeric), 1.0)
            worst = float(np.max(np.abs(claimed - numeric) / scale))
            if worst > tol:
                raise VerifyError(
                    f"manufactured derivative {name} disagrees with numeric "
                    f"differentiation (relative error {worst:.3e} > {tol:g})"
                )


def derive_data(case, skeleton):
    """Build a full problem from a manufactured solution and a coefficient skeleton.

    The volume source comes from the strong-form residual (with the diffusion
    coefficient's x-derivative taken numerically), the Robin data from the
    boundary operator with the side's outward normal, and the Dirichlet and
    initial data from the solution itself.  Because the Robin-part integrals
    of the weak form carry the space-time surface measure, the flux term of
    the Robin data is weighted by 1/w_sigma = |sin(nu, t)| wherever the
    lateral curve moves; on static parts this is the classical condition.
    """
    case.consistency_check(skeleton.domain)

    def g_fn(x, t):
        a11 = skeleton.a11_at(x, t)
        a11x = skeleton.a11_dx(x, t)
        b1 = skeleton.b1_at(x, t)
        diff = a11x * case.dx(x, t) + a11 * case.dxx(x, t)
        if skeleton.is_semilinear:
            react = skeleton.c_at(x, t, case.at(x, t))
        else:
            react = skeleton.c_at(x, t) * case.at(x, t)
        return case.dt(x, t) - diff + b1 * case.dx(x, t) + react

    def f_fn(side, x, t):
        if side == SIDE_LEFT:
            n = -1.0
            slope = skeleton.domain.a_slope(t)
        else:
            n = 1.0
            slope = skeleton.domain.b_slope(t)
        w_sigma = np.sqrt(1.0 + slope * slope)
        flux = skeleton.a11_at(x, t) * n * case.dx(x, t) / w_sigma
        return skeleton.k_at(x, t) * case.at(x, t) + flux

    return ProblemSpec(
        domain=skeleton.domain,
        partition=skeleton.partition,
        a11=skeleton.a11,
        b1=skeleton.b1,
        c_kind=skeleton.c_kind,
        c=skeleton.c,
        lipschitz_c=skeleton.lipschitz_c,
        k=skeleton.k,
        g=g_fn,
        f=f_fn,
        ybar=lambda x, t: case.at(x, t),
        y0=lambda x: case.at(x, 0.0),
    )


@dataclass(frozen=True)
class ErrorReport:
    l2: float       # L2(Q) error
    energy: float   # gradient-seminorm error over Q
    sigma1: float   # L2 error on the Robin part of the lateral surface


def error_norms(y_nodal, case, mesh):
    """Quadrature errors of a nodal field against the manufactured solution."""
    vals = values_at_tri_q(mesh, y_nodal)
    exact = case.at(mesh.tri_qx, mesh.tri_qt)
    l2 = float(np.sqrt(np.sum(mesh.tri_qw * (vals - exact) ** 2)))

    corner = y_nodal[mesh.triangles]
    ux = np.sum(corner * mesh.grad_x, axis=1)
    exact_dx = case.dx(mesh.tri_qx, mesh.tri_qt)
    energy = float(
        np.sqrt(np.sum(mesh.tri_qw * (ux[:, None] - exact_dx) ** 2))
    )

    mask = mesh.edge_tag == TAG_SIGMA1
    if np.any(mask):
        ev = y_nodal[mesh.edge_nodes[mask]] @ mesh.edge_basis.T
        ee = case.at(mesh.edge_qx[mask], mesh.edge_qt[mask])
        sigma1 = float(np.sqrt(np.sum(mesh.edge_qw[mask] * (ev - ee) ** 2)))
    else:
        sigma1 = 0.0
    return ErrorReport(l2=l2, energy=energy, sigma1=sigma1)


def observed_orders(errors):
    """log2 reduction factors between consecutive halved-h error values."""
    out = []
    for coarse, fine in zip(errors, errors[1:]):
        if fine <= 0 or coarse <= 0:
            out.append(float("inf"))
        else:
            out.append(float(np.log2(coarse / fine)))
    return out


# ---------------------------------------------------------------------------
# independent finite-difference oracle (static domains, linear reaction)

def _static_bounds(spec, tol=1e-12):
    ts = np.linspace(0.0, spec.domain.T, 257)
    av = np.atleast_1d(spec.domain.a_at(ts))
    bv = np.atleast_1d(spec.domain.b_at(ts))
    if np.max(np.abs(av - av[0])) > tol or np.max(np.abs(bv - bv[0])) > tol:
        raise VerifyError("the finite-difference oracle requires a static domain")
    return float(av[0]), float(bv[0])


def fd_oracle(spec, nx, nt):
    """Backward-Euler / centered-FD reference solution on a static domain.

    Robin conditions are closed with second-order ghost elimination; the
    boundary slope is substituted from the boundary condition itself.
    Returns (t_grid, x_grid, Y) with Y[level, node].
    """
    if spec.is_semilinear:
        raise VerifyError("the finite-difference oracle requires a linear reaction")
    a0, b0 = _static_bounds(spec)
    ts = np.linspace(0.0, spec.domain.T, nt + 1)
    xs = np.linspace(a0, b0, nx + 1)
    h = (b0 - a0) / nx
    g_fn = spec.g_fn()
    f_fn = spec.f_fn()
    ybar_fn = spec.ybar_fn()
    y0_fn = spec.y0_fn()

    Y = np.zeros((nt + 1, nx + 1))
    Y[0] = np.atleast_1d(y0_fn(xs))
    for level in range(1, nt + 1):
        t = ts[level]
        dt = ts[level] - ts[level - 1]
        a11 = np.atleast_1d(spec.a11_at(xs, t)) * np.ones_like(xs)
        a11x = np.atleast_1d(spec.a11_dx(xs, t)) * np.ones_like(xs)
        b1 = np.atleast_1d(spec.b1_at(xs, t)) * np.ones_like(xs)
        c0 = np.atleast_1d(spec.c_at(xs, t)) * np.ones_like(xs)
        gv = np.atleast_1d(g_fn(xs, t)) * np.ones_like(xs)

        lower = np.zeros(nx + 1)
        diag = np.zeros(nx + 1)
        upper = np.zeros(nx + 1)
        rhs = Y[level - 1] / dt + gv
        # interior: y/dt - a11 y_xx + (b1 - a11_x) y_x + c0 y
        drift = b1 - a11x
        lower[1:nx] = -a11[1:nx] / h**2 - drift[1:nx] / (2 * h)
        diag[1:nx] = 1.0 / dt + 2 * a11[1:nx] / h**2 + c0[1:nx]
        upper[1:nx] = -a11[1:nx] / h**2 + drift[1:nx] / (2 * h)

        tm = t - 0.5 * dt  # boundary kind of the step's time interval
        for side, idx, inner, n in (
            (SIDE_LEFT, 0, 1, -1.0),
            (SIDE_RIGHT, nx, nx - 1, 1.0),
        ):
            if spec.partition.kind_at(side, tm) == KIND_DIRICHLET:
                lower[idx] = upper[idx] = 0.0
                diag[idx] = 1.0
                rhs[idx] = float(np.atleast_1d(ybar_fn(xs[idx], t))[0])
                continue
            kv = float(np.atleast_1d(spec.k_at(xs[idx], t))[0])
            fv = float(np.atleast_1d(f_fn(side, xs[idx], t))[0])
            # ghost elimination: y_ghost = y_inner + (2h/a11)(f - k y_b) and
            # y_x(boundary) = n (f - k y_b) / a11 from the Robin condition
            a, dr = a11[idx], drift[idx]
            diag[idx] = (
                1.0 / dt + 2 * a / h**2 + 2 * kv / h + dr * n * kv / a + c0[idx]
            )
            if idx == 0:
                upper[idx] = -2 * a / h**2
            else:
                lower[idx] = -2 * a / h**2
            rhs[idx] = rhs[idx] + 2 * fv / h + dr * n * fv / a
            _ = inner  # inner index is implicit in the off-diagonal position

        ab = np.zeros((3, nx + 1))
        ab[0, 1:] = upper[:-1]
        ab[1, :] = diag
        ab[2, :-1] = lower[1:]
        try:
            Y[level] = sla.solve_banded((1, 1), ab, rhs)
        except np.linalg.LinAlgError as err:  # pragma: no cover
            raise VerifyError(f"oracle tridiagonal solve failed: {err}") from err
    return ts, xs, Y


# ---------------------------------------------------------------------------
# penalty-continuation diagnostics

GRAD_SPREAD_LIMIT = 1.5
TRACE_SPREAD_LIMIT = 1.5
_ZERO_FLOOR = 1e-14


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class DiagnosticsReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c.passed for c in self.checks)


def _spread_ok(values, limit):
    hi = max(values)
    if hi <= _ZERO_FLOOR:
        return True, 0.0
    lo = min(values)
    if lo <= 0:
        return False, float("inf")
    return hi / lo <= limit, hi / lo


def diagnostics(report):
    """Structured verdicts for the vanishing-penalty limit."""
    runs = report.runs
    if len(runs) < 3:
        raise VerifyError("diagnostics need a schedule with at least 3 penalty values")
    out = DiagnosticsReport()

    pens = [r.e_pen for r in runs]
    mono = all(
        b <= a * (1 + 1e-9) + _ZERO_FLOOR for a, b in zip(pens[1:], pens[2:])
    )
    out.checks.append(
        Check(
            "penalty_energy_nonincreasing",
            mono,
            f"E_pen from second entry: {pens[1:]}",
        )
    )

    grads = [r.e_grad for r in runs[2:]]
    ok, spread = _spread_ok(grads, GRAD_SPREAD_LIMIT)
    out.checks.append(
        Check(
            "gradient_energy_bounded",
            ok,
            f"spread {spread:.3f} (limit {GRAD_SPREAD_LIMIT}) over m >= {runs[2].m:g}",
        )
    )
    for name, vals in (
        ("trace0_bounded", [r.trace0 for r in runs[2:]]),
        ("traceT_bounded", [r.traceT for r in runs[2:]]),
    ):
        ok, spread = _spread_ok(vals, TRACE_SPREAD_LIMIT)
        out.checks.append(
            Check(name, ok, f"spread {spread:.3f} (limit {TRACE_SPREAD_LIMIT})")
        )

    gaps = [r.cauchy_gap for r in runs[1:]]
    strict = all(
        b < a or b <= _ZERO_FLOOR for a, b in zip(gaps, gaps[1:])
    )
    out.checks.append(Check("cauchy_gaps_decreasing", strict, f"gaps {gaps}"))
    return out
