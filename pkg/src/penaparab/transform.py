"""Exponential change of unknown and the constants that make it coercive.

The unknown is rescaled by u = exp(k1*t + k2*phi(x,t)) * y, where phi is an
auxiliary function that is positive inside the space-time region, vanishes
on the lateral surface, and has a strictly negative outward normal
derivative there.  k2 > 0 lifts the Robin coefficient to K >= 1/2 on the
Robin part; k1 <= 0 makes the zeroth-order coefficient of the rescaled
equation dominate the convection and Lipschitz terms pointwise, which is
what the discrete solvability argument rests on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exprlang import Expr, diff_refined, evaluate
from .geometry import KIND_ROBIN, SIDE_LEFT, SIDE_RIGHT

LINEAR = "linear"
SEMILINEAR = "semilinear"

# pointwise surplus enforced by select_k1; certification requires >= 0.9 of it
COERCIVITY_MARGIN = 1.0


class TransformError(ValueError):
    pass


def _as_xt(obj):
    """Normalize an Expr or callable(x, t) to a callable(x, t)."""
    if callable(obj):
        return obj
    return lambda x, t: evaluate(obj, {"x": x, "t": t})


def _as_x(obj):
    if callable(obj):
        return obj
    return lambda x: evaluate(obj, {"x": x})


def _as_boundary(obj):
    """Normalize to a callable(side, x, t); a plain Expr ignores the side."""
    if callable(obj):
        return obj
    return lambda side, x, t: evaluate(obj, {"x": x, "t": t})


@dataclass(frozen=True)
class ProblemSpec:
    """Untransformed problem data.

    Coefficients are expressions in (x, t) (the reaction term also in u for
    the semilinear kind); data slots accept expressions or plain callables,
    so manufactured cases can supply derived functions directly.
    """

    domain: MovingDomain
    partition: BoundaryPartition
    a11: Expr
    b1: Expr
    c_kind: str
    c: Expr
    lipschitz_c: float
    k: Expr
    g: object
    f: object
    ybar: object
    y0: object

    def __post_init__(self):
        if self.c_kind not in (LINEAR, SEMILINEAR):
            raise TransformError(f"unknown reaction kind '{self.c_kind}'")
        if self.lipschitz_c < 0:
            raise TransformError("lipschitz_c must be nonnegative")

    @property
    def is_semilinear(self):
        return self.c_kind == SEMILINEAR

    def g_fn(self):
        return _as_xt(self.g)

    def f_fn(self):
        return _as_boundary(self.f)

    def ybar_fn(self):
        return _as_xt(self.ybar)

    def y0_fn(self):
        return _as_x(self.y0)

    def a11_at(self, x, t):
        return evaluate(self.a11, {"x": x, "t": t})

    def a11_dx(self, x, t):
        return diff_refined(self.a11, "x", {"x": x, "t": t})

    def b1_at(self, x, t):
        return evaluate(self.b1, {"x": x, "t": t})

    def k_at(self, x, t):
        return evaluate(self.k, {"x": x, "t": t})

    def c_at(self, x, t, u=None):
        if self.is_semilinear:
            return evaluate(self.c, {"x": x, "t": t, "u": u})
        return evaluate(self.c, {"x": x, "t": t})


def sample_grid(domain, nx, nt):
    """Flattened (x, t) samples covering the closed space-time region."""
    ts = np.linspace(0.0, domain.T, nt + 1)
    av = np.atleast_1d(domain.a_at(ts))
    bv = np.atleast_1d(domain.b_at(ts))
    frac = np.linspace(0.0, 1.0, nx + 1)
    X = av[:, None] + frac[None, :] * (bv - av)[:, None]
    T = np.broadcast_to(ts[:, None], X.shape)
    return X.ravel(), T.ravel().copy()


def sample_rho(spec, nx=128, nt=128):
    """Sampled ellipticity constant: min of a11 over the closed region."""
    X, T = sample_grid(spec.domain, nx, nt)
    vals = np.atleast_1d(spec.a11_at(X, T))
    if not np.all(np.isfinite(vals)):
        raise TransformError("non-finite diffusion coefficient sample")
    return float(np.min(vals))


def check_lipschitz(spec, n=10_000, seed=20260810, u_range=10.0, step=1e-4):
    """Sampled difference-quotient check of the declared Lipschitz constant.

    Applies to the semilinear kind only; the linear kind enters the
    zeroth-order coefficient directly and needs no constant.
    Returns (ok, worst_quotient).
    """
    if not spec.is_semilinear:
        return True, 0.0
    rng = np.random.default_rng(seed)
    ts = rng.uniform(0.0, spec.domain.T, n)
    av = np.atleast_1d(spec.domain.a_at(ts))
    bv = np.atleast_1d(spec.domain.b_at(ts))
    xs = av + rng.uniform(0.0, 1.0, n) * (bv - av)
    us = rng.uniform(-u_range, u_range, n)
    lo = spec.c_at(xs, ts, us)
    hi = spec.c_at(xs, ts, us + step)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        return False, float("inf")
    worst = float(np.max(np.abs(hi - lo) / step))
    ok = worst <= spec.lipschitz_c * (1.0 + 1e-6) + 1e-9
    return ok, worst


@dataclass(frozen=True)
class AuxiliaryFunction:
    """phi(x,t) = (x - a(t)) (b(t) - x) * s(t)^2 with s = (b0-a0)/(b(t)-a(t)).

    This is the product barrier of the initial slice pulled back through the
    affine slice map: positive inside, zero on both lateral curves, and
    -dphi/dn = (b0-a0)^2 / (b(t)-a(t)) > 0 on both curves.  eta is the
    sampled minimum of -dphi/dn over the lateral surface.
    """

    domain: MovingDomain
    eta: float

    def _s2(self, t):
        w0 = self.domain.b_at(0.0) - self.domain.a_at(0.0)
        w = self.domain.b_at(t) - self.domain.a_at(t)
        return (w0 / w) ** 2

    def phi(self, x, t):
        a = self.domain.a_at(t)
        b = self.domain.b_at(t)
        return (x - a) * (b - x) * self._s2(t)

    def phi_x(self, x, t):
        a = self.domain.a_at(t)
        b = self.domain.b_at(t)
        return (a + b - 2.0 * x) * self._s2(t)

    def phi_xx(self, x, t):
        return -2.0 * self._s2(t) * np.ones_like(np.asarray(x, dtype=float))

    def phi_t(self, x, t):
        a = self.domain.a_at(t)
        b = self.domain.b_at(t)
        da = self.domain.a_slope(t)
        db = self.domain.b_slope(t)
        s2 = self._s2(t)
        w = b - a
        core = -da * (b - x) + db * (x - a)
        return core * s2 - 2.0 * (x - a) * (b - x) * s2 * (db - da) / w

    def minus_dphi_dn(self, side, x, t):
        """-dphi/dn = -n * phi_x evaluated at (x, t) near the given side."""
        n = -1.0 if side == SIDE_LEFT else 1.0
        return -n * self.phi_x(x, t)


def build_phi(domain, n_samples=4096):
    """Construct the auxiliary function and its sampled boundary-slope bound."""
    ts = np.linspace(0.0, domain.T, n_samples)
    w = np.atleast_1d(domain.b_at(ts) - domain.a_at(ts))
    if not np.all(np.isfinite(w)) or np.min(w) < domain.width_min - 1e-12:
        raise TransformError(
            f"domain width drops to {float(np.min(w)):.6g}, below "
            f"width_min = {domain.width_min:.6g}"
        )
    w0 = domain.b_at(0.0) - domain.a_at(0.0)
    eta = float(np.min(w0 * w0 / w))
    return AuxiliaryFunction(domain=domain, eta=eta)


def _robin_samples(spec, n_per_segment=512):
    """(side, x, t) sample arrays along every Robin segment."""
    out = []
    for side_name, segs in (
        (SIDE_LEFT, spec.partition.left),
        (SIDE_RIGHT, spec.partition.right),
    ):
        for s in segs:
            if s.kind != KIND_ROBIN:
                continue
            ts = np.linspace(s.t0, s.t1, n_per_segment)
            xs = np.atleast_1d(
                spec.domain.a_at(ts) if side_name == SIDE_LEFT else spec.domain.b_at(ts)
            )
            out.append((side_name, xs, ts))
    return out


def select_k2(spec, phi, n_per_segment=512):
    """Smallest k2 >= 0 (plus 10%) making K = k + k2*(-dphi/dn)*a11 >= 1/2.

    Sampled pointwise along the Robin part; returns 0 when the raw Robin
    coefficient already clears 1/2 everywhere (or there is no Robin part).
    """
    if phi.eta <= 0:
        raise TransformError("auxiliary function has no boundary-slope margin")
    needed = 0.0
    for side, xs, ts in _robin_samples(spec, n_per_segment):
        kv = np.atleast_1d(spec.k_at(xs, ts))
        av = np.atleast_1d(spec.a11_at(xs, ts))
        mdn = np.atleast_1d(phi.minus_dphi_dn(side, xs, ts))
        if not (np.all(np.isfinite(kv)) and np.all(np.isfinite(av))):
            raise TransformError("non-finite boundary coefficient sample")
        if np.min(mdn) <= 0 or np.min(av) <= 0:
            raise TransformError("degenerate normal-derivative or diffusion sample")
        needed = max(needed, float(np.max((0.5 - kv) / (mdn * av))))
    if needed <= 0.0:
        return 0.0
    return 1.1 * needed


def _zero_order_pieces(spec, phi, k2, X, T):
    """B1 and the bracket M at sample points (shared by k1 selection and checks)."""
    a11 = np.atleast_1d(spec.a11_at(X, T))
    a11x = np.atleast_1d(spec.a11_dx(X, T))
    b1 = np.atleast_1d(spec.b1_at(X, T))
    px = np.atleast_1d(phi.phi_x(X, T))
    pxx = np.atleast_1d(phi.phi_xx(X, T))
    B1 = b1 + 2.0 * a11 * k2 * px
    M = a11x * px - k2 * a11 * px * px + a11 * pxx - b1 * px
    return a11, b1, B1, M


def select_k1(spec, phi, k2, rho, nx=128, nt=128):
    """Largest k1 <= 0 with the pointwise domination bound plus unit margin.

    Pointwise on a sample grid the bound is

        -k1 >= [-c0] + k2*phi_t - k2*M + L + B1^2/rho + 1

    with L = declared Lipschitz constant for the semilinear kind and the
    signed linear reaction coefficient -c0 (L = 0) for the linear kind.
    The trailing +1 is the recorded coercivity margin.
    """
    if rho <= 0:
        raise TransformError("ellipticity constant rho must be positive")
    X, T = sample_grid(spec.domain, nx, nt)
    _, _, B1, M = _zero_order_pieces(spec, phi, k2, X, T)
    pt = np.atleast_1d(phi.phi_t(X, T))
    bound = k2 * pt - k2 * M + B1 * B1 / rho + COERCIVITY_MARGIN
    if spec.is_semilinear:
        bound = bound + spec.lipschitz_c
    else:
        bound = bound - np.atleast_1d(spec.c_at(X, T))
    if not np.all(np.isfinite(bound)):
        raise TransformError("non-finite coefficient sample while selecting k1")
    top = float(np.max(bound))
    return 0.0 if top <= 0.0 else -top


@dataclass(frozen=True)
class TransformedProblem:
    """Rescaled problem data, all exposed as vectorized point evaluations."""

    spec: ProblemSpec
    phi: AuxiliaryFunction
    k1: float
    k2: float
    rho: float
    _g: object = field(repr=False, default=None)
    _f: object = field(repr=False, default=None)
    _ybar: object = field(repr=False, default=None)
    _y0: object = field(repr=False, default=None)

    @property
    def is_semilinear(self):
        return self.spec.is_semilinear

    @property
    def eta(self):
        return self.phi.eta

    def scaling(self, x, t):
        """exp(k1*t + k2*phi(x,t)), the factor mapping y to u."""
        return np.exp(self.k1 * t + self.k2 * self.phi.phi(x, t))

    def B1(self, x, t):
        a11 = self.spec.a11_at(x, t)
        return self.spec.b1_at(x, t) + 2.0 * a11 * self.k2 * self.phi.phi_x(x, t)

    def _bracket(self, x, t):
        a11 = self.spec.a11_at(x, t)
        a11x = self.spec.a11_dx(x, t)
        b1 = self.spec.b1_at(x, t)
        px = self.phi.phi_x(x, t)
        pxx = self.phi.phi_xx(x, t)
        return a11x * px - self.k2 * a11 * px * px + a11 * pxx - b1 * px

    def Clin(self, x, t):
        """Zeroth-order coefficient of the rescaled linear form."""
        out = -self.k1 - self.k2 * self.phi.phi_t(x, t) + self.k2 * self._bracket(x, t)
        if not self.is_semilinear:
            out = out + self.spec.c_at(x, t)
        return out

    def Cnl(self, x, t, u):
        """Lagged nonlinear reaction term (semilinear kind only)."""
        if not self.is_semilinear:
            raise TransformError("Cnl is only defined for the semilinear kind")
        scale = self.scaling(x, t)
        return scale * self.spec.c_at(x, t, u / scale)

    def G(self, x, t):
        return self.scaling(x, t) * self._g(x, t)

    def F(self, side, x, t):
        return np.exp(self.k1 * t) * self._f(side, x, t)

    def ubar(self, x, t):
        return self.scaling(x, t) * self._ybar(x, t)

    def u0(self, x):
        return self._y0(x) * np.exp(self.k2 * self.phi.phi(x, 0.0))

    def K(self, side, x, t):
        a11 = self.spec.a11_at(x, t)
        return self.spec.k_at(x, t) + self.k2 * self.phi.minus_dphi_dn(side, x, t) * a11

    def coercivity_residual(self, x, t):
        """Clin - L - B1^2/rho; select_k1 makes this >= 1 on its grid."""
        L = self.spec.lipschitz_c if self.is_semilinear else 0.0
        B1 = self.B1(x, t)
        return self.Clin(x, t) - L - B1 * B1 / self.rho

    def to_physical(self, nodes_x, nodes_t, u_values):
        """Invert the rescaling on nodal values: y = u / exp(k1 t + k2 phi)."""
        return u_values * np.exp(-self.k1 * nodes_t - self.k2 * self.phi.phi(nodes_x, nodes_t))

    def from_physical(self, nodes_x, nodes_t, y_values):
        return y_values * self.scaling(nodes_x, nodes_t)


def transform_problem(spec, phi, k1, k2, rho):
    """Bundle the rescaled coefficient and data functions for given constants."""
    return TransformedProblem(
        spec=spec,
        phi=phi,
        k1=float(k1),
        k2=float(k2),
        rho=float(rho),
        _g=spec.g_fn(),
        _f=spec.f_fn(),
        _ybar=spec.ybar_fn(),
        _y0=spec.y0_fn(),
    )


def inverse_transform(mesh, tp, u_values):
    """Map a nodal field of the rescaled unknown back to the physical one."""
    return tp.to_physical(mesh.nodes[:, 0], mesh.nodes[:, 1], u_values)
