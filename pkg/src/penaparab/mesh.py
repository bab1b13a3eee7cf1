"""Structured space-time triangulation of the moving-domain region.

Nodes live on time levels; level k holds nx+1 equispaced points between
a(t_k) and b(t_k).  Each trapezoid between consecutive levels is split into
two triangles along the lower-left to upper-right diagonal (in level/index
space), so the mesh is deterministic and banded under level-major node
numbering.  Partition switch times are inserted as extra levels so no
lateral edge straddles a boundary-kind change.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import KIND_DIRICHLET, SIDE_LEFT, SIDE_RIGHT

TAG_SIGMA0 = 0
TAG_SIGMA1 = 1
TAG_BOTTOM = 2
TAG_TOP = 3
TAG_NAMES = {TAG_SIGMA0: "Sigma0", TAG_SIGMA1: "Sigma1", TAG_BOTTOM: "Bottom", TAG_TOP: "Top"}

SIDE_NONE_CODE = 0
SIDE_LEFT_CODE = 1
SIDE_RIGHT_CODE = 2
SIDE_NAMES = {SIDE_NONE_CODE: "none", SIDE_LEFT_CODE: "left", SIDE_RIGHT_CODE: "right"}

# 2-point Gauss abscissae on [0, 1]
_GAUSS2 = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class SpaceTimeMesh:
    nodes: np.ndarray          # (n, 2) columns x, t
    triangles: np.ndarray      # (ntri, 3) node indices, counterclockwise
    edge_nodes: np.ndarray     # (ne, 2) boundary edge node pairs
    edge_tag: np.ndarray       # (ne,) TAG_* codes
    edge_side: np.ndarray      # (ne,) SIDE_*_CODE
    is_dirichlet: np.ndarray   # (n,) bool, True on the closed Dirichlet part
    t_levels: np.ndarray       # (nlev,)
    nx: int
    # per-triangle P1 data
    area: np.ndarray           # (ntri,)
    grad_x: np.ndarray         # (ntri, 3) d(lambda_i)/dx
    grad_t: np.ndarray         # (ntri, 3) d(lambda_i)/dt
    # degree-2 edge-midpoint quadrature
    tri_qx: np.ndarray         # (ntri, 3)
    tri_qt: np.ndarray         # (ntri, 3)
    tri_qw: np.ndarray         # (ntri, 3) = area/3
    # basis values at the midpoint quadrature nodes, (q, i)
    basis_q: np.ndarray        # (3, 3)
    # boundary edge quadrature (2-point Gauss along the edge)
    edge_qx: np.ndarray        # (ne, 2)
    edge_qt: np.ndarray        # (ne, 2)
    edge_qw: np.ndarray        # (ne, 2) weights w.r.t. dsigma (lateral) or dx
    edge_basis: np.ndarray     # (2, 2) values of the two endpoint bases
    edge_cos: np.ndarray       # (ne,) t-component of the outward unit normal
    edge_wsig: np.ndarray      # (ne,) dsigma/dt on lateral edges, 1 elsewhere

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_levels(self):
        return self.t_levels.shape[0]

    def node_index(self, level, i):
        return level * (self.nx + 1) + i


def _merge_levels(T, nt, switches):
    levels = list(np.linspace(0.0, T, nt + 1))
    tol = 1e-12 * max(1.0, T)
    for s in switches:
        if s <= tol or s >= T - tol:
            continue
        if min(abs(s - lv) for lv in levels) > tol:
            levels.append(s)
    return np.array(sorted(levels))


def build_mesh(domain, partition, nx, nt):
    """Triangulate the space-time region with tagged boundary edges."""
    if nx < 1 or nt < 1:
        raise MeshError("nx and nt must both be at least 1")
    t_levels = _merge_levels(domain.T, nt, partition.switch_times())
    if np.min(np.diff(t_levels)) <= 0:
        raise MeshError("degenerate time level spacing")
    nlev = len(t_levels)

    av = np.atleast_1d(domain.a_at(t_levels))
    bv = np.atleast_1d(domain.b_at(t_levels))
    if np.any(bv - av <= 0):
        k = int(np.argmin(bv - av))
        raise MeshError(f"domain collapses at level t = {t_levels[k]:.6g}")
    frac = np.linspace(0.0, 1.0, nx + 1)
    X = av[:, None] + frac[None, :] * (bv - av)[:, None]
    Tm = np.broadcast_to(t_levels[:, None], X.shape)
    nodes = np.column_stack([X.ravel(), Tm.ravel()])

    # two triangles per trapezoid, diagonal from (k, i) to (k+1, i+1)
    tris = []
    stride = nx + 1
    for k in range(nlev - 1):
        base = k * stride
        for i in range(nx):
            n00 = base + i
            n10 = base + i + 1
            n01 = n00 + stride
            n11 = n10 + stride
            tris.append((n00, n10, n11))
            tris.append((n00, n11, n01))
    triangles = np.array(tris, dtype=np.int64)

    xv = nodes[triangles, 0]
    tv = nodes[triangles, 1]
    twice_area = (xv[:, 1] - xv[:, 0]) * (tv[:, 2] - tv[:, 0]) - (
        xv[:, 2] - xv[:, 0]
    ) * (tv[:, 1] - tv[:, 0])
    if np.any(twice_area <= 1e-300):
        k = int(np.argmin(twice_area))
        lvl = k // (2 * nx)
        raise MeshError(
            f"degenerate triangle near level t = {t_levels[lvl]:.6g}; "
            "the domain moves too fast for this time step, increase nt"
        )
    area = 0.5 * twice_area

    # P1 gradients: grad lambda_i = perp(opposite edge) / (2 area)
    grad_x = np.empty((len(triangles), 3))
    grad_t = np.empty((len(triangles), 3))
    for i in range(3):
        j, k2 = (i + 1) % 3, (i + 2) % 3
        grad_x[:, i] = (tv[:, j] - tv[:, k2]) / twice_area
        grad_t[:, i] = (xv[:, k2] - xv[:, j]) / twice_area

    # midpoint quadrature: point q is the midpoint of the edge opposite vertex q
    tri_qx = np.empty((len(triangles), 3))
    tri_qt = np.empty((len(triangles), 3))
    for q in range(3):
        j, k2 = (q + 1) % 3, (q + 2) % 3
        tri_qx[:, q] = 0.5 * (xv[:, j] + xv[:, k2])
        tri_qt[:, q] = 0.5 * (tv[:, j] + tv[:, k2])
    tri_qw = np.repeat(area[:, None], 3, axis=1) / 3.0
    basis_q = 0.5 * (np.ones((3, 3)) - np.eye(3))

    # boundary edges with tags
    e_nodes, e_tag, e_side = [], [], []
    for i in range(nx):
        e_nodes.append((i, i + 1))
        e_tag.append(TAG_BOTTOM)
        e_side.append(SIDE_NONE_CODE)
    top = (nlev - 1) * stride
    for i in range(nx):
        e_nodes.append((top + i, top + i + 1))
        e_tag.append(TAG_TOP)
        e_side.append(SIDE_NONE_CODE)
    for k in range(nlev - 1):
        mid = 0.5 * (t_levels[k] + t_levels[k + 1])
        for side, code, i in (
            (SIDE_LEFT, SIDE_LEFT_CODE, 0),
            (SIDE_RIGHT, SIDE_RIGHT_CODE, nx),
        ):
            kind = partition.kind_at(side, mid)
            e_nodes.append((k * stride + i, (k + 1) * stride + i))
            e_tag.append(TAG_SIGMA0 if kind == KIND_DIRICHLET else TAG_SIGMA1)
            e_side.append(code)
    edge_nodes = np.array(e_nodes, dtype=np.int64)
    edge_tag = np.array(e_tag, dtype=np.int8)
    edge_side = np.array(e_side, dtype=np.int8)

    is_dirichlet = np.zeros(len(nodes), dtype=bool)
    for (p, q), tag in zip(edge_nodes, edge_tag):
        if tag == TAG_SIGMA0:
            is_dirichlet[p] = True
            is_dirichlet[q] = True

    # 2-point Gauss data per boundary edge
    ne = len(edge_nodes)
    p0 = nodes[edge_nodes[:, 0]]
    p1 = nodes[edge_nodes[:, 1]]
    s = np.array(_GAUSS2)
    edge_qx = p0[:, None, 0] + s[None, :] * (p1[:, 0] - p0[:, 0])[:, None]
    edge_qt = p0[:, None, 1] + s[None, :] * (p1[:, 1] - p0[:, 1])[:, None]
    edge_basis = np.column_stack([1.0 - s, s])  # (q, endpoint)

    lateral = (edge_tag == TAG_SIGMA0) | (edge_tag == TAG_SIGMA1)
    dt_e = p1[:, 1] - p0[:, 1]
    dx_e = p1[:, 0] - p0[:, 0]
    edge_cos = np.zeros(ne)
    edge_wsig = np.ones(ne)
    edge_qw = np.empty((ne, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(lateral, dx_e / np.where(dt_e == 0, 1.0, dt_e), 0.0)
    hyp = np.sqrt(1.0 + slope * slope)
    left = edge_side == SIDE_LEFT_CODE
    right = edge_side == SIDE_RIGHT_CODE
    # outward normal of the polygonal region: left prop (-1, slope), right (1, -slope)
    edge_cos[left] = slope[left] / hyp[left]
    edge_cos[right] = -slope[right] / hyp[right]
    edge_cos[edge_tag == TAG_BOTTOM] = -1.0
    edge_cos[edge_tag == TAG_TOP] = 1.0
    edge_wsig[lateral] = hyp[lateral]
    edge_qw[lateral] = (np.abs(dt_e[lateral]) * edge_wsig[lateral] / 2.0)[:, None]
    horiz = ~lateral
    edge_qw[horiz] = (np.abs(dx_e[horiz]) / 2.0)[:, None]

    return SpaceTimeMesh(
        nodes=nodes,
        triangles=triangles,
        edge_nodes=edge_nodes,
        edge_tag=edge_tag,
        edge_side=edge_side,
        is_dirichlet=is_dirichlet,
        t_levels=t_levels,
        nx=nx,
        area=area,
        grad_x=grad_x,
        grad_t=grad_t,
        tri_qx=tri_qx,
        tri_qt=tri_qt,
        tri_qw=tri_qw,
        basis_q=basis_q,
        edge_qx=edge_qx,
        edge_qt=edge_qt,
        edge_qw=edge_qw,
        edge_basis=edge_basis,
        edge_cos=edge_cos,
        edge_wsig=edge_wsig,
    )


@dataclass(frozen=True)
class QuadratureRule:
    """Degree-2 rules: triangle 3-midpoint rule, 2-point Gauss per edge."""

    tri_points: np.ndarray   # (ntri, 3, 2)
    tri_weights: np.ndarray  # (ntri, 3)
    edge_points: np.ndarray  # (ne, 2, 2)
    edge_weights: np.ndarray  # (ne, 2)
    edge_cos: np.ndarray
    edge_wsig: np.ndarray


def quadrature_points(mesh):
    return QuadratureRule(
        tri_points=np.stack([mesh.tri_qx, mesh.tri_qt], axis=-1),
        tri_weights=mesh.tri_qw,
        edge_points=np.stack([mesh.edge_qx, mesh.edge_qt], axis=-1),
        edge_weights=mesh.edge_qw,
        edge_cos=mesh.edge_cos,
        edge_wsig=mesh.edge_wsig,
    )


# ---------------------------------------------------------------------------
# nodal-field quadrature helpers

def values_at_tri_q(mesh, nodal):
    """P1 field values at the triangle quadrature points, shape (ntri, 3)."""
    corner = nodal[mesh.triangles]  # (ntri, 3)
    return corner @ mesh.basis_q.T


def gradients(mesh, nodal):
    """Per-triangle constant gradient (d/dx, d/dt) of a P1 field."""
    corner = nodal[mesh.triangles]
    ux = np.sum(corner * mesh.grad_x, axis=1)
    ut = np.sum(corner * mesh.grad_t, axis=1)
    return ux, ut


def integrate_q(mesh, q_values):
    """Integrate values sampled at the triangle quadrature points over Q."""
    return float(np.sum(mesh.tri_qw * q_values))


def l2_q(mesh, nodal):
    """L2(Q) norm of a P1 nodal field (midpoint rule, exact for quadratics)."""
    v = values_at_tri_q(mesh, nodal)
    return float(np.sqrt(np.sum(mesh.tri_qw * v * v)))


def grad_energy(mesh, nodal):
    """Integral of |d/dx field|^2 over Q (the squared gradient seminorm)."""
    ux, _ = gradients(mesh, nodal)
    return float(np.sum(mesh.area * ux * ux))


def time_energy(mesh, nodal):
    """Integral of |d/dt field|^2 over Q."""
    _, ut = gradients(mesh, nodal)
    return float(np.sum(mesh.area * ut * ut))


def edge_values_at_q(mesh, nodal, edge_mask):
    corner = nodal[mesh.edge_nodes[edge_mask]]  # (ne', 2)
    return corner @ mesh.edge_basis.T  # (ne', 2) values at the 2 Gauss pts


def edge_integral_sq(mesh, nodal, edge_mask):
    """Integral of the squared P1 field over the selected boundary edges."""
    v = edge_values_at_q(mesh, nodal, edge_mask)
    return float(np.sum(mesh.edge_qw[edge_mask] * v * v))


def trace_sq_bottom(mesh, nodal):
    return edge_integral_sq(mesh, nodal, mesh.edge_tag == TAG_BOTTOM)


def trace_sq_top(mesh, nodal):
    return edge_integral_sq(mesh, nodal, mesh.edge_tag == TAG_TOP)


# ---------------------------------------------------------------------------
# plain-text dump

def dump_mesh(mesh):
    """Stable plain-text dump: 'v x t', 'f i j k', 'e i j TAG' lines."""
    lines = []
    for x, t in mesh.nodes:
        lines.append(f"v {float(x)!r} {float(t)!r}")
    for i, j, k in mesh.triangles:
        lines.append(f"f {i} {j} {k}")
    for (i, j), tag in zip(mesh.edge_nodes, mesh.edge_tag):
        lines.append(f"e {i} {j} {TAG_NAMES[int(tag)]}")
    return "\n".join(lines) + "\n"
