"""Assembly of the penalized space-time bilinear form and right-hand side.

For P1 trial u and test v (v = 0 on the closed Dirichlet part) the system
expresses

    (1/m) (u_t, v_t)_Q - (u, v_t)_Q + (a11 u_x, v_x)_Q + (B1 u_x, v)_Q
    + (Clin u, v)_Q + <(cos + K) u, v>_Sigma1 + (u(T), v(T))_top
    = (u0, v(0))_bottom + (G, v)_Q + <F, v>_Sigma1 - (Cnl(u_prev), v)_Q

with Dirichlet values imposed by nodal interpolation of the rescaled data
and row/column elimination.  Triangle terms use the 3-midpoint rule, edge
terms 2-point Gauss; variable coefficients are sampled at quadrature points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import (
    SIDE_NAMES,
    TAG_BOTTOM,
    TAG_SIGMA0,
    TAG_SIGMA1,
    TAG_TOP,
    values_at_tri_q,
)

K_MIN = 0.5
K_TOL = 1e-12


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class SparseSystem:
    """Eliminated linear system over the free (non-Dirichlet) nodes."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free_of_node: np.ndarray   # (n,) equation index or -1 for Dirichlet nodes
    node_of_free: np.ndarray   # (nf,)
    lift: np.ndarray           # (n,) rescaled Dirichlet values, 0 at free nodes
    bandwidth: int

    @property
    def n_free(self):
        return self.rhs.shape[0]

    def expand(self, x_free):
        """Scatter a free-dof solution into a full nodal field with lift values."""
        full = self.lift.copy()
        full[self.node_of_free] = x_free
        return full


def _scatter_tri(mesh, local):
    """Sum (ntri, 3, 3) local blocks into a full-node CSR matrix."""
    n = mesh.n_nodes
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _scatter_edge(mesh, edge_mask, local):
    n = mesh.n_nodes
    en = mesh.edge_nodes[edge_mask]
    rows = np.repeat(en, 2, axis=1).ravel()
    cols = np.tile(en, (1, 2)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise AssemblyError(f"non-finite {name} sample during assembly")


def _sigma1_coefficients(tp, mesh):
    """cos + K sampled at the Robin-edge Gauss points, with the K >= 1/2 gate."""
    mask = mesh.edge_tag == TAG_SIGMA1
    if not np.any(mask):
        return mask, None
    qx = mesh.edge_qx[mask]
    qt = mesh.edge_qt[mask]
    sides = mesh.edge_side[mask]
    K = np.empty_like(qx)
    for code in np.unique(sides):
        side = SIDE_NAMES[int(code)]
        rows = sides == code
        K[rows] = tp.K(side, qx[rows], qt[rows])
    _check_finite("Robin coefficient", K)
    kmin = float(np.min(K))
    if kmin < K_MIN - K_TOL:
        raise AssemblyError(
            f"transformed Robin coefficient K = {kmin:.6g} < 1/2 at a quadrature "
            "point; the constant selection is inconsistent with this mesh"
        )
    weight = mesh.edge_cos[mask][:, None] + K
    return mask, weight


def matrix_pieces(tp, mesh, m_penalty):
    """Assemble the individual full-node matrices of the bilinear form."""
    if m_penalty <= 0:
        raise AssemblyError("penalty parameter m must be positive")
    qx, qt, qw = mesh.tri_qx, mesh.tri_qt, mesh.tri_qw
    V = mesh.basis_q  # (q, i)

    a11 = tp.spec.a11_at(qx, qt)
    B1 = tp.B1(qx, qt)
    Clin = tp.Clin(qx, qt)
    for name, arr in (("diffusion", a11), ("convection", B1), ("reaction", Clin)):
        _check_finite(name, arr)

    gx, gt, area = mesh.grad_x, mesh.grad_t, mesh.area

    # (1/m) t-stiffness and unit pieces are exact for constant gradients
    t_stiff = _scatter_tri(mesh, area[:, None, None] * gt[:, :, None] * gt[:, None, :])
    wa = np.sum(qw * a11, axis=1)
    x_stiff = _scatter_tri(mesh, wa[:, None, None] * gx[:, :, None] * gx[:, None, :])
    x_stiff_unit = _scatter_tri(
        mesh, area[:, None, None] * gx[:, :, None] * gx[:, None, :]
    )

    # -(u, v_t): test index i carries grad_t, trial j the basis value
    wv = qw[:, :, None] * V[None, :, :]          # (ntri, q, j)
    dt_local = -gt[:, :, None] * np.sum(wv, axis=1)[:, None, :]
    d_t = _scatter_tri(mesh, dt_local)

    conv_local = np.einsum("eq,qi,ej->eij", qw * B1, V, gx)
    convection = _scatter_tri(mesh, conv_local)

    mass_local = np.einsum("eq,qi,qj->eij", qw * Clin, V, V)
    mass = _scatter_tri(mesh, mass_local)

    mask1, weight1 = _sigma1_coefficients(tp, mesh)
    if weight1 is None:
        sigma1 = sp.csr_matrix((mesh.n_nodes, mesh.n_nodes))
    else:
        w = mesh.edge_qw[mask1] * weight1
        local = np.einsum("eq,qi,qj->eij", w, mesh.edge_basis, mesh.edge_basis)
        sigma1 = _scatter_edge(mesh, mask1, local)

    mask_top = mesh.edge_tag == TAG_TOP
    wtop = mesh.edge_qw[mask_top]
    top_local = np.einsum("eq,qi,qj->eij", wtop, mesh.edge_basis, mesh.edge_basis)
    top_mass = _scatter_edge(mesh, mask_top, top_local)

    return {
        "t_stiff": t_stiff,
        "x_stiff": x_stiff,
        "x_stiff_unit": x_stiff_unit,
        "d_t": d_t,
        "convection": convection,
        "mass": mass,
        "sigma1": sigma1,
        "top_mass": top_mass,
        "m_penalty": float(m_penalty),
    }


def full_matrix(pieces):
    return (
        pieces["t_stiff"] / pieces["m_penalty"]
        + pieces["d_t"]
        + pieces["x_stiff"]
        + pieces["convection"]
        + pieces["mass"]
        + pieces["sigma1"]
        + pieces["top_mass"]
    ).tocsr()


def rhs_vector(tp, mesh, u_prev=None):
    """Full-node load vector: bottom data, volume source, Robin data, lagged term."""
    qx, qt, qw = mesh.tri_qx, mesh.tri_qt, mesh.tri_qw
    V = mesh.basis_q
    G = tp.G(qx, qt)
    _check_finite("source", G)
    if tp.is_semilinear:
        if u_prev is None:
            u_prev = np.zeros(mesh.n_nodes)
        uq = values_at_tri_q(mesh, u_prev)
        G = G - tp.Cnl(qx, qt, uq)
        _check_finite("lagged reaction", G)
    rhs = np.zeros(mesh.n_nodes)
    np.add.at(rhs, mesh.triangles.ravel(), np.einsum("eq,qi->ei", qw * G, V).ravel())

    mask1 = mesh.edge_tag == TAG_SIGMA1
    if np.any(mask1):
        qxe, qte = mesh.edge_qx[mask1], mesh.edge_qt[mask1]
        sides = mesh.edge_side[mask1]
        F = np.empty_like(qxe)
        for code in np.unique(sides):
            side = SIDE_NAMES[int(code)]
            rows = sides == code
            F[rows] = tp.F(side, qxe[rows], qte[rows])
        _check_finite("Robin data", F)
        contrib = np.einsum("eq,qi->ei", mesh.edge_qw[mask1] * F, mesh.edge_basis)
        np.add.at(rhs, mesh.edge_nodes[mask1].ravel(), contrib.ravel())

    mask0 = mesh.edge_tag == TAG_BOTTOM
    u0 = tp.u0(mesh.edge_qx[mask0])
    _check_finite("initial data", u0)
    contrib = np.einsum("eq,qi->ei", mesh.edge_qw[mask0] * u0, mesh.edge_basis)
    np.add.at(rhs, mesh.edge_nodes[mask0].ravel(), contrib.ravel())
    return rhs


def dirichlet_lift(tp, mesh):
    """Rescaled Dirichlet data interpolated at the closed-Dirichlet nodes."""
    lift = np.zeros(mesh.n_nodes)
    idx = np.where(mesh.is_dirichlet)[0]
    if idx.size:
        vals = tp.ubar(mesh.nodes[idx, 0], mesh.nodes[idx, 1])
        vals = np.atleast_1d(np.asarray(vals, dtype=float))
        _check_finite("Dirichlet data", vals)
        lift[idx] = vals
    return lift


def assemble(tp, mesh, m_penalty, u_prev=None):
    """Build the eliminated sparse system for one penalty value."""
    pieces = matrix_pieces(tp, mesh, m_penalty)
    A = full_matrix(pieces)
    rhs = rhs_vector(tp, mesh, u_prev)
    lift = dirichlet_lift(tp, mesh)

    free = ~mesh.is_dirichlet
    node_of_free = np.where(free)[0]
    free_of_node = -np.ones(mesh.n_nodes, dtype=np.int64)
    free_of_node[node_of_free] = np.arange(node_of_free.size)

    dir_idx = np.where(mesh.is_dirichlet)[0]
    A_ff = A[node_of_free][:, node_of_free].tocsr()
    rhs_f = rhs[node_of_free]
    if dir_idx.size:
        rhs_f = rhs_f - A[node_of_free][:, dir_idx] @ lift[dir_idx]

    if not np.all(np.isfinite(A_ff.data)) or not np.all(np.isfinite(rhs_f)):
        raise AssemblyError("non-finite entry in the assembled system")

    coo = A_ff.tocoo()
    bandwidth = int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0
    return SparseSystem(
        matrix=A_ff,
        rhs=rhs_f,
        free_of_node=free_of_node,
        node_of_free=node_of_free,
        lift=lift,
        bandwidth=bandwidth,
    )


@dataclass(frozen=True)
class FormParts:
    """Full-node pieces of the quadratic form for the coercivity checks.

    full = (1/m) t_stiff + x_stiff + remainder holds for the symmetric parts:
    remainder collects the symmetrized convection and time-derivative terms,
    the reaction mass, the Robin boundary term, and the top mass.
    """

    t_stiff: sp.csr_matrix
    x_stiff: sp.csr_matrix
    remainder_sym: sp.csr_matrix
    full: sp.csr_matrix
    x_stiff_unit: sp.csr_matrix
    m_penalty: float


def quadratic_form_parts(tp, mesh, m_penalty):
    pieces = matrix_pieces(tp, mesh, m_penalty)
    A = full_matrix(pieces)
    a_sym = ((A + A.T) * 0.5).tocsr()
    remainder = (
        a_sym - pieces["t_stiff"] / pieces["m_penalty"] - pieces["x_stiff"]
    ).tocsr()
    return FormParts(
        t_stiff=pieces["t_stiff"],
        x_stiff=pieces["x_stiff"],
        remainder_sym=remainder,
        full=A,
        x_stiff_unit=pieces["x_stiff_unit"],
        m_penalty=float(m_penalty),
    )


def time_derivative_matrix(mesh):
    """Full-node matrix of -(u, v_t)_Q."""
    qw = mesh.tri_qw
    V = mesh.basis_q
    wv = qw[:, :, None] * V[None, :, :]
    local = -mesh.grad_t[:, :, None] * np.sum(wv, axis=1)[:, None, :]
    return _scatter_tri(mesh, local)


def trace_matrices(mesh):
    """(bottom mass, top mass, cos-weighted lateral mass) over all nodes.

    These realize the discrete divergence-theorem identity
    w . D_t . w = 1/2 [ |w(0)|^2 - |w(T)|^2 - <w^2 cos>_lateral ].
    """
    def edge_mass(mask, factor):
        w = mesh.edge_qw[mask] * factor[:, None]
        local = np.einsum("eq,qi,qj->eij", w, mesh.edge_basis, mesh.edge_basis)
        return _scatter_edge(mesh, mask, local)

    mask_b = mesh.edge_tag == TAG_BOTTOM
    mask_t = mesh.edge_tag == TAG_TOP
    lateral = (mesh.edge_tag == TAG_SIGMA0) | (mesh.edge_tag == TAG_SIGMA1)
    ones_b = np.ones(int(np.sum(mask_b)))
    ones_t = np.ones(int(np.sum(mask_t)))
    return (
        edge_mass(mask_b, ones_b),
        edge_mass(mask_t, ones_t),
        edge_mass(lateral, mesh.edge_cos[lateral]),
    )
