"""Figure rendering for the CLI report paths (written next to the CSV output)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import matplotlib.tri as mtri

_PNG_META = {"Software": None}  # keep PNG bytes independent of the toolchain


def _save(fig, path):
    fig.savefig(path, dpi=150, bbox_inches="tight", metadata=_PNG_META)
    plt.close(fig)


def solution_figure(mesh, y_values, path, title="recovered solution"):
    tri = mtri.Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.triangles)
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    im = ax.tripcolor(tri, y_values, shading="gouraud")
    fig.colorbar(im, ax=ax, label="y")
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_title(title)
    _save(fig, path)


def energies_figure(report, path):
    ms = report.ms
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    ax.plot(ms, [r.e_pen for r in report.runs], "o-", label="penalty energy")
    ax.plot(ms, [r.e_grad for r in report.runs], "s-", label="gradient energy")
    gaps = [(m, r.cauchy_gap) for m, r in zip(ms, report.runs) if r.cauchy_gap]
    if gaps:
        ax.plot(*zip(*gaps), "^--", label="continuation gap")
    ax.set_xscale("log")
    if any(r.e_pen > 0 or r.e_grad > 0 for r in report.runs):
        ax.set_yscale("log")
    ax.set_xlabel("penalty parameter m")
    ax.set_ylabel("energy")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)


_FLOOR = 1e-17  # display floor so exact-to-roundoff errors stay plottable


def rates_figure(rows, path):
    """rows: (nx, nt, m, l2_error, energy_error, order-or-None)."""
    nxs = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    ax.loglog(nxs, [max(r[3], _FLOOR) for r in rows], "o-", label="L2(Q) error")
    ax.loglog(nxs, [max(r[4], _FLOOR) for r in rows], "s-", label="energy error")
    ref = rows[0][3]
    if ref > _FLOOR:
        ax.loglog(nxs, [ref * (nxs[0] / n) ** 2 for n in nxs], "k:", label="order 2")
    ax.set_xlabel("nx")
    ax.set_ylabel("error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)


def compare_figure(rows, path):
    """rows: (nx, nt, m, rel_l2_gap)."""
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    ax.semilogy([r[0] for r in rows], [max(r[3], _FLOOR) for r in rows], "o-")
    ax.set_xlabel("nx")
    ax.set_ylabel("relative L2(Q) gap vs FD oracle")
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)
