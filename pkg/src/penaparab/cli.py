"""Command line interface: certify, solve, convergence, oracle-compare.

Exit codes: 0 success, 1 configuration error, 2 hypothesis violation,
3 numerical failure.  CSV and JSON outputs are byte-deterministic for
identical inputs (floats use the shortest round-trip representation);
figures are rendered next to them as a convenience, the delimited files
are the contract.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import mesh as msh
from . import plots
from .assembly import AssemblyError, assemble
from .config import Config, ConfigError, load_config
from .geometry import is_sigma0_cylindrical, validate_partition
from .mesh import MeshError, TAG_SIGMA1, build_mesh
from .solver import (
    PenaltySchedule,
    SolverFailure,
    coupled_penalty,
    run_schedule,
    solve_linear,
    solve_semilinear,
)
from .transform import (
    TransformError,
    build_phi,
    check_lipschitz,
    sample_grid,
    sample_rho,
    select_k1,
    select_k2,
    transform_problem,
)
from .verify import VerifyError, derive_data, error_norms, fd_oracle, observed_orders

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_HYPOTHESIS = 2
EXIT_NUMERICAL = 3

ORACLE_GAP_TOL = 0.02
MARGIN_REQUIRED = 0.9
K_REQUIRED = 0.5 - 1e-12
CONVERGENCE_LEVELS = 4


class HypothesisViolation(RuntimeError):
    def __init__(self, reasons):
        super().__init__("; ".join(reasons))
        self.reasons = reasons


def _fmt(v):
    return repr(float(v))


def thread_cap(n_tasks):
    """Worker count for embarrassingly parallel studies (PENAPARAB_THREADS caps it)."""
    raw = os.environ.get("PENAPARAB_THREADS")
    auto = min(n_tasks, os.cpu_count() or 1)
    if raw is None:
        return auto
    try:
        v = int(raw)
    except ValueError:
        raise ConfigError(f"PENAPARAB_THREADS must be an integer, got '{raw}'") from None
    if v == 0:
        return auto
    return max(1, min(v, n_tasks))


@dataclass
class PipelineState:
    """Everything certify establishes; solve and friends re-use it."""

    certificate: dict
    reasons: list
    ok: bool
    rho: float | None = None
    phi: object = None
    k1: float | None = None
    k2: float | None = None
    tp: object = None
    mesh: object = None


def _sample_data_finiteness(cfg, reasons):
    spec = cfg.spec
    X, T = sample_grid(spec.domain, 64, 64)
    checks = [("data.g", np.atleast_1d(spec.g_fn()(X, T)))]
    ts = np.linspace(0.0, spec.domain.T, 257)
    for side, curve in (("left", spec.domain.a_at), ("right", spec.domain.b_at)):
        xb = np.atleast_1d(curve(ts))
        checks.append((f"data.ybar ({side})", np.atleast_1d(spec.ybar_fn()(xb, ts))))
        checks.append((f"data.f ({side})", np.atleast_1d(spec.f_fn()(side, xb, ts))))
        checks.append((f"coefficients.k ({side})", np.atleast_1d(spec.k_at(xb, ts))))
    x0 = np.linspace(spec.domain.a_at(0.0), spec.domain.b_at(0.0), 257)
    checks.append(("data.y0", np.atleast_1d(spec.y0_fn()(x0))))
    for name, vals in checks:
        if not np.all(np.isfinite(vals)):
            reasons.append(f"{name} evaluates to a non-finite value on samples")


def run_checks(cfg: Config):
    """The certification pipeline; every check solve relies on happens here."""
    cert = {
        "rho": None,
        "eta": None,
        "k1": None,
        "k2": None,
        "minK": None,
        "coercivity_margin": None,
        "sigma0_nonempty": False,
        "sigma0_cylindrical": False,
        "lipschitz_check": "fail",
        "slope_check": "fail",
        "width_check": "fail",
    }
    reasons = []
    spec = cfg.spec
    domain = cfg.domain

    problems = domain.check()
    slope_problems = [p for p in problems if "slope" in p]
    width_problems = [p for p in problems if p not in slope_problems]
    cert["slope_check"] = "fail" if slope_problems else "pass"
    cert["width_check"] = "fail" if width_problems else "pass"
    reasons.extend(problems)

    part = validate_partition(domain, cfg.partition)
    cert["sigma0_nonempty"] = bool(part.ok)
    if not part.ok:
        reasons.extend(part.problems)
    cylindrical = is_sigma0_cylindrical(cfg.partition)
    cert["sigma0_cylindrical"] = bool(cylindrical)
    if cfg.is_semilinear and not cylindrical:
        reasons.append(
            "the semilinear kind requires a time-constant (cylindrical) Dirichlet part"
        )

    try:
        rho = sample_rho(spec, 4 * cfg.disc.nx, 4 * cfg.disc.nt)
        cert["rho"] = rho
        if rho <= 0:
            reasons.append(f"diffusion coefficient dips to {rho:.6g}; a11 >= rho > 0 fails")
    except TransformError as err:
        rho = None
        reasons.append(str(err))

    lip_ok, worst = check_lipschitz(spec)
    cert["lipschitz_check"] = "pass" if lip_ok else "fail"
    if not lip_ok:
        reasons.append(
            f"sampled reaction difference quotient {worst:.6g} exceeds the declared "
            f"Lipschitz constant {spec.lipschitz_c:.6g}"
        )

    _sample_data_finiteness(cfg, reasons)

    state = PipelineState(certificate=cert, reasons=reasons, ok=False, rho=rho)
    if reasons:
        return state

    try:
        phi = build_phi(domain)
        cert["eta"] = phi.eta
        k2 = select_k2(spec, phi)
        k1 = select_k1(spec, phi, k2, rho, nx=4 * cfg.disc.nx, nt=4 * cfg.disc.nt)
        cert["k1"], cert["k2"] = k1, k2
        tp = transform_problem(spec, phi, k1, k2, rho)
        mesh = build_mesh(domain, cfg.partition, cfg.disc.nx, cfg.disc.nt)
    except (TransformError, MeshError) as err:
        reasons.append(str(err))
        return state

    # Robin coefficient on selection samples plus this mesh's quadrature points
    mink = None
    mask1 = mesh.edge_tag == TAG_SIGMA1
    if np.any(mask1):
        vals = []
        for code in np.unique(mesh.edge_side[mask1]):
            side = msh.SIDE_NAMES[int(code)]
            rows = mesh.edge_side[mask1] == code
            vals.append(
                np.min(tp.K(side, mesh.edge_qx[mask1][rows], mesh.edge_qt[mask1][rows]))
            )
        mink = float(min(vals))
        cert["minK"] = mink
        if mink < K_REQUIRED:
            reasons.append(
                f"transformed Robin coefficient minimum {mink:.6g} is below 1/2"
            )

    X, T = sample_grid(domain, 4 * cfg.disc.nx, 4 * cfg.disc.nt)
    res_grid = tp.coercivity_residual(X, T)
    res_mesh = tp.coercivity_residual(mesh.tri_qx.ravel(), mesh.tri_qt.ravel())
    margin = float(min(np.min(res_grid), np.min(res_mesh)))
    cert["coercivity_margin"] = margin
    if not np.isfinite(margin) or margin < MARGIN_REQUIRED:
        reasons.append(
            f"pointwise coercivity residual {margin:.6g} is below {MARGIN_REQUIRED}"
        )

    state.phi, state.k1, state.k2, state.tp, state.mesh = phi, k1, k2, tp, mesh
    state.ok = not reasons
    return state


def _prepare(cfg):
    state = run_checks(cfg)
    if not state.ok:
        raise HypothesisViolation(state.reasons)
    return state


def _out_dir(cfg, override):
    out = override or cfg.output_dir or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands

def cmd_certify(cfg, out_dir):
    state = run_checks(cfg)
    cert = dict(state.certificate)
    cert["reasons"] = list(state.reasons)
    _write_json(out_dir / "certificate.json", cert)
    if state.ok:
        print(
            "certify: PASS "
            f"(rho={cert['rho']:.6g}, eta={cert['eta']:.6g}, k1={cert['k1']:.6g}, "
            f"k2={cert['k2']:.6g}, margin={cert['coercivity_margin']:.6g})"
        )
        return EXIT_OK
    for reason in state.reasons:
        print(f"certify: hypothesis violation: {reason}", file=sys.stderr)
    return EXIT_HYPOTHESIS


def _picard_json(picard):
    if picard is None:
        return None
    return {
        "iterations": picard.iterations,
        "gaps": [float(g) for g in picard.gaps],
        "ratio": float(picard.ratio),
    }


def cmd_solve(cfg, out_dir):
    state = _prepare(cfg)
    mesh = state.mesh
    report = run_schedule(
        state.tp,
        mesh,
        PenaltySchedule(cfg.disc.penalty_schedule),
        picard_tol=cfg.disc.picard_tol,
        picard_max=cfg.disc.picard_max,
    )
    rows = [
        (_fmt(x), _fmt(t), _fmt(u), _fmt(y))
        for (x, t), u, y in zip(mesh.nodes, report.final_u, report.final_y)
    ]
    _write_csv(out_dir / "solution.csv", ("x", "t", "u", "y"), rows)

    doc = {
        "constants": {
            "k1": state.k1,
            "k2": state.k2,
            "rho": state.rho,
            "eta": state.phi.eta,
            "minK": state.certificate["minK"],
            "coercivity_margin": state.certificate["coercivity_margin"],
        },
        "runs": [
            {
                "m": r.m,
                "penalty_energy": r.e_pen,
                "gradient_energy": r.e_grad,
                "trace0_sq": r.trace0,
                "traceT_sq": r.traceT,
                "cauchy_gap": r.cauchy_gap,
                "picard": _picard_json(r.picard),
            }
            for r in report.runs
        ],
    }
    _write_json(out_dir / "report.json", doc)
    plots.solution_figure(mesh, report.final_y, out_dir / "solution.png")
    plots.energies_figure(report, out_dir / "energies.png")
    print(f"solve: wrote {out_dir / 'solution.csv'} ({mesh.n_nodes} nodes)")
    return EXIT_OK


def _solve_one(tp, mesh, m, cfg):
    if tp.is_semilinear:
        u, _ = solve_semilinear(
            tp, mesh, m, tol=cfg.disc.picard_tol, max_iter=cfg.disc.picard_max
        )
        return u
    return solve_linear(tp, mesh, m)


def cmd_convergence(cfg, out_dir):
    if cfg.manufactured is None:
        raise ConfigError("convergence requires the manufactured section")
    state = _prepare(cfg)
    derived = derive_data(cfg.manufactured, cfg.spec)
    tp = transform_problem(derived, state.phi, state.k1, state.k2, state.rho)

    levels = [
        (cfg.disc.nx * 2**i, cfg.disc.nt * 2**i) for i in range(CONVERGENCE_LEVELS)
    ]

    def run_level(dims):
        nx, nt = dims
        mesh = build_mesh(cfg.domain, cfg.partition, nx, nt)
        m = coupled_penalty(nx)
        u = _solve_one(tp, mesh, m, cfg)
        y = tp.to_physical(mesh.nodes[:, 0], mesh.nodes[:, 1], u)
        err = error_norms(y, cfg.manufactured, mesh)
        return (nx, nt, m, err.l2, err.energy)

    workers = thread_cap(len(levels))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_level, levels))
    else:
        results = [run_level(d) for d in levels]

    orders = [None] + observed_orders([r[3] for r in results])
    rows = []
    table = []
    for (nx, nt, m, l2, energy), order in zip(results, orders):
        rows.append(
            (
                str(nx),
                str(nt),
                _fmt(m),
                _fmt(l2),
                _fmt(energy),
                "" if order is None else _fmt(order),
            )
        )
        table.append((nx, nt, m, l2, energy, order))
    _write_csv(
        out_dir / "rates.csv",
        ("nx", "nt", "m", "l2_error", "energy_error", "observed_order"),
        rows,
    )
    plots.rates_figure(table, out_dir / "rates.png")
    final = table[-1]
    print(
        f"convergence: final level nx={final[0]} l2_error={final[3]:.3e} "
        f"order={final[5] if final[5] is not None else 'n/a'}"
    )
    return EXIT_OK


def cmd_oracle_compare(cfg, out_dir):
    if cfg.is_semilinear:
        raise VerifyError("oracle comparison requires a linear reaction term")
    # static check happens inside fd_oracle; surface it as a config error
    state = _prepare(cfg)

    base_nx, base_nt = cfg.disc.nx, cfg.disc.nt
    fracs = sorted({max(2, base_nx // 4), max(2, base_nx // 2), base_nx})
    m = cfg.disc.penalty_schedule[-1]

    def run_level(nx):
        nt = max(2, round(base_nt * nx / base_nx))
        mesh = build_mesh(cfg.domain, cfg.partition, nx, nt)
        if mesh.n_levels != nt + 1:
            raise VerifyError(
                "oracle comparison requires boundary kinds constant between "
                "uniform time levels"
            )
        u = solve_linear(state.tp, mesh, m)
        y = state.tp.to_physical(mesh.nodes[:, 0], mesh.nodes[:, 1], u)
        _, _, Y = fd_oracle(cfg.spec, nx, nt)
        ref = Y.ravel()
        denom = msh.l2_q(mesh, ref)
        num = msh.l2_q(mesh, y - ref)
        gap = num / max(denom, 1e-300)
        return (nx, nt, m, gap)

    workers = thread_cap(len(fracs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            table = list(pool.map(run_level, fracs))
    else:
        table = [run_level(nx) for nx in fracs]

    rows = [(str(nx), str(nt), _fmt(mm), _fmt(gap)) for nx, nt, mm, gap in table]
    _write_csv(out_dir / "compare.csv", ("nx", "nt", "m", "rel_l2_gap"), rows)
    plots.compare_figure(table, out_dir / "compare.png")
    final_gap = table[-1][3]
    print(f"oracle-compare: final relative gap {final_gap:.4f} (tolerance {ORACLE_GAP_TOL})")
    if final_gap > ORACLE_GAP_TOL:
        print(
            f"oracle-compare: gap {final_gap:.4f} exceeds {ORACLE_GAP_TOL}",
            file=sys.stderr,
        )
        return EXIT_NUMERICAL
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry points

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="penaparab",
        description=(
            "Penalized space-time Galerkin solver for parabolic problems on "
            "moving 1-D domains with mixed boundary conditions."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("certify", "check the problem hypotheses and select the constants"),
        ("solve", "run the penalty continuation and write solution.csv/report.json"),
        ("convergence", "manufactured-solution refinement study (rates.csv)"),
        ("oracle-compare", "compare against the finite-difference oracle (compare.csv)"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="path to the JSON configuration")
        p.add_argument("-o", "--output", default=None, help="output directory")
    return parser


_COMMANDS = {
    "certify": cmd_certify,
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "oracle-compare": cmd_oracle_compare,
}


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as err:
        # keep the exit-code contract: usage problems are config errors (1),
        # --help stays 0
        return EXIT_OK if err.code == 0 else EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        out_dir = _out_dir(cfg, args.output)
        return _COMMANDS[args.command](cfg, out_dir)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except VerifyError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisViolation as err:
        for reason in err.reasons:
            print(f"hypothesis violation: {reason}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (SolverFailure, AssemblyError, MeshError, TransformError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


def console_main():
    sys.exit(main())
