"""Batch experiment runner: iteration tables, spectra, symbol comparisons.

Every command writes CSV (header row, 12 significant digits) or JSON into
the output directory; files are written atomically.  Invalid grid cells are
reported without aborting the rest of a parameter sweep, and a partial
failure exits with status 2.
"""

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import build_system
from .bounds import outlier_report, write_outlier_csv
from .grid import GridSpec, build_grid
from .krylov import SolveConfig, cg_solve, make_preconditioner
from .multigrid import MgConfig, MgPreconditioner
from .sparsemat import write_matrix_market, write_vector_csv
from .spectra import dense_spectrum, esd_discrepancy, trim_matched, write_spectrum_csv
from .symbols import composite_symbol, count_matched_sizes, sample_rearranged, write_samples_csv

COMMANDS = ("assemble", "solve", "spectrum", "symbol-compare", "bound-check", "table1", "table2", "table3")
CONFIG_KEYS = ("N", "p", "tau", "sigma_e", "sigma_i", "precond", "tol", "maxit", "rhs", "out")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _atomic_write(path, text) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


@dataclass
class ExperimentPlan:
    """One CLI invocation: command plus its parameter grid."""

    command: str
    N_list: list
    tau_list: list
    precond_list: list
    rhs: str = "sine"
    element: str = "q1"
    p: int = 1
    sigma_e: float = 1.0
    sigma_i: float = 1.0
    tol: float = 1e-6
    maxit: int = 10000
    omega: float = 1.0
    out: str = "results"
    jobs: int = 1


def _solve_cell(args):
    """One (N, tau, preconditioner) cell of an iteration table."""
    N, tau, precond, plan = args
    sys_ = build_system(N, tau, plan.sigma_e, plan.sigma_i, rhs=plan.rhs, element=plan.element)
    cfg = SolveConfig(tol=plan.tol, maxit=plan.maxit, precond=precond)
    if precond == "mg":
        M = MgPreconditioner(sys_)
    else:
        M = make_preconditioner(sys_.matrix.csr, precond, omega=plan.omega)
    rep = cg_solve(sys_.matrix, sys_.rhs, M=M, cfg=cfg)
    return {
        "N": N,
        "tau": tau,
        "n": sys_.n,
        "precond": precond,
        "rhs": plan.rhs,
        "element": plan.element,
        "iterations": rep.iterations,
        "rel_residual": rep.rel_residual,
        "converged": rep.converged,
        "seconds": rep.seconds,
    }


def _run_cells(cells, plan):
    results, errors = [], []
    if plan.jobs > 1:
        with ProcessPoolExecutor(max_workers=plan.jobs) as pool:
            outcomes = list(pool.map(_solve_cell_safe, cells))
    else:
        outcomes = [_solve_cell_safe(cell) for cell in cells]
    for cell, (res, err) in zip(cells, outcomes):
        if err is None:
            results.append(res)
        else:
            errors.append((cell[:3], err))
    return results, errors


def _solve_cell_safe(args):
    try:
        return _solve_cell(args), None
    except Exception as exc:  # reported per cell, the grid keeps going
        return None, f"{type(exc).__name__}: {exc}"


def _table_command(plan: ExperimentPlan, name: str, precond_list) -> int:
    cells = [(N, tau, prc, plan) for N in plan.N_list for tau in plan.tau_list for prc in precond_list]
    results, errors = _run_cells(cells, plan)
    header = ["N", "tau", "n", "precond", "rhs", "element", "iterations", "rel_residual", "converged", "seconds"]
    rows = [[r[k] for k in header] for r in results]
    path = os.path.join(plan.out, f"{name}.csv")
    write_csv(path, header, rows)
    print(f"wrote {path} ({len(rows)} rows)")
    for cell, err in errors:
        print(f"cell {cell}: {err}", file=sys.stderr)
    return 2 if errors else 0


def cmd_table1(plan: ExperimentPlan) -> int:
    return _table_command(plan, "table1", ["identity"])


def cmd_table2(plan: ExperimentPlan) -> int:
    return _table_command(plan, "table2", ["mg"])


def cmd_table3(plan: ExperimentPlan) -> int:
    return _table_command(plan, "table3", plan.precond_list)


def cmd_solve(plan: ExperimentPlan) -> int:
    status = 0
    for N in plan.N_list:
        for tau in plan.tau_list:
            for precond in plan.precond_list:
                res, err = _solve_cell_safe((N, tau, precond, plan))
                if err is not None:
                    print(f"cell ({N}, {tau}, {precond}): {err}", file=sys.stderr)
                    status = 2
                    continue
                res["p"] = plan.p
                res["tol"] = plan.tol
                res["maxit"] = plan.maxit
                path = os.path.join(plan.out, f"solve_N{N}_tau{_fmt(tau)}_{precond}.json")
                _atomic_write(path, json.dumps(res, indent=2, default=_fmt) + "\n")
                print(f"wrote {path}")
    return status


def cmd_assemble(plan: ExperimentPlan) -> int:
    status = 0
    for N in plan.N_list:
        for tau in plan.tau_list:
            try:
                sys_ = build_system(N, tau, plan.sigma_e, plan.sigma_i, rhs=plan.rhs, element=plan.element)
            except Exception as exc:
                print(f"cell ({N}, {tau}): {type(exc).__name__}: {exc}", file=sys.stderr)
                status = 2
                continue
            os.makedirs(plan.out, exist_ok=True)
            mtx = os.path.join(plan.out, f"emi_N{N}_tau{_fmt(tau)}.mtx")
            write_matrix_market(sys_.matrix, mtx)
            rhs = os.path.join(plan.out, f"rhs_N{N}_tau{_fmt(tau)}.csv")
            write_vector_csv(sys_.rhs, rhs, header="rhs")
            print(f"wrote {mtx} and {rhs}")
    return status


def cmd_spectrum(plan: ExperimentPlan) -> int:
    status = 0
    for N in plan.N_list:
        for tau in plan.tau_list:
            try:
                sys_ = build_system(N, tau, plan.sigma_e, plan.sigma_i, rhs=plan.rhs, element=plan.element)
                rep = dense_spectrum(sys_.matrix)
            except Exception as exc:
                print(f"cell ({N}, {tau}): {type(exc).__name__}: {exc}", file=sys.stderr)
                status = 2
                continue
            os.makedirs(plan.out, exist_ok=True)
            path = os.path.join(plan.out, f"spectrum_N{N}_tau{_fmt(tau)}.csv")
            write_spectrum_csv(rep, path)
            print(f"wrote {path} ({rep.dim} eigenvalues)")
    return status


def cmd_symbol_compare(plan: ExperimentPlan) -> int:
    status = 0
    g = composite_symbol(0.25)
    for N in plan.N_list:
        for tau in plan.tau_list:
            try:
                sys_ = build_system(N, tau, plan.sigma_e, plan.sigma_i, rhs=plan.rhs, element=plan.element)
                rep = dense_spectrum(sys_.matrix)
                samples = sample_rearranged(g, count_matched_sizes(rep.dim))
                count = min(rep.dim, len(samples))
                disc = esd_discrepancy(rep.eigenvalues, samples)
            except Exception as exc:
                print(f"cell ({N}, {tau}): {type(exc).__name__}: {exc}", file=sys.stderr)
                status = 2
                continue
            os.makedirs(plan.out, exist_ok=True)
            eig_path = os.path.join(plan.out, f"eigenvalues_N{N}_tau{_fmt(tau)}.csv")
            smp_path = os.path.join(plan.out, f"gsamples_N{N}_tau{_fmt(tau)}.csv")
            write_samples_csv(trim_matched(rep.eigenvalues, count), eig_path, header="eigenvalue")
            write_samples_csv(trim_matched(np.sort(samples), count), smp_path, header="sample")
            print(
                f"wrote {eig_path} and {smp_path}; mean-lambda discrepancy "
                f"{disc.mean_discrepancy['lambda']:.6g}"
            )
    return status


def cmd_bound_check(plan: ExperimentPlan) -> int:
    status = 0
    for N in plan.N_list:
        try:
            dofs = build_grid(GridSpec(N))
            reports = outlier_report(dofs, plan.tau_list, plan.sigma_e, plan.sigma_i, tol=plan.tol)
        except Exception as exc:
            print(f"N={N}: {type(exc).__name__}: {exc}", file=sys.stderr)
            status = 2
            continue
        os.makedirs(plan.out, exist_ok=True)
        path = os.path.join(plan.out, f"bound_check_N{N}.csv")
        write_outlier_csv(reports, path)
        print(f"wrote {path} ({len(reports)} tau values)")
    return status


def _load_config(path) -> dict:
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line without '=': {line!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise ValueError(f"unknown config key {key!r} (allowed: {CONFIG_KEYS})")
            values[key] = val
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emisolve",
        description="EMI block-system experiments: iteration tables, spectra, symbol checks.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--N", type=int, nargs="+", default=None, help="cells per side (one or more)")
    parser.add_argument("--tau", type=float, nargs="+", default=None, help="time-step parameters")
    parser.add_argument("--p", type=int, default=1, help="element order (1 only)")
    parser.add_argument("--precond", nargs="+", default=None,
                        choices=["identity", "jacobi", "ssor", "ilu0", "mg"],
                        help="preconditioners (solve / table3)")
    parser.add_argument("--rhs", choices=["sine", "unit"], default=None)
    parser.add_argument("--element", choices=["q1", "p1"], default=None,
                        help="bulk element family (default q1; tables default p1)")
    parser.add_argument("--sigma-e", type=float, default=None)
    parser.add_argument("--sigma-i", type=float, default=None)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--maxit", type=int, default=None)
    parser.add_argument("--omega", type=float, default=1.0, help="SSOR relaxation weight")
    parser.add_argument("--out", default=None, help="output directory (default: results)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for table grids")
    parser.add_argument("--config", default=None, help="key=value config file (flags win)")
    return parser


_TABLE_DEFAULTS = {
    "table1": dict(N=[32, 64, 128], tau=[1.0, 0.1, 0.01, 0.001], element="p1"),
    "table2": dict(N=[32, 64, 128, 256], tau=[1.0, 0.1, 0.01, 0.001], element="q1"),
    "table3": dict(N=[512], tau=[0.01], element="p1"),
    "bound-check": dict(N=[16], tau=[1.0, 0.1, 0.01, 0.001], element="q1"),
    "symbol-compare": dict(N=[64], tau=[1.0], element="q1"),
    "spectrum": dict(N=[16], tau=[1.0], element="q1"),
    "assemble": dict(N=[16], tau=[1.0], element="q1"),
    "solve": dict(N=[16], tau=[1.0], element="q1"),
}


def plan_from_args(args) -> ExperimentPlan:
    defaults = _TABLE_DEFAULTS[args.command]
    conf = _load_config(args.config) if args.config else {}

    def pick(flag_value, conf_key, fallback, cast):
        if flag_value is not None:
            return flag_value
        if conf_key in conf:
            return cast(conf[conf_key])
        return fallback

    if args.p != 1:
        raise ValueError(f"element order p={args.p} is not supported (p=1 only)")
    N_list = pick(args.N, "N", defaults["N"], lambda s: [int(v) for v in s.split()])
    tau_list = pick(args.tau, "tau", defaults["tau"], lambda s: [float(v) for v in s.split()])
    precond = pick(args.precond, "precond", ["identity", "jacobi", "ssor", "ilu0", "mg"], lambda s: s.split())
    return ExperimentPlan(
        command=args.command,
        N_list=list(N_list),
        tau_list=list(tau_list),
        precond_list=list(precond),
        rhs=pick(args.rhs, "rhs", "sine", str),
        element=args.element if args.element is not None else defaults["element"],
        p=args.p,
        sigma_e=pick(args.sigma_e, "sigma_e", 1.0, float),
        sigma_i=pick(args.sigma_i, "sigma_i", 1.0, float),
        tol=pick(args.tol, "tol", 1e-6, float),
        maxit=pick(args.maxit, "maxit", 10000, int),
        omega=args.omega,
        out=pick(args.out, "out", "results", str),
        jobs=args.jobs,
    )


def run(plan: ExperimentPlan) -> int:
    """Execute a plan; returns the process exit status (0 ok, 2 partial)."""
    handler = {
        "table1": cmd_table1,
        "table2": cmd_table2,
        "table3": cmd_table3,
        "solve": cmd_solve,
        "assemble": cmd_assemble,
        "spectrum": cmd_spectrum,
        "symbol-compare": cmd_symbol_compare,
        "bound-check": cmd_bound_check,
    }[plan.command]
    return handler(plan)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        plan = plan_from_args(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(plan)


if __name__ == "__main__":
    sys.exit(main())
