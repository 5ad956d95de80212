"""Command-line driver: end-to-end runs, comparisons and solver benchmarks.

Sub-commands
------------
run       solve the configured device, write field/timing/iteration tables
compare   solve with both the decomposed and the monolithic path, report
          the relative field difference, DOF counts and timings
solve-qt  solve a serialized multiplier system with all four iteration
          variants and tabulate time / Err / iterations
bench     time the factorized sweep against the banded direct solve on
          synthetic systems of growing block count

All tables are UTF-8 CSV with one header row.
"""

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import monolithic, qtsolver
from .config import ConfigError, load_run_config
from .feti import multiplier_dof_count, solve_saw

FIELD_COLUMNS = [
    "x1", "x2", "x3",
    "re_u1", "im_u1", "re_u2", "im_u2", "re_u3", "im_u3",
    "re_phi", "im_phi",
]

TIMING_ORDER = [
    "assemble A and b",
    "solve A lambda = b",
    "solve matrix equations",
    "apply SMW sweep",
    "compute X",
    "total runtime",
]


def _fmt(x):
    return f"{x:.17e}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_fields(solution, path, index_path=None):
    """One row per node over all subregions, 11 columns."""
    rows = []
    index = []
    for label in sorted(solution.subregions):
        fld = solution.subregions[label]
        start = len(rows)
        phi = fld.phi if fld.phi is not None else np.zeros(len(fld.coords))
        for i in range(len(fld.coords)):
            x = fld.coords[i]
            u = fld.u[i]
            rows.append([
                _fmt(x[0]), _fmt(x[1]), _fmt(x[2]),
                _fmt(u[0].real), _fmt(u[0].imag),
                _fmt(u[1].real), _fmt(u[1].imag),
                _fmt(u[2].real), _fmt(u[2].imag),
                _fmt(complex(phi[i]).real), _fmt(complex(phi[i]).imag),
            ])
        index.append([label, start, len(rows)])
    _write_csv(path, FIELD_COLUMNS, rows)
    if index_path is not None:
        _write_csv(index_path, ["subregion", "row_start", "row_end"], index)


def write_timings(timings, path):
    cols = [k for k in TIMING_ORDER if k in timings]
    _write_csv(path, cols, [[_fmt(timings[k]) for k in cols]])


def write_iteration_report(solution, path):
    rep = solution.report
    rows = [
        ["double_iterations", rep.n_double],
        ["newton_iterations", rep.n_newton],
        ["err", _fmt(rep.err) if rep.err == rep.err else "nan"],
        ["converged", rep.converged],
        ["multiplier_residual", _fmt(solution.multiplier_residual)],
        ["block_solves", solution.stats.block_solves],
        ["lift_solves", solution.stats.lift_solves],
    ]
    rows += [["rho_double", _fmt(v)] for v in rep.rho_double]
    rows += [["rho_newton", _fmt(v)] for v in rep.rho_newton]
    _write_csv(path, ["quantity", "value"], rows)


def _freq_tag(frequencies, f):
    return "" if len(frequencies) == 1 else f"_{f:.6e}Hz"


def cmd_run(args):
    run_cfg = load_run_config(
        args.config, solver=args.solver, workers=args.workers,
        output=args.output, paper_verbatim_damping=args.paper_verbatim_damping,
    )
    out = run_cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    for cfg in run_cfg.problems():
        tag = _freq_tag(run_cfg.frequencies_hz, cfg.frequency_hz)
        solution = solve_saw(cfg)
        write_fields(solution, out / f"fields{tag}.csv", out / f"subregions{tag}.csv")
        write_timings(solution.timings, out / f"timings{tag}.csv")
        write_iteration_report(solution, out / f"iteration_report{tag}.csv")
        print(
            f"f = {cfg.frequency_hz:.6e} Hz: N = {cfg.n_cells}, "
            f"multiplier residual {solution.multiplier_residual:.3e}, "
            f"total {solution.timings['total runtime']:.3f} s -> {out}"
        )
    return 0


def cmd_compare(args):
    run_cfg = load_run_config(
        args.config, solver=args.solver, workers=args.workers,
        output=args.output, paper_verbatim_damping=args.paper_verbatim_damping,
    )
    out = run_cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for cfg in run_cfg.problems():
        feti_sol = solve_saw(cfg)
        t0 = time.perf_counter()
        gs = monolithic.assemble_monolithic(cfg, dof_cap=args.dof_cap)
        mono_sol = monolithic.solve_monolithic(gs)
        mono_total = time.perf_counter() - t0
        diff = feti_sol.relative_difference(mono_sol)
        mult_dofs = feti_sol.lam.size
        rows.append([
            _fmt(cfg.frequency_hz), cfg.n_cells, _fmt(diff),
            mult_dofs, gs.n_free,
            _fmt(feti_sol.timings["total runtime"]), _fmt(mono_total),
        ])
        print(
            f"f = {cfg.frequency_hz:.6e} Hz: relative difference {diff:.3e}, "
            f"multiplier DOFs {mult_dofs} vs monolithic DOFs {gs.n_free}, "
            f"FETI {feti_sol.timings['total runtime']:.3f} s, "
            f"FEM {mono_total:.3f} s"
        )
    _write_csv(
        out / "compare.csv",
        ["frequency_hz", "cells", "relative_difference",
         "multiplier_dofs", "monolithic_dofs", "feti_total_s", "fem_total_s"],
        rows,
    )
    return 0


def cmd_solve_qt(args):
    system = qtsolver.QTSystem.load(args.system)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for row in qtsolver.compare_methods(system, tol=args.tol, iter_max=args.iter_max):
        rows.append([
            row["method"], _fmt(row["time_s"]),
            _fmt(row["err"]) if row["err"] == row["err"] else "nan",
            row["iterations"], row["converged"], row.get("error", ""),
        ])
        print(
            f"{row['method']:>15s}: time {row['time_s']:.3f} s, "
            f"Err {row['err']:.3e}, iterations {row['iterations']}"
        )
    _write_csv(
        out / "methods.csv",
        ["method", "time_s", "err", "iterations", "converged", "error"],
        rows,
    )

    try:
        lam, report, _ = qtsolver.solve_qt_system(system, "double-newton")
        path = "double-newton"
    except Exception:
        lam, report, _ = qtsolver.solve_qt_system(system, "dense")
        path = "dense"
    residual = qtsolver.relative_residual(system, lam)
    np.savez_compressed(out / "solution.npz", lam=lam, residual=residual, path=path)
    print(f"solution residual {residual:.3e} ({path} path) -> {out}")
    return 0


def cmd_bench(args):
    sizes = [int(s) for s in args.sizes.split(",")]
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for nb in sizes:
        system = qtsolver.synthetic_system(args.block_size, nb, seed=args.seed)
        t0 = time.perf_counter()
        fact = qtsolver.factorize(system)
        t_fact = time.perf_counter() - t0
        t0 = time.perf_counter()
        lam = qtsolver.smw_solve(fact, system)
        t_sweep = time.perf_counter() - t0
        res = qtsolver.relative_residual(system, lam)
        t_dense = float("nan")
        if (nb + 1) * args.block_size <= args.dense_cap:
            t0 = time.perf_counter()
            qtsolver.qt_dense_oracle(system)
            t_dense = time.perf_counter() - t0
        rows.append([
            nb, args.block_size, _fmt(t_fact), _fmt(t_sweep), _fmt(t_dense),
            _fmt(res),
        ])
        print(
            f"N = {nb:5d}: factor {t_fact:.3f} s, sweep {t_sweep:.4f} s, "
            f"dense {t_dense:.4f} s, residual {res:.3e}"
        )
    _write_csv(
        out / "bench.csv",
        ["blocks", "block_size", "factor_s", "sweep_s", "dense_s", "residual"],
        rows,
    )
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sawfeti",
        description="Frequency-domain SAW device solver (FETI + quasi-Toeplitz).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--solver", choices=("auto", "dense", "double-newton"))
        p.add_argument("--workers", type=int)
        p.add_argument("--output", help="output directory (overrides config)")
        p.add_argument(
            "--paper-verbatim-damping", action="store_true",
            help="use the damping profile that peaks at the interior junction",
        )

    p_run = sub.add_parser("run", help="solve and export fields")
    common(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_cmp = sub.add_parser("compare", help="decomposed vs monolithic solve")
    common(p_cmp)
    p_cmp.add_argument("--dof-cap", type=int, default=200_000)
    p_cmp.set_defaults(fn=cmd_compare)

    p_qt = sub.add_parser("solve-qt", help="solver-only run on a saved system")
    p_qt.add_argument("system", help="QTSystem .npz file")
    p_qt.add_argument("--output", default="out")
    p_qt.add_argument("--tol", type=float, default=1e-10)
    p_qt.add_argument("--iter-max", type=int, default=50)
    p_qt.set_defaults(fn=cmd_solve_qt)

    p_bench = sub.add_parser("bench", help="sweep timing on synthetic systems")
    p_bench.add_argument("--sizes", default="4,16,64,256")
    p_bench.add_argument("--block-size", type=int, default=100)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--dense-cap", type=int, default=40_000)
    p_bench.add_argument("--output", default="out")
    p_bench.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error [input]: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # stage-tagged failures from the pipeline
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
