"""Command-line front end: single solves, convergence sweeps, problem list."""

from __future__ import annotations

import argparse
import sys

from . import bench


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="flat key = value config file")
    parser.add_argument(
        "--strict",
        action="store_true",
        help="exit nonzero if any per-N solve fails hard",
    )


def _cmd_list_problems(_args) -> int:
    for pid in bench.PROBLEM_IDS:
        print(pid)
    return 0


def _cmd_solve(args) -> int:
    cfg = bench.parse_config(args.config)
    try:
        results, rows = bench.run_single(cfg, N=args.N)
    except Exception as exc:
        print(f"solve failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1 if args.strict else 0
    for k, (res, row) in enumerate(zip(results, rows)):
        status = "converged" if res.converged else "NOT converged"
        print(
            f"{cfg.problem} component {k + 1}: {status} in "
            f"{res.iterations} iterations ({res.wall_time:.3f}s)"
        )
        print(f"  multiplier     = {res.mu_final:.6g}")
        print(f"  state integral = {row.state_integral:.6g}")
        if row.control_error is not None:
            print(f"  control error  = {row.control_error:.6g}")
        if row.multiplier_error is not None:
            print(f"  multiplier err = {row.multiplier_error:.6g}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = bench.parse_config(args.config)
    reports = bench.run_sweep(cfg)
    failed = False
    for report in reports:
        print(f"# {cfg.problem} component {report.component} ({cfg.basis_kind})")
        for line in bench.report_csv_lines(report):
            print(line)
        for row in report.rows:
            if row.failure is not None:
                failed = True
                print(f"# N={row.N} FAILED: {row.failure}")
    if args.plot:
        _emit_plots(cfg, reports)
    return 1 if (failed and args.strict) else 0


def _emit_plots(cfg, reports) -> None:
    """Optional SVG emission: log-log error decay per component."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not available; skipping plots", file=sys.stderr)
        return
    import os

    for report in reports:
        pts = [
            (row.N, row.control_error, row.multiplier_error)
            for row in report.rows
            if row.failure is None
        ]
        if not pts:
            continue
        fig, ax = plt.subplots(figsize=(4.0, 3.2))
        ns = [p[0] for p in pts]
        anchor = None
        for idx, label in ((1, "control"), (2, "multiplier")):
            errs = [p[idx] for p in pts]
            if all(e is not None and e > 0 for e in errs):
                ax.loglog(ns, errs, "o-", label=label)
                anchor = anchor or errs[0]
        if anchor is not None:
            ax.loglog(ns, [anchor * ns[0] / n for n in ns], "k--", label="order 1")
        ax.set_xlabel("N")
        ax.set_ylabel("error")
        ax.legend()
        fig.tight_layout()
        stem = f"{cfg.problem}_{cfg.basis_kind}_c{report.component}_errors.svg"
        fig.savefig(os.path.join(cfg.output_dir, stem))
        plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="socproj",
        description="Constrained stochastic optimal control benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one solve at a single grid size")
    _add_config_arg(p_solve)
    p_solve.add_argument("--N", type=int, default=None, help="grid size override")
    p_solve.set_defaults(func=_cmd_solve)

    p_sweep = sub.add_parser("sweep", help="run the configured convergence sweep")
    _add_config_arg(p_sweep)
    p_sweep.add_argument("--plot", action="store_true", help="emit SVG error plots")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_list = sub.add_parser("list-problems", help="print the built-in problem ids")
    p_list.set_defaults(func=_cmd_list_problems)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
