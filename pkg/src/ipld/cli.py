"""Command-line entry points.

``ipld solve`` runs the path-following solver and/or the first-order
baseline on a benchmark instance (parsed or synthetic) and persists results
and traces. ``ipld sweep`` reproduces the tolerance-sensitivity experiment:
one tolerance fixed at 1e-5, the other swept over a log grid, one trace per
cell, stopping on measured solution quality.

Exit codes: 0 converged, 2 iteration cap reached, 1 error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import io as ipld_io
from .applications import (bfs_ball, build_dsl_instance, build_num_instance,
                           generate_dsl, generate_num, synthetic_network)
from .chambolle_pock import build_cp_num, cp_solve
from .pathfollow import SolveStatus, SolverConfig, solve

_TAU_GRID = (1e-5, 1e-6, 1e-7, 1e-8)


def _build_parser():
    ap = argparse.ArgumentParser(prog="ipld", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add_instance_flags(p):
        p.add_argument("--problem", choices=("num", "dsl"), required=True)
        p.add_argument("--edges", type=str, help="edge-list file (num)")
        p.add_argument("--synthetic", type=int, metavar="N",
                       help="synthetic instance size: nodes (num) or channels (dsl)")
        p.add_argument("--dsl-data", type=str, help="DSL matrix text file")
        p.add_argument("--users", type=int, default=7, help="users for synthetic DSL")
        p.add_argument("--pairs-per-node", type=int, default=None,
                       help="destinations per node (num); all reachable if omitted")
        p.add_argument("--max-nodes", type=int, default=None,
                       help="truncate a parsed network to a BFS ball of this size")
        p.add_argument("--seed", type=int, default=0)

    ps = sub.add_parser("solve", help="run one or more solvers on an instance")
    add_instance_flags(ps)
    ps.add_argument("--t0", type=float, default=0.25)
    ps.add_argument("--beta", type=float, default=0.05)
    ps.add_argument("--eps", type=float, default=1e-6)
    ps.add_argument("--delta-slave", type=float, default=None)
    ps.add_argument("--eps-master", type=float, default=None)
    ps.add_argument("--solver", action="append", choices=("ipld", "cp"),
                    help="repeatable; default ipld")
    ps.add_argument("--tau", type=float, default=1e-6, help="cp primal step size")
    ps.add_argument("--tau-grid", action="store_true",
                    help="grid-search tau over 1e-5..1e-8 and keep the best run")
    ps.add_argument("--out", type=str, default=None, help="result JSON path")
    ps.add_argument("--trace", type=str, default=None, help="trace CSV path")
    ps.add_argument("--diagnostics", action="store_true",
                    help="record neighborhood diagnostics (extra slave solves)")
    ps.add_argument("--stop-mode", choices=("t", "quality"), default="t")
    ps.add_argument("--feas-tol", type=float, default=1e-5)
    ps.add_argument("--gap-tol", type=float, default=1e-6)

    pw = sub.add_parser("sweep", help="tolerance sweep, one trace per grid cell")
    add_instance_flags(pw)
    pw.add_argument("--sweep", choices=("eps", "delta"), required=True,
                    help="which master/slave tolerance to sweep")
    pw.add_argument("--fixed", type=float, default=1e-5,
                    help="value of the non-swept tolerance")
    pw.add_argument("--t0", type=float, default=0.25)
    pw.add_argument("--beta", type=float, default=0.05)
    pw.add_argument("--feas-tol", type=float, default=1e-5)
    pw.add_argument("--gap-tol", type=float, default=1e-6)
    pw.add_argument("--out-dir", type=str, required=True)
    return ap


def _build_instance(args):
    if args.problem == "num":
        if args.edges:
            net = ipld_io.parse_edge_list(args.edges)
            if args.max_nodes:
                net = bfs_ball(net, args.max_nodes)
        elif args.synthetic:
            net = synthetic_network(args.synthetic, seed=args.seed)
        else:
            raise SystemExit2("--problem num needs --edges or --synthetic")
        data = generate_num(net, seed=args.seed, pairs_per_node=args.pairs_per_node)
        return build_num_instance(net, data)
    if args.dsl_data:
        data = ipld_io.parse_dsl_data(args.dsl_data)
    elif args.synthetic:
        data = generate_dsl(args.users, args.synthetic, seed=args.seed)
    else:
        raise SystemExit2("--problem dsl needs --dsl-data or --synthetic")
    return build_dsl_instance(data)


class SystemExit2(Exception):
    """Usage error carrying the message for exit code 1."""


def _run_ipld(instance, args):
    config = SolverConfig(
        t0=args.t0, beta=args.beta, eps=args.eps,
        delta_slave=args.delta_slave, eps_master=args.eps_master,
        diagnostics=args.diagnostics, stop_mode=args.stop_mode,
        feas_tol=args.feas_tol, gap_tol=args.gap_tol, seed=args.seed,
    )
    res = solve(instance, config)
    cert = res.certificate
    run = ipld_io.RunResult(
        solver="ipld",
        objective=res.objective,
        feasibility=res.feasibility,
        iterations=res.iterations,
        converged=res.converged,
        wall_s=res.wall_s,
        certificate=None if cert is None else {
            "t": cert.t, "lam": cert.lam, "primal_opt": cert.primal_opt,
            "bound_primal": cert.bound_primal, "dual_resid_e": cert.dual_resid_e,
            "dual_resid_r": cert.dual_resid_r, "bound_dual": cert.bound_dual,
            "interior": cert.interior,
        },
        config=asdict(config),
    )
    return run, res


def _run_cp(instance, args):
    if instance.meta.get("model") != "num":
        raise SystemExit2("the cp baseline supports the num problem only")
    prob = build_cp_num(instance)
    taus = _TAU_GRID if args.tau_grid else (args.tau,)
    best = None
    t_start = time.perf_counter()
    for tau in taus:
        res = cp_solve(prob, tau=tau, tol_feas=min(args.feas_tol, 1e-7),
                       tol_gap=min(args.gap_tol, 1e-7))
        if best is None or (res.converged and not best[1].converged) or (
            res.converged == best[1].converged and res.iters < best[1].iters
        ):
            best = (tau, res)
    tau, res = best
    run = ipld_io.RunResult(
        solver="cp",
        objective=prob.meta["model_objective"](res.u),
        feasibility=res.feas,
        iterations=res.iters,
        converged=res.converged,
        wall_s=time.perf_counter() - t_start,
        config={"tau": tau, "sigma": res.sigma, "norm_k": prob.norm_k,
                "seed": args.seed},
        extra={"rel_gap": res.rel_gap, "gap_flagged": res.gap_flagged},
    )
    return run, res


def _cmd_solve(args) -> int:
    instance = _build_instance(args)
    solvers = args.solver or ["ipld"]
    runs = []
    ipld_result = None
    for name in dict.fromkeys(solvers):
        if name == "ipld":
            run, ipld_result = _run_ipld(instance, args)
        else:
            run, _ = _run_cp(instance, args)
        runs.append(run)
        print(f"{run.solver}: objective={run.objective:.10g} "
              f"feasibility={run.feasibility:.3e} iters={run.iterations} "
              f"converged={run.converged}")

    if args.trace and ipld_result is not None:
        ipld_io.write_trace(ipld_result.trace, args.trace)
        for r in runs:
            if r.solver == "ipld":
                r.trace_path = args.trace

    doc = {"runs": [asdict(r) for r in runs]}
    if len(runs) == 2:
        rel = abs(runs[0].objective - runs[1].objective) / (1.0 + abs(runs[0].objective))
        doc["objective_rel_diff"] = rel
        print(f"relative objective difference: {rel:.3e}")
    if args.out:
        ipld_io.write_result(doc, args.out)
    return 0 if all(r.converged for r in runs) else 2


def _cmd_sweep(args) -> int:
    instance = _build_instance(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.sweep == "eps":
        grid = [10.0**e for e in range(-12, -1)]
    else:
        grid = [10.0**e for e in range(-8, -1)]
    summary = []
    worst = SolveStatus.CONVERGED
    for val in grid:
        delta = args.fixed if args.sweep == "eps" else val
        eps_m = val if args.sweep == "eps" else args.fixed
        config = SolverConfig(
            t0=args.t0, beta=args.beta, eps=1e-10,
            delta_slave=delta, eps_master=eps_m,
            stop_mode="quality", feas_tol=args.feas_tol, gap_tol=args.gap_tol,
            enforce_tolerance_caps=False, seed=args.seed,
        )
        res = solve(instance, config)
        if not res.converged:
            worst = SolveStatus.ITERATION_CAP
        tag = f"{args.sweep}_{val:.0e}"
        trace_path = out_dir / f"trace_{tag}.csv"
        ipld_io.write_trace(res.trace, trace_path)
        summary.append({
            "swept": args.sweep, "value": val, "iterations": res.iterations,
            "converged": res.converged, "objective": res.objective,
            "feasibility": res.feasibility, "wall_s": res.wall_s,
            "trace": str(trace_path),
        })
        print(f"{args.sweep}={val:.0e}: iters={res.iterations} "
              f"feas={res.feasibility:.2e} converged={res.converged}")
    ipld_io.write_result({"sweep": summary}, out_dir / "summary.json")
    return 0 if worst == SolveStatus.CONVERGED else 2


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; remap to the error code contract
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        return _cmd_sweep(args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, ipld_io.ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
