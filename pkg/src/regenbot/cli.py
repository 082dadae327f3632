"""Command-line interface: ``regenbot {optimize,simulate,compare,audit,gradient-check}``.

Exit codes: 0 ok, 1 configuration or input error, 2 optimizer
non-convergence (or failed derivative check), 3 depleted storage.
"""

import argparse
import logging
import os
import sys
from pathlib import Path


from . import energy_audit as ea
from . import io
from .config import Scenario
from .exceptions import (DepletedStorageError, InputDomainError, OptimizationFailedError,
                         RegenbotError)
from .sim import Reference, neighboring_trajectory, simulate
from .trajopt import gradient_check, solve

OUTPUT_ENV = "REGENBOT_OUTPUT_DIR"
EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_DEPLETED = 0, 1, 2, 3
DIRECTIONS = {"both": ("AtoB", "BtoA"), "AtoB": ("AtoB",), "BtoA": ("BtoA",)}

log = logging.getLogger("regenbot")


def _g(x):
    return f"{x:.6g}"


def _out_dir(args, scenario):
    d = args.output or os.environ.get(OUTPUT_ENV) or scenario["output"]["directory"]
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _formats(scenario):
    return set(scenario["output"]["formats"])


def _scenario(args):
    sc = Scenario.load(args.config) if args.config else Scenario()
    for item in args.set or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise InputDomainError(f"--set expects section.key=value, got {item!r}")
        sc.override(key.strip(), val)
    return sc


def _load_reference(path):
    if io.sniff(path) != "solution":
        raise InputDomainError(f"{path}: expected a solution CSV")
    return io.read_solution_csv(path)


# --------------------------------------------------------------------------- commands
def cmd_optimize(args, sc, out):
    ledgers, code = [], EXIT_OK
    fmts = _formats(sc)
    for direction in DIRECTIONS[args.direction]:
        problem = sc.problem(direction)
        try:
            sol = solve(problem, **sc.solve_options())
        except OptimizationFailedError as exc:
            if exc.best is not None:
                io.write_solution_csv(exc.best, out / f"solution_{direction}_best_iterate.csv")
                io.write_json(exc.best.summary(), out / f"solution_{direction}_best_iterate.json")
            print(f"{direction}: {exc}; best iterate written to {out}", file=sys.stderr)
            code = EXIT_NONCONVERGED
            continue
        ledger = ea.audit(sol, theta=problem.theta, bank=problem.bank, label=direction)
        ledgers.append(ledger)
        if "csv" in fmts:
            io.write_solution_csv(sol, out / f"solution_{direction}.csv")
        if "json" in fmts:
            io.write_json({"solution": sol.summary(), "ledger": ledger.to_dict(),
                           "sankey": ea.sankey(ledger)}, out / f"solution_{direction}.json")
        print(f"{direction}: J = {_g(sol.objective)} J, |c| = {_g(sol.constraint_violation)}, "
              f"kkt = {_g(sol.kkt_residual)}, starts agreeing within 1%: "
              f"{sum(abs(s.objective - sol.objective) <= 0.01 * abs(sol.objective) for s in sol.starts)}"
              f"/{len(sol.starts)}")
    if ledgers:
        text, data = ea.report_tables(ledgers, cycle=len(ledgers) == 2)
        print("Theoretical energies (positive = consumption)")
        print(text)
        if "json" in fmts:
            io.write_json(data, out / "theoretical_table.json")
    return code


def _run_sim(sc, reference, label, out, write=True):
    try:
        trace = simulate(reference, sc.gains(), sc.bank(), sc.capacitor(),
                         step=sc["sim"]["step"], theta=sc.plant_theta(),
                         v_min=sc["sim"]["v_min"])
    except DepletedStorageError as exc:
        if exc.partial is not None and write:
            io.write_trace_csv(exc.partial, out / f"trace_{label}_partial.csv")
            io.write_json(exc.partial.summary(), out / f"run_summary_{label}_partial.json")
        raise
    ledger = ea.audit(trace, label=label)
    if write:
        fmts = _formats(sc)
        if "csv" in fmts:
            io.write_trace_csv(trace, out / f"trace_{label}.csv")
        if "json" in fmts:
            io.write_json(trace.summary(), out / f"run_summary_{label}.json")
            io.write_json({"ledger": ledger.to_dict(), "sankey": ea.sankey(ledger)},
                          out / f"audit_{label}.json")
    return trace, ledger


def cmd_simulate(args, sc, out):
    refs = [Reference.from_solution(_load_reference(p)) for p in args.reference]
    reference = refs[0]
    for r in refs[1:]:
        reference = reference.then(r)
    label = args.label or "mission"
    trace, ledger = _run_sim(sc, reference, label, out)
    s = trace.summary()
    print(f"max tracking error [rad]: {', '.join(map(_g, s['max_tracking_error']))}")
    print(f"chatter (total variation of tau_d) [N m]: "
          f"{', '.join(map(_g, s['chatter_total_variation']))}")
    print(f"saturated steps: {s['saturated_steps']}, v_cap {_g(s['v_start'])} -> {_g(s['v_end'])} V")
    segments = []
    if len(refs) > 1:
        idx = 0
        for i, r in enumerate(refs):
            n = int(round(r.horizon / trace.step))
            segments.append(ea.audit(trace.slice(idx, idx + n), label=f"segment{i + 1}"))
            idx += n
        text, _ = ea.report_tables(segments, cycle=True)
    else:
        text, _ = ea.report_tables([ledger])
    print("Simulated motor-side energies (positive = consumption)")
    print(text)
    print(f"balance residual: {_g(ledger.residual)} J of {_g(ledger.gross)} J gross")
    return EXIT_OK


def cmd_compare(args, sc, out):
    if args.reference:
        base_sol = _load_reference(args.reference)
    else:
        base_sol = solve(sc.problem("AtoB"), **sc.solve_options())
    base = Reference.from_solution(base_sol)
    refs = [("optimal", base)]
    if "neighbors" in args.against:
        for sign, name in ((+1, "neighbor+"), (-1, "neighbor-")):
            refs.append((name, neighboring_trajectory(base, args.epsilon_frac, args.mu, sign=sign,
                                                      q_nodes=base_sol.q)))
    for path in args.against:
        if path != "neighbors":
            refs.append((Path(path).stem, Reference.from_solution(_load_reference(path))))
    ledgers = []
    for name, ref in refs:
        _, ledger = _run_sim(sc, ref, name, out, write=args.write_traces)
        ledgers.append(ledger)
    text, data = ea.report_tables(ledgers, labels=[n for n, _ in refs])
    others = [lg.total for lg in ledgers[1:]]
    dominates = all(ledgers[0].total < t for t in others)
    data["optimal_dominates"] = dominates
    print("Simulated motor-side energies (positive = consumption)")
    print(text)
    print(f"optimal dominates: {'yes' if dominates else 'no'}")
    io.write_json(data, out / "comparison.json")
    return EXIT_OK


def cmd_audit(args, sc, out):
    ledgers = []
    for path in args.files:
        kind = io.sniff(path)
        if kind == "solution":
            lg = ea.audit(io.read_solution_csv(path), theta=sc.theta(), bank=sc.bank(),
                          label=Path(path).stem)
        else:
            cols = io.read_trace_columns(path)
            lg = ea.audit(_TraceView(cols, sc), method="trapezoid", label=Path(path).stem)
        ledgers.append(lg)
        io.write_json({"ledger": lg.to_dict(), "sankey": ea.sankey(lg)},
                      out / f"audit_{Path(path).stem}.json")
    text, _ = ea.report_tables(ledgers, cycle=args.cycle)
    print(text)
    for lg in ledgers:
        print(f"{lg.label}: dE_m {_g(lg.delta_E_m)}, sigma_m {_g(lg.sigma_m)}, sigma_e "
              f"{_g(lg.sigma_e)}, dE_s {_g(lg.delta_E_s)}, residual {_g(lg.residual)} J")
    return EXIT_OK


class _TraceView:
    """Minimal trace built from CSV columns and the scenario's plant."""

    def __init__(self, cols, sc):
        self.__dict__.update(cols)
        self.theta, self.bank = sc.plant_theta(), sc.bank()
        self.capacitance = sc["actuators"]["capacitance"]
        self.cum_regen = None


def cmd_gradient_check(args, sc, out):
    problem = sc.problem(args.direction)
    worst = 0.0
    for i in range(args.points):
        res = gradient_check(problem, seed=args.seed + i)
        worst = max(worst, res["max"])
        print(f"point {i}: objective {_g(res['objective'])}, constraints {_g(res['constraints'])}")
    print(f"max relative error {_g(worst)} (tolerance {_g(args.tol)})")
    return EXIT_OK if worst < args.tol else EXIT_NONCONVERGED


# --------------------------------------------------------------------------- parser
def build_parser():
    p = argparse.ArgumentParser(prog="regenbot", description=__doc__.splitlines()[0])
    p.add_argument("-c", "--config", help="scenario JSON file")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override a config value (JSON-parsed), repeatable")
    p.add_argument("-o", "--output", help=f"output directory (else ${OUTPUT_ENV}, else config)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("optimize", help="solve for energy-optimal trajectories")
    o.add_argument("--direction", choices=sorted(DIRECTIONS), default="both")
    o.set_defaults(func=cmd_optimize)

    s = sub.add_parser("simulate", help="closed-loop simulation along solution file(s)")
    s.add_argument("--reference", nargs="+", required=True,
                   help="solution CSV(s); several are played back to back")
    s.add_argument("--label", help="file name tag for outputs")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="simulate optimal vs neighbors or other trajectories")
    c.add_argument("--reference", help="optimal solution CSV (solved A->B if omitted)")
    c.add_argument("--against", nargs="+", default=["neighbors"],
                   help="'neighbors' and/or solution CSV files")
    c.add_argument("--epsilon-frac", type=float, default=0.2)
    c.add_argument("--mu", type=float, default=1.0)
    c.add_argument("--write-traces", action="store_true")
    c.set_defaults(func=cmd_compare)

    a = sub.add_parser("audit", help="energy ledger for solution or trace CSVs")
    a.add_argument("files", nargs="+")
    a.add_argument("--cycle", action="store_true", help="report cycle savings")
    a.set_defaults(func=cmd_audit)

    g = sub.add_parser("gradient-check", help="compare analytic and numerical derivatives")
    g.add_argument("--points", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--tol", type=float, default=1e-5)
    g.add_argument("--direction", choices=["AtoB", "BtoA"], default="AtoB")
    g.set_defaults(func=cmd_gradient_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = _scenario(args)
        out = _out_dir(args, sc)
        (out / "effective_config.json").write_text(sc.dumps())
        return args.func(args, sc, out)
    except DepletedStorageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEPLETED
    except OptimizationFailedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (InputDomainError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RegenbotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
