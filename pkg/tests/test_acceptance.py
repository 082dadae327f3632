"""Acceptance criteria 1-10, one printed PASS/FAIL line each."""

import numpy as np
import pytest

from regenbot import energy_audit as ea
from regenbot.actuator import ActuatorBank
from regenbot.robot_model import (POSE_A, POSE_B, forward_dynamics, inverse_dynamics,
                                  potential_energy)
from regenbot.trajopt import CollocationProblem, gradient_check

TABLE1_TOTALS = {"AtoB": -19.33, "BtoA": 115.61}


@pytest.fixture
def report(capsys):
    def _report(n, title, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n:>2} {'PASS' if ok else 'FAIL'}: {title} | {detail}")
        assert ok, f"criterion {n} failed: {detail}"
    return _report


def test_c01_potential_energy_gap(report):
    gap = float(potential_energy(POSE_A) - potential_energy(POSE_B))
    report(1, "V(A) - V(B) within 2% of 58.6 J", abs(gap - 58.6) <= 0.02 * 58.6,
           f"gap = {gap:.4f} J")


def test_c02_control_bounds(report):
    _, hi = ActuatorBank.default().torque_bounds(27.0)
    err = np.max(np.abs(hi - [135.51, 217.85, 117.67]))
    report(2, "torque bounds at 27 V", err <= 0.01, f"bounds = {np.round(hi, 4)}, max err {err:.4f}")


def test_c03_table1_structure(report, sol_ab, sol_ba):
    ab, ba = ea.audit(sol_ab).motor_side, ea.audit(sol_ba).motor_side
    checks = {
        "joint 1 consumes both ways": ab[0] > 0 and ba[0] > 0,
        "joints 2-3 regenerate A->B": ab[1] < 0 and ab[2] < 0,
        "all consume B->A": bool(np.all(ba > 0)),
        "joint 2 dominates": np.argmax(np.abs(ab)) == 1 and np.argmax(np.abs(ba)) == 1,
        "A->B total within 25%": abs(ab.sum() - TABLE1_TOTALS["AtoB"]) <= 0.25 * 19.33,
        "B->A total within 25%": abs(ba.sum() - TABLE1_TOTALS["BtoA"]) <= 0.25 * 115.61,
    }
    failed = [k for k, v in checks.items() if not v]
    report(3, "Table 1 signs, structure and totals", not failed,
           f"A->B {np.round(ab, 2)} total {ab.sum():.2f}; B->A {np.round(ba, 2)} total "
           f"{ba.sum():.2f}" + (f"; failed: {failed}" if failed else ""))


def test_c04_neighbor_dominance(report, trace_ab, neighbor_traces):
    opt = ea.audit(trace_ab).total
    plus, minus = (ea.audit(neighbor_traces[s]).total for s in (+1, -1))
    report(4, "optimal beats both neighbors (simulated)", opt < plus and opt < minus,
           f"totals (consumption +): optimal {opt:.3f}, +bump {plus:.3f}, -bump {minus:.3f} J")


def test_c05_round_trip_dynamics(report):
    rng = np.random.default_rng(2024)
    q = rng.uniform(-np.pi, np.pi, (1000, 3))
    qd = rng.uniform(-3, 3, (1000, 3))
    qdd = rng.uniform(-10, 10, (1000, 3))
    err = float(np.max(np.abs(forward_dynamics(q, qd, inverse_dynamics(q, qd, qdd)) - qdd)))
    report(5, "inverse-then-forward dynamics on 1000 states", err < 1e-8, f"max err {err:.2e}")


def test_c06_gradient_check(report):
    p = CollocationProblem(N=100)
    errs = [gradient_check(p, seed=s)["max"] for s in range(10)]
    report(6, "NLP derivatives at 10 random points", max(errs) < 1e-5,
           f"max relative error {max(errs):.2e}")


def test_c07_energy_balance(report, trace_ab, trace_mission, neighbor_traces):
    traces = {"A->B": trace_ab, "mission": trace_mission, "+bump": neighbor_traces[1],
              "-bump": neighbor_traces[-1]}
    worst = {}
    for name, tr in traces.items():
        lg = ea.audit(tr, check=False)
        worst[name] = abs(lg.residual) / lg.gross
    ok = all(v <= 0.01 for v in worst.values())
    report(7, "simulated balance residual <= 1% of gross flows", ok,
           ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_c08_cycle_savings(report, trace_mission, ref_ab):
    k = int(round(ref_ab.horizon / trace_mission.step))
    segs = [ea.audit(trace_mission.slice(0, k)), ea.audit(trace_mission.slice(k, len(trace_mission) - 1))]
    s = ea.cycle_savings(segs)
    report(8, "A->B->A savings >= 10%", s >= 0.10,
           f"totals {segs[0].total:.3f} / {segs[1].total:.3f} J, savings {100 * s:.2f}%")


def test_c09_multistart(report, sol_ab):
    starts = sol_ab.starts
    random_starts = [s for s in starts if s.kind == "random"]
    conv = [s for s in starts if s.success]
    spread = max(abs(s.objective - sol_ab.objective) for s in conv) / abs(sol_ab.objective)
    ok = len(random_starts) >= 8 and len(conv) == len(starts) and spread <= 0.01
    report(9, ">= 8 random starts agree within 1%", ok,
           f"{len(random_starts)} random + {len(starts) - len(random_starts)} deterministic, "
           f"{len(conv)} converged, spread {spread:.1e}")


def test_c10_mesh_stability(report, sol_ab, sol_ab_50):
    d = abs(sol_ab.objective - sol_ab_50.objective) / abs(sol_ab.objective)
    report(10, "J(N=50) vs J(N=100) < 0.5%", d < 0.005,
           f"J50 {sol_ab_50.objective:.4f}, J100 {sol_ab.objective:.4f}, diff {100 * d:.3f}%")
