import numpy as np
import pytest

from regenbot import io, sim
from regenbot.actuator import CapacitorState
from regenbot.exceptions import DepletedStorageError, InputDomainError
from regenbot.robot_model import POSE_A, THETA_DEFAULT, mass_matrix, regressor


def test_gains_validation():
    with pytest.raises(InputDomainError):
        sim.ControllerGains(K=[1, 0, 1])
    with pytest.raises(InputDomainError):
        sim.ControllerGains(epsilon=0.0)
    with pytest.raises(InputDomainError):
        sim.ControllerGains(rho=-1.0)
    g = sim.ControllerGains()
    assert g.rho == pytest.approx(0.1 * np.linalg.norm(THETA_DEFAULT))


def test_computed_torque_limit(rng):
    g = sim.ControllerGains(rho=0.0)
    q, qd, qdd = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3), rng.uniform(-5, 5, 3)
    tau, info = sim.robust_control(q, qd, q, qd, qdd, g)
    np.testing.assert_allclose(info["r"], 0, atol=0)
    np.testing.assert_allclose(tau, regressor(q, qd, qdd) @ THETA_DEFAULT, rtol=1e-12)


def test_control_regressor_reduces_to_regressor(rng):
    q, qd, a = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3), rng.uniform(-5, 5, 3)
    np.testing.assert_allclose(sim.control_regressor(q, qd, a, qd), regressor(q, qd, a),
                               atol=1e-12)


def test_control_regressor_skew_symmetry(rng):
    # x'(Ddot - 2C)x = 0 for the Christoffel C recovered by polarization
    for _ in range(20):
        q, qd, x = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3)
        h = 1e-6
        Ddot = (mass_matrix(q + h * qd) - mass_matrix(q - h * qd)) / (2 * h)
        Yc = sim.control_regressor(q, qd, np.zeros(3), x) - sim.control_regressor(
            q, qd, np.zeros(3), np.zeros(3))
        Yc[:, 10:13] = 0.0
        Cx = Yc @ THETA_DEFAULT
        assert abs(x @ Ddot @ x - 2 * x @ Cx) < 1e-6


def test_boundary_layer_continuity(rng):
    q, qd = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3)
    qr, qdr, qddr = q + 0.01, qd - 0.02, rng.uniform(-3, 3, 3)
    _, info = sim.robust_control(q, qd, qr, qdr, qddr, sim.ControllerGains())
    w = np.linalg.norm(info["Ya"].T @ info["r"])
    lo, _ = sim.robust_control(q, qd, qr, qdr, qddr, sim.ControllerGains(epsilon=w))
    hi, _ = sim.robust_control(q, qd, qr, qdr, qddr, sim.ControllerGains(epsilon=w * (1 - 1e-12)))
    np.testing.assert_allclose(lo, hi, rtol=1e-9)


def test_stationary_at_gravity_neutral_pose():
    ref = sim.Reference.stationary(POSE_A, 0.2)
    tr = sim.simulate(ref)
    np.testing.assert_allclose(tr.q, np.broadcast_to(POSE_A, tr.q.shape), atol=1e-12)
    np.testing.assert_allclose(tr.tau_d, 0, atol=1e-9)
    np.testing.assert_allclose(tr.v_cap, 27.0, atol=1e-12)


def test_step_must_divide_horizon():
    with pytest.raises(InputDomainError):
        sim.simulate(sim.Reference.stationary(POSE_A, 0.2), step=0.003)


def test_trace_grid_and_columns(trace_ab, tmp_path):
    assert np.allclose(np.diff(trace_ab.t), 1e-3)
    assert np.all(trace_ab.v_cap > 0)
    path = io.write_trace_csv(trace_ab, tmp_path / "t.csv")
    header = path.read_text().splitlines()[0].split(",")
    assert header == sim.TRACE_COLUMNS
    assert header[:4] == ["t", "qd_ref1", "qd_ref2", "qd_ref3"] and header[-2:] == ["v_cap", "i_cap"]
    cols = io.read_trace_columns(path)
    np.testing.assert_array_equal(cols["q"], trace_ab.q)
    np.testing.assert_array_equal(cols["v_cap"], trace_ab.v_cap)


def test_virtual_matching(trace_ab):
    free = ~trace_ab.saturated
    np.testing.assert_allclose(trace_ab.tau_applied[free], trace_ab.tau_d[free], rtol=1e-13,
                               atol=1e-12)
    assert np.all(np.abs(trace_ab.r) <= 1.0)


def test_capacitor_bookkeeping(trace_mission):
    tr = trace_mission
    stored = 0.5 * tr.capacitance * (tr.v_cap[-1] ** 2 - tr.v_cap[0] ** 2)
    flow = np.trapezoid(tr.v_cap * tr.i_cap, tr.t)
    assert stored == pytest.approx(flow, rel=0.01)
    assert stored == pytest.approx(tr.cum_cap[-1].sum(), rel=1e-6)


def test_mission_voltage(trace_mission):
    assert abs(trace_mission.v_cap[-1] - trace_mission.v_cap[0]) < 0.5


def test_tracking_decays_from_offset(ref_ab):
    tr = sim.simulate(ref_ab, q0=ref_ab(0.0)[0] + 0.01)
    err = np.linalg.norm(tr.tracking_error(), axis=1)
    assert not tr.saturated.any()
    assert err[-1] < err[0] and err[-1] < 1e-3


def test_robust_to_parameter_error(ref_ab):
    g = sim.ControllerGains()
    for factor in (0.9, 1.1):
        theta = THETA_DEFAULT * factor
        assert np.linalg.norm(theta - THETA_DEFAULT) <= g.rho + 1e-9
        tr = sim.simulate(ref_ab, g, theta=theta)
        assert np.linalg.norm(tr.tracking_error(), axis=1).max() < 0.02


def test_step_refinement(ref_ab, trace_ab):
    fine = sim.simulate(ref_ab, step=5e-4)
    dq = np.abs(fine.q[-1] - trace_ab.q[-1]) / np.abs(trace_ab.q[-1]).max()
    assert dq.max() < 1e-4
    assert abs(fine.v_cap[-1] - trace_ab.v_cap[-1]) / trace_ab.v_cap[-1] < 1e-4


def test_deterministic(ref_ab, trace_ab):
    again = sim.simulate(ref_ab)
    np.testing.assert_array_equal(again.to_array(), trace_ab.to_array())


def test_depleted_storage_returns_partial(ref_ba):
    with pytest.raises(DepletedStorageError) as exc:
        sim.simulate(ref_ba, capacitor=CapacitorState(v=27.0, c=0.2))
    part = exc.value.partial
    assert part is not None and part.status == "depleted"
    assert 0 < len(part) < 2001 and part.v_cap[-1] > 0.1


def test_neighbor_examples(ref_ab, sol_ab):
    same = sim.neighboring_trajectory(ref_ab, epsilon_frac=0.0)
    for t in (0.0, 0.3, 1.0, 1.7):
        for a, b in zip(same(t), ref_ab(t)):
            np.testing.assert_allclose(a, b, atol=1e-15)
    nb = sim.neighboring_trajectory(ref_ab, q_nodes=sol_ab.q)
    peak = nb.bump(1.0)[0]
    np.testing.assert_allclose(nb.bump(0.0)[0] / peak, np.exp(-4.5), rtol=1e-12)
    np.testing.assert_allclose(peak, 0.2 * np.abs(sol_ab.q).max(axis=0))


def test_neighbor_derivatives_are_consistent(ref_ab, sol_ab):
    nb = sim.neighboring_trajectory(ref_ab, q_nodes=sol_ab.q, sign=-1)
    h = 1e-6
    for t in (0.5, 1.0, 1.4):
        q_p, qd_p, _ = nb(t + h)
        q_m, qd_m, _ = nb(t - h)
        _, qd, qdd = nb(t)
        np.testing.assert_allclose((q_p - q_m) / (2 * h), qd, atol=1e-6)
        np.testing.assert_allclose((qd_p - qd_m) / (2 * h), qdd, atol=1e-4)


def test_reference_is_self_consistent(ref_ab, sol_ab):
    np.testing.assert_allclose(ref_ab(0.0)[0], sol_ab.q[0], atol=1e-12)
    np.testing.assert_allclose(ref_ab(2.0)[0], sol_ab.q[-1], atol=1e-12)
    h = 1e-6
    for t in (0.3, 1.1):
        np.testing.assert_allclose((ref_ab(t + h)[0] - ref_ab(t - h)[0]) / (2 * h), ref_ab(t)[1],
                                   atol=1e-7)
