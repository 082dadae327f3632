import numpy as np
import pytest

from regenbot.actuator import (ActuatorBank, CapacitorState, SemiActiveJointParams,
                               applied_torque, capacitor_side_power, delta_energy, duty_ratio,
                               joint_current, joule_loss, motor_current, regen_power)
from regenbot.exceptions import DepletedStorageError, InputDomainError
from regenbot.robot_model import THETA_DEFAULT


@pytest.fixture
def bank():
    return ActuatorBank.default()


def test_torque_bounds(bank):
    lo, hi = bank.torque_bounds(27.0)
    np.testing.assert_allclose(hi, [135.51, 217.85, 117.67], atol=0.01)
    np.testing.assert_allclose(lo, -hi)


def test_split_is_physical(bank):
    assert np.all(bank.b_mech >= 0)
    assert np.all(bank.b_mech <= THETA_DEFAULT[10:13])
    np.testing.assert_allclose(bank.k, bank.a / bank.R)


def test_electrical_share_cannot_exceed_lumped():
    with pytest.raises(InputDomainError):
        SemiActiveJointParams(k=5.0, a=100.0, lumped_damping=78.0)
    with pytest.raises(InputDomainError):
        ActuatorBank.default(efficiency=1.5)


def test_duty_ratio_examples(bank):
    j2 = bank.joints[1]
    r, sat = duty_ratio(0.0, j2, 27.0)
    assert r == 0 and not sat
    r, sat = duty_ratio(217.85, j2, 27.0)
    assert r == pytest.approx(1.0, abs=1e-4) and not sat
    r, sat = duty_ratio(-217.85, j2, 26.35)
    assert r == -1.0 and sat
    assert abs(applied_torque(r, j2, 26.35)) == pytest.approx(8.0687 * 26.35)
    assert abs(applied_torque(r, j2, 26.35)) == pytest.approx(212.6, abs=0.05)
    with pytest.raises(DepletedStorageError):
        duty_ratio(1.0, j2, 0.0)


def test_joint_current_examples(bank):
    j = bank.joints[0]
    assert joint_current(0.0, 3.0, j, 27.0) == 0.0
    assert joint_current(0.1, 10.0, j, 27.0) > 0  # back-driven, regenerating
    r = 0.4
    assert joint_current(r, 0.0, j, 27.0) == pytest.approx(-r**2 * 27.0 / j.R)
    with pytest.raises(InputDomainError):
        joint_current(1.5, 0.0, j, 27.0)


def test_regen_power_examples(bank):
    j = bank.joints[2]
    assert regen_power(0.0, 2.0, j) == 0.0
    assert regen_power(5.0, -1.0, j) < 0  # tau and velocity opposed: motoring
    assert regen_power(5.0, 0.0, j) < 0


def test_regen_power_matches_capacitor_current(bank, rng):
    for _ in range(1000):
        jn = rng.integers(3)
        j = bank.joints[jn]
        v = rng.uniform(1.0, 30.0)
        tau = rng.uniform(-1, 1) * j.k * v
        qd = rng.uniform(-5, 5)
        r, sat = duty_ratio(tau, j, v)
        assert not sat
        p_cap = v * joint_current(r, qd, j, v)
        p = regen_power(tau, qd, j)
        assert p == pytest.approx(p_cap, rel=1e-10, abs=1e-10)


def test_joule_loss_definition(bank):
    j = bank.joints[1]
    i = motor_current(0.3, 1.2, j, 27.0)
    assert joule_loss(0.3, 1.2, j, 27.0) == pytest.approx(j.R * i**2)


def test_capacitor_side_power():
    np.testing.assert_allclose(capacitor_side_power([10.0, -10.0], 0.5), [5.0, -20.0])
    np.testing.assert_allclose(capacitor_side_power([3.0, -1.0], 1.0), [3.0, -1.0])


def test_delta_energy(bank):
    t = np.linspace(0, 1, 11)
    total, per = delta_energy(t, np.zeros((11, 3)), np.zeros((11, 3)), bank)
    assert total == 0 and np.all(per == 0)
    with pytest.raises(InputDomainError):
        delta_energy(np.array([]), np.zeros((0, 3)), np.zeros((0, 3)), bank)
    with pytest.raises(InputDomainError):
        delta_energy(t**2, np.zeros((11, 3)), np.zeros((11, 3)), bank)
    # constant torque and speed: closed form
    tau, qd = np.full((11, 3), 2.0), np.full((11, 3), 1.5)
    total, per = delta_energy(t, tau, qd, bank)
    np.testing.assert_allclose(per, 2.0 * 1.5 - bank.loss_coeff * 4.0)


def test_capacitor_state():
    c = CapacitorState()
    assert c.energy == pytest.approx(0.5 * 165 * 27**2)
    with pytest.raises(InputDomainError):
        CapacitorState(v=-1.0)
