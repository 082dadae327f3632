import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from regenbot.exceptions import InputDomainError, ModelConsistencyError, NumericalError
from regenbot.robot_model import (POSE_A, POSE_B, THETA_DEFAULT, JointState, bias_torque,
                                  check_theta, forward_dynamics, gravity, inverse_dynamics,
                                  kinetic_energy, mass_matrix, mechanical_energy,
                                  potential_energy, regressor)

TH = THETA_DEFAULT
vec3 = arrays(np.float64, 3, elements=st.floats(-3.0, 3.0))


def test_default_parameters():
    assert TH[0] == 2.8861 and TH[12] == 56.7933 and TH.size == 13


@pytest.mark.parametrize("bad", [np.ones(12), np.r_[np.nan, TH[1:]], np.r_[0.0, TH[1:]],
                                 np.r_[TH[:10], -1.0, TH[11:]]])
def test_check_theta_rejects(bad):
    with pytest.raises(InputDomainError):
        check_theta(bad)


def test_joint_state_validates():
    with pytest.raises(InputDomainError):
        JointState(q=[0, 0], qd=[0, 0, 0])
    with pytest.raises(InputDomainError):
        JointState(q=[0, np.inf, 0], qd=[0, 0, 0])


@settings(max_examples=50, deadline=None)
@given(vec3, vec3, vec3)
def test_structural_zeros(q, qd, qdd):
    Y = regressor(q, qd, qdd)
    for col in (5, 6, 8, 9, 11, 12):
        assert Y[0, col] == 0.0
    for col in (0, 10, 12):
        assert Y[1, col] == 0.0
    for col in (0, 1, 5, 7, 9, 10, 11):
        assert Y[2, col] == 0.0


def test_gravity_examples():
    np.testing.assert_allclose(gravity(POSE_A), 0.0, atol=1e-12)
    # hand evaluation: rows 2, 3 are -theta9 c23 - theta10 c2 and -theta9 c23
    np.testing.assert_allclose(gravity([0, 0, 0]), [0, -TH[8] - TH[9], -TH[8]], atol=1e-12)
    c = np.cos(np.pi / 4)
    np.testing.assert_allclose(gravity(POSE_B), [0, -TH[8] * c - TH[9], -TH[8] * c], atol=1e-12)
    np.testing.assert_allclose(gravity(POSE_B), [0, -50.345, -6.129], atol=5e-4)


def test_unit_acceleration_row_one(rng):
    for q in rng.uniform(-3, 3, (20, 3)):
        c2, c23 = np.cos(q[1]), np.cos(q[1] + q[2])
        tau = inverse_dynamics(q, np.zeros(3), [1, 0, 0]) - gravity(q)
        expected = TH[0] + TH[1] * c2**2 + TH[2] * c23**2 + 2 * TH[3] * c23 * c2
        assert tau[0] == pytest.approx(expected, rel=1e-12)


def test_potential_energy_gap():
    gap = potential_energy(POSE_A) - potential_energy(POSE_B)
    assert gap == pytest.approx(TH[8] + TH[9] + TH[8] * np.sin(np.pi / 4), rel=1e-12)
    assert gap == pytest.approx(59.01, abs=0.01)


@settings(max_examples=30, deadline=None)
@given(vec3)
def test_potential_gradient_is_gravity(q):
    h = 1e-6
    grad = [(potential_energy(q + h * e) - potential_energy(q - h * e)) / (2 * h)
            for e in np.eye(3)]
    np.testing.assert_allclose(grad, gravity(q), rtol=1e-6, atol=1e-6)
    assert potential_energy(q + [1.3, 0, 0]) == pytest.approx(potential_energy(q))


def test_mass_matrix_properties(rng):
    q = rng.uniform(-np.pi, np.pi, (1000, 3))
    D = mass_matrix(q, check=True)
    assert np.max(np.abs(D - np.swapaxes(D, -1, -2))) < 1e-9
    assert np.all(np.linalg.eigvalsh(D) > 0)
    assert mass_matrix(POSE_A)[0, 0] == pytest.approx(TH[0], abs=1e-12)


def test_mass_matrix_check_rejects_indefinite():
    theta = TH.copy()
    theta[3] = -10.0
    with pytest.raises(ModelConsistencyError):
        mass_matrix([0, 0, 0], theta, check=True)


def test_bias_examples(rng):
    q = rng.uniform(-3, 3, 3)
    np.testing.assert_allclose(bias_torque(q, np.zeros(3)), gravity(q), atol=1e-12)
    np.testing.assert_allclose(bias_torque(POSE_A, [1, 0, 0]), [78.5975, 0, 0], atol=1e-9)


def test_forward_dynamics_examples(rng):
    q = rng.uniform(-3, 3, 3)
    np.testing.assert_allclose(forward_dynamics(q, np.zeros(3), gravity(q)), 0, atol=1e-10)
    np.testing.assert_allclose(forward_dynamics(POSE_A, np.zeros(3), np.zeros(3)), 0, atol=1e-12)
    with pytest.raises(NumericalError):
        forward_dynamics(q, np.zeros(3), np.zeros(3), max_cond=1.0)


def test_round_trip_batch(rng):
    q = rng.uniform(-np.pi, np.pi, (1000, 3))
    qd = rng.uniform(-3, 3, (1000, 3))
    qdd = rng.uniform(-10, 10, (1000, 3))
    u = inverse_dynamics(q, qd, qdd)
    assert np.max(np.abs(forward_dynamics(q, qd, u) - qdd)) < 1e-8


def _energy_rate_error(printed):
    """Max |dE/dt - qd.(u - F qd)| along short random motions."""
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        q, qd, qdd = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3), rng.uniform(-5, 5, 3)
        u = regressor(q, qd, qdd, printed_y14=printed) @ TH
        h = 1e-5

        def E(s):
            return float(mechanical_energy(q + qd * s + 0.5 * qdd * s**2, qd + qdd * s))

        dE = (E(h) - E(-h)) / (2 * h)
        worst = max(worst, abs(dE - qd @ (u - TH[10:13] * qd)))
    return worst


def test_energy_rate_identity():
    # power balance of Lagrangian dynamics: dE/dt = qd . (u - damping)
    assert _energy_rate_error(printed=False) < 1e-6


def test_printed_y14_breaks_energy_rate():
    assert _energy_rate_error(printed=True) > 1e-2


def test_kinetic_energy_nonnegative(rng):
    q, qd = rng.uniform(-3, 3, (100, 3)), rng.uniform(-3, 3, (100, 3))
    assert np.all(kinetic_energy(q, qd) >= 0)


def test_complex_step_passthrough():
    q = np.array([0.1, -0.2, 0.3]) + 1j * np.array([1e-30, 0, 0])
    assert np.iscomplexobj(regressor(q, np.zeros(3), np.zeros(3)))
