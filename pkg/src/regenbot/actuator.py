"""Semi-active (regenerative) joint drives sharing one capacitor.

Each joint is a DC motor/generator behind a four-quadrant driver whose only
control is the voltage ratio ``r`` (motor voltage over capacitor voltage),
limited to ``[-1, 1]`` because the driver cannot boost. The torque delivered
to the augmented robot model is ``k r v_cap`` with ``k = a / R``.

Sign conventions
----------------
* ``joint_current`` and ``regen_power`` are positive when energy flows
  *into* the capacitor (regeneration).
* Tabulated energies elsewhere (``energy_audit``) use the opposite,
  consumption-positive convention.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive, check_uniform_grid
from .exceptions import DepletedStorageError, InputDomainError
from .robot_model import DAMPING_SLICE, check_theta

#: Torque-per-volt gains [N m / V]; times 27 V these give the torque bounds.
K_DEFAULT = np.array([5.0189, 8.0687, 4.3581])
#: Fraction of each lumped viscous coefficient carried by the motor winding
#: (``a k / theta_damp``). ``a`` cannot be identified from the lumped model,
#: so these were calibrated: with them the A->B optimum loses ~23 % of the
#: potential drop electrically and ~44 % mechanically. See README.
ELECTRICAL_DAMPING_FRACTION = np.array([0.85, 0.93, 0.93])
V_CAP_NOMINAL = 27.0
CAPACITANCE_DEFAULT = 165.0


def _default_a(theta=None):
    theta = check_theta(theta)
    return ELECTRICAL_DAMPING_FRACTION * theta[DAMPING_SLICE] / K_DEFAULT


@dataclass(frozen=True)
class SemiActiveJointParams:
    """Drive constants of one semi-active joint.

    Parameters
    ----------
    k : float
        Torque-per-volt gain ``a / R`` [N m / V].
    a : float
        Torque constant times gear ratio [N m / A].
    lumped_damping : float
        The matching identified viscous coefficient [N m s]; the mechanical
        share is whatever the winding (``a^2 / R = a k``) does not account for.
    """

    k: float
    a: float
    lumped_damping: float

    def __post_init__(self):
        check_positive(self.k, "k")
        check_positive(self.a, "a")
        if self.b_mech < -1e-12 * self.lumped_damping:
            raise InputDomainError(
                f"electrical damping a*k = {self.a * self.k:.6g} exceeds the lumped "
                f"viscous coefficient {self.lumped_damping:.6g}"
            )

    @property
    def R(self):
        return self.a / self.k

    @property
    def b_mech(self):
        return self.lumped_damping - self.a * self.k

    @property
    def loss_coeff(self):
        """``R / a^2`` [1 / (N m s)], weight of the quadratic term in regen power."""
        return 1.0 / (self.a * self.k)


@dataclass(frozen=True)
class ActuatorBank:
    """Three semi-active joints in star configuration plus driver efficiency.

    Attribute access returns per-joint arrays (``bank.k``, ``bank.R``, ...),
    so a bank can be passed wherever a single joint's parameters are accepted.
    """

    joints: tuple
    efficiency: float = 1.0

    def __post_init__(self):
        if len(self.joints) != 3:
            raise InputDomainError("an actuator bank has exactly 3 joints")
        eta = float(self.efficiency)
        if not 0 < eta <= 1:
            raise InputDomainError(f"driver efficiency must lie in (0, 1], got {eta}")

    @classmethod
    def default(cls, theta=None, a=None, k=None, efficiency=1.0):
        theta = check_theta(theta)
        k = K_DEFAULT if k is None else np.asarray(k, dtype=float)
        a = _default_a(theta) if a is None else np.asarray(a, dtype=float)
        damp = theta[DAMPING_SLICE]
        joints = tuple(SemiActiveJointParams(float(k[j]), float(a[j]), float(damp[j]))
                       for j in range(3))
        return cls(joints, efficiency)

    def _stack(self, name):
        return np.array([getattr(j, name) for j in self.joints])

    k = property(lambda self: self._stack("k"))
    a = property(lambda self: self._stack("a"))
    R = property(lambda self: self._stack("R"))
    b_mech = property(lambda self: self._stack("b_mech"))
    loss_coeff = property(lambda self: self._stack("loss_coeff"))

    def torque_bounds(self, v_cap=V_CAP_NOMINAL):
        """Symmetric virtual-torque limits ``+-k v_cap`` implied by ``|r| <= 1``."""
        v_cap = check_positive(v_cap, "v_cap")
        upper = self.k * v_cap
        return -upper, upper


@dataclass
class CapacitorState:
    """Ideal capacitor: ``C dv/dt = -(sum of joint currents drawn)``."""

    v: float = V_CAP_NOMINAL
    c: float = CAPACITANCE_DEFAULT

    def __post_init__(self):
        check_positive(self.c, "capacitance")
        check_positive(self.v, "capacitor voltage")

    @property
    def energy(self):
        return 0.5 * self.c * self.v**2


def duty_ratio(tau_d, joint, v_cap):
    """Voltage ratio realizing ``tau_d`` by virtual matching, clamped to [-1, 1].

    Returns
    -------
    r : ndarray
    saturated : ndarray of bool
        True where clamping occurred, i.e. matching could not be exact.

    Raises
    ------
    DepletedStorageError
        If ``v_cap <= 0``.
    """
    v_cap = np.asarray(v_cap, dtype=float)
    if np.any(v_cap <= 0):
        raise DepletedStorageError(f"capacitor voltage {v_cap} V is not positive")
    r = np.asarray(tau_d, dtype=float) / (joint.k * v_cap)
    saturated = np.abs(r) > 1.0
    return np.clip(r, -1.0, 1.0), saturated


def applied_torque(r, joint, v_cap):
    """Torque ``k r v_cap`` delivered to the augmented model."""
    return joint.k * np.asarray(r) * v_cap


def motor_current(r, qd, joint, v_cap):
    """Winding current ``(a qd - r v_cap) / R``, positive when generating."""
    return (joint.a * np.asarray(qd) - np.asarray(r) * v_cap) / joint.R


def joint_current(r, qd, joint, v_cap):
    """Capacitor-side current ``(r / R)(a qd - r v_cap)``; positive charges the capacitor."""
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(r) > 1 + 1e-12):
        raise InputDomainError("duty ratio must lie in [-1, 1]")
    return r * motor_current(r, qd, joint, v_cap)


def joule_loss(r, qd, joint, v_cap):
    """Winding dissipation ``R i_motor^2`` [W]."""
    return joint.R * motor_current(r, qd, joint, v_cap) ** 2


def regen_power(tau_d, qd, joint):
    """Power into the capacitor ``tau_d qd - (R / a^2) tau_d^2`` [W].

    Equal to ``v_cap * joint_current`` whenever matching is unsaturated.
    """
    tau_d = np.asarray(tau_d, dtype=float)
    return tau_d * np.asarray(qd) - joint.loss_coeff * tau_d**2


def capacitor_side_power(motor_side, efficiency):
    """Apply a constant driver efficiency to a regen-positive power flow."""
    motor_side = np.asarray(motor_side, dtype=float)
    if efficiency == 1.0:
        return motor_side
    return np.where(motor_side > 0, motor_side * efficiency, motor_side / efficiency)


def delta_energy(t, tau_d, qd, joint):
    """Energy delivered to the capacitor over a trace (trapezoid rule).

    Parameters
    ----------
    t : array-like, shape (n,)
        Uniform time grid.
    tau_d, qd : array-like, shape (n, 3)
    joint : ActuatorBank or SemiActiveJointParams

    Returns
    -------
    total : float
        Positive for net regeneration, negative for net consumption.
    per_joint : ndarray, shape (3,)
    """
    tau_d = np.atleast_2d(np.asarray(tau_d, dtype=float))
    if tau_d.size == 0:
        raise InputDomainError("empty trace")
    t = check_uniform_grid(t)
    if tau_d.shape[0] != t.size:
        raise InputDomainError("trace length does not match time grid")
    p = regen_power(tau_d, np.atleast_2d(qd), joint)
    per_joint = np.trapezoid(p, t, axis=0)
    return float(per_joint.sum()), per_joint
