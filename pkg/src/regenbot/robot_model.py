"""Three-joint PUMA 560 dynamics in linear-in-parameters (regressor) form.

Every structured term (inertia matrix, gravity, velocity/damping bias) is
extracted by probing the regressor, so the regressor table below is the
single source of truth for the model.

All functions broadcast over leading axes: ``q`` of shape ``(..., 3)``
yields a regressor of shape ``(..., 3, 13)``. Complex inputs are accepted
(and not validated) so derivatives can be taken by complex-step.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import N_JOINTS, check_finite, check_joint_vector
from .exceptions import InputDomainError, ModelConsistencyError, NumericalError

N_PARAMS = 13

#: Identified parameter vector (kg m^2 for 1-8, N m for 9-10, N m s for 11-13).
THETA_DEFAULT = np.array([
    2.8861, 1.4425, 0.1990, 0.3815, -0.1326, 4.5860, 0.5945, -0.7938,
    8.6677, 44.2165, 78.5975, 183.2162, 56.7933,
])

# 0-based indices of the lumped viscous coefficients (rigid body + drive)
DAMPING_SLICE = slice(10, 13)
_POSITIVE_IDX = (0, 1, 5, 6, 10, 11, 12)

#: Gravity-neutral start pose A and low-potential end pose B.
POSE_A = np.array([0.0, -np.pi / 2, 0.0])
POSE_B = np.array([np.pi / 3, 0.0, np.pi / 4])


def check_theta(theta=None):
    """Return a validated copy of a 13-entry parameter vector."""
    if theta is None:
        return THETA_DEFAULT.copy()
    theta = check_finite(theta, "theta")
    if theta.shape != (N_PARAMS,):
        raise InputDomainError(f"theta must have {N_PARAMS} entries, got shape {theta.shape}")
    bad = [i + 1 for i in _POSITIVE_IDX if theta[i] <= 0]
    if bad:
        raise InputDomainError(f"theta entries {bad} must be strictly positive")
    return theta.copy()


@dataclass(frozen=True)
class JointState:
    """Positions, velocities and (optionally) accelerations of joints 1-3."""

    q: np.ndarray
    qd: np.ndarray
    qdd: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "q", check_joint_vector(self.q, "q", allow_batch=False))
        object.__setattr__(self, "qd", check_joint_vector(self.qd, "qd", allow_batch=False))
        if self.qdd is not None:
            object.__setattr__(
                self, "qdd", check_joint_vector(self.qdd, "qdd", allow_batch=False))


def _as_joint(x, name):
    if np.iscomplexobj(x):
        return np.asarray(x)
    return check_joint_vector(x, name)


def regressor(q, qd, qdd, *, printed_y14=False):
    """Regressor ``Y(q, qd, qdd)`` with ``Y @ theta`` equal to the joint torque.

    Parameters
    ----------
    q, qd, qdd : array-like, shape (..., 3)
        Joint positions [rad], velocities [rad/s], accelerations [rad/s^2].
    printed_y14 : bool, default False
        Use the (1, 4) entry exactly as typeset in the published table,
        ``2(qdd1 - qd1 qd2) c23 c2 - ...``. That form is not the Lagrangian
        of the inertia matrix and breaks the energy-rate identity; the
        default uses ``2 qdd1 c23 c2 - 2 qd1 qd2 c23 s2 - ...``.

    Returns
    -------
    Y : ndarray, shape (..., 3, 13)
    """
    q, qd, qdd = _as_joint(q, "q"), _as_joint(qd, "qd"), _as_joint(qdd, "qdd")
    q, qd, qdd = np.broadcast_arrays(q, qd, qdd)
    dtype = np.result_type(q, qd, qdd, float)

    q2, q3 = q[..., 1], q[..., 2]
    d1, d2, d3 = qd[..., 0], qd[..., 1], qd[..., 2]
    a1, a2, a3 = qdd[..., 0], qdd[..., 1], qdd[..., 2]
    c2, s2 = np.cos(q2), np.sin(q2)
    c3, s3 = np.cos(q3), np.sin(q3)
    c23, s23 = np.cos(q2 + q3), np.sin(q2 + q3)
    d23 = d2 + d3

    Y = np.zeros(q.shape[:-1] + (N_JOINTS, N_PARAMS), dtype=dtype)
    Y[..., 0, 0] = a1
    Y[..., 0, 1] = a1 * c2**2 - 2 * d1 * d2 * c2 * s2
    Y[..., 0, 2] = a1 * c23**2 - 2 * d1 * d23 * s23 * c23
    if printed_y14:
        Y[..., 0, 3] = 2 * (a1 - d1 * d2) * c23 * c2 - 2 * d1 * d23 * s23 * c2
    else:
        Y[..., 0, 3] = 2 * a1 * c23 * c2 - 2 * d1 * d2 * c23 * s2 - 2 * d1 * d23 * s23 * c2
    Y[..., 0, 4] = d23**2 * c23 + (a2 + a3) * s23
    Y[..., 0, 7] = d2**2 * c2 + a2 * s2
    Y[..., 0, 10] = d1

    Y[..., 1, 1] = d1**2 * c2 * s2
    Y[..., 1, 2] = d1**2 * c23 * s23
    Y[..., 1, 3] = ((c23 * s2 + s23 * c2) * d1**2 - (2 * d3 * d2 + d3**2) * s3
                    + (2 * a2 + a3) * c3)
    Y[..., 1, 4] = a1 * s23
    Y[..., 1, 5] = a2
    Y[..., 1, 6] = a3
    Y[..., 1, 7] = a1 * s2
    Y[..., 1, 8] = -c23
    Y[..., 1, 9] = -c2
    Y[..., 1, 11] = d2

    Y[..., 2, 2] = d1**2 * s23 * c23
    Y[..., 2, 3] = d1**2 * s23 * c2 + d2**2 * s3 + a2 * c3
    Y[..., 2, 4] = a1 * s23
    Y[..., 2, 6] = a2 + a3
    Y[..., 2, 8] = -c23
    Y[..., 2, 12] = d3
    return Y


def inverse_dynamics(q, qd, qdd, theta=None, **kwargs):
    """Joint torque ``Y(q, qd, qdd) @ theta`` required for the given motion."""
    theta = check_theta(theta)
    return regressor(q, qd, qdd, **kwargs) @ theta


def gravity(q, theta=None):
    """Gravity torque ``g(q)`` [N m]: the regressor at zero velocity/acceleration."""
    q = _as_joint(q, "q")
    zero = np.zeros(q.shape, dtype=float)
    return inverse_dynamics(q, zero, zero, theta)


def potential_energy(q, theta=None):
    """Gravitational potential [J], anchored so that ``V([0, 0, 0]) = 0``.

    ``V = -theta9 sin(q2 + q3) - theta10 sin(q2)``; its gradient is ``gravity(q)``.
    """
    q = _as_joint(q, "q")
    theta = check_theta(theta)
    return -theta[8] * np.sin(q[..., 1] + q[..., 2]) - theta[9] * np.sin(q[..., 1])


def mass_matrix(q, theta=None, check=False):
    """Inertia matrix ``D(q)`` by unit-acceleration probing of the regressor.

    Parameters
    ----------
    q : array-like, shape (..., 3)
    theta : array-like, optional
    check : bool, default False
        Verify symmetry and positive definiteness, raising
        :class:`ModelConsistencyError` otherwise.
    """
    q = _as_joint(q, "q")
    theta = check_theta(theta)
    eye = np.eye(N_JOINTS)
    qb = np.repeat(q[..., None, :], N_JOINTS, axis=-2)
    # rows of `eye` are the probes; regressor linear in qdd, gravity cancels
    Yp = regressor(qb, np.zeros(qb.shape), eye)
    Yg = regressor(q, np.zeros(q.shape), np.zeros(q.shape))
    cols = Yp @ theta - (Yg @ theta)[..., None, :]
    D = np.swapaxes(cols, -1, -2)
    if check:
        Dr = np.asarray(D.real)
        if np.max(np.abs(Dr - np.swapaxes(Dr, -1, -2)), initial=0.0) > 1e-9:
            raise ModelConsistencyError("inertia matrix is not symmetric")
        if np.any(np.linalg.eigvalsh(Dr) <= 0):
            raise ModelConsistencyError("inertia matrix is not positive definite")
    return D


def bias_torque(q, qd, theta=None):
    """``C(q, qd) qd + R(qd) + g(q)``: the torque needed at zero acceleration."""
    q, qd = _as_joint(q, "q"), _as_joint(qd, "qd")
    return inverse_dynamics(q, qd, np.zeros(np.broadcast_shapes(q.shape, qd.shape)), theta)


def damping_torque(qd, theta=None):
    """Lumped viscous torque ``diag(theta11..13) qd``."""
    theta = check_theta(theta)
    return _as_joint(qd, "qd") * theta[DAMPING_SLICE]


def kinetic_energy(q, qd, theta=None):
    """``0.5 qd^T D(q) qd`` [J]."""
    qd = _as_joint(qd, "qd")
    D = mass_matrix(q, theta)
    return 0.5 * np.einsum("...i,...ij,...j->...", qd, D, qd)


def mechanical_energy(q, qd, theta=None):
    """Kinetic plus potential energy [J]."""
    return kinetic_energy(q, qd, theta) + potential_energy(q, theta)


def _probe(q, qd, theta):
    """Gravity, bias torque and inertia matrix from a single regressor call."""
    shape = np.broadcast_shapes(q.shape, qd.shape)
    q = np.broadcast_to(q, shape)
    qb = np.repeat(q[..., None, :], N_JOINTS + 2, axis=-2)
    vel = np.zeros(qb.shape, dtype=np.result_type(qd, float))
    vel[..., -1, :] = qd
    acc = np.zeros(qb.shape)
    acc[..., :N_JOINTS, :] = np.eye(N_JOINTS)
    tau = regressor(qb, vel, acc) @ theta
    g, bias = tau[..., N_JOINTS, :], tau[..., N_JOINTS + 1, :]
    D = np.swapaxes(tau[..., :N_JOINTS, :] - g[..., None, :], -1, -2)
    return g, bias, D


def forward_dynamics(q, qd, u, theta=None, max_cond=1e12):
    """Joint accelerations ``D(q)^-1 (u - bias_torque(q, qd))``.

    Raises
    ------
    NumericalError
        If ``D(q)`` has condition number above ``max_cond``.
    """
    q, qd, u = _as_joint(q, "q"), _as_joint(qd, "qd"), _as_joint(u, "u")
    theta = check_theta(theta)
    _, bias, D = _probe(q, qd, theta)
    if max_cond is not None and not np.iscomplexobj(D):
        if np.any(np.linalg.cond(D) > max_cond):
            raise NumericalError("inertia matrix is ill-conditioned")
    rhs = u - bias
    return np.linalg.solve(D, rhs[..., None])[..., 0]
