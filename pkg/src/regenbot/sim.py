"""Closed-loop simulation of semi-active virtual control (SVC).

A robust passivity-based law computes the virtual torque ``tau_d`` for the
augmented model; each driver's voltage ratio is set by virtual matching
against the live capacitor voltage, and the robot plus an ideal capacitor
are integrated with fixed-step RK4 under zero-order hold.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ._validation import check_joint_vector, check_positive
from .actuator import (ActuatorBank, CapacitorState, applied_torque, capacitor_side_power,
                       duty_ratio, joule_loss, regen_power)
from .exceptions import DepletedStorageError, InputDomainError, NumericalError
from .robot_model import DAMPING_SLICE, _probe, check_theta, inverse_dynamics, regressor

log = logging.getLogger(__name__)

_DAMP_ROWS = np.arange(3)
_DAMP_COLS = np.arange(10, 13)


# --------------------------------------------------------------------------- references
class Reference:
    """Desired joint trajectory ``(q_d, qd_d, qdd_d)`` on ``[t0, t1]``.

    Outside its interval a reference holds its end positions at rest.
    """

    def __init__(self, t, q_fn, qd_fn, qdd_fn):
        self.t0, self.t1 = float(t[0]), float(t[-1])
        self.grid = np.asarray(t, dtype=float)
        self._q, self._qd, self._qdd = q_fn, qd_fn, qdd_fn

    @property
    def horizon(self):
        return self.t1 - self.t0

    @classmethod
    def from_solution(cls, sol):
        """Smooth reference through a collocation solution's nodes.

        Accelerations at the nodes are backward differences of the node
        velocities (the backward-Euler acceleration). A velocity spline
        through the nodes, clamped to those end accelerations, is the
        reference velocity; its derivative and antiderivative give the
        acceleration and position, so the three are mutually consistent.
        The small end-point drift of the integrated position is removed
        with a smoothstep correction.
        """
        t, q, qd = np.asarray(sol.t), np.asarray(sol.q), np.asarray(sol.qd)
        h = np.diff(t)[:, None]
        acc = np.empty_like(qd)
        acc[1:] = np.diff(qd, axis=0) / h
        acc[0] = acc[1]
        qd_s = CubicSpline(t, qd, bc_type=((1, acc[0]), (1, acc[-1])))
        qdd_s = qd_s.derivative()
        pos = qd_s.antiderivative()
        T0, T = t[0], t[-1] - t[0]
        drift = q[-1] - (q[0] + pos(t[-1]))

        def blend(tt):
            s = (np.asarray(tt) - T0) / T
            return s**3 * (10 - 15 * s + 6 * s**2), s**2 * (30 - 60 * s + 30 * s**2) / T, \
                s * (60 - 180 * s + 120 * s**2) / T**2

        def q_fn(tt):
            return q[0] + pos(tt) + blend(tt)[0] * drift

        def qd_fn(tt):
            return qd_s(tt) + blend(tt)[1] * drift

        def qdd_fn(tt):
            return qdd_s(tt) + blend(tt)[2] * drift

        ref = cls(t, q_fn, qd_fn, qdd_fn)
        ref.endpoint_drift = drift
        return ref

    @classmethod
    def stationary(cls, q, horizon):
        q = check_joint_vector(q, "q", allow_batch=False)
        zero = np.zeros(3)
        return cls(np.array([0.0, horizon]), lambda t: q.copy(), lambda t: zero.copy(),
                   lambda t: zero.copy())

    def __call__(self, t):
        """Return ``(q_d, qd_d, qdd_d)`` at time ``t``."""
        if t <= self.t0:
            return np.asarray(self._q(self.t0)), np.zeros(3), np.zeros(3)
        if t >= self.t1:
            return np.asarray(self._q(self.t1)), np.zeros(3), np.zeros(3)
        return np.asarray(self._q(t)), np.asarray(self._qd(t)), np.asarray(self._qdd(t))

    def sample(self, t):
        """Vectorized evaluation on a grid, returns three ``(n, 3)`` arrays."""
        out = [self(tk) for tk in np.asarray(t, dtype=float)]
        return tuple(np.array(v) for v in zip(*out))

    def then(self, other):
        """Play ``self`` and then ``other`` (shifted to start at ``self.t1``)."""
        return _Sequence(self, other)


class _Sequence(Reference):
    def __init__(self, first, second):
        self.first, self.second = first, second
        self.offset = first.t1 - second.t0
        self.t0 = first.t0
        self.t1 = second.t1 + self.offset
        self.grid = np.concatenate([first.grid, second.grid[1:] + self.offset])

    def __call__(self, t):
        if t <= self.first.t1:
            return self.first(t)
        return self.second(t - self.offset)


class NeighborReference(Reference):
    """A reference plus a signed Gaussian bump ``s eps exp(-(t-mu)^2 / (2 sigma^2))``."""

    def __init__(self, base, eps, mu, sigma, sign):
        self.base = base
        self.eps = np.broadcast_to(np.asarray(eps, dtype=float), (3,)).copy()
        self.mu, self.sigma, self.sign = float(mu), float(sigma), float(np.sign(sign) or 1.0)
        self.t0, self.t1, self.grid = base.t0, base.t1, base.grid

    def bump(self, t):
        z = (t - self.mu) / self.sigma
        g = np.exp(-0.5 * z**2)
        dg = -z / self.sigma * g
        ddg = (z**2 - 1) / self.sigma**2 * g
        s = self.sign * self.eps
        return s * g, s * dg, s * ddg

    def __call__(self, t):
        t = min(max(t, self.t0), self.t1)
        q, qd, qdd = self.base._q(t), self.base._qd(t), self.base._qdd(t)
        if t in (self.base.t0, self.base.t1):
            qd, qdd = np.zeros(3), np.zeros(3)
        b, db, ddb = self.bump(t)
        return np.asarray(q) + b, np.asarray(qd) + db, np.asarray(qdd) + ddb


def neighboring_trajectory(reference, epsilon_frac=0.2, mu=1.0, sigma=None, sign=+1,
                           q_nodes=None):
    """Perturb ``reference`` by a Gaussian bump on every joint.

    Parameters
    ----------
    reference : Reference
    epsilon_frac : float
        Bump height as a fraction of ``max |q|`` per joint over the reference.
    mu, sigma : float
        Bump centre and width [s]; ``sigma`` defaults to ``mu / 3``.
    sign : {+1, -1}
    q_nodes : ndarray, optional
        Positions used for ``max |q|`` (defaults to sampling the reference).
    """
    if sigma is None:
        sigma = mu / 3.0
    check_positive(sigma, "sigma")
    if q_nodes is None:
        q_nodes, _, _ = reference.sample(np.linspace(reference.t0, reference.t1, 201))
    eps = epsilon_frac * np.max(np.abs(q_nodes), axis=0)
    return NeighborReference(reference, eps, mu, sigma, sign)


# --------------------------------------------------------------------------- controller
@dataclass
class ControllerGains:
    """Robust passivity-based controller parameters.

    ``K`` [N m s] and ``Lambda`` [1/s] are the diagonals; ``rho`` bounds
    ``|theta - theta0|``; ``epsilon`` is the boundary-layer width.
    """

    K: np.ndarray = field(default_factory=lambda: np.array([40.0, 80.0, 40.0]))
    Lambda: np.ndarray = field(default_factory=lambda: np.full(3, 10.0))
    rho: float = None
    epsilon: float = 10.0
    theta0: np.ndarray = None

    def __post_init__(self):
        self.theta0 = check_theta(self.theta0)
        self.K = np.broadcast_to(np.asarray(self.K, dtype=float), (3,)).copy()
        self.Lambda = np.broadcast_to(np.asarray(self.Lambda, dtype=float), (3,)).copy()
        if np.any(self.K <= 0) or np.any(self.Lambda <= 0):
            raise InputDomainError("K and Lambda must have strictly positive diagonals")
        if self.rho is None:
            self.rho = 0.1 * float(np.linalg.norm(self.theta0))
        if self.rho < 0:
            raise InputDomainError("rho must be >= 0")
        check_positive(self.epsilon, "epsilon")


def _velocity_regressor(q, v):
    """Quadratic-in-velocity part of the regressor (Coriolis/centrifugal only)."""
    zero = np.zeros(3)
    Y = regressor(q, v, zero) - regressor(q, zero, zero)
    Y[..., _DAMP_ROWS, _DAMP_COLS] = 0.0
    return Y


def control_regressor(q, qdot, a, nu):
    """``Y_a`` with ``Y_a theta = D(q) a + C(q, qdot) nu + F nu + g(q)``.

    ``C(q, qdot) nu`` is recovered from the quadratic form ``c(v) = C(q, v) v``
    by polarization, ``(c(qdot + nu) - c(qdot - nu)) / 4``, which is the
    Christoffel-symbol ``C`` (so ``Ddot - 2C`` is skew-symmetric).
    """
    Y = regressor(q, np.zeros(3), a)
    Y += 0.25 * (_velocity_regressor(q, qdot + nu) - _velocity_regressor(q, qdot - nu))
    Y[..., _DAMP_ROWS, _DAMP_COLS] = nu
    return Y


def robust_control(q, qdot, q_des, qd_des, qdd_des, gains):
    """Virtual torque of the robust passivity-based law.

    Returns
    -------
    tau_d : ndarray, shape (3,)
    info : dict
        ``r`` (sliding variable), ``delta_theta`` and ``Ya``.
    """
    q, qdot = np.asarray(q, float), np.asarray(qdot, float)
    q_err = q - q_des
    nu = qd_des - gains.Lambda * q_err
    a = qdd_des - gains.Lambda * (qdot - qd_des)
    r = qdot - nu
    Ya = control_regressor(q, qdot, a, nu)
    w = Ya.T @ r
    nw = float(np.linalg.norm(w))
    if nw > gains.epsilon:
        dtheta = -gains.rho * w / nw
    else:
        dtheta = -(gains.rho / gains.epsilon) * w
    tau_d = Ya @ (gains.theta0 + dtheta) - gains.K * r
    return tau_d, {"r": r, "delta_theta": dtheta, "Ya": Ya}


# --------------------------------------------------------------------------- simulation
TRACE_COLUMNS = (
    ["t"] + [f"qd_ref{j}" for j in (1, 2, 3)] + [f"q{j}" for j in (1, 2, 3)]
    + [f"qdot{j}" for j in (1, 2, 3)] + [f"tau{j}" for j in (1, 2, 3)]
    + [f"r{j}" for j in (1, 2, 3)] + [f"sat{j}" for j in (1, 2, 3)]
    + [f"p_motor{j}" for j in (1, 2, 3)] + ["v_cap", "i_cap"]
)


@dataclass
class SimTrace:
    """Per-step record of a closed-loop run.

    ``p_motor`` is motor-side power, positive when the driver delivers
    energy to the joint (consumption). ``i_cap`` is positive when charging.
    The ``cum_*`` arrays are running integrals carried by the integrator
    itself (regen power per joint, capacitor-side power per joint,
    mechanical and Joule losses), so energy sums close to RK4 accuracy.
    """

    t: np.ndarray
    q_ref: np.ndarray
    qd_ref: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    tau_d: np.ndarray
    tau_applied: np.ndarray
    r: np.ndarray
    saturated: np.ndarray
    p_motor: np.ndarray
    v_cap: np.ndarray
    i_cap: np.ndarray
    capacitance: float
    bank: ActuatorBank
    theta: np.ndarray
    status: str = "ok"
    cum_regen: np.ndarray = None
    cum_cap: np.ndarray = None
    cum_mech_loss: np.ndarray = None
    cum_joule: np.ndarray = None

    def __len__(self):
        return self.t.size

    @property
    def step(self):
        return float(self.t[1] - self.t[0])

    def tracking_error(self):
        return np.abs(self.q - self.q_ref)

    def chatter(self):
        """Total variation of the virtual torque per joint [N m]."""
        return np.sum(np.abs(np.diff(self.tau_d, axis=0)), axis=0)

    def slice(self, start, stop):
        """Sub-trace on sample indices ``[start, stop]`` inclusive."""
        sl = slice(start, stop + 1)
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for k, v in kw.items():
            if isinstance(v, np.ndarray) and v.shape[:1] == self.t.shape and k != "theta":
                kw[k] = v[sl]
        return SimTrace(**kw)

    def to_array(self):
        return np.column_stack([self.t, self.q_ref, self.q, self.qdot, self.tau_d, self.r,
                                self.saturated.astype(float), self.p_motor, self.v_cap,
                                self.i_cap])

    def summary(self):
        err = self.tracking_error()
        return {
            "status": self.status,
            "samples": int(self.t.size),
            "step": self.step,
            "duration": float(self.t[-1] - self.t[0]),
            "max_tracking_error": err.max(axis=0).tolist(),
            "final_tracking_error": err[-1].tolist(),
            "saturated_steps": self.saturated.sum(axis=0).astype(int).tolist(),
            "chatter_total_variation": self.chatter().tolist(),
            "v_start": float(self.v_cap[0]),
            "v_end": float(self.v_cap[-1]),
            "v_min": float(self.v_cap.min()),
            "v_max": float(self.v_cap.max()),
        }


def _rhs(y, r, k, bank, theta, c_cap, eta, b_mech):
    q, qd, v = y[0:3], y[3:6], y[6]
    u = k * r * v
    _, bias, D = _probe(q, qd, theta)
    qdd = np.linalg.solve(D, u - bias)
    p = regen_power(u, qd, bank)
    p_cap = capacitor_side_power(p, eta)
    out = np.empty_like(y)
    out[0:3] = qd
    out[3:6] = qdd
    out[6] = p_cap.sum() / (c_cap * v)
    out[7:10] = p
    out[10:13] = p_cap
    out[13:16] = b_mech * qd**2
    out[16:19] = joule_loss(r, qd, bank, v)
    return out


def simulate(reference, gains=None, bank=None, capacitor=None, step=1e-3, theta=None,
             q0=None, qd0=None, v_min=0.1, duration=None):
    """Run the SVC loop along ``reference``.

    Parameters
    ----------
    reference : Reference or CollocationSolution
    gains : ControllerGains, optional
        Controller parameters; ``gains.theta0`` is the controller's model.
    bank : ActuatorBank, optional
    capacitor : CapacitorState, optional
        Initial voltage and capacitance (defaults 27 V, 165 F).
    step : float
        Integration step and controller period [s]; must divide the duration.
    theta : array-like, optional
        Parameters of the simulated plant (defaults to ``gains.theta0``).
    q0, qd0 : array-like, optional
        Initial state (defaults to the reference at its start).
    v_min : float
        Voltage at which operation stops.

    Raises
    ------
    DepletedStorageError
        If the capacitor voltage falls to ``v_min``; ``err.partial`` holds
        the trace so far.
    NumericalError
        On a non-finite state.
    """
    if not isinstance(reference, Reference):
        reference = Reference.from_solution(reference)
    gains = ControllerGains() if gains is None else gains
    theta = gains.theta0 if theta is None else check_theta(theta)
    bank = ActuatorBank.default(gains.theta0) if bank is None else bank
    cap = CapacitorState() if capacitor is None else capacitor
    check_positive(step, "step")
    T = reference.horizon if duration is None else float(duration)
    n = int(round(T / step))
    if n < 1 or abs(n * step - T) > 1e-9 * max(1.0, T):
        raise InputDomainError(f"step {step} does not divide the duration {T}")

    k, eta = bank.k, bank.efficiency
    b_mech = theta[DAMPING_SLICE] - bank.a * bank.k
    q_start, _, _ = reference(reference.t0)
    y = np.zeros(19)
    y[0:3] = q_start if q0 is None else check_joint_vector(q0, "q0", allow_batch=False)
    y[3:6] = reference(reference.t0)[1] if qd0 is None else check_joint_vector(qd0, "qd0")
    y[6] = cap.v

    t = reference.t0 + step * np.arange(n + 1)
    rec = {name: np.zeros((n + 1, 3)) for name in
           ("q_ref", "qd_ref", "q", "qdot", "tau_d", "tau_applied", "r", "p_motor",
            "cum_regen", "cum_cap", "cum_mech_loss", "cum_joule")}
    sat = np.zeros((n + 1, 3), dtype=bool)
    v_rec = np.zeros(n + 1)
    i_rec = np.zeros(n + 1)

    def build(last, status):
        sl = slice(0, last + 1)
        return SimTrace(
            t=t[sl], q_ref=rec["q_ref"][sl], qd_ref=rec["qd_ref"][sl], q=rec["q"][sl],
            qdot=rec["qdot"][sl], tau_d=rec["tau_d"][sl], tau_applied=rec["tau_applied"][sl],
            r=rec["r"][sl], saturated=sat[sl], p_motor=rec["p_motor"][sl], v_cap=v_rec[sl],
            i_cap=i_rec[sl], capacitance=cap.c, bank=bank, theta=theta, status=status,
            cum_regen=rec["cum_regen"][sl], cum_cap=rec["cum_cap"][sl],
            cum_mech_loss=rec["cum_mech_loss"][sl].sum(axis=1),
            cum_joule=rec["cum_joule"][sl].sum(axis=1))

    args = (k, bank, theta, cap.c, eta, b_mech)
    for i in range(n + 1):
        q, qd, v = y[0:3], y[3:6], y[6]
        if not np.all(np.isfinite(y)):
            raise NumericalError(f"non-finite state at t={t[i]:.6g}")
        if v <= v_min:
            partial = build(i - 1, "depleted") if i > 0 else None
            raise DepletedStorageError(
                f"capacitor voltage {v:.4g} V reached the {v_min} V threshold at t={t[i]:.6g}",
                partial)
        qr, qdr, qddr = reference(t[i])
        tau_d, _ = robust_control(q, qd, qr, qdr, qddr, gains)
        r, s = duty_ratio(tau_d, bank, v)
        u = applied_torque(r, bank, v)
        p = regen_power(u, qd, bank)
        rec["q_ref"][i], rec["qd_ref"][i], rec["q"][i], rec["qdot"][i] = qr, qdr, q, qd
        rec["tau_d"][i], rec["tau_applied"][i], rec["r"][i] = tau_d, u, r
        rec["p_motor"][i] = -p
        rec["cum_regen"][i], rec["cum_cap"][i] = y[7:10], y[10:13]
        rec["cum_mech_loss"][i], rec["cum_joule"][i] = y[13:16], y[16:19]
        sat[i] = s
        v_rec[i] = v
        i_rec[i] = capacitor_side_power(p, eta).sum() / v
        if i == n:
            break
        k1 = _rhs(y, r, *args)
        k2 = _rhs(y + 0.5 * step * k1, r, *args)
        k3 = _rhs(y + 0.5 * step * k2, r, *args)
        k4 = _rhs(y + step * k3, r, *args)
        y = y + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return build(n, "ok")


def reference_regeneration(reference, bank=None, theta=None, n=2001):
    """Open-loop regenerated energy along a reference with inverse-dynamics torques.

    Returns ``(total, per_joint)`` with regeneration positive.
    """
    theta = check_theta(theta)
    bank = ActuatorBank.default(theta) if bank is None else bank
    t = np.linspace(reference.t0, reference.t1, n)
    q, qd, qdd = reference.sample(t)
    tau = inverse_dynamics(q, qd, qdd, theta)
    per = np.trapezoid(regen_power(tau, qd, bank), t, axis=0)
    return float(per.sum()), per

