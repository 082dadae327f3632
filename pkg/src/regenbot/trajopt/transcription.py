"""Direct-collocation transcription of the regeneration-maximizing OCP.

The decision vector stacks ``(q_i, qd_i, tau_i)`` for nodes ``i = 0..N``
(so ``9 (N + 1)`` entries). Equality constraints are the ``6 N`` dynamic
defects followed by 12 boundary rows; the only inequalities are the box
bounds on ``tau``.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .._validation import check_joint_vector, check_positive
from ..actuator import V_CAP_NOMINAL, ActuatorBank
from ..exceptions import InputDomainError
from ..robot_model import POSE_A, POSE_B, check_theta, forward_dynamics, mass_matrix

NX = 9  # per-node block: q(3), qd(3), tau(3)
_Q, _QD, _TAU = slice(0, 3), slice(3, 6), slice(6, 9)

DEFECT_SCHEMES = ("backward_euler", "trapezoid")
QUADRATURES = ("trapezoid", "rectangle")


@dataclass(frozen=True)
class BoundaryConditions:
    q_start: np.ndarray = field(default_factory=POSE_A.copy)
    qd_start: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q_end: np.ndarray = field(default_factory=POSE_B.copy)
    qd_end: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("q_start", "qd_start", "q_end", "qd_end"):
            object.__setattr__(
                self, name, check_joint_vector(getattr(self, name), name, allow_batch=False))

    def reversed(self):
        """Same motion in the opposite direction (e.g. B -> A from A -> B)."""
        return BoundaryConditions(self.q_end, self.qd_end, self.q_start, self.qd_start)


@dataclass(frozen=True)
class CollocationProblem:
    """Discretized optimal control problem.

    Parameters
    ----------
    N : int
        Number of intervals; the grid has ``N + 1`` nodes.
    horizon : float
        Motion duration [s].
    boundary : BoundaryConditions
    theta : array-like, optional
        Dynamic parameters (defaults to the identified PUMA values).
    bank : ActuatorBank, optional
    v_cap : float
        Capacitor voltage assumed constant while optimizing [V].
    tau_lower, tau_upper : array-like, optional
        Explicit torque limits; default ``-+k v_cap``.
    defects : {"backward_euler", "trapezoid"}
    quadrature : {"trapezoid", "rectangle"}
        Rule used to integrate the regenerated power.
    """

    N: int = 100
    horizon: float = 2.0
    boundary: BoundaryConditions = field(default_factory=BoundaryConditions)
    theta: np.ndarray = None
    bank: ActuatorBank = None
    v_cap: float = V_CAP_NOMINAL
    tau_lower: np.ndarray = None
    tau_upper: np.ndarray = None
    defects: str = "backward_euler"
    quadrature: str = "trapezoid"

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 10:
            raise InputDomainError(f"N must be an integer >= 10, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        check_positive(self.horizon, "horizon")
        check_positive(self.v_cap, "v_cap")
        theta = check_theta(self.theta)
        object.__setattr__(self, "theta", theta)
        if self.bank is None:
            object.__setattr__(self, "bank", ActuatorBank.default(theta))
        lo, hi = self.bank.torque_bounds(self.v_cap)
        lo = lo if self.tau_lower is None else check_joint_vector(self.tau_lower, "tau_lower")
        hi = hi if self.tau_upper is None else check_joint_vector(self.tau_upper, "tau_upper")
        if not (np.all(lo < 0) and np.all(hi > 0)):
            raise InputDomainError("torque bounds must satisfy lower < 0 < upper per joint")
        object.__setattr__(self, "tau_lower", np.asarray(lo, dtype=float))
        object.__setattr__(self, "tau_upper", np.asarray(hi, dtype=float))
        if self.defects not in DEFECT_SCHEMES:
            raise InputDomainError(f"defects must be one of {DEFECT_SCHEMES}")
        if self.quadrature not in QUADRATURES:
            raise InputDomainError(f"quadrature must be one of {QUADRATURES}")

    @property
    def h(self):
        return self.horizon / self.N

    @property
    def t(self):
        return np.linspace(0.0, self.horizon, self.N + 1)

    def with_(self, **changes):
        return replace(self, **changes)


class Transcription:
    """The NLP obtained from a :class:`CollocationProblem`.

    ``objective`` returns ``-J`` (minimization form); ``regenerated`` returns
    ``J`` itself. Constraint Jacobians are exact up to round-off: the
    torque block is ``D^-1`` and the state blocks come from complex-step
    differentiation of the forward dynamics.
    """

    def __init__(self, problem):
        self.problem = problem
        p = problem
        self.N, self.h = p.N, p.h
        self.n_nodes = p.N + 1
        self.n_var = NX * self.n_nodes
        self.n_defect = 6 * p.N
        self.n_boundary = 12
        self.n_eq = self.n_defect + self.n_boundary
        self.loss = p.bank.loss_coeff
        w = np.full(self.n_nodes, self.h)
        if p.quadrature == "trapezoid":
            w[0] = w[-1] = 0.5 * self.h
        else:
            w[0] = 0.0
        self.weights = w
        self._rows, self._cols = self._jac_indices()
        self._pattern = sp.csr_matrix(
            (np.ones(self._rows.size), (self._rows, self._cols)),
            shape=(self.n_eq, self.n_var)).astype(bool)

    # ---- layout ------------------------------------------------------------
    def unpack(self, x):
        X = np.asarray(x, dtype=float).reshape(self.n_nodes, NX)
        return X[:, _Q], X[:, _QD], X[:, _TAU]

    def pack(self, q, qd, tau):
        return np.hstack([q, qd, tau]).ravel()

    def bounds(self, fix_boundary=False):
        """Box bounds ``(lb, ub)``; optionally pin the boundary states."""
        p = self.problem
        lb = np.full((self.n_nodes, NX), -np.inf)
        ub = np.full((self.n_nodes, NX), np.inf)
        lb[:, _TAU], ub[:, _TAU] = p.tau_lower, p.tau_upper
        if fix_boundary:
            b = p.boundary
            for row, q, qd in ((0, b.q_start, b.qd_start), (-1, b.q_end, b.qd_end)):
                lb[row, _Q] = ub[row, _Q] = q
                lb[row, _QD] = ub[row, _QD] = qd
        return lb.ravel(), ub.ravel()

    # ---- objective -----------------------------------------------------------
    def power(self, x):
        """Per-node, per-joint regen power, shape (N + 1, 3)."""
        _, qd, tau = self.unpack(x)
        return tau * qd - self.loss * tau**2

    def regenerated(self, x):
        """Discretized ``J``: net energy into the capacitor [J]."""
        return float(self.weights @ self.power(x).sum(axis=1))

    def objective(self, x):
        return -self.regenerated(x)

    def objective_grad(self, x):
        _, qd, tau = self.unpack(x)
        g = np.zeros((self.n_nodes, NX))
        w = self.weights[:, None]
        g[:, _QD] = -w * tau
        g[:, _TAU] = -w * (qd - 2 * self.loss * tau)
        return g.ravel()

    # ---- dynamics ------------------------------------------------------------
    def _accel(self, q, qd, tau):
        return forward_dynamics(q, qd, tau, self.problem.theta, max_cond=None)

    def _accel_jac(self, q, qd, tau):
        """Accelerations and their Jacobians w.r.t. q, qd, tau.

        Inputs have shape ``(..., 3)``; each Jacobian is ``(..., 3, 3)``.
        """
        theta = self.problem.theta
        hcs = 1e-30
        lead = (1,) * (q.ndim - 1)
        eye = np.eye(3)
        zero = np.zeros((3, 3))
        # the 6 complex-step directions go on a new leading axis
        dq = (np.concatenate([eye, zero]) * (1j * hcs)).reshape((6,) + lead + (3,))
        dqd = (np.concatenate([zero, eye]) * (1j * hcs)).reshape((6,) + lead + (3,))
        fc = forward_dynamics(q[None] + dq, qd[None] + dqd,
                              np.broadcast_to(tau, (6,) + tau.shape), theta, max_cond=None)
        f = fc[0].real
        jac = np.moveaxis(fc.imag / hcs, 0, -1)  # (..., 3 out, 6 in)
        Dinv = np.linalg.inv(mass_matrix(q, theta))
        return f, jac[..., :3], jac[..., 3:], Dinv

    def _weighted_accel_hessian(self, q, qd, tau, w):
        """Per-node Hessian of ``w . f(q, qd, tau)``, shape (n, 9, 9).

        Central differences of the (complex-step exact) gradient.
        """
        x = np.concatenate([q, qd, tau], axis=-1)  # (n, 9)
        step = 1e-5 * (1.0 + np.abs(x))
        pert = np.eye(NX)[:, None, :] * step[None]  # (9, n, 9)
        X = np.concatenate([x[None] + pert, x[None] - pert])  # (18, n, 9)
        _, fq, fqd, Dinv = self._accel_jac(X[..., _Q], X[..., _QD], X[..., _TAU])
        G = np.einsum("...a,...ab->...b", w, np.concatenate([fq, fqd, Dinv], axis=-1))
        H = (G[:NX] - G[NX:]) / (2 * step.T[:, :, None])  # (9 dir, n, 9)
        H = np.moveaxis(H, 0, -1)  # (n, 9 grad, 9 dir)
        return 0.5 * (H + np.swapaxes(H, -1, -2))

    def objective_hessian(self):
        """Constant Hessian of ``-J`` (sparse)."""
        w = self.weights
        n = self.n_nodes
        base = NX * np.arange(n)
        rows, cols, vals = [], [], []
        for j in range(3):
            it, iv = base + _TAU.start + j, base + _QD.start + j
            rows += [it, it, iv]
            cols += [it, iv, it]
            vals += [2 * w * self.loss[j], -w, -w]
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n_var, self.n_var))

    def lagrangian_hessian(self, x, y, obj_factor=1.0):
        """Hessian of ``obj_factor * objective(x) - y . constraints(x)`` (sparse)."""
        q, qd, tau = self.unpack(x)
        y = np.asarray(y, dtype=float)
        ydv = y[:self.n_defect].reshape(self.N, 6)[:, 3:]
        h = self.h
        wn = np.zeros((self.n_nodes, 3))
        if self.problem.defects == "backward_euler":
            wn[1:] = h * ydv
        else:
            wn[1:] += 0.5 * h * ydv
            wn[:-1] += 0.5 * h * ydv
        active = np.flatnonzero(np.any(wn != 0, axis=1))
        H = obj_factor * self.objective_hessian()
        if active.size:
            B = self._weighted_accel_hessian(q[active], qd[active], tau[active], wn[active])
            idx = NX * active[:, None] + np.arange(NX)
            rr = np.broadcast_to(idx[:, :, None], B.shape).ravel()
            cc = np.broadcast_to(idx[:, None, :], B.shape).ravel()
            H = H + sp.csr_matrix((B.ravel(), (rr, cc)), shape=H.shape)
        return H

    def constraints(self, x):
        """Equality residuals: ``6 N`` defects then 12 boundary rows."""
        q, qd, tau = self.unpack(x)
        h = self.h
        if self.problem.defects == "backward_euler":
            f = self._accel(q[1:], qd[1:], tau[1:])
            dq = q[1:] - q[:-1] - h * qd[1:]
            dv = qd[1:] - qd[:-1] - h * f
        else:
            f = self._accel(q, qd, tau)
            dq = q[1:] - q[:-1] - 0.5 * h * (qd[1:] + qd[:-1])
            dv = qd[1:] - qd[:-1] - 0.5 * h * (f[1:] + f[:-1])
        b = self.problem.boundary
        bc = np.concatenate([q[0] - b.q_start, qd[0] - b.qd_start,
                             q[-1] - b.q_end, qd[-1] - b.qd_end])
        return np.concatenate([np.hstack([dq, dv]).ravel(), bc])

    def sparsity(self):
        """Boolean CSR sparsity pattern of the constraint Jacobian."""
        return self._pattern

    def _jac_indices(self):
        N = self.N
        seg = np.arange(N)
        r_dq = 6 * seg[:, None] + np.arange(3)          # (N, 3)
        r_dv = r_dq + 3
        node = lambda i: NX * i  # noqa: E731
        R, C = [], []

        def block(rows, col0, dense):
            # rows: (N, 3); col0: (N,) start column; dense: 3x3 block or diagonal
            if dense:
                rr = np.repeat(rows[:, :, None], 3, axis=2)
                cc = np.broadcast_to(col0[:, None, None] + np.arange(3), rr.shape)
            else:
                rr = rows
                cc = col0[:, None] + np.arange(3)
            R.append(rr.ravel())
            C.append(cc.ravel())

        k, i = seg + 1, seg
        trap = self.problem.defects == "trapezoid"
        block(r_dq, node(k) + _Q.start, False)
        block(r_dq, node(i) + _Q.start, False)
        block(r_dq, node(k) + _QD.start, False)
        if trap:
            block(r_dq, node(i) + _QD.start, False)
        block(r_dv, node(k) + _QD.start, True)
        block(r_dv, node(i) + _QD.start, True if trap else False)
        block(r_dv, node(k) + _Q.start, True)
        block(r_dv, node(k) + _TAU.start, True)
        if trap:
            block(r_dv, node(i) + _Q.start, True)
            block(r_dv, node(i) + _TAU.start, True)
        nb = self.n_defect
        bc_cols = np.concatenate([np.arange(6), node(N) + np.arange(6)])
        R.append(nb + np.arange(12))
        C.append(bc_cols)
        return np.concatenate(R), np.concatenate(C)

    def jacobian(self, x):
        """Sparse (CSR) constraint Jacobian."""
        q, qd, tau = self.unpack(x)
        h, N = self.h, self.N
        eye = np.broadcast_to(np.eye(3), (N, 3, 3))
        diag = lambda v: np.broadcast_to(v, (N, 3))  # noqa: E731
        vals = []
        if self.problem.defects == "backward_euler":
            _, fq, fqd, Dinv = self._accel_jac(q[1:], qd[1:], tau[1:])
            vals += [diag(1.0), diag(-1.0), diag(-h)]
            vals += [eye - h * fqd, diag(-1.0), -h * fq, -h * Dinv]
        else:
            _, fq, fqd, Dinv = self._accel_jac(q, qd, tau)
            hh = 0.5 * h
            vals += [diag(1.0), diag(-1.0), diag(-hh), diag(-hh)]
            vals += [eye - hh * fqd[1:], -eye - hh * fqd[:-1], -hh * fq[1:],
                     -hh * Dinv[1:], -hh * fq[:-1], -hh * Dinv[:-1]]
        vals.append(np.ones(12))
        data = np.concatenate([np.ravel(v) for v in vals])
        return sp.csr_matrix((data, (self._rows, self._cols)), shape=(self.n_eq, self.n_var))

    # ---- utilities -----------------------------------------------------------
    def rollout(self, q0, qd0, tau):
        """Integrate the defect scheme forward (backward Euler only).

        The implicit step is solved by Newton iteration, so the returned
        states make every defect vanish to round-off.
        """
        if self.problem.defects != "backward_euler":
            raise InputDomainError("rollout is implemented for backward Euler defects")
        tau = np.asarray(tau, dtype=float).reshape(self.n_nodes, 3)
        q = np.zeros((self.n_nodes, 3))
        qd = np.zeros((self.n_nodes, 3))
        q[0], qd[0] = q0, qd0
        h = self.h
        for i in range(self.N):
            v = qd[i].copy()
            for _ in range(50):
                qn = q[i] + h * v
                f, fq, fqd, _ = self._accel_jac(qn[None], v[None], tau[i + 1][None])
                res = v - qd[i] - h * f[0]
                J = np.eye(3) - h * (fqd[0] + h * fq[0])
                step = np.linalg.solve(J, res)
                v -= step
                if np.max(np.abs(step)) < 1e-15 * (1 + np.max(np.abs(v))):
                    break
            qd[i + 1] = v
            q[i + 1] = q[i] + h * v
        return q, qd


def transcribe(problem):
    """Build the NLP for ``problem`` (see :class:`Transcription`)."""
    return Transcription(problem)
