"""Estimator-style front end for the trajectory optimizer."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .energy_audit import audit
from .robot_model import POSE_A, POSE_B
from .trajopt import BoundaryConditions, CollocationProblem, solve


class EnergyOptimalTrajectory(BaseEstimator):
    """Plan the joint trajectory that maximizes energy returned to storage.

    Parameters
    ----------
    N : int, default=100
        Collocation intervals.
    horizon : float, default=2.0
        Motion duration [s].
    starts : int, default=8
        Random restarts in addition to the deterministic one.
    random_state : int, default=0
    theta : array-like of shape (13,), optional
    bank : ActuatorBank, optional
    v_cap : float, default=27.0
    tol, kkt_tol : float
        Feasibility and stationarity tolerances.
    defects, quadrature : str
        Transcription options, see :class:`CollocationProblem`.

    Attributes
    ----------
    solution_ : CollocationSolution
    objective_ : float
        Regenerated energy [J] (positive = net regeneration).
    ledger_ : EnergyLedger
    t_, q_, qd_, tau_ : ndarray
    n_iter_ : int

    Examples
    --------
    >>> est = EnergyOptimalTrajectory(N=50, starts=0).fit([[0, -1.5708, 0], [1.0472, 0, 0.7854]])
    >>> est.objective_ > 0
    True
    """

    def __init__(self, N=100, horizon=2.0, starts=8, random_state=0, theta=None, bank=None,
                 v_cap=27.0, tol=1e-6, kkt_tol=1e-5, defects="backward_euler",
                 quadrature="trapezoid"):
        self.N = N
        self.horizon = horizon
        self.starts = starts
        self.random_state = random_state
        self.theta = theta
        self.bank = bank
        self.v_cap = v_cap
        self.tol = tol
        self.kkt_tol = kkt_tol
        self.defects = defects
        self.quadrature = quadrature

    def _problem(self, X):
        if X is None:
            X = np.vstack([POSE_A, POSE_B])
        X = check_array(X, ensure_min_samples=2)
        if X.shape not in ((2, 3), (4, 3)):
            raise ValueError("X must be [q_start, q_end] or [q_start, q_end, qd_start, qd_end]")
        qd0, qd1 = (X[2], X[3]) if X.shape[0] == 4 else (np.zeros(3), np.zeros(3))
        bc = BoundaryConditions(q_start=X[0], qd_start=qd0, q_end=X[1], qd_end=qd1)
        return CollocationProblem(N=self.N, horizon=self.horizon, boundary=bc, theta=self.theta,
                                  bank=self.bank, v_cap=self.v_cap, defects=self.defects,
                                  quadrature=self.quadrature)

    def fit(self, X=None, y=None, x0=None):
        """Solve for the boundary poses in ``X``.

        Parameters
        ----------
        X : array-like of shape (2, 3) or (4, 3), optional
            Start and end positions, optionally followed by start and end
            velocities (zero by default). Defaults to the A->B motion.
        y : ignored
        x0 : ndarray, optional
            Warm start for the deterministic run.
        """
        problem = self._problem(X)
        sol = solve(problem, starts=self.starts, seed=self.random_state, tol=self.tol,
                    kkt_tol=self.kkt_tol, x0=x0)
        self.problem_ = problem
        self.solution_ = sol
        self.objective_ = sol.objective
        self.ledger_ = audit(sol, theta=problem.theta, bank=problem.bank)
        self.t_, self.q_, self.qd_, self.tau_ = sol.t, sol.q, sol.qd, sol.tau
        self.n_iter_ = sol.iterations
        return self

    def predict(self, t):
        """Joint positions at times ``t`` (linear between nodes)."""
        check_is_fitted(self, "solution_")
        t = np.asarray(t, dtype=float)
        return np.column_stack([np.interp(t, self.t_, self.q_[:, j]) for j in range(3)])

    def score(self, X=None, y=None):
        """Regenerated energy of the fitted trajectory [J]."""
        check_is_fitted(self, "solution_")
        return self.objective_
