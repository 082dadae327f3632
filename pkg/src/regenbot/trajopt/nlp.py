"""Bound-constrained augmented Lagrangian solver for equality-constrained NLPs.

Solves::

    min f(x)  s.t.  c(x) = 0,  lb <= x <= ub

by approximately minimizing the augmented Lagrangian
``f - lam . c + mu/2 |c|^2`` over the box, then updating multipliers and
penalty on the usual LANCELOT schedule. Two inner minimizers are available:

``"lbfgs"``
    limited-memory quasi-Newton with bound projection (scipy's L-BFGS-B);
    needs only first derivatives.
``"newton"``
    projected Newton (Bertsekas) on the free variables using the exact
    Lagrangian Hessian plus the penalty Gauss-Newton term, with a
    diagonal shift whenever the reduced Hessian is not positive definite.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import minimize

log = logging.getLogger(__name__)

INNER_METHODS = ("newton", "lbfgs")


@dataclass
class NLPReport:
    success: bool
    message: str
    objective: float
    constraint_violation: float
    kkt_residual: float
    outer_iterations: int
    inner_iterations: int
    function_evaluations: int
    multipliers: np.ndarray = field(repr=False, default=None)
    penalty: float = np.nan


def projected_gradient(x, g, lb, ub):
    """Infinity norm of ``x - P(x - g)``, the first-order stationarity measure."""
    return float(np.max(np.abs(x - np.clip(x - g, lb, ub)), initial=0.0))


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def projected_newton(phi, hess, z, lb, ub, gtol, max_iter=200, sigma=1e-4):
    """Minimize ``phi`` over the box ``[lb, ub]`` by projected Newton steps.

    Parameters
    ----------
    phi : callable
        ``phi(z) -> (value, gradient)``.
    hess : callable
        ``hess(z) -> dense or sparse Hessian`` (may be indefinite).
    gtol : float
        Stop once the projected gradient norm drops below this.

    Returns
    -------
    z, n_iter, n_eval
    """
    fixed = lb == ub
    val, g = phi(z)
    nev = 1
    it = 0
    flat = 0
    for it in range(1, max_iter + 1):
        pg = projected_gradient(z, g, lb, ub)
        if pg <= gtol:
            it -= 1
            break
        eps = min(1e-3, pg)
        at_lb = (z <= lb + eps) & (g > 0)
        at_ub = (z >= ub - eps) & (g < 0)
        active = fixed | at_lb | at_ub
        free = ~active
        H = _dense(hess(z))
        d = np.zeros_like(z)
        Hff = H[np.ix_(free, free)]
        diag = np.abs(np.diag(Hff))
        shift = 0.0
        scale = max(1e-8, float(diag.mean()) if diag.size else 1.0)
        while True:
            try:
                fac = cho_factor(Hff + shift * np.eye(Hff.shape[0]), check_finite=False)
                break
            except LinAlgError:
                shift = max(2 * shift, 1e-6 * scale)
                if shift > 1e12 * scale:
                    raise
        d[free] = -cho_solve(fac, g[free], check_finite=False)
        hd = np.maximum(np.abs(np.diag(H))[active & ~fixed], 1e-8 * scale)
        d[active & ~fixed] = -g[active & ~fixed] / hd
        alpha = 1.0
        while True:
            zn = np.clip(z + alpha * d, lb, ub)
            vn, gn = phi(zn)
            nev += 1
            if vn <= val + sigma * g @ (zn - z) or alpha < 1e-12:
                break
            alpha *= 0.5
        if alpha < 1e-12 and vn > val:
            break
        # stop when the merit function has stopped moving
        flat = flat + 1 if val - vn <= 1e-13 * max(1.0, abs(val)) else 0
        z, val, g = zn, vn, gn
        if flat >= 5:
            break
    return z, it, nev


def nlp_minimize(fun, grad, x0, eq=None, eq_jac=None, bounds=None, tol=1e-6,
                 kkt_tol=None, hess=None, inner="newton", max_inner=2000, max_outer=50,
                 mu0=10.0, mu_max=1e10, lam0=None, x_scale=None, c_scale=None,
                 f_scale=1.0, callback=None):
    """Minimize ``fun`` subject to ``eq(x) = 0`` and box bounds.

    Parameters
    ----------
    fun, grad : callable
        Objective and its gradient.
    x0 : ndarray
    eq, eq_jac : callable, optional
        Equality residual ``c(x)`` and its Jacobian (dense or scipy.sparse).
    bounds : tuple of ndarray, optional
        ``(lb, ub)``; use +-inf for free variables and ``lb == ub`` to fix one.
    tol : float
        Required ``max |c(x)|`` in the caller's units.
    kkt_tol : float, optional
        Required projected-gradient norm of the Lagrangian, measured in the
        scaled variables. Defaults to ``tol``.
    hess : callable, optional
        ``hess(x, y, obj_factor)``: Hessian of ``obj_factor f - y . c``.
        Required for ``inner="newton"``.
    inner : {"newton", "lbfgs"}
    max_inner, max_outer : int
        Iteration caps for each inner solve and for the multiplier loop.
    x_scale, c_scale, f_scale
        Typical magnitudes of variables, residual rows and objective. The
        solver works on ``x / x_scale``, ``c / c_scale`` and ``f / f_scale``.
    callback : callable, optional
        Called as ``callback(x, info)`` after every outer iteration, where
        ``info`` is a dict with the current violation and penalty.

    Returns
    -------
    x : ndarray
    report : NLPReport
    """
    if inner not in INNER_METHODS:
        raise ValueError(f"inner must be one of {INNER_METHODS}")
    if inner == "newton" and hess is None:
        raise ValueError("the newton inner solver needs a Hessian callback")
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    kkt_tol = tol if kkt_tol is None else kkt_tol
    sx = np.ones(n) if x_scale is None else np.broadcast_to(np.asarray(x_scale, float), n)
    lb, ub = (np.full(n, -np.inf), np.full(n, np.inf)) if bounds is None else bounds
    zlb, zub = np.asarray(lb, float) / sx, np.asarray(ub, float) / sx
    z = np.clip(x0 / sx, zlb, zub)

    if eq is None:
        def eq(x):
            return np.zeros(0)

        def eq_jac(x):
            return np.zeros((0, n))
    m = eq(x0).size
    sc = np.ones(m) if c_scale is None else np.broadcast_to(np.asarray(c_scale, float), m)
    lam = np.zeros(m) if lam0 is None else np.asarray(lam0, float).copy()
    mu = float(mu0)
    nfev = 0
    Sx = sp.diags(sx)

    def lagrangian_grad(zz, lam_):
        x = zz * sx
        return grad(x) * sx / f_scale - (eq_jac(x).T @ (lam_ / sc)) * sx

    def aug(zz):
        nonlocal nfev
        nfev += 1
        x = zz * sx
        c = eq(x) / sc
        y = lam - mu * c
        val = fun(x) / f_scale - lam @ c + 0.5 * mu * (c @ c)
        g = grad(x) * sx / f_scale - (eq_jac(x).T @ (y / sc)) * sx
        return val, g

    def aug_hess(zz):
        x = zz * sx
        c = eq(x) / sc
        y = (lam - mu * c) / sc
        A = sp.csr_matrix(eq_jac(x)) @ Sx
        As = sp.diags(1.0 / sc) @ A
        H = Sx @ sp.csr_matrix(hess(x, y, 1.0 / f_scale)) @ Sx
        return H + mu * (As.T @ As)

    omega = 1.0 / mu
    eta = 1.0 / mu**0.1
    inner_total = 0
    outer = 0
    message = "iteration cap reached"
    success = False
    cv = kkt = np.inf
    best_cv, stall = np.inf, 0
    for outer in range(1, max_outer + 1):
        gtol = max(omega, 0.1 * kkt_tol)
        if inner == "lbfgs":
            res = minimize(aug, z, jac=True, method="L-BFGS-B", bounds=list(zip(zlb, zub)),
                           options={"maxiter": max_inner, "gtol": gtol, "ftol": 1e-15,
                                    "maxcor": 30, "maxls": 40})
            z, nit = res.x, res.nit
        else:
            z, nit, _ = projected_newton(aug, aug_hess, z, zlb, zub, gtol, max_iter=max_inner)
        inner_total += nit
        c_s = eq(z * sx) / sc
        cv = float(np.max(np.abs(c_s * sc), initial=0.0))
        cvs = float(np.max(np.abs(c_s), initial=0.0))
        if cvs <= eta or cv <= tol:
            lam = lam - mu * c_s
            kkt = projected_gradient(z, lagrangian_grad(z, lam), zlb, zub)
            if cv <= tol and kkt <= kkt_tol:
                success, message = True, "converged"
                break
            eta = max(eta / mu**0.9, 0.1 * tol)
            omega = max(omega / mu, 0.1 * kkt_tol)
        else:
            # penalty growth that no longer reduces |c| signals local infeasibility
            stall = stall + 1 if cv > 0.99 * best_cv else 0
            if stall >= 4:
                message = "constraint violation stalled (locally infeasible)"
                kkt = projected_gradient(z, lagrangian_grad(z, lam), zlb, zub)
                break
            mu = min(10.0 * mu, mu_max)
            eta = 1.0 / mu**0.1
            omega = 1.0 / mu
        best_cv = min(best_cv, cv)
        log.debug("outer %d: |c|=%.3e kkt=%.3e mu=%.1e inner=%d", outer, cv, kkt, mu, nit)
        if callback is not None:
            callback(z * sx, {"outer": outer, "constraint_violation": cv, "penalty": mu})
    else:
        kkt = projected_gradient(z, lagrangian_grad(z, lam), zlb, zub)

    x = z * sx
    report = NLPReport(success, message, float(fun(x)), cv, kkt, outer, inner_total, nfev,
                       lam / sc * f_scale, mu)
    return x, report
