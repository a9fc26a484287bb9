"""Forward solvers for -Δy + max(0,y) = u + f and its linearizations.

Discrete form (lumped non-smooth term): A y + D max(0, y) = M (u + f).
Also provides the regularized forward map, the directional derivative of
the control-to-state map, and the linear operators G_chi representing
generalized-derivative elements.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .fe_mesh import FeFunction, FeOperators
from .nonsmooth import SmoothedMaxParams, max0, smoothed_max, smoothed_max_prime
from .sparse_core import SingularMatrixError

__all__ = [
    "StateProblem",
    "NewtonReport",
    "FiniteDifferenceReport",
    "solve_state",
    "solve_state_regularized",
    "directional_derivative",
    "finite_difference_check",
    "gateaux_zero_fraction",
    "apply_Gchi",
    "check_symmetric_derivative",
    "m_norm",
]

DEFAULT_ZERO_TOL = 1e-12
MAX_NEWTON_ITER = 50


@dataclass(frozen=True)
class StateProblem:
    ops: FeOperators
    f: FeFunction

    def __post_init__(self):
        if self.f.space is not self.ops.space:
            raise ValueError("inhomogeneity must live on the operator space")


@dataclass
class NewtonReport:
    converged: bool
    iterations: int
    residual_history: list[float] = field(default_factory=list)
    failure_reason: Optional[str] = None


def m_norm(ops: FeOperators, v: np.ndarray) -> float:
    """Continuous L2 norm of the P1 function with coefficients v."""
    mv = ops.M.to_scipy() @ v
    return float(np.sqrt(max(v @ mv, 0.0)))


def _newton(residual, jacobian, n: int, tol: float, max_iter: int = MAX_NEWTON_ITER):
    """Undamped (semi-smooth) Newton from the zero vector."""
    y = np.zeros(n)
    history = []
    for it in range(max_iter + 1):
        r = residual(y)
        rn = float(np.linalg.norm(r))
        history.append(rn)
        if rn <= tol:
            return y, NewtonReport(True, it, history)
        if it == max_iter:
            break
        j = jacobian(y)
        try:
            lu = splu(j.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:
            return y, NewtonReport(False, it, history, f"singular Newton matrix: {exc}")
        y = y - lu.solve(r)
    return y, NewtonReport(False, max_iter, history, "no convergence within iteration limit")


def solve_state(prob: StateProblem, u: FeFunction, max_iter: int = MAX_NEWTON_ITER):
    """Semi-smooth Newton solve of A y + D max(0,y) = M (u + f)."""
    ops = prob.ops
    a = ops.A.to_scipy()
    m = ops.M.to_scipy()
    d = ops.d_diag()
    b = m @ (u.coeffs + prob.f.coeffs)
    tol = 1e-12 * max(1.0, float(np.linalg.norm(b)))

    def residual(y):
        return a @ y + d * max0(y) - b

    def jacobian(y):
        return a + sp.diags(d * (y > 0).astype(float))

    y, rep = _newton(residual, jacobian, ops.space.n, tol, max_iter)
    return ops.space.function(y), rep


def solve_state_regularized(prob: StateProblem, u: FeFunction, eps: float,
                            max_iter: int = MAX_NEWTON_ITER):
    """Newton solve of the smoothed state equation A y + D max_eps(y) = M (u + f)."""
    params = SmoothedMaxParams(eps)
    ops = prob.ops
    a = ops.A.to_scipy()
    m = ops.M.to_scipy()
    d = ops.d_diag()
    b = m @ (u.coeffs + prob.f.coeffs)
    tol = 1e-12 * max(1.0, float(np.linalg.norm(b)))

    def residual(y):
        return a @ y + d * smoothed_max(params, y) - b

    def jacobian(y):
        return a + sp.diags(d * smoothed_max_prime(params, y))

    y, rep = _newton(residual, jacobian, ops.space.n, tol, max_iter)
    return ops.space.function(y), rep


def directional_derivative(prob: StateProblem, y: FeFunction, h: FeFunction,
                           zero_tol: float = DEFAULT_ZERO_TOL):
    """Directional derivative of the control-to-state map at state y.

    Solves A d + D (1_{|y|<=tol} max(0,d) + 1_{y>tol} d) = M h by
    semi-smooth Newton.
    """
    if zero_tol < 0:
        raise ValueError("zero_tol must be nonnegative")
    ops = prob.ops
    a = ops.A.to_scipy()
    m = ops.M.to_scipy()
    dd = ops.d_diag()
    zero_band = np.abs(y.coeffs) <= zero_tol
    positive = y.coeffs > zero_tol
    b = m @ h.coeffs
    tol = 1e-12 * max(1.0, float(np.linalg.norm(b)))

    def residual(delta):
        return a @ delta + dd * (zero_band * max0(delta) + positive * delta) - b

    def jacobian(delta):
        chi = zero_band * (delta > 0).astype(float) + positive.astype(float)
        return a + sp.diags(dd * chi)

    delta, rep = _newton(residual, jacobian, ops.space.n, tol)
    return ops.space.function(delta), rep


@dataclass
class FiniteDifferenceReport:
    t_list: list[float]
    errors: list[float]
    monotone: bool
    final_ok: bool
    delta_norm: float


def finite_difference_check(prob: StateProblem, u: FeFunction, h: FeFunction,
                            t_list, zero_tol: float = DEFAULT_ZERO_TOL) -> FiniteDifferenceReport:
    """Compare difference quotients of the forward map with the directional
    derivative: e(t) = || (S(u+t h) - S(u))/t - delta ||_{L2}."""
    t_list = list(t_list)
    if not t_list or any(t <= 0 for t in t_list) or any(
            t_list[k + 1] >= t_list[k] for k in range(len(t_list) - 1)):
        raise ValueError("t_list must be positive and decreasing")
    ops = prob.ops
    y0, rep0 = solve_state(prob, u)
    if not rep0.converged:
        raise RuntimeError("base state solve failed")
    delta, repd = directional_derivative(prob, y0, h, zero_tol)
    if not repd.converged:
        raise RuntimeError("directional derivative solve failed")
    dnorm = m_norm(ops, delta.coeffs)

    errors = []
    for t in t_list:
        ut = ops.space.function(u.coeffs + t * h.coeffs)
        yt, rept = solve_state(prob, ut)
        if not rept.converged:
            raise RuntimeError(f"perturbed state solve failed at t = {t}")
        quot = (yt.coeffs - y0.coeffs) / t
        errors.append(m_norm(ops, quot - delta.coeffs))

    # difference quotients amplify the 1e-12 solver residual by 1/t, so
    # comparisons below that noise floor carry no information
    floor = 1e-9 * (1.0 + dnorm)
    monotone = all(
        errors[k + 1] <= 1.1 * errors[k] + 1e-14 or errors[k + 1] <= floor
        for k in range(len(errors) - 1)
    )
    final_ok = errors[-1] <= 1e-4 * (1.0 + dnorm)
    return FiniteDifferenceReport(t_list, errors, monotone, final_ok, dnorm)


def gateaux_zero_fraction(y: FeFunction, zero_tol: float = DEFAULT_ZERO_TOL) -> float:
    """Fraction of interior nodes inside the zero band of y."""
    n = y.space.n
    if n == 0:
        return 0.0
    return float(np.count_nonzero(np.abs(y.coeffs) <= zero_tol)) / n


def apply_Gchi(ops: FeOperators, chi: FeFunction, h: FeFunction) -> FeFunction:
    """Apply the generalized-derivative element G_chi: solve (A + D diag(chi)) eta = M h.

    chi must take values in [0, 1]; anything else is not a valid
    subdifferential coefficient.
    """
    c = chi.coeffs
    if np.any(c < 0) or np.any(c > 1):
        raise ValueError("chi must take values in [0, 1]")
    a = ops.A.to_scipy()
    j = (a + sp.diags(ops.d_diag() * c)).tocsc()
    try:
        lu = splu(j, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularMatrixError(-1) from exc
    eta = lu.solve(ops.M.to_scipy() @ h.coeffs)
    return ops.space.function(eta)


def check_symmetric_derivative(prob: StateProblem, u: FeFunction, h: FeFunction,
                               zero_tol: float = DEFAULT_ZERO_TOL) -> bool:
    """Whether S'(u; h) = -S'(u; -h) holds numerically (Gateaux criterion)."""
    ops = prob.ops
    y, rep = solve_state(prob, u)
    if not rep.converged:
        raise RuntimeError("state solve failed")
    dpos, r1 = directional_derivative(prob, y, h, zero_tol)
    minus_h = ops.space.function(-h.coeffs)
    dneg, r2 = directional_derivative(prob, y, minus_h, zero_tol)
    if not (r1.converged and r2.converged):
        raise RuntimeError("directional derivative solve failed")
    gap = m_norm(ops, dpos.coeffs + dneg.coeffs)
    return gap <= 1e-8 * (1.0 + m_norm(ops, dpos.coeffs))
