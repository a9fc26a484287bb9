"""Semi-smooth Newton solver for the discrete limit optimality system.

Unknowns are the stacked coefficient vectors (y, p, chi):

    A y + D max(0,y) + (1/alpha) M p = M f
    A p + D (chi o p)                = M (y - y_d)
    D (y - prox_gamma(y + gamma chi)) = 0

The third equation is the prox reformulation of the pointwise inclusion
chi_i in the convex subdifferential of max at y_i; it is scaled by the
lumped mass matrix for uniform residual scaling. Nodes where p_i ~ 0 and
y_i + gamma chi_i in [0, gamma] make the Newton matrix singular; their
chi components are frozen for the step (active-set fix).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import sparse_core
from .fe_mesh import FeFunction, FeOperators
from .nonsmooth import max0, prox, prox_active
from .sparse_core import BlockSpec, CsrMatrix, SingularMatrixError, assemble_block
from .state_solver import NewtonReport

__all__ = [
    "KktPoint",
    "KktConfig",
    "IndexSets",
    "ProblemData",
    "residual",
    "index_sets",
    "newton_matrix",
    "apply_active_set_fix",
    "solve_kkt",
    "recover_control",
    "zero_point",
]


@dataclass(frozen=True)
class KktPoint:
    y: FeFunction
    p: FeFunction
    chi: FeFunction

    def __post_init__(self):
        if not (self.y.space is self.p.space is self.chi.space):
            raise ValueError("KKT point components must share one space")


@dataclass(frozen=True)
class KktConfig:
    alpha: float
    gamma: float
    tol_residual: float = 1e-12
    max_iter: int = 25
    tol_p_critical: float = 1e-14

    def __post_init__(self):
        if min(self.alpha, self.gamma, self.tol_residual, self.tol_p_critical) <= 0 \
                or self.max_iter <= 0:
            raise ValueError("all KKT configuration values must be positive")


@dataclass(frozen=True)
class IndexSets:
    i_plus: np.ndarray   # {i : y_i > 0}
    i_gamma: np.ndarray  # {i : y_i + gamma chi_i not in [0, gamma]}
    i_crit: np.ndarray   # {i : |p_i| <= tol and y_i + gamma chi_i in [0, gamma]}


@dataclass(frozen=True)
class ProblemData:
    ops: FeOperators
    f: FeFunction
    y_d: FeFunction
    config: KktConfig

    def __post_init__(self):
        if not (self.f.space is self.ops.space and self.y_d.space is self.ops.space):
            raise ValueError("data functions must live on the operator space")


def zero_point(ops: FeOperators) -> KktPoint:
    s = ops.space
    return KktPoint(s.zero(), s.zero(), s.zero())


def residual(data: ProblemData, pt: KktPoint) -> np.ndarray:
    """Stacked residual (3n,) of the limit optimality system."""
    ops = data.ops
    a = ops.A.to_scipy()
    m = ops.M.to_scipy()
    d = ops.d_diag()
    alpha, gamma = data.config.alpha, data.config.gamma
    y, p, chi = pt.y.coeffs, pt.p.coeffs, pt.chi.coeffs

    r1 = a @ y + d * max0(y) + (1.0 / alpha) * (m @ p) - m @ data.f.coeffs
    r2 = a @ p + d * (chi * p) - m @ (y - data.y_d.coeffs)
    r3 = d * (y - prox(gamma, y + gamma * chi))
    return np.concatenate([r1, r2, r3])


def index_sets(pt: KktPoint, config: KktConfig) -> IndexSets:
    y, p, chi = pt.y.coeffs, pt.p.coeffs, pt.chi.coeffs
    gamma = config.gamma
    w = y + gamma * chi
    active = prox_active(gamma, w)
    inactive = ~active
    return IndexSets(
        i_plus=np.flatnonzero(y > 0),
        i_gamma=np.flatnonzero(active),
        i_crit=np.flatnonzero(inactive & (np.abs(p) <= config.tol_p_critical)),
    )


def newton_matrix(data: ProblemData, pt: KktPoint, sets: IndexSets) -> CsrMatrix:
    """3n x 3n generalized Jacobian of the stacked residual."""
    ops = data.ops
    n = ops.space.n
    a = ops.A
    m = ops.M
    d = ops.d_diag()
    alpha, gamma = data.config.alpha, data.config.gamma

    ind_plus = np.zeros(n)
    ind_plus[sets.i_plus] = 1.0
    ind_gam = np.zeros(n)
    ind_gam[sets.i_gamma] = 1.0

    a_sp = a.to_scipy()
    b11 = CsrMatrix.from_scipy(a_sp + sp.diags(d * ind_plus))
    b22 = CsrMatrix.from_scipy(a_sp + sp.diags(d * pt.chi.coeffs))
    b23 = sparse_core.diagonal(d * pt.p.coeffs)
    b31 = sparse_core.diagonal(d * (1.0 - ind_gam))
    b33 = sparse_core.diagonal(d * ind_gam)

    spec = BlockSpec(
        blocks=[
            [b11, m, None],
            [m, b22, b23],
            [b31, None, b33],
        ],
        multipliers=[
            [1.0, 1.0 / alpha, 1.0],
            [-1.0, 1.0, 1.0],
            [1.0, 1.0, -gamma],
        ],
    )
    return assemble_block(spec)


def apply_active_set_fix(matrix: CsrMatrix, rhs: np.ndarray, sets: IndexSets):
    """Freeze the critical chi components for this Newton step.

    The prox-equation row of each critical node is replaced by the unit
    row on its chi unknown (rhs 0), so the step leaves chi_i unchanged
    while its column contributions in the first two block rows remain.
    """
    if len(sets.i_crit) == 0:
        return matrix, rhs
    n = matrix.n_rows // 3
    m_sp = matrix.to_scipy().copy()
    rows = 2 * n + sets.i_crit
    for r in rows:
        m_sp.data[m_sp.indptr[r]:m_sp.indptr[r + 1]] = 0.0
    unit = sp.coo_matrix(
        (np.ones(len(rows)), (rows, rows)), shape=m_sp.shape
    )
    fixed = CsrMatrix.from_scipy(m_sp + unit)
    rhs = rhs.copy()
    rhs[rows] = 0.0
    return fixed, rhs


def solve_kkt(data: ProblemData, init: Optional[KktPoint] = None):
    """Undamped semi-smooth Newton on the stacked system; no globalization.

    Non-convergence within the iteration cap and singular Newton systems
    are reported, not repaired.
    """
    ops = data.ops
    n = ops.space.n
    cfg = data.config
    pt = init if init is not None else zero_point(ops)
    y = pt.y.coeffs.copy()
    p = pt.p.coeffs.copy()
    chi = pt.chi.coeffs.copy()

    history = []
    for it in range(cfg.max_iter + 1):
        pt = KktPoint(ops.space.function(y), ops.space.function(p), ops.space.function(chi))
        r = residual(data, pt)
        rn = float(np.linalg.norm(r))
        history.append(rn)
        if rn < cfg.tol_residual:
            return pt, NewtonReport(True, it, history)
        if it == cfg.max_iter:
            break
        sets = index_sets(pt, cfg)
        jac = newton_matrix(data, pt, sets)
        jac, rhs = apply_active_set_fix(jac, -r, sets)
        try:
            step = sparse_core.solve_linear(jac, rhs)
        except SingularMatrixError as exc:
            return pt, NewtonReport(False, it, history, str(exc))
        y = y + step[:n]
        p = p + step[n:2 * n]
        chi = chi + step[2 * n:]
    return pt, NewtonReport(False, cfg.max_iter, history, "no convergence within iteration limit")


def recover_control(pt: KktPoint, alpha: float) -> FeFunction:
    """Eliminated gradient equation p + alpha u = 0."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return pt.y.space.function(-pt.p.coeffs / alpha)
