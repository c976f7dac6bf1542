"""cvxpy models for the primal problem and the R_C-form dual.

These are numerical engines only: every value reported to callers is
re-evaluated by the package's own objective / dual formulas.
"""

from __future__ import annotations

import logging
import warnings

import cvxpy as cp
import numpy as np

from .cost import LinearCost, MartingaleCost, MartonCost
from .entropy import KL, ChiSquared, Indicator1, Range

log = logging.getLogger(__name__)

CLARABEL_TOL = 1e-10


def allowed_mask(spec):
    """Entries that may carry mass at finite cost.

    Rows/columns where the reference measure vanishes are closed when the
    entropy is superlinear, and so are entries with ``c_ij = +inf``.
    """
    n1, n2 = spec.cost.shape
    mask = np.ones((n1, n2), dtype=bool)
    if spec.F1.superlinear:
        mask[spec.mu1.weights == 0, :] = False
    if spec.F2.superlinear:
        mask[:, spec.mu2.weights == 0] = False
    if isinstance(spec.cost, LinearCost):
        mask &= np.isfinite(spec.cost.c)
    return mask


def _divergence_expr(e, marg, mu):
    """(expression, constraints) for ``F(marg | mu)`` on the support of ``mu``."""
    pos = np.flatnonzero(mu > 0)
    if pos.size == 0:
        return 0, []
    m, w = marg[pos], mu[pos]
    if isinstance(e, KL):
        return cp.sum(cp.kl_div(m, w)), []
    if isinstance(e, ChiSquared):
        return cp.sum(cp.multiply(1.0 / w, cp.square(m - w))), []
    if isinstance(e, Indicator1):
        return 0, [m == w]
    if isinstance(e, Range):
        return 0, [m >= e.a * w, m <= e.b * w]
    raise NotImplementedError(f"no conic model for entropy {e.kind}")


def _cost_expr(cost, G, r):
    cons = []
    if isinstance(cost, LinearCost):
        c = np.where(np.isfinite(cost.c), cost.c, 0.0)
        expr = cp.sum(cp.multiply(c, G))
        if isinstance(cost, MartingaleCost):
            cons.append(G @ cost.y - cp.multiply(r, cost.x) == 0)
        return expr, cons
    if isinstance(cost, MartonCost):
        if cost.theta == "absolute":
            return cp.sum(cp.abs(cp.multiply(r, cost.X[:, 0]) - G @ cost.Y[:, 0])), cons
        terms = [cp.quad_over_lin(r[i] * cost.X[i] - G[i, :] @ cost.Y, r[i])
                 for i in range(cost.shape[0])]
        return cp.sum(cp.hstack(terms)), cons
    raise NotImplementedError(f"no conic model for cost {cost.kind}")


def primal_problem(spec, mass_cap=None):
    n1, n2 = spec.cost.shape
    G = cp.Variable((n1, n2), nonneg=True)
    r = cp.sum(G, axis=1)
    col = cp.sum(G, axis=0)
    cons = []
    mask = allowed_mask(spec)
    if not mask.all():
        cons.append(G[~mask] == 0)
    d1, c1 = _divergence_expr(spec.F1, r, spec.mu1.weights)
    d2, c2 = _divergence_expr(spec.F2, col, spec.mu2.weights)
    wc, c3 = _cost_expr(spec.cost, G, r)
    cons += c1 + c2 + c3
    if mass_cap is not None:
        cons.append(cp.sum(G) <= mass_cap)
    return cp.Problem(cp.Minimize(d1 + d2 + wc), cons), G


def _fcirc_expr(e, v):
    if isinstance(e, KL):
        return 1 - cp.exp(-v)
    if isinstance(e, ChiSquared):
        return 1 - cp.square(cp.pos(1 - 0.5 * v))
    if isinstance(e, Indicator1):
        return v
    if isinstance(e, Range):
        return cp.minimum(e.a * v, e.b * v)
    raise NotImplementedError(f"no conic model for entropy {e.kind}")


def dual_problem(spec):
    """Maximise ``sum mu1 F1o(R_C phi) + sum mu2 F2o(-phi)`` over ``phi``.

    ``u <= R_C phi`` is written through the LP / conjugate representation of
    each transform, which adds a per-row multiplier for martingale and
    Marton costs.
    """
    cost = spec.cost
    n1, n2 = cost.shape
    phi = cp.Variable(n2)
    u = cp.Variable(n1)
    mu1, mu2 = spec.mu1.weights, spec.mu2.weights
    p1, p2 = np.flatnonzero(mu1 > 0), np.flatnonzero(mu2 > 0)

    terms = []
    if p1.size:
        terms.append(mu1[p1] @ _fcirc_expr(spec.F1, u[p1]))
    if p2.size:
        terms.append(mu2[p2] @ _fcirc_expr(spec.F2, -phi[p2]))

    I, J = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    I, J = I.ravel(), J.ravel()
    cons = []
    if isinstance(cost, LinearCost):
        fin = np.isfinite(cost.c[I, J])
        I, J = I[fin], J[fin]
        lhs = u[I] - phi[J]
        if isinstance(cost, MartingaleCost):
            h = cp.Variable(n1)
            lhs = lhs + cp.multiply(cost.y[J] - cost.x[I], h[I])
        cons.append(lhs <= cost.c[I, J])
    elif isinstance(cost, MartonCost):
        if cost.rows.dim != 1:
            raise NotImplementedError("Marton dual is implemented on the line only")
        a = cp.Variable(n1)
        d = cost.Y[J, 0] - cost.X[I, 0]
        lhs = u[I] + cp.multiply(d, a[I]) - phi[J]
        if cost.theta == "quadratic":
            cons.append(lhs + 0.25 * cp.square(a[I]) <= 0)
        else:
            cons += [lhs <= 0, cp.abs(a) <= 1]
    else:
        raise NotImplementedError(f"no conic model for cost {cost.kind}")

    objective = cp.sum(cp.hstack(terms)) if terms else cp.Constant(0.0)
    return cp.Problem(cp.Maximize(objective), cons), phi


def run(problem, max_iter=50_000):
    """Solve with Clarabel at tight tolerances; returns the cvxpy status string."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            problem.solve(solver="CLARABEL", max_iter=max_iter, tol_gap_abs=CLARABEL_TOL,
                          tol_gap_rel=CLARABEL_TOL, tol_feas=CLARABEL_TOL)
        except cp.error.SolverError as exc:
            log.info("tight Clarabel solve failed (%s); retrying at default tolerances", exc)
            try:
                problem.solve(solver="CLARABEL", max_iter=max_iter)
            except cp.error.SolverError as exc2:
                log.warning("Clarabel failed: %s", exc2)
                return "solver_error"
    return problem.status
