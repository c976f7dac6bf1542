"""Martingale entropy transport and its homogeneous reformulation.

Couplings here are restricted to martingale plans on a common real ground
``X``: every row ``i`` with mass satisfies ``sum_j gamma_ij (x_j - x_i) = 0``.
Besides the primal solve this module evaluates

* the ``Lambda_M`` dual with multiplier ``h``,
* the marginal perspective cost ``H(x1, r1; x2, r2)``,
* lifted plans on ``Y = X x [0, inf)``, their homogeneous marginals and the
  homogeneous objective,
* the functionals ``H(mu1, mu2 | gamma)`` and ``R(mu1, mu2 | gamma)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .cost import MartingaleCost
from .duality import dual_ascent_rc, feasibility_tol
from .entropy import DOMAIN_RTOL, Indicator1, reverse_weights
from .errors import (ConstraintViolated, HypothesesNotMet, InfeasibleTriple, NegativeArgument,
                     ValidationError)
from .extended import INF, mass_mul
from .measures import DiscreteMeasure, GroundSet, lebesgue_split
from .solver import ProblemSpec, SolverOptions, solve

MASS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MartingaleSpec:
    X: GroundSet
    mu1: DiscreteMeasure
    mu2: DiscreteMeasure
    F1: object
    F2: object
    c: np.ndarray
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.X.dim != 1:
            raise ValidationError("martingale problems need a 1-D ground set")
        if self.mu1.ground is not self.X or self.mu2.ground is not self.X:
            raise ValidationError("both measures must live on the ground X")
        if not self.F1.recession > 0:
            raise ValidationError("F1 needs a positive recession constant")
        object.__setattr__(self, "_cost", MartingaleCost(self.X, self.X, self.c))
        object.__setattr__(self, "c", self._cost.c)

    @property
    def cost(self):
        return self._cost

    @property
    def x(self):
        return self.X.line

    def problem(self, options=None):
        return ProblemSpec(self.mu1, self.mu2, self.F1, self.F2, self._cost,
                           options or self.options)


def solve_moet(spec, options=None):
    """Minimise over martingale couplings; raises ``InfeasibleProblem`` when none has finite cost."""
    report = solve(spec.problem(options))
    resid = spec.cost.mean_residual(report.coupling.mass)
    report.diagnostics["martingale_residual"] = float(np.max(np.abs(resid), initial=0.0))
    return report


# -- Lambda_M dual ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DualTripleM:
    phi1: np.ndarray
    phi2: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        for name in ("phi1", "phi2", "h"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))


def triple_violation(spec, triple):
    """``max_ij phi1_i + phi2_j + h_i (x_j - x_i) - c_ij`` over finite ``c_ij``."""
    x = spec.x
    lhs = triple.phi1[:, None] + triple.phi2[None, :] + triple.h[:, None] * (x[None, :] - x[:, None])
    fin = np.isfinite(spec.c)
    if not fin.any():
        return -INF
    return float(np.max((lhs - np.where(fin, spec.c, 0.0))[fin]))


def dual_value_lambda_m(spec, triple):
    n = len(spec.X)
    for name in ("phi1", "phi2", "h"):
        v = getattr(triple, name)
        if v.shape != (n,) or not np.all(np.isfinite(v)):
            raise InfeasibleTriple(f"{name} must be a finite vector of length {n}")
    for e, phi, name in ((spec.F1, triple.phi1, "phi1"), (spec.F2, triple.phi2, "phi2")):
        if not np.all(phi > -e.recession):
            raise InfeasibleTriple(f"{name} outside the domain of F°")
    worst = triple_violation(spec, triple)
    if worst > feasibility_tol(spec.problem()):
        raise InfeasibleTriple(f"constraint violated by {worst:.3g}")
    return float(np.sum(mass_mul(spec.F1.Fcirc(triple.phi1), spec.mu1.weights))
                 + np.sum(mass_mul(spec.F2.Fcirc(triple.phi2), spec.mu2.weights)))


def triple_from_rc(spec, phi):
    """A feasible triple built from an R_C-form potential ``phi``.

    ``phi2 = -phi`` and ``h`` is a supporting slope of the lower convex
    envelope of ``c_i. + phi`` at ``x_i``; ``phi1`` is then the largest value
    the constraints allow, so the triple is feasible by construction.  Rows
    outside the hull of the columns get a steep slope instead.
    """
    x = spec.x
    phi = np.asarray(phi, dtype=float)
    vals, h = spec.cost.rc_transform_with_slopes(phi)
    steep = 1e3 * (1.0 + float(np.max(np.abs(phi), initial=0.0))
                   + float(np.max(np.abs(spec.c[np.isfinite(spec.c)]), initial=0.0)))
    for i in np.flatnonzero(~np.isfinite(vals)):
        fin = np.isfinite(spec.c[i])
        if not fin.any():
            continue
        ys = x[fin]
        if x[i] < ys.min():
            h[i] = -steep / max(ys.min() - x[i], 1e-300)
        elif x[i] > ys.max():
            h[i] = steep / max(x[i] - ys.max(), 1e-300)
    slack = spec.c + phi[None, :] - h[:, None] * (x[None, :] - x[:, None])
    phi1 = np.min(slack, axis=1)
    phi1 = np.where(np.isfinite(phi1), phi1, 0.0)
    return DualTripleM(phi1, -phi, h)


def dual_ascent_lambda_m(spec, options=None):
    """Best ``Lambda_M`` triple found through the R_C-form ascent; returns ``(triple, value)``."""
    res = dual_ascent_rc(spec.problem(options), options)
    triple = triple_from_rc(spec, res.phi)
    return triple, dual_value_lambda_m(spec, triple)


# -- marginal perspective cost ------------------------------------------------

def _persp(e, r, theta):
    """``r F(theta / r)`` with the recession convention at ``r = 0``."""
    if r > 0:
        return r * float(e.F(theta / r))
    return float(mass_mul(e.recession, theta))


def perspective_cost_H(F1, F2, x1, r1, x2, r2, c12):
    """``inf_{theta > 0} r1 F1(theta/r1) + r2 F2(theta/r2) + theta c12``.

    ``x1, x2`` only identify the pair; the cost enters through ``c12``.  An
    infinite ``c12`` gives ``F1(0) r1 + F2(0) r2``.  When ``F2`` is the hard
    constraint ``Indicator1`` the minimiser is ``theta = r2``; otherwise a
    bounded 1-D minimisation over the feasible ``theta`` interval is used.
    """
    del x1, x2
    r1, r2 = float(r1), float(r2)
    if r1 < 0 or r2 < 0:
        raise NegativeArgument("r1 and r2 must be >= 0")
    if not c12 < INF:
        return float(mass_mul(F1.F0, r1) + mass_mul(F2.F0, r2))

    def total(theta):
        if theta == 0:
            return float(mass_mul(F1.F0, r1) + mass_mul(F2.F0, r2))
        return _persp(F1, r1, theta) + _persp(F2, r2, theta) + theta * c12

    if isinstance(F2, Indicator1):
        if r2 == 0:
            return total(0.0)
        return total(r2)

    lo, hi = 0.0, INF
    for e, r in ((F1, r1), (F2, r2)):
        if r > 0:
            lo, hi = max(lo, r * e.domain[0]), min(hi, r * e.domain[1])
        elif e.recession == INF:
            hi = 0.0
    if lo > hi * (1 + DOMAIN_RTOL):
        return INF
    if hi == 0.0:
        return total(0.0)
    if not np.isfinite(hi):
        hi = max(2.0 * lo, r1 + r2, 1e-12)
        for _ in range(200):
            if total(2.0 * hi) > total(hi):
                break
            hi *= 2.0
        hi *= 2.0
    res = minimize_scalar(total, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * max(hi, 1e-300), "maxiter": 2000})
    return float(min(res.fun, total(lo), total(hi)))


# -- lifted plans -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LiftedPlan:
    """Finite measure on ``Y x Y`` with ``Y = X x [0, inf)``.

    Atom ``k`` sits at ``((X[i1[k]], r1[k]), (X[i2[k]], r2[k]))`` with weight
    ``weight[k]``.
    """

    ground: GroundSet
    i1: np.ndarray
    r1: np.ndarray
    i2: np.ndarray
    r2: np.ndarray
    weight: np.ndarray
    p: float = 1.0

    def __post_init__(self):
        for name in ("i1", "i2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=int))
        for name in ("r1", "r2", "weight"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.weight)
        if any(len(getattr(self, a)) != n for a in ("i1", "r1", "i2", "r2")):
            raise ValidationError("atom arrays must have equal length")
        if np.any(self.r1 < 0) or np.any(self.r2 < 0) or np.any(self.weight < 0):
            raise ValidationError("radii and weights must be >= 0")
        if not self.p > 0:
            raise ValidationError("p must be > 0")

    @property
    def atoms(self):
        x = self.ground.line
        return [((x[a], ra), (x[b], rb), w)
                for a, ra, b, rb, w in zip(self.i1, self.r1, self.i2, self.r2, self.weight)]

    def scaled(self, lam):
        """Radii times ``lam**(1/p)`` and weights divided by ``lam``."""
        f = lam ** (1.0 / self.p)
        return LiftedPlan(self.ground, self.i1, self.r1 * f, self.i2, self.r2 * f,
                          self.weight / lam, self.p)


def homogeneous_marginal(plan, side):
    if side not in (1, 2):
        raise ValidationError("side must be 1 or 2")
    idx, r = (plan.i1, plan.r1) if side == 1 else (plan.i2, plan.r2)
    w = plan.weight * r ** plan.p
    return DiscreteMeasure(plan.ground, np.bincount(idx, weights=w, minlength=len(plan.ground)))


def _densities(mu, gamma_marg):
    """``rho`` with ``mu = rho * gamma + mu_perp``."""
    return lebesgue_split(mu.weights, gamma_marg)


def canonical_lift(spec, gamma, p=1.0):
    """Push ``gamma`` forward by ``(x1, rho1(x1)^(1/p); x2, rho2(x2)^(1/p))``.

    ``rho_i`` is the density of ``mu_i`` with respect to the i-th marginal of
    ``gamma``; for feasible plans with an ``Indicator1`` second entropy
    ``rho2 = 1`` on the support.
    """
    G = gamma.mass
    rho1, _ = _densities(spec.mu1, G.sum(axis=1))
    rho2, _ = _densities(spec.mu2, G.sum(axis=0))
    i1, i2 = np.nonzero(G > 0)
    return LiftedPlan(spec.X, i1, rho1[i1] ** (1.0 / p), i2, rho2[i2] ** (1.0 / p), G[i1, i2], p)


def homogeneous_objective(spec, plan):
    """``sum_atoms w H(x1, r1^p; x2, r2^p) + F1(0) (mu1 - h1)(X)``.

    The plan must satisfy ``h_i^p <= mu_i`` and the moment condition
    ``sum_atoms w h(x1)(x2 - x1) = 0`` for every grid indicator ``h``.
    """
    scale = max(1.0, spec.mu1.mass, spec.mu2.mass)
    h1 = homogeneous_marginal(plan, 1).weights
    h2 = homogeneous_marginal(plan, 2).weights
    for h, mu, side in ((h1, spec.mu1, 1), (h2, spec.mu2, 2)):
        excess = np.max(h - mu.weights, initial=-INF)
        if excess > MASS_TOL * scale:
            raise ConstraintViolated(f"h_{side}^p exceeds mu_{side} by {excess:.3g}")
    x = spec.x
    moment = np.bincount(plan.i1, weights=plan.weight * (x[plan.i2] - x[plan.i1]),
                         minlength=len(x))
    tol = MASS_TOL * max(spec.X.spread, 1.0) * max(1.0, plan.weight.sum())
    if np.max(np.abs(moment), initial=0.0) > tol:
        raise ConstraintViolated(f"martingale moment condition off by {np.max(np.abs(moment)):.3g}")

    total = 0.0
    for a, ra, b, rb, w in zip(plan.i1, plan.r1, plan.i2, plan.r2, plan.weight):
        if w == 0:
            continue
        total += w * perspective_cost_H(spec.F1, spec.F2, x[a], ra ** plan.p,
                                        x[b], rb ** plan.p, spec.c[a, b])
    missing = spec.mu1.mass - h1.sum()
    if abs(missing) > MASS_TOL * scale:
        total += float(mass_mul(spec.F1.F0, missing))
    return float(total)


def functional_H(spec, gamma):
    """``int H(x1, rho1; x2, rho2) d gamma + sum_i F_i(0) mu_i_perp(X)``."""
    G = gamma.mass
    rho1, perp1 = _densities(spec.mu1, G.sum(axis=1))
    rho2, perp2 = _densities(spec.mu2, G.sum(axis=0))
    x = spec.x
    total = 0.0
    for i, j in zip(*np.nonzero(G > 0)):
        total += G[i, j] * perspective_cost_H(spec.F1, spec.F2, x[i], rho1[i], x[j], rho2[j],
                                              spec.c[i, j])
    total += float(mass_mul(spec.F1.F0, perp1.sum()) + mass_mul(spec.F2.F0, perp2.sum()))
    return float(total)


def functional_R(spec, gamma):
    """``R1(mu1 | gamma_1) + R2(mu2 | gamma_2) + int c d gamma``."""
    G = gamma.mass
    return float(reverse_weights(spec.F1, spec.mu1.weights, G.sum(axis=1))
                 + reverse_weights(spec.F2, spec.mu2.weights, G.sum(axis=0))
                 + np.sum(mass_mul(spec.c, G)))


@dataclass(frozen=True)
class HomogeneousCheck:
    moet_value: float
    h_value: float
    r_value: float
    lifted_value: float
    p: float
    discrepancy: float
    report: object = None

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if k != "report"}


def check_homogeneous_equivalence(spec, options=None, p=1.0):
    """Compare the martingale optimum with the ``H``-functional and lifted values.

    Needs ``F2 = Indicator1`` and a nonnegative cost.
    """
    if not isinstance(spec.F2, Indicator1):
        raise HypothesesNotMet("the homogeneous formulation needs F2 = Indicator1")
    fin = spec.c[np.isfinite(spec.c)]
    if fin.size and fin.min() < 0:
        raise HypothesesNotMet("the homogeneous formulation needs c >= 0")
    report = solve_moet(spec, options)
    gamma = report.coupling
    hv = functional_H(spec, gamma)
    rv = functional_R(spec, gamma)
    lv = homogeneous_objective(spec, canonical_lift(spec, gamma, p))
    vals = [report.primal_value, hv, lv]
    return HomogeneousCheck(report.primal_value, hv, rv, lv, float(p),
                            float(max(vals) - min(vals)), report)
