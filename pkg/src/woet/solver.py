"""Primal solver for weak optimal entropy transport on finite grounds.

The problem is

    minimise  F1(gamma_1 | mu1) + F2(gamma_2 | mu2) + sum_i m_i C(x_i, gamma_i / m_i)

over nonnegative coupling matrices ``gamma``.  :func:`solve` hands the
convex program to a conic solver, polishes the iterate so that hard
constraints (indicator marginals, martingale means) hold to rounding
precision, recomputes the objective with :func:`objective` and certifies
the value with a dual lower bound.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from . import _conic
from .cost import LinearCost, MartingaleCost
from .entropy import DOMAIN_RTOL, divergence_weights
from .errors import GroundMismatch, InfeasibleProblem, ShapeMismatch, TooLarge, ValidationError
from .extended import INF, ZERO_MASS, mass_mul
from .measures import Coupling, DiscreteMeasure, product_coupling

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    ITER_LIMIT = "IterLimit"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for :func:`solve`.

    ``tol_gap`` is applied as ``tol_gap * (1 + |primal|)``, i.e. an absolute
    plus a relative tolerance.  ``mass_cap`` is a float, ``"auto"`` or None.
    """

    tol_gap: float = 1e-6
    max_iter: int = 50_000
    mass_cap: object = "auto"
    seed: int = 0
    certify: bool = True

    def __post_init__(self):
        if not self.tol_gap > 0:
            raise ValidationError("tol_gap must be > 0")
        if int(self.max_iter) < 1:
            raise ValidationError("max_iter must be >= 1")
        if not (self.mass_cap is None or self.mass_cap == "auto" or float(self.mass_cap) > 0):
            raise ValidationError("mass_cap must be positive, 'auto' or None")

    def threshold(self, value):
        return self.tol_gap * (1.0 + abs(value)) if np.isfinite(value) else self.tol_gap


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    mu1: DiscreteMeasure
    mu2: DiscreteMeasure
    F1: object
    F2: object
    cost: object
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.mu1.ground is not self.cost.rows or self.mu2.ground is not self.cost.cols:
            raise GroundMismatch("measure grounds must be the cost's row/column grounds")

    @property
    def shape(self):
        return self.cost.shape

    def with_options(self, **changes):
        opts = SolverOptions(**{**self.options.__dict__, **changes})
        return ProblemSpec(self.mu1, self.mu2, self.F1, self.F2, self.cost, opts)

    def scaled(self, lam):
        """The same problem with both reference measures multiplied by ``lam``."""
        return ProblemSpec(DiscreteMeasure(self.mu1.ground, self.mu1.weights * lam),
                           DiscreteMeasure(self.mu2.ground, self.mu2.weights * lam),
                           self.F1, self.F2, self.cost, self.options)


@dataclass(frozen=True, eq=False)
class SolveReport:
    coupling: Coupling
    primal_value: float
    dual_bound: Optional[float]
    gap: Optional[float]
    status: Status
    diagnostics: dict
    potentials: Optional[dict] = None


# -- objective ----------------------------------------------------------------

def objective_weights(spec, G):
    """Objective for a raw matrix or a stack of matrices (leading batch axes)."""
    G = np.asarray(G, dtype=float)
    return (divergence_weights(spec.F1, G.sum(axis=-1), spec.mu1.weights)
            + divergence_weights(spec.F2, G.sum(axis=-2), spec.mu2.weights)
            + spec.cost.perspective_rows(G).sum(axis=-1))


def objective(spec, gamma):
    if gamma.mass.shape != spec.shape:
        raise ShapeMismatch(f"coupling shape {gamma.mass.shape} != problem shape {spec.shape}")
    if gamma.rows is not spec.cost.rows or gamma.cols is not spec.cost.cols:
        raise GroundMismatch("coupling lives on different ground sets")
    return float(objective_weights(spec, gamma.mass))


def null_value(spec):
    """Objective of the zero coupling, ``F1(0)|mu1| + F2(0)|mu2|``."""
    return float(mass_mul(spec.F1.F0, spec.mu1.mass) + mass_mul(spec.F2.F0, spec.mu2.mass))


# -- feasibility / coercivity ------------------------------------------------

@dataclass(frozen=True)
class FeasibilityReport:
    k_interval: tuple
    k_nonempty: bool
    zero_cost_null: bool           # both F_i(0) finite
    separable_bound: Optional[bool]  # None: not guaranteed (martingale)
    hull_ok: bool                  # martingale support-geometry pre-check
    feasible: Optional[bool]       # None: no sufficient condition holds
    reason: str

    def to_dict(self):
        return {"k_interval": list(self.k_interval), "k_nonempty": self.k_nonempty,
                "zero_cost_null": self.zero_cost_null, "separable_bound": self.separable_bound,
                "hull_ok": self.hull_ok, "feasible": self.feasible, "reason": self.reason}


def _scaled_domain(e, m):
    lo, hi = e.domain
    if m == 0:
        return 0.0, 0.0
    return m * lo, m * hi


def k_interval(spec):
    """``K = m1 D(F1) intersected with m2 D(F2)`` as ``(lo, hi)``; empty when lo > hi."""
    l1, h1 = _scaled_domain(spec.F1, spec.mu1.mass)
    l2, h2 = _scaled_domain(spec.F2, spec.mu2.mass)
    return max(l1, l2), min(h1, h2)


def _martingale_hull_ok(spec):
    cost = spec.cost
    if not isinstance(cost, MartingaleCost):
        return True
    if not (spec.F1.F0 == INF and spec.F2.superlinear):
        return True
    src = cost.x[spec.mu1.weights > 0]
    tgt = cost.y[spec.mu2.weights > 0]
    if src.size == 0:
        return True
    if tgt.size == 0:
        return False
    return bool(src.min() >= tgt.min() - cost.mean_tol and src.max() <= tgt.max() + cost.mean_tol)


def check_feasibility(spec):
    lo, hi = k_interval(spec)
    k_ok = lo <= hi * (1 + DOMAIN_RTOL) + ZERO_MASS
    cond_i = bool(np.isfinite(spec.F1.F0) and np.isfinite(spec.F2.F0))
    cost = spec.cost
    if isinstance(cost, MartingaleCost):
        separable = None
    elif isinstance(cost, LinearCost):
        separable = bool(np.all(np.isfinite(cost.c)))
    else:
        separable = True
    cond_ii = bool(k_ok and spec.mu1.mass * spec.mu2.mass != 0 and separable)
    hull = _martingale_hull_ok(spec)

    if not k_ok:
        feasible, reason = False, "K empty"
    elif not hull:
        feasible, reason = False, "martingale support outside target hull"
    elif cond_i:
        feasible, reason = True, "null coupling has finite cost"
    elif cond_ii:
        feasible, reason = True, "K nonempty and cost separably bounded"
    else:
        feasible, reason = None, "no sufficient condition holds"
    return FeasibilityReport((lo, hi), bool(k_ok), cond_i, separable, hull, feasible, reason)


@dataclass(frozen=True)
class CoercivityReport:
    superlinear: bool
    compact: bool
    certifiable: bool

    def to_dict(self):
        return dict(self.__dict__)


def check_coercivity(spec):
    sup = spec.F1.superlinear and spec.F2.superlinear
    # finite grounds are compact
    total = spec.F1.recession + spec.F2.recession + spec.cost.lower_bound
    compact = bool(total > 0)
    return CoercivityReport(bool(sup), compact, bool(sup or compact))


def feasibility_witness(spec):
    """Null coupling when both ``F_i(0)`` are finite, else a scaled product."""
    n1, n2 = spec.shape
    zero = Coupling(spec.cost.rows, spec.cost.cols, np.zeros((n1, n2)))
    if np.isfinite(spec.F1.F0) and np.isfinite(spec.F2.F0):
        return zero
    lo, hi = k_interval(spec)
    m1, m2 = spec.mu1.mass, spec.mu2.mass
    if lo > hi * (1 + DOMAIN_RTOL) or m1 * m2 == 0:
        return zero
    theta = float(np.clip(np.sqrt(m1 * m2), lo, hi))
    return product_coupling(spec.mu1, spec.mu2, total=theta)


def auto_mass_cap(spec):
    """Upper bound on the total mass of any minimiser.

    Jensen gives ``E(gamma) >= g(t) = m1 F1(t/m1) + m2 F2(t/m2) + t inf C`` for a
    coupling of mass ``t``; minimisers satisfy ``g(t) <= null value`` (or lie in
    ``K`` when the null value is infinite).  The default ``4 max(m1, m2) + 1``
    is enlarged when this bound exceeds it.
    """
    if not (spec.F1.superlinear and spec.F2.superlinear):
        return None
    m1, m2 = spec.mu1.mass, spec.mu2.mass
    base = 4.0 * max(m1, m2) + 1.0
    lb = spec.cost.lower_bound
    if not np.isfinite(lb):
        return base
    v0 = null_value(spec)
    if not np.isfinite(v0):
        hi = k_interval(spec)[1]
        return max(base, hi * (1 + 1e-6)) if np.isfinite(hi) else None

    def g(t):
        out = t * lb
        for e, m in ((spec.F1, m1), (spec.F2, m2)):
            out += float(e.F(t / m)) * m if m > 0 else (INF if t > 0 else 0.0)
        return out

    hi = base
    for _ in range(200):
        if g(hi) > v0:
            break
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) <= v0:
            lo = mid
        else:
            hi = mid
    return max(base, hi * (1 + 1e-6))


# -- polishing ----------------------------------------------------------------

def _fit_marginal(G, e, mu, axis):
    """Rescale slices so the marginal sits inside ``[a mu, b mu]`` (Range kinds)."""
    if e.domain == (0.0, INF):
        return G
    a, b = e.domain
    s = G.sum(axis=axis)
    target = np.clip(s, a * mu, b * mu)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(s > 0, target / np.where(s > 0, s, 1.0), 1.0)
    return G * (f[:, None] if axis == 1 else f[None, :])


def _fit_martingale(G, cost):
    d = cost.y[None, :] - cost.x[:, None]
    up, down = d > 0, d < 0
    P = np.sum(G * np.where(up, d, 0.0), axis=1)
    N = np.sum(G * np.where(down, -d, 0.0), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        fp = np.where(P > N, N / np.where(P > 0, P, 1.0), 1.0)
        fn = np.where(N > P, P / np.where(N > 0, N, 1.0), 1.0)
    return np.where(up, G * fp[:, None], np.where(down, G * fn[:, None], G))


def polish(spec, G, sweeps=500):
    """Make hard constraints hold to rounding precision.

    Negative entries are clipped, forbidden entries zeroed, then row and
    column rescalings (indicator-type marginals) alternate with per-row
    martingale corrections until nothing moves.
    """
    G = np.where(_conic.allowed_mask(spec), np.maximum(np.asarray(G, dtype=float), 0.0), 0.0)
    mart = isinstance(spec.cost, MartingaleCost)
    for _ in range(sweeps):
        prev = G
        G = _fit_marginal(G, spec.F1, spec.mu1.weights, axis=1)
        G = _fit_marginal(G, spec.F2, spec.mu2.weights, axis=0)
        if mart:
            G = _fit_martingale(G, spec.cost)
        if np.max(np.abs(G - prev), initial=0.0) <= 1e-16 * max(1.0, np.max(G, initial=0.0)):
            break
    return G


# -- solve ----------------------------------------------------------------------

def _resolve_cap(spec):
    cap = spec.options.mass_cap
    if cap == "auto":
        return auto_mass_cap(spec)
    return None if cap is None else float(cap)


def solve(spec):
    """Minimise the primal objective; see :class:`SolveReport` for the result."""
    t0 = time.perf_counter()
    opts = spec.options
    feas = check_feasibility(spec)
    if feas.feasible is False:
        raise InfeasibleProblem(feas.reason)
    coer = check_coercivity(spec)
    cap = _resolve_cap(spec)

    witness = feasibility_witness(spec)
    candidates = [("witness", witness.mass)]
    problem, G = _conic.primal_problem(spec, cap)
    status = _conic.run(problem, max_iter=opts.max_iter)
    stats = problem.solver_stats
    iters = int(getattr(stats, "num_iters", 0) or 0) if stats is not None else 0
    log.debug("primal conic status %s after %d iterations", status, iters)

    if G.value is not None and status not in ("infeasible", "infeasible_inaccurate",
                                               "unbounded", "unbounded_inaccurate"):
        candidates.insert(0, ("conic", polish(spec, G.value)))
    values = [float(objective_weights(spec, g)) for _, g in candidates]
    best = int(np.argmin(values))
    if not np.isfinite(values[best]):
        if status in ("infeasible", "infeasible_inaccurate"):
            raise InfeasibleProblem("solver certificate: no coupling of finite cost")
        if status in ("optimal", "optimal_inaccurate"):
            raise InfeasibleProblem("no finite-cost coupling found")

    coupling = Coupling(spec.cost.rows, spec.cost.cols, candidates[best][1])
    primal = objective(spec, coupling)
    hit_limit = status in ("user_limit", "solver_error") or iters >= opts.max_iter
    diag = {
        "feasibility": feas.to_dict(),
        "coercivity": coer.to_dict(),
        "solver_status": status,
        "iterations": iters,
        "mass_cap": cap,
        "mass_cap_active": bool(cap is not None and coupling.total >= cap * (1 - 1e-6)),
        "start": candidates[best][0],
    }
    if isinstance(spec.cost, MartingaleCost):
        diag["martingale_residual"] = float(np.max(np.abs(
            spec.cost.mean_residual(coupling.mass)), initial=0.0))

    bound = gap = None
    potentials = None
    if opts.certify and coer.certifiable:
        from .duality import dual_ascent_rc
        res = dual_ascent_rc(spec, opts)
        bound = res.bound
        gap = primal - bound if np.isfinite(primal) else INF
        potentials = {"phi": res.phi.tolist(), "rc_phi": res.rc_phi.tolist()}
        diag["dual_flags"] = list(res.flags)

    if hit_limit or not np.isfinite(primal):
        st = Status.ITER_LIMIT
    elif gap is not None and gap <= opts.threshold(primal):
        st = Status.OPTIMAL
    else:
        st = Status.FEASIBLE
    diag["seconds"] = time.perf_counter() - t0
    return SolveReport(coupling, primal, bound, gap, st, diag, potentials)


# -- brute-force oracle ---------------------------------------------------------

ORACLE_BUDGET = 400_000
ORACLE_NEG_TOL = 1e-12


def _pinned_ratio(e):
    """``s`` when ``F`` is finite only at ``s`` (an exact marginal constraint), else None."""
    a, b = getattr(e, "a", None), getattr(e, "b", None)
    return a if a is not None and a == b else None


def _hard_equalities(spec, free):
    """``A g = b`` on the free entries, satisfied by every coupling of finite value."""
    n1, n2 = spec.shape
    ii, jj = np.nonzero(free)
    A, b = [], []
    s1, s2 = _pinned_ratio(spec.F1), _pinned_ratio(spec.F2)
    if s1 is not None:
        for i in range(n1):
            A.append((ii == i).astype(float))
            b.append(s1 * spec.mu1.weights[i])
    if s2 is not None:
        for j in range(n2):
            A.append((jj == j).astype(float))
            b.append(s2 * spec.mu2.weights[j])
    if isinstance(spec.cost, MartingaleCost):
        x, y = spec.cost.x, spec.cost.y
        for i in range(n1):
            A.append(np.where(ii == i, y[jj] - x[i], 0.0))
            b.append(0.0)
    return np.array(A, dtype=float).reshape(len(A), len(ii)), np.array(b, dtype=float)


def _interior_point(A, b, upper):
    """Maximise ``t`` subject to ``A g = b`` and ``t <= g <= upper``; None if infeasible."""
    k = A.shape[1]
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-np.eye(k), np.ones((k, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(k), A_eq=np.hstack([A, np.zeros((len(A), 1))]),
                  b_eq=b, bounds=[(0.0, upper)] * k + [(0.0, upper)], method="highs")
    return res.x[:k] if res.status == 0 else None


def _entry_max(A, b, upper):
    """Largest value each entry can take on ``{A g = b, 0 <= g <= upper}``."""
    k = A.shape[1]
    out = np.zeros(k)
    for e in range(k):
        c = np.zeros(k)
        c[e] = -1.0
        res = linprog(c, A_eq=A, b_eq=b, bounds=[(0.0, upper)] * k, method="highs")
        if res.status != 0:
            return None
        out[e] = -res.fun
    return out


def _batched_min(spec, free, origin, basis, coords, chunk=100_000):
    """Minimum over free entries ``origin + coords @ basis.T``."""
    best_v, best_g = INF, None
    n1, n2 = spec.shape
    scale = max(1.0, float(np.abs(origin).max(initial=0.0)))
    for s in range(0, len(coords), chunk):
        vals = origin[None, :] + coords[s:s + chunk] @ basis.T
        vals[(vals < 0) & (vals > -ORACLE_NEG_TOL * scale)] = 0.0
        ok = np.all(vals >= 0, axis=1)
        if not ok.any():
            continue
        vals = vals[ok]
        G = np.zeros((len(vals), n1, n2))
        G[:, free] = vals
        obj = objective_weights(spec, G)
        k = int(np.argmin(obj))
        if obj[k] < best_v:
            best_v, best_g = float(obj[k]), G[k]
    return best_v, best_g


def _lattice(levels, k):
    grids = np.meshgrid(*([levels] * k), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def oracle_solve(spec, grid_step=None, mass_max=None, refine_rounds=400, final_step=None):
    """Exhaustive grid search followed by a local pattern search.

    Entries forced to zero (null reference rows/columns under superlinear
    entropies, infinite linear costs) are pruned.  Exact linear constraints
    (martingale means, marginals pinned by an indicator entropy) are
    eliminated: the search runs over coordinates of their solution set, and
    entries that a linear program shows must vanish are pruned as well.
    Without such constraints the coarse grid is ``{0, step, ..., mass_max}``
    per free entry; otherwise it is a box of the same resolution in the
    orthonormal coordinates of the solution set.  Refinement rounds search
    ``incumbent + h * {-2..2}^d`` (``{-1, 0, 1}^d`` beyond seven
    coordinates); ``h`` is halved whenever a round brings no improvement,
    down to ``final_step``.  The feasibility witness and a relative-interior
    point seed the search.  Returns ``(value, Coupling)``.
    """
    n1, n2 = spec.shape
    if n1 * n2 > 9:
        raise TooLarge(f"oracle limited to 9 entries, got {n1}x{n2}")
    free = _conic.allowed_mask(spec)
    zero = np.zeros((n1, n2))
    if mass_max is None:
        top = max(spec.mu1.mass, spec.mu2.mass, 1e-300)
        mass_max = 2.0 ** np.ceil(np.log2(2.0 * top))
    if final_step is None:
        final_step = mass_max * 2.0 ** -26

    def done(v, g):
        return float(v), Coupling(spec.cost.rows, spec.cost.cols, g)

    A, b = _hard_equalities(spec, free)
    seeds = [np.where(free, feasibility_witness(spec).mass, 0.0)[free]]
    if len(A) and free.any():
        top = _entry_max(A, b, mass_max)
        if top is None:
            return done(INF, zero)
        keep = np.flatnonzero(top > ORACLE_NEG_TOL * mass_max)
        sub = np.zeros_like(free)
        sub[tuple(np.argwhere(free)[keep].T)] = True
        free = sub
        A, b = _hard_equalities(spec, free)
        seeds = [seeds[0][keep]]
    k = int(free.sum())
    if k == 0:
        return done(objective_weights(spec, zero), zero)

    if len(A):
        origin = np.linalg.lstsq(A, b, rcond=None)[0]
        basis = null_space(A)
        inner = _interior_point(A, b, mass_max)
        if inner is not None:
            seeds.append(inner)
        lo = -mass_max * 2.0 ** np.ceil(np.log2(np.sqrt(k)))
    else:
        origin, basis, lo = np.zeros(k), np.eye(k), 0.0
    d = basis.shape[1]
    if d == 0:
        best_v, best_g = _batched_min(spec, free, origin, basis, np.zeros((1, 0)))
        return done(best_v, zero if best_g is None else best_g)

    span = mass_max - lo
    if grid_step is None:
        per = max(2, int(np.floor(ORACLE_BUDGET ** (1.0 / d))))
        grid_step = span / 2.0 ** np.floor(np.log2(per - 1))
    levels = np.arange(lo, mass_max + 0.5 * grid_step, grid_step)
    if len(levels) ** d > 50 * ORACLE_BUDGET:
        raise TooLarge(f"{len(levels)}^{d} grid points exceed the oracle budget")

    best_v, best_g = _batched_min(spec, free, origin, basis, _lattice(levels, d))
    best_z = None if best_g is None else basis.T @ (best_g[free] - origin)
    for seed in seeds:
        z = basis.T @ (seed - origin)
        v, g = _batched_min(spec, free, origin, basis, z[None, :])
        if g is not None and v < best_v:
            best_v, best_g, best_z = v, g, z
    if best_g is None:
        return done(INF, zero)

    reach = 2.0 if d <= 7 else 1.0
    unit = _lattice(np.arange(-reach, reach + 1.0), d)
    h = grid_step / 2.0
    for _ in range(refine_rounds):
        if h < final_step:
            break
        cand = best_z[None, :] + unit * h
        v, g = _batched_min(spec, free, origin, basis, cand)
        if g is not None and v < best_v:
            best_v, best_g = v, g
            best_z = basis.T @ (g[free] - origin)
        else:
            h /= 2.0
    return done(best_v, best_g)


# -- C-monotonicity -------------------------------------------------------------

@dataclass(frozen=True)
class MonotonicityReport:
    trials: int
    violations: int
    worst: float
    examples: list

    def to_dict(self):
        return dict(self.__dict__)


MONOTONE_TOL = 1e-7


def _random_split(q, rng):
    """Random ``m1`` with ``0 <= m1 <= q`` and ``sum m1 = 1`` (``sum q = 2``)."""
    w = rng.exponential(size=q.shape) * (q > 0)
    lo, hi = 0.0, 1.0
    while np.minimum(q, hi * w).sum() < 1.0:
        hi *= 2.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if np.minimum(q, mid * w).sum() < 1.0:
            lo = mid
        else:
            hi = mid
    m1 = np.minimum(q, hi * w)
    return m1 / m1.sum()


def c_monotonicity_check(spec, gamma, trials=1000, seed=0, row_floor=1e-9):
    """Search for two-row redistributions that lower the summed weak cost.

    For rows ``i != k`` with conditionals ``p_i, p_k`` a candidate pair
    ``m1 + m2 = p_i + p_k`` of probabilities is drawn (half the time as a
    mixture of ``p_i`` and ``p_k``, otherwise uniformly-ish inside the box
    ``0 <= m1 <= p_i + p_k``); a violation is recorded when
    ``C(x_i, p_i) + C(x_k, p_k)`` exceeds ``C(x_i, m1) + C(x_k, m2)`` by more
    than 1e-7.  Rows lighter than ``row_floor`` times the total mass are
    skipped.
    """
    G = gamma.mass
    m = G.sum(axis=1)
    rows = np.flatnonzero(m > max(ZERO_MASS, row_floor * m.sum()))
    if len(rows) < 2:
        return MonotonicityReport(trials, 0, 0.0, [])
    rng = np.random.default_rng(seed)
    cost = spec.cost
    P = G / np.where(m > 0, m, 1.0)[:, None]

    def C(i, p):
        return cost.row_perspective(i, p)

    violations, worst, examples = 0, 0.0, []
    for t in range(trials):
        i, k = rng.choice(rows, size=2, replace=False)
        pi, pk = P[i], P[k]
        q = pi + pk
        if t % 2 == 0:
            lam = rng.uniform()
            m1 = lam * pi + (1 - lam) * pk
        else:
            m1 = _random_split(q, rng)
        m2 = np.maximum(q - m1, 0.0)
        before = C(i, pi) + C(k, pk)
        after = C(i, m1) + C(k, m2)
        excess = before - after
        if excess > worst:
            worst = float(excess)
        if excess > MONOTONE_TOL:
            violations += 1
            if len(examples) < 5:
                examples.append({"rows": [int(i), int(k)], "excess": float(excess)})
    return MonotonicityReport(trials, violations, worst, examples)
