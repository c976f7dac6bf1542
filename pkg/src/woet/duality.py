"""Dual objectives, dual feasibility and certified lower bounds.

Three equivalent dual formulations are evaluated:

``Lambda``
    pairs with ``phi1(x) + p(phi2) <= C(x, p)``, value ``sum mu_i F_i°(phi_i)``;
``LambdaR``
    pairs with ``R1*(phi1(x)) + p(R2*(phi2)) <= C(x, p)`` and
    ``sup phi_i < F_i(0)``, value ``sum mu_i phi_i``;
``RcForm``
    a single potential ``phi`` on the target ground with value
    ``sum mu1 F1°(R_C phi) + sum mu2 F2°(-phi)``.

Every value returned is a valid lower bound on the primal optimum.  The
constraint over all probabilities ``p`` reduces exactly to the transform
``phi1 <= R_C(-phi2)`` for the catalog costs.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from . import _conic
from .cost import LinearCost, MartonCost
from .errors import InfeasiblePair, ValidationError
from .extended import INF, mass_mul

log = logging.getLogger(__name__)

FEAS_RTOL = 1e-9
DOMAIN_MARGIN = 1e-9


class DualForm(str, enum.Enum):
    LAMBDA = "Lambda"
    LAMBDA_R = "LambdaR"
    RC = "RcForm"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class DualPair:
    phi1: np.ndarray | None
    phi2: np.ndarray
    form: DualForm = DualForm.LAMBDA

    def __post_init__(self):
        object.__setattr__(self, "form", DualForm(self.form))
        object.__setattr__(self, "phi2", np.asarray(self.phi2, dtype=float))
        if self.phi1 is not None:
            object.__setattr__(self, "phi1", np.asarray(self.phi1, dtype=float))
        elif self.form is not DualForm.RC:
            raise InfeasiblePair(f"{self.form} pairs need phi1")


@dataclass(frozen=True)
class PairFeasibility:
    feasible: bool
    max_violation: float
    reason: str = ""


def cost_scale(cost):
    """``|c|_max`` used to scale feasibility tolerances."""
    if isinstance(cost, LinearCost):
        fin = cost.c[np.isfinite(cost.c)]
        return float(np.abs(fin).max()) if fin.size else 0.0
    if isinstance(cost, MartonCost):
        diff = cost.X[:, None, :] - cost.Y[None, :, :]
        return float(cost._theta(diff).max())
    return 0.0


def feasibility_tol(spec):
    return FEAS_RTOL * (1.0 + cost_scale(spec.cost))


def _lambda_check(spec, phi1, phi2):
    if phi1.shape != (spec.shape[0],) or phi2.shape != (spec.shape[1],):
        return PairFeasibility(False, INF, "shape mismatch")
    if not (np.all(np.isfinite(phi1)) and np.all(np.isfinite(phi2))):
        return PairFeasibility(False, INF, "non-finite potential")
    for e, phi, name in ((spec.F1, phi1, "phi1"), (spec.F2, phi2, "phi2")):
        if not np.all(phi > -e.recession):
            return PairFeasibility(False, INF, f"{name} outside the domain of F°")
    rc = spec.cost.rc_transform(-phi2)
    with np.errstate(invalid="ignore"):
        viol = np.where(np.isfinite(rc), phi1 - rc, -INF)
    worst = float(np.max(viol))
    return PairFeasibility(worst <= feasibility_tol(spec), worst)


def feasibility_lambda(spec, pair):
    """Check ``phi1(x_i) <= R_C(-phi2)(x_i)`` for every row; reports the worst excess."""
    return _lambda_check(spec, pair.phi1, pair.phi2)


def _fcirc_sum(e, phi, mu):
    return float(np.sum(mass_mul(e.Fcirc(phi), mu)))


def dual_value_lambda(spec, pair):
    chk = feasibility_lambda(spec, pair)
    if not chk.feasible:
        raise InfeasiblePair(f"pair violates the Lambda constraint by {chk.max_violation:.3g}"
                             + (f" ({chk.reason})" if chk.reason else ""))
    return (_fcirc_sum(spec.F1, pair.phi1, spec.mu1.weights)
            + _fcirc_sum(spec.F2, pair.phi2, spec.mu2.weights))


def lift_to_lambda(spec, pair):
    """Map a ``LambdaR`` pair to the ``Lambda`` pair ``(R1*(phi1), R2*(phi2))``."""
    return DualPair(np.asarray(spec.F1.Rstar(pair.phi1), dtype=float),
                    np.asarray(spec.F2.Rstar(pair.phi2), dtype=float), DualForm.LAMBDA)


def feasibility_lambda_r(spec, pair):
    for e, phi, name in ((spec.F1, pair.phi1, "phi1"), (spec.F2, pair.phi2, "phi2")):
        if phi.size and not np.max(phi) < e.F0:
            return PairFeasibility(False, INF, f"sup {name} >= F(0)")
    return feasibility_lambda(spec, lift_to_lambda(spec, pair))


def dual_value_lambda_r(spec, pair):
    chk = feasibility_lambda_r(spec, pair)
    if not chk.feasible:
        raise InfeasiblePair(f"pair violates the LambdaR constraint by {chk.max_violation:.3g}"
                             + (f" ({chk.reason})" if chk.reason else ""))
    return float(pair.phi1 @ spec.mu1.weights + pair.phi2 @ spec.mu2.weights)


def _clamp_domain(e, v):
    if np.isfinite(e.recession):
        return np.maximum(v, -e.recession + DOMAIN_MARGIN)
    return v


def dual_value_rc(spec, phi):
    """``sum mu1 F1°(R_C phi) + sum mu2 F2°(-phi)``: a lower bound for every finite ``phi``."""
    phi = np.asarray(phi, dtype=float)
    rc = _clamp_domain(spec.F1, spec.cost.rc_transform(phi))
    return (_fcirc_sum(spec.F1, rc, spec.mu1.weights)
            + _fcirc_sum(spec.F2, _clamp_domain(spec.F2, -phi), spec.mu2.weights))


def dual_value(spec, pair):
    """Dispatch on ``pair.form``."""
    if pair.form is DualForm.RC:
        return dual_value_rc(spec, pair.phi2)
    if pair.form is DualForm.LAMBDA_R:
        return dual_value_lambda_r(spec, pair)
    return dual_value_lambda(spec, pair)


def rc_pair(spec, phi):
    """The ``Lambda`` pair ``(R_C phi, -phi)`` induced by an R_C-form potential."""
    phi = np.asarray(phi, dtype=float)
    return DualPair(spec.cost.rc_transform(phi), -phi, DualForm.LAMBDA)


# -- ascent ---------------------------------------------------------------------

def golden_max(f, a, b, iters=60):
    """Maximise a unimodal ``f`` on ``[a, b]``; returns ``(t, f(t))``."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def coordinate_ascent(value_fn, phi, width, sweeps=2, iters=40):
    """Golden-section line searches along each coordinate of a concave function."""
    phi = np.array(phi, dtype=float)
    best = value_fn(phi)
    for _ in range(sweeps):
        for j in range(len(phi)):
            base = phi[j]

            def along(t):
                trial = phi.copy()
                trial[j] = base + t
                return value_fn(trial)

            t, v = golden_max(along, -width, width, iters)
            if v > best:
                phi[j], best = base + t, v
        width *= 0.5
    return phi, best


@dataclass(frozen=True)
class DualAscentResult:
    phi: np.ndarray
    bound: float
    rc_phi: np.ndarray
    flags: tuple = ()


POLISH_MAX_COLS = 40


def dual_ascent_rc(spec, options=None):
    """Maximise the R_C-form dual; the bound is recomputed by :func:`dual_value_rc`.

    A conic solve of the dual program provides the starting potential, which
    is then refined by coordinate ascent.  Specs whose primal problem is
    provably infeasible return a bound of ``-inf`` with the ``infeasible``
    flag; non-superlinear entropies add ``hypotheses not met``.
    """
    from .solver import check_feasibility

    options = options or spec.options
    flags = []
    n2 = spec.shape[1]
    if not (spec.F1.superlinear and spec.F2.superlinear):
        flags.append("hypotheses not met")
    zero = np.zeros(n2)
    if check_feasibility(spec).feasible is False:
        return DualAscentResult(zero, -INF, np.full(spec.shape[0], np.nan),
                                tuple(flags + ["infeasible"]))
    try:
        spec.cost.rc_transform(zero)
    except ValidationError as exc:
        return DualAscentResult(zero, -INF, np.full(spec.shape[0], np.nan),
                                tuple(flags + [f"no R_C transform: {exc}"]))

    starts = [np.zeros(n2)]
    try:
        prob, phi_var = _conic.dual_problem(spec)
        status = _conic.run(prob, max_iter=options.max_iter)
        if phi_var.value is not None and np.all(np.isfinite(phi_var.value)):
            starts.insert(0, np.array(phi_var.value, dtype=float))
        if status not in ("optimal", "optimal_inaccurate"):
            flags.append(f"conic dual status {status}")
    except NotImplementedError as exc:
        flags.append(f"no conic dual: {exc}")

    scored = [(dual_value_rc(spec, p), i) for i, p in enumerate(starts)]
    value, idx = max(scored)
    phi = starts[idx]
    if n2 <= POLISH_MAX_COLS:
        width = 1e-4 * (1.0 + float(np.max(np.abs(phi), initial=0.0)))
        if not np.isfinite(value):
            width = 1.0 + cost_scale(spec.cost)
        phi, value = coordinate_ascent(lambda p: dual_value_rc(spec, p), phi, width)
    return DualAscentResult(phi, float(value), spec.cost.rc_transform(phi), tuple(flags))


def gap(spec, report, pairs=()):
    """``primal - best lower bound`` from dual ascent and any supplied pairs."""
    bounds = [dual_ascent_rc(spec).bound]
    if report.dual_bound is not None:
        bounds.append(report.dual_bound)
    for pair in pairs:
        try:
            bounds.append(dual_value(spec, pair))
        except InfeasiblePair:
            log.info("supplied pair is infeasible and is ignored")
    return float(report.primal_value - max(bounds))
