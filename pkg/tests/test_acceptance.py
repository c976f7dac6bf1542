"""Acceptance criteria 1 to 10.

Each criterion is one test.  Every run records a PASS/FAIL line per
criterion, printed at the end of the pytest session (see ``conftest.py``)
or directly when this file is executed as a script.
"""

import functools
import time

import numpy as np
import pytest

from corpus import NAMES, build, is_classical_ot
from oracles import grid_inf, rc_simplex
from woet.cost import MartonCost, convex_envelope_1d
from woet.duality import dual_ascent_rc
from woet.entropy import KL, ChiSquared, Indicator1, Range, divergence_weights, reverse_weights
from woet.martingale import (MartingaleSpec, check_homogeneous_equivalence, dual_ascent_lambda_m,
                             solve_moet)
from woet.measures import Coupling, DiscreteMeasure, GroundSet
from woet.solver import (ProblemSpec, c_monotonicity_check, null_value, objective, oracle_solve,
                         solve)

INF = np.inf
ENTROPIES = [KL(), Indicator1(), Range(0.5, 2.0), ChiSquared()]

RESULTS = {}

TITLES = {
    1: "conjugate identities and Fenchel-Young",
    2: "forward and reverse divergences agree",
    3: "reverse witnesses attain equality",
    4: "solver agrees with brute-force oracle on 20 instances",
    5: "dual ascent closes the duality gap",
    6: "optimal value is positively homogeneous",
    7: "closed-form values",
    8: "martingale transport, its dual and homogeneous form",
    9: "optimal plans are C-monotone",
    10: "Marton R_C transform matches simplex brute force",
}


def criterion(number, budget=None):
    """Record PASS/FAIL for acceptance criterion ``number``; ``budget`` is a runtime limit in seconds."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs) or ""
                elapsed = time.perf_counter() - t0
                if budget is not None:
                    assert elapsed < budget, f"runtime {elapsed:.2f}s exceeds {budget}s"
            except Exception as exc:
                RESULTS[number] = (False, f"{type(exc).__name__}: {exc}".splitlines()[0],
                                   time.perf_counter() - t0)
                raise
            RESULTS[number] = (True, detail, elapsed)
        return run
    return wrap


def summary_lines():
    lines = []
    for n in range(1, 11):
        if n in RESULTS:
            ok, detail, secs = RESULTS[n]
            tag = "PASS" if ok else "FAIL"
        else:
            tag, detail, secs = "FAIL", "not run", 0.0
        lines.append(f"criterion {n:2d} {tag}: {TITLES[n]} ({secs:.2f}s) {detail}".rstrip())
    return lines


# -- 1 ------------------------------------------------------------------------------------

def _stationary_s(e, phi):
    """Maximiser of ``s phi - F(s)`` (attains Fenchel-Young equality)."""
    if isinstance(e, KL):
        return np.exp(phi)
    if isinstance(e, ChiSquared):
        return np.maximum(0.0, 1.0 + 0.5 * phi)
    return np.where(phi > 0, e.b, e.a)


@criterion(1, budget=1.0)
def test_criterion_01_conjugates():
    s = np.linspace(0.0, 10.0, 101)
    worst_id = worst_fy = worst_eq = worst_grid = 0.0
    for e in ENTROPIES:
        phi = np.linspace(-10.0, min(10.0, e.recession), 101)
        worst_id = max(worst_id, np.max(np.abs(e.Fcirc(phi) + e.Fstar(-phi))))
        with np.errstate(invalid="ignore"):
            gap = s[:, None] * phi[None, :] - (e.F(s)[:, None] + e.Fstar(phi)[None, :])
        worst_fy = max(worst_fy, float(np.nanmax(np.where(np.isinf(gap), -INF, gap))))
        st = _stationary_s(e, phi)
        lhs, rhs = e.F(st) + e.Fstar(phi), st * phi
        worst_eq = max(worst_eq, np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))
        for p in np.linspace(-2.0, 3.0, 101):
            oracle = grid_inf(lambda t: p * t + e.F(t), 0.0, 12.0)
            worst_grid = max(worst_grid, abs(float(e.Fcirc(p)) - oracle))
    assert worst_id <= 1e-12, f"F° + F*(-.) off by {worst_id:.2e}"
    assert worst_fy <= 1e-12, f"Fenchel-Young violated by {worst_fy:.2e}"
    assert worst_eq <= 1e-12, f"equality at stationary pairs off by {worst_eq:.2e}"
    assert worst_grid <= 1e-6, f"grid oracle differs by {worst_grid:.2e}"
    return f"identity {worst_id:.1e}, grid {worst_grid:.1e}"


# -- 2 ------------------------------------------------------------------------------------

@criterion(2, budget=1.0)
def test_criterion_02_forward_equals_reverse():
    rng = np.random.default_rng(2)
    worst, finite, infinite = 0.0, 0, 0
    for k in range(200):
        n = int(rng.integers(1, 6))
        mu = rng.exponential(size=n) * (rng.uniform(size=n) > 0.2)
        if k % 2:
            gamma = mu * rng.uniform(0.5, 2.0, size=n)   # inside every Range domain
        else:
            gamma = rng.exponential(size=n) * (rng.uniform(size=n) > 0.2)
        for e in ENTROPIES:
            f, r = float(divergence_weights(e, gamma, mu)), float(reverse_weights(e, mu, gamma))
            if np.isinf(f) or np.isinf(r):
                assert f == r, f"{e}: {f} vs {r}"
                infinite += 1
            else:
                worst = max(worst, abs(f - r))
                finite += 1
    assert worst <= 1e-10, f"finite values differ by {worst:.2e}"
    return f"{finite} finite (max diff {worst:.1e}), {infinite} infinite"


# -- 3 ------------------------------------------------------------------------------------

@criterion(3, budget=1.0)
def test_criterion_03_witnesses():
    closed = {
        "KL": lambda p: 1.0 / (1.0 - p),
        "Indicator1": lambda p: np.ones_like(p),
        "ChiSquared": lambda p: 1.0 / np.sqrt(1.0 - p),
    }
    worst = 0.0
    for e in (KL(), Indicator1(), ChiSquared()):
        top = min(e.F0, 5.0)
        psi = np.linspace(-5.0, top, 400, endpoint=not np.isfinite(e.F0) or e.F0 > 5.0)
        psi = psi[psi < e.F0]
        s = e.witness(psi)
        np.testing.assert_allclose(s, closed[e.kind](psi), rtol=1e-14)
        assert np.all(s > 0)
        worst = max(worst, np.max(np.abs(e.R(s) + e.Rstar(psi) - s * psi)))
    assert worst <= 1e-10, f"R(s) + R*(psi) - s psi = {worst:.2e}"
    return f"max residual {worst:.1e}"


# -- 4 ------------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def reports():
    return {name: solve(build(name)) for name in NAMES}


@criterion(4, budget=120.0)
def test_criterion_04_oracle_equivalence(reports):
    bad, worst = [], 0.0
    for name in NAMES:
        value, _ = oracle_solve(build(name))
        diff = abs(reports[name].primal_value - value)
        tol = max(1e-3, 1e-2 * abs(value))
        worst = max(worst, diff)
        if not diff <= tol:
            bad.append(f"{name}: solve {reports[name].primal_value:.6g} oracle {value:.6g}")
    assert not bad, "; ".join(bad)
    return f"20 instances, max |solve - oracle| {worst:.1e}"


# -- 5 ------------------------------------------------------------------------------------

@criterion(5, budget=120.0)
def test_criterion_05_strong_duality(reports):
    bad, worst, worst_ot, count = [], 0.0, 0.0, 0
    for name in NAMES:
        spec = build(name)
        if not (spec.F1.superlinear and spec.F2.superlinear):
            continue
        count += 1
        res = dual_ascent_rc(spec)
        gap = reports[name].primal_value - res.bound
        limit = 1e-5 if is_classical_ot(spec) else 1e-4
        if is_classical_ot(spec):
            worst_ot = max(worst_ot, gap)
        else:
            worst = max(worst, gap)
        if not -1e-9 <= gap <= limit:
            bad.append(f"{name}: gap {gap:.3e}")
    assert not bad, "; ".join(bad)
    return f"{count} instances, max gap {worst:.1e}, classical OT {worst_ot:.1e}"


# -- 6 ------------------------------------------------------------------------------------

HOMOGENEITY_SET = ["lin_kl_kl_cross", "lin_kl_chi_3x3", "lin_range_kl_3x3", "mart_kl_kl",
                   "marton_kl_kl_quad"]


@criterion(6)
def test_criterion_06_homogeneity(reports):
    worst = 0.0
    for name in HOMOGENEITY_SET:
        spec, base = build(name), reports[name].primal_value
        assert base > 1e-3, f"{name} has a near-zero value"
        for lam in (0.5, 2.0, 10.0):
            v = solve(spec.scaled(lam)).primal_value
            rel = abs(v - lam * base) / abs(lam * base)
            worst = max(worst, rel)
            assert rel <= 1e-5, f"{name}, lambda {lam}: {v} vs {lam * base}"
    return f"max relative deviation {worst:.1e}"


# -- 7 ------------------------------------------------------------------------------------

@criterion(7)
def test_criterion_07_closed_forms(reports):
    r = reports["lin_kl_kl_single"]
    assert abs(r.primal_value - 1.0) <= 1e-5, f"value {r.primal_value}"
    assert abs(r.coupling.total - 2.0) <= 1e-4, f"mass {r.coupling.total}"
    for name in NAMES:
        spec = build(name)
        zero = Coupling(spec.cost.rows, spec.cost.cols, np.zeros(spec.shape))
        expect = spec.F1.F0 * spec.mu1.mass + spec.F2.F0 * spec.mu2.mass
        assert objective(spec, zero) == expect == null_value(spec), name
    return f"value {r.primal_value:.8f}, mass {r.coupling.total:.6f}"


# -- 8 ------------------------------------------------------------------------------------

@criterion(8)
def test_criterion_08_martingale():
    X = GroundSet([0.0, 1.0, 2.0])
    c = np.subtract.outer(X.line, X.line) ** 2
    spec = MartingaleSpec(X, DiscreteMeasure(X, [0, 1, 0]), DiscreteMeasure(X, [.5, 0, .5]),
                          Indicator1(), Indicator1(), c)
    r = solve_moet(spec)
    assert abs(r.primal_value - 1.0) <= 1e-6, f"E_M = {r.primal_value}"
    resid = r.diagnostics["martingale_residual"]
    assert resid <= 1e-12, f"residual {resid:.2e}"
    _, dual = dual_ascent_lambda_m(spec)
    assert dual >= 1.0 - 1e-4, f"Lambda_M bound {dual}"
    spreads = []
    for p in (1.0, 2.0):
        chk = check_homogeneous_equivalence(spec, p=p)
        spreads.append(chk.discrepancy)
        assert chk.discrepancy <= 1e-4, f"p={p}: {chk.to_dict()}"
    return f"E_M {r.primal_value:.8f}, dual {dual:.8f}, spread {max(spreads):.1e}"


# -- 9 ------------------------------------------------------------------------------------

@criterion(9)
def test_criterion_09_monotonicity(reports):
    total = 0
    for name in NAMES:
        rep = c_monotonicity_check(build(name), reports[name].coupling, trials=1000, seed=9)
        assert rep.violations == 0, f"{name}: {rep.violations} violations, worst {rep.worst:.2e}"
        total += rep.trials
    X = GroundSet([0.0, 1.0])
    planted = ProblemSpec(DiscreteMeasure(X, [.5, .5]), DiscreteMeasure(X, [.5, .5]), Indicator1(),
                          Indicator1(), MartonCost(X, X, "quadratic"))
    crossed = Coupling(X, X, [[0.0, 0.5], [0.5, 0.0]])
    found = c_monotonicity_check(planted, crossed, trials=1000, seed=9)
    assert found.violations >= 1, "planted suboptimal plan not detected"
    return f"{total} trials clean, planted plan: {found.violations} violations"


# -- 10 -----------------------------------------------------------------------------------

@criterion(10)
def test_criterion_10_marton_reduction():
    rng = np.random.default_rng(10)
    worst, nonconvex, cases = 0.0, 0, 0
    for theta in ("quadratic", "absolute"):
        for _ in range(8):
            n1, n2 = (int(v) for v in rng.integers(1, 5, size=2))
            X = GroundSet(np.sort(rng.choice(np.arange(-3.0, 4.0), size=n1, replace=False)))
            Y = GroundSet(np.sort(rng.choice(np.arange(-3.0, 4.0), size=n2, replace=False)))
            phi = rng.normal(scale=2.0, size=n2)
            env = convex_envelope_1d(Y.line, phi)
            nonconvex += int(np.any(env(Y.line) < phi - 1e-12))
            cost = MartonCost(X, Y, theta)
            diff = np.max(np.abs(cost.rc_transform(phi) - rc_simplex(cost, phi)))
            worst = max(worst, diff)
            cases += 1
    assert worst <= 1e-6, f"max difference {worst:.2e}"
    assert nonconvex > 0, "no case exercised a strict envelope"
    return f"{cases} cases ({nonconvex} with strict envelope), max diff {worst:.1e}"


if __name__ == "__main__":
    cache = {name: solve(build(name)) for name in NAMES}
    for fn in (test_criterion_01_conjugates, test_criterion_02_forward_equals_reverse,
               test_criterion_03_witnesses):
        try:
            fn()
        except Exception:  # noqa: BLE001 - recorded as FAIL
            pass
    for fn in (test_criterion_04_oracle_equivalence, test_criterion_05_strong_duality,
               test_criterion_06_homogeneity, test_criterion_07_closed_forms,
               test_criterion_09_monotonicity):
        try:
            fn(cache)
        except Exception:  # noqa: BLE001
            pass
    for fn in (test_criterion_08_martingale, test_criterion_10_marton_reduction):
        try:
            fn()
        except Exception:  # noqa: BLE001
            pass
    print("\n".join(summary_lines()))
