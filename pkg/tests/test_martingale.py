import numpy as np
import pytest

from woet.entropy import KL, ChiSquared, Indicator1, Range
from woet.errors import (ConstraintViolated, HypothesesNotMet, InfeasibleProblem, InfeasibleTriple,
                         ValidationError)
from woet.measures import Coupling, DiscreteMeasure, GroundSet
from woet.martingale import (DualTripleM, LiftedPlan, MartingaleSpec, canonical_lift,
                             check_homogeneous_equivalence, dual_ascent_lambda_m,
                             dual_value_lambda_m, functional_H, functional_R, homogeneous_marginal,
                             homogeneous_objective, perspective_cost_H, solve_moet,
                             triple_from_rc)
from woet.solver import oracle_solve

INF = np.inf
X3 = [0.0, 1.0, 2.0]
SQ = [[(b - a) ** 2 for b in X3] for a in X3]


def mspec(F1, F2, w1, w2, c=SQ, x=X3):
    X = GroundSet(x)
    return MartingaleSpec(X, DiscreteMeasure(X, w1), DiscreteMeasure(X, w2), F1, F2, np.array(c))


@pytest.fixture
def delta():
    return mspec(Indicator1(), Indicator1(), [0, 1, 0], [.5, 0, .5])


def test_spec_validation():
    plane = GroundSet([[0, 0], [1, 1]])
    with pytest.raises(ValidationError):
        MartingaleSpec(plane, DiscreteMeasure(plane, [1, 1]), DiscreteMeasure(plane, [1, 1]),
                       KL(), KL(), np.zeros((2, 2)))
    X, Y = GroundSet(X3), GroundSet(X3)
    with pytest.raises(ValidationError):
        MartingaleSpec(X, DiscreteMeasure(X, [1, 1, 1]), DiscreteMeasure(Y, [1, 1, 1]), KL(), KL(),
                       np.zeros((3, 3)))


# -- primal ------------------------------------------------------------------------

def test_delta_example(delta):
    r = solve_moet(delta)
    assert r.primal_value == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(r.coupling.mass, [[0, 0, 0], [.5, 0, .5], [0, 0, 0]], atol=1e-9)
    assert r.diagnostics["martingale_residual"] <= 1e-12


def test_delta_target_is_infeasible():
    with pytest.raises(InfeasibleProblem):
        solve_moet(mspec(Indicator1(), Indicator1(), [0, 1, 0], [0, 0, 1]))


def test_kl_indicator_zero_cost_matches_oracle():
    s = mspec(KL(), Indicator1(), [0, 1, 0], [.5, 0, .5], c=np.zeros((3, 3)))
    r = solve_moet(s)
    value, g = oracle_solve(s.problem())
    assert r.primal_value == pytest.approx(value, abs=1e-6)
    # gamma_2 = mu2 is forced, so only row 1 can carry it: KL(1 | 1) = 0
    assert r.primal_value == pytest.approx(0.0, abs=1e-6)


def test_residuals_small_on_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(5):
        s = mspec(KL(), KL(), rng.uniform(0.1, 1, 3), rng.uniform(0.1, 1, 3),
                  c=rng.uniform(0, 2, (3, 3)))
        r = solve_moet(s)
        m = r.coupling.row_masses
        res = np.abs(s.cost.mean_residual(r.coupling.mass))
        assert np.all(res <= 1e-9 * 2.0 * np.maximum(m, 1.0))


# -- Lambda_M dual ---------------------------------------------------------------------

def test_lambda_m_examples(delta):
    z = np.zeros(3)
    assert dual_value_lambda_m(delta, DualTripleM(z, z, z)) == 0.0
    # phi1 = 0 breaks the constraint at (x, y) = (0, 0); lowering phi1 off the
    # support of mu1 repairs it without changing the value
    with pytest.raises(InfeasibleTriple):
        dual_value_lambda_m(delta, DualTripleM(z, [1.0, 0.0, 1.0], z))
    t = DualTripleM([-1.0, 0.0, -1.0], [1.0, 0.0, 1.0], z)
    assert dual_value_lambda_m(delta, t) == pytest.approx(1.0)
    with pytest.raises(InfeasibleTriple):
        dual_value_lambda_m(delta, DualTripleM([5.0, 5.0, 5.0], z, z))
    with pytest.raises(InfeasibleTriple):
        dual_value_lambda_m(delta, DualTripleM(z[:2], z, z))


def test_lambda_m_ascent_closes_gap(delta):
    triple, value = dual_ascent_lambda_m(delta)
    assert value >= 1.0 - 1e-4
    assert value <= solve_moet(delta).primal_value + 1e-9


def test_lambda_m_weak_duality_random_triples():
    rng = np.random.default_rng(3)
    specs = [mspec(KL(), KL(), [.25, .5, .25], [.5, .25, .5], c=np.abs(np.subtract.outer(X3, X3))),
             mspec(KL(), Indicator1(), [.25, .5, .25], [.5, .25, .25]),
             mspec(ChiSquared(), Range(.5, 2), [.5, .5, .25], [.25, .5, .25])]
    primal = [solve_moet(s).primal_value for s in specs]
    x = np.array(X3)
    n = 0
    for s, v in zip(specs, primal):
        for _ in range(167):
            p2, h = rng.normal(size=3), rng.normal(size=3)
            slack = s.c - p2[None, :] - h[:, None] * (x[None, :] - x[:, None])
            p1 = slack.min(axis=1) - rng.exponential(size=3)
            if s.F1.recession < INF:
                continue
            assert dual_value_lambda_m(s, DualTripleM(p1, p2, h)) <= v + 1e-9
            n += 1
    assert n >= 500


def test_triple_from_rc_is_feasible():
    rng = np.random.default_rng(5)
    s = mspec(KL(), KL(), [.25, .5, .25], [.5, .25, .5])
    for _ in range(50):
        t = triple_from_rc(s, rng.normal(size=3))
        dual_value_lambda_m(s, t)


# -- H ---------------------------------------------------------------------------------

def test_H_examples():
    I, K = Indicator1(), KL()
    assert perspective_cost_H(I, I, 0, 2.0, 1, 2.0, 3.0) == pytest.approx(6.0)
    assert perspective_cost_H(I, I, 0, 1.0, 1, 2.0, 3.0) == INF
    assert perspective_cost_H(K, I, 0, 1.0, 1, 2.0, 0.0) == pytest.approx(2 * np.log(2) - 1)
    assert perspective_cost_H(K, K, 0, 1.0, 1, 1.0, INF) == 2.0


def test_H_kl_closed_form():
    K = KL()
    rng = np.random.default_rng(1)
    for _ in range(30):
        r1, r2, c = rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(0, 3)
        expect = r1 + r2 - 2 * np.sqrt(r1 * r2) * np.exp(-c / 2)
        assert perspective_cost_H(K, K, 0, r1, 1, r2, c) == pytest.approx(expect, abs=1e-9)


def test_H_below_reverse_entropies_plus_cost():
    K, I = KL(), Indicator1()
    for r1 in np.linspace(0.1, 3, 12):
        for c in (0.0, 0.5, 2.0):
            bound = float(K.R(r1)) + float(I.R(1.0)) + c
            assert perspective_cost_H(K, I, 0, r1, 1, 1.0, c) <= bound + 1e-12


# -- lifted plans ------------------------------------------------------------------------

def test_homogeneous_marginal_examples():
    X = GroundSet([0.0, 1.0])
    plan = LiftedPlan(X, [0], [1.0], [1], [1.0], [2.0])
    np.testing.assert_array_equal(homogeneous_marginal(plan, 1).weights, [2.0, 0.0])
    plan = LiftedPlan(X, [0], [2.0], [1], [1.0], [1.0], p=2.0)
    assert homogeneous_marginal(plan, 1).mass == 4.0
    assert plan.atoms == [((0.0, 2.0), (1.0, 1.0), 1.0)]


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_canonical_lift_reproduces_densities(p):
    s = mspec(KL(), Indicator1(), [.25, .5, .25], [.5, .25, .25])
    gamma = solve_moet(s).coupling
    plan = canonical_lift(s, gamma, p)
    g1, g2 = gamma.row_masses, gamma.col_masses
    rho1 = np.where(g1 > 0, s.mu1.weights / np.where(g1 > 0, g1, 1), 0)
    np.testing.assert_allclose(homogeneous_marginal(plan, 1).weights, rho1 * g1, atol=1e-12)
    np.testing.assert_allclose(homogeneous_marginal(plan, 2).weights, g2, atol=1e-9)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_homogeneous_objective_of_delta_lift(delta, p):
    gamma = solve_moet(delta).coupling
    assert homogeneous_objective(delta, canonical_lift(delta, gamma, p)) == pytest.approx(1.0, abs=1e-6)


def test_homogeneous_objective_scaling(delta):
    gamma = solve_moet(delta).coupling
    for p in (1.0, 2.0):
        plan = canonical_lift(delta, gamma, p)
        base = homogeneous_objective(delta, plan)
        for lam in (0.5, 3.0):
            moved = plan.scaled(lam)
            np.testing.assert_allclose(homogeneous_marginal(moved, 1).weights,
                                       homogeneous_marginal(plan, 1).weights, rtol=1e-12)
            assert homogeneous_objective(delta, moved) == pytest.approx(base, rel=1e-9)


def test_homogeneous_objective_constraints(delta):
    X = delta.X
    empty = LiftedPlan(X, [], [], [], [], [])
    # nothing transported: F1(0)|mu1| is infinite for the indicator entropy
    assert homogeneous_objective(delta, empty) == INF
    kl = mspec(KL(), Indicator1(), [0, 1, 0], [.5, 0, .5])
    assert homogeneous_objective(kl, empty) == pytest.approx(1.0)
    too_much = LiftedPlan(X, [1], [2.0], [0], [1.0], [1.0])
    with pytest.raises(ConstraintViolated):
        homogeneous_objective(delta, too_much)
    skewed = LiftedPlan(X, [1], [1.0], [2], [1.0], [0.5])
    with pytest.raises(ConstraintViolated):
        homogeneous_objective(delta, skewed)


# -- equivalence ---------------------------------------------------------------------

@pytest.mark.parametrize("p", [1.0, 2.0])
def test_equivalence_delta(delta, p):
    chk = check_homogeneous_equivalence(delta, p=p)
    for v in (chk.moet_value, chk.h_value, chk.lifted_value):
        assert v == pytest.approx(1.0, abs=1e-6)


def test_equivalence_kl_indicator_zero_cost():
    s = mspec(KL(), Indicator1(), [.25, .5, .25], [.5, .25, .25], c=np.zeros((3, 3)))
    a, b = (check_homogeneous_equivalence(s, p=p) for p in (1.0, 2.0))
    assert a.discrepancy <= 1e-4 and b.discrepancy <= 1e-4
    assert a.lifted_value == pytest.approx(b.lifted_value, abs=1e-6)
    assert a.r_value >= a.h_value - 1e-9


def test_equivalence_unused_infinite_cost(delta):
    c = np.array(SQ, dtype=float)
    c[1, 1] = INF
    s = mspec(Indicator1(), Indicator1(), [0, 1, 0], [.5, 0, .5], c=c)
    chk = check_homogeneous_equivalence(s)
    assert chk.moet_value == pytest.approx(1.0, abs=1e-6)
    assert chk.discrepancy <= 1e-6


def test_equivalence_hypotheses():
    with pytest.raises(HypothesesNotMet):
        check_homogeneous_equivalence(mspec(KL(), KL(), [1, 1, 1], [1, 1, 1]))
    with pytest.raises(HypothesesNotMet):
        check_homogeneous_equivalence(mspec(KL(), Indicator1(), [1, 1, 1], [1, 1, 1],
                                            c=-np.ones((3, 3))))


def test_functionals_on_feasible_plan(delta):
    gamma = Coupling(delta.X, delta.X, [[0, 0, 0], [.5, 0, .5], [0, 0, 0]])
    assert functional_R(delta, gamma) == pytest.approx(1.0)
    assert functional_H(delta, gamma) == pytest.approx(1.0)
