import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from maxentgame.constraints import (
    GE,
    ConstraintSet,
    ConstraintSpec,
    DisjunctiveConstraint,
    condition,
    convex_hull,
    lp_extremize,
    support,
)
from maxentgame.core import Distribution, OutcomeSpace, RandomVariable
from maxentgame.errors import Infeasible
from maxentgame.instances import random_problem

S3 = OutcomeSpace([1, 2, 3])


def pinned(space, label, value):
    ind = RandomVariable.indicator(space, [label])
    return ConstraintSet(space, ConstraintSpec(ind, [value]))


def highs(C, c, sense):
    """Independent LP oracle on the raw moment rows."""
    F, t, rel = C.features()
    n = F.shape[0]
    eq = [i for i, r in enumerate(rel) if r == "eq"]
    ge = [i for i, r in enumerate(rel) if r == GE]
    A_eq = np.vstack([F[:, eq].T, np.ones((1, n))])
    b_eq = np.concatenate([t[eq], [1.0]])
    kw = {}
    if ge:
        kw = {"A_ub": -F[:, ge].T, "b_ub": -t[ge]}
    sign = -1.0 if sense == "max" else 1.0
    res = linprog(sign * np.asarray(c), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs", **kw)
    assert res.status == 0
    return sign * res.fun


def test_lp_unconstrained_point_mass():
    v, P = lp_extremize(ConstraintSet(S3), [1, 0, 0], "max")
    assert v == pytest.approx(1.0)
    assert P.probs == pytest.approx([1, 0, 0])


def test_lp_pinned_coordinate():
    S = OutcomeSpace([1, 2])
    v, _ = lp_extremize(pinned(S, 1, 0.3), [1, 0], "max")
    assert v == pytest.approx(0.3, abs=1e-12)


def test_lp_matches_highs_and_dominates_samples(rng):
    for _ in range(20):
        prob = random_problem(rng, n_range=(6, 6), k_range=(2, 2))
        C = prob.constraints
        c = rng.normal(size=6)
        hi, Phi = lp_extremize(C, c, "max")
        lo, Plo = lp_extremize(C, c, "min")
        assert hi == pytest.approx(highs(C, c, "max"), abs=1e-8)
        assert lo == pytest.approx(highs(C, c, "min"), abs=1e-8)
        samples = C.sample(2000, seed=int(rng.integers(1 << 30)))
        vals = samples @ c
        assert vals.max() <= hi + 1e-8 and vals.min() >= lo - 1e-8
        for P in (Phi, Plo):
            assert C.contains(P, tol=1e-9)
            assert P.probs.min() >= 0 and P.probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_lp_with_inequalities_matches_highs(rng):
    S = OutcomeSpace(list(range(5)))
    X = RandomVariable.identity(S)
    C = ConstraintSet(S, ConstraintSpec(X, [2.5], GE))
    for _ in range(5):
        c = rng.normal(size=5)
        assert lp_extremize(C, c, "max")[0] == pytest.approx(highs(C, c, "max"), abs=1e-8)
        assert lp_extremize(C, c, "min")[0] == pytest.approx(highs(C, c, "min"), abs=1e-8)


@given(st.integers(0, 2**31 - 1))
def test_max_at_least_min_equal_iff_constant(seed):
    rng = np.random.default_rng(seed)
    prob = random_problem(rng, n_range=(3, 7))
    C = prob.constraints
    c = rng.integers(-3, 4, size=C.space.size).astype(float)
    hi, _ = lp_extremize(C, c, "max")
    lo, _ = lp_extremize(C, c, "min")
    assert hi >= lo - 1e-12
    # the functional is constant on C exactly when the sampled spread vanishes too
    spread = np.ptp(C.sample(200, seed=seed) @ c)
    if hi - lo < 1e-9:
        assert spread < 1e-7


def test_support_examples():
    assert len(support(ConstraintSet(S3))) == 3
    assert support(pinned(S3, 1, 1.0)).outcomes == (1,)
    assert support(pinned(S3, 1, 0.0)).outcomes == (2, 3)


def test_support_mask_agrees_with_per_outcome_lp(rng):
    for _ in range(30):
        C = random_problem(rng, zero_prob=0.5).constraints
        assert np.array_equal(C.support_mask(), support(C).mask)


def test_condition_examples():
    Z = RandomVariable.indicator(S3, [1])
    C1 = condition(ConstraintSet(S3), Z, 1)
    assert support(C1).outcomes == (1,)
    T = RandomVariable.constant(S3, 7)
    C = pinned(S3, 2, 0.25)
    assert support(condition(C, T, 7)).outcomes == support(C).outcomes


def test_condition_mean_three_on_even_faces():
    S = OutcomeSpace([1, 2, 3, 4, 5, 6])
    X = RandomVariable.identity(S)
    parity = RandomVariable(S, [x % 2 for x in S])
    C = ConstraintSet(S, ConstraintSpec(X, [3.0]))
    Ce = condition(C, parity, 0)
    assert support(Ce).outcomes == (2, 4, 6)
    # HiGHS agrees the conditioned set is non-empty
    F, _, _ = Ce.features()
    res = linprog(np.zeros(6), A_eq=np.vstack([F.T, np.ones(6)]), b_eq=[3.0, 1.0, 1.0],
                  bounds=(0, None), method="highs")
    assert res.status == 0


def test_condition_infeasible():
    Z = RandomVariable.indicator(S3, [1])
    with pytest.raises(Infeasible):
        condition(pinned(S3, 1, 0.5), Z, 0)


@given(st.integers(0, 2**31 - 1))
def test_conditioned_support_inside_cell(seed):
    rng = np.random.default_rng(seed)
    C = random_problem(rng, n_range=(3, 7)).constraints
    n = C.space.size
    Z = RandomVariable(C.space, rng.integers(0, 2, size=n).tolist())
    for z in Z.range():
        try:
            Cz = condition(C, Z, z)
        except Infeasible:
            continue
        inside = Z.event(z) & C.support_mask()
        assert not (Cz.support_mask() & ~inside).any()


def test_infeasible_set_raises():
    X = RandomVariable.identity(S3)
    with pytest.raises(Infeasible):
        ConstraintSet(S3, ConstraintSpec(X, [4.0]))


def test_hull_of_disjunction_interval():
    S = OutcomeSpace([0, 1])
    D = DisjunctiveConstraint([pinned(S, 1, 0.1), pinned(S, 1, 0.95)])
    H = convex_hull(D)
    assert lp_extremize(H, [0, 1], "min")[0] == pytest.approx(0.1, abs=1e-12)
    assert lp_extremize(H, [0, 1], "max")[0] == pytest.approx(0.95, abs=1e-12)
    for p in (0.1, 0.5, 0.95):
        assert H.contains(Distribution(S, [1 - p, p]))
    assert not H.contains(Distribution(S, [0.95, 0.05]))
    assert not D.contains(Distribution(S, [0.5, 0.5]))


def test_hull_single_branch_is_branch():
    C = pinned(S3, 1, 0.3)
    assert convex_hull(DisjunctiveConstraint([C])) is C


def test_hull_of_overlapping_branches_equals_union():
    S = OutcomeSpace([0, 1])
    ind = RandomVariable.indicator(S, [1])
    a = ConstraintSet(S, ConstraintSpec(ind, [0.2], GE))
    b = ConstraintSet(S, ConstraintSpec(ind.map(lambda v: -v), [-0.6], GE))
    H = convex_hull(DisjunctiveConstraint([a, b]))
    assert lp_extremize(H, [0, 1], "min")[0] == pytest.approx(0.0, abs=1e-12)
    assert lp_extremize(H, [0, 1], "max")[0] == pytest.approx(1.0, abs=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_hull_contains_every_branch(seed):
    rng = np.random.default_rng(seed)
    prob = random_problem(rng, n_range=(3, 6), k_range=(1, 2))
    space = prob.space
    branches = [prob.constraints]
    for _ in range(2):
        ind = RandomVariable.indicator(space, [space.outcomes[int(rng.integers(space.size))]])
        branches.append(ConstraintSet(space, ConstraintSpec(ind, [float(rng.uniform(0.05, 0.95))])))
    H = convex_hull(DisjunctiveConstraint(branches))
    for b in branches:
        for p in b.sample(5, seed=seed):
            assert H.contains(Distribution.from_weights(space, p), tol=1e-8)
