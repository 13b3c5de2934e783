import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxentgame.constraints import ConstraintSet, ConstraintSpec, convex_hull
from maxentgame.core import Distribution, Measure, OutcomeSpace, RandomVariable, expected_log_loss
from maxentgame.errors import ProbeOutsideConstraintSet
from maxentgame.game import (
    coordinate_vertices,
    equalizer_residual,
    sample_probes,
    verify_saddle,
    verify_saddle_union,
    worst_case_loss,
)
from maxentgame.instances import disjunctive, random_problem
from maxentgame.solver import MaxEntProblem, solve_maxent

S3 = OutcomeSpace([1, 2, 3])
seeds = st.integers(0, 2**31 - 1)


def test_worst_case_loss_constant_loss():
    C = ConstraintSet(S3)
    v, _ = worst_case_loss(Distribution.uniform(S3), C, Measure.uniform(S3))
    assert v == pytest.approx(math.log(3), abs=1e-12)


def test_worst_case_loss_infinite_for_point_mass():
    C = ConstraintSet(S3)
    v, witness = worst_case_loss(Distribution.point_mass(S3, 1), C, Measure.uniform(S3))
    assert v == math.inf
    assert witness.probs[0] < 1


def test_worst_case_loss_disjunctive_half():
    D, M = disjunctive()
    H = convex_hull(D)
    Q = Distribution(D.space, [0.5, 0.5])
    v, _ = worst_case_loss(Q, H, M)
    # the loss is linear in P*, so the sup sits at a branch endpoint
    ends = [Distribution(D.space, [1 - p, p]) for p in (0.1, 0.95)]
    oracle = max(expected_log_loss(P, Q, M) for P in ends)
    assert v == pytest.approx(oracle, abs=1e-12)
    assert v == pytest.approx(math.log(2), abs=1e-12)


def test_unconstrained_saddle():
    r = verify_saddle(MaxEntProblem.uniform(ConstraintSet(S3)))
    assert r.maximin == pytest.approx(math.log(3), abs=1e-12)
    assert r.minimax == pytest.approx(math.log(3), abs=1e-12)
    assert abs(r.gap) <= 1e-12 and r.equalizer_spread <= 1e-12


@given(seeds)
def test_saddle_gap_random(seed):
    r = verify_saddle(random_problem(np.random.default_rng(seed)))
    assert -1e-9 <= r.gap <= 1e-6
    assert r.equalizer_spread <= 1e-6


def test_union_has_positive_gap():
    D, M = disjunctive()
    r = verify_saddle_union(D, M)
    assert r.gap > 0.1
    assert r.notes


@given(seeds)
def test_worst_case_at_a_vertex(seed):
    rng = np.random.default_rng(seed)
    prob = random_problem(rng)
    C, M = prob.constraints, prob.measure
    Q = Distribution(prob.space, rng.dirichlet(np.ones(prob.space.size)))
    v, witness = worst_case_loss(Q, C, M)
    assert C.contains(witness, tol=1e-8)
    assert expected_log_loss(witness, Q, M) == pytest.approx(v, abs=1e-9)
    for p in C.sample(200, seed=seed):
        assert expected_log_loss(Distribution.from_weights(prob.space, p), Q, M) <= v + 1e-9
    assert max(expected_log_loss(P, Q, M) for P in coordinate_vertices(C)) <= v + 1e-9


@given(seeds)
def test_maxent_is_the_unique_minimax_strategy(seed):
    rng = np.random.default_rng(seed)
    prob = random_problem(rng)
    sol = solve_maxent(prob)
    C, M = prob.constraints, prob.measure
    base, _ = worst_case_loss(sol.distribution, C, M)
    for _ in range(10):
        noise = rng.dirichlet(np.ones(prob.space.size))
        eps = float(rng.uniform(0.01, 0.5))
        Q = Distribution.from_weights(prob.space, (1 - eps) * sol.distribution.probs + eps * noise)
        if 0.5 * np.abs(Q.probs - sol.distribution.probs).sum() < 1e-3:
            continue
        assert worst_case_loss(Q, C, M)[0] > base + 1e-9


def test_equalizer_residual_cases(rng):
    prob = random_problem(rng, zero_prob=0.0)
    sol = solve_maxent(prob)
    assert equalizer_residual(prob, [sol.distribution], sol) <= 1e-12
    probes = sample_probes(prob.constraints, 100, seed=4)
    assert equalizer_residual(prob, probes, sol) <= 1e-6
    S = OutcomeSpace([1, 2, 3])
    X = RandomVariable.identity(S)
    p2 = MaxEntProblem.uniform(ConstraintSet(S, ConstraintSpec(X, [2.5])))
    with pytest.raises(ProbeOutsideConstraintSet):
        equalizer_residual(p2, [Distribution.uniform(S)])


@given(seeds)
def test_vertex_residual_bounds_the_polytope(seed):
    prob = random_problem(np.random.default_rng(seed))
    sol = solve_maxent(prob)
    verts = coordinate_vertices(prob.constraints)
    r_vert = equalizer_residual(prob, verts, sol, tol=1e-8)
    r_in = equalizer_residual(prob, sample_probes(prob.constraints, 30, seed), sol, tol=1e-8)
    assert r_vert <= 1e-6
    assert r_in <= r_vert + 1e-9
