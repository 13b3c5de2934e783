import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from maxentgame import instances
from maxentgame.classify import (
    CALIBRATED,
    CONSTRAINT,
    CORRECT,
    ILL_DEFINED,
    INEQUALITY_CAVEAT,
    LEVELS,
    WELL_DEFINED,
    AffineCertificate,
    AffineRejection,
    ApplicationQuery,
    affine_test,
    calibration_test,
    classify,
    classify_loss_table,
    family_guesses,
    guess,
    partition_variable,
    separating_search,
    set_partitions,
)
from maxentgame.constraints import ConstraintSet, ConstraintSpec, condition, lp_extremize
from maxentgame.core import Measure, MeasureFamily, OutcomeSpace, RandomVariable, determines
from maxentgame.errors import Infeasible, ZNotDeterminingV
from maxentgame.solver import MaxEntProblem, solve_maxent

TOL = 1e-7


def lp_range(C, psi):
    lo, _ = lp_extremize(C, psi, "min")
    hi, _ = lp_extremize(C, psi, "max")
    return lo, hi


def die(target=4.5):
    space = OutcomeSpace([1, 2, 3, 4, 5, 6])
    face = RandomVariable.identity(space, name="face")
    return space, face, ConstraintSet(space, ConstraintSpec(face, [target]))


def three_outcomes():
    space = OutcomeSpace([1, 2, 3])
    Y = RandomVariable.indicator(space, [1], name="X=1")
    return ApplicationQuery(ConstraintSet(space), MeasureFamily.all_measures(space), Y)


def calibrated_not_correct(conditioning="posterior"):
    # E[Y] is pinned but nothing ties Y to the cells of Z
    space = OutcomeSpace([0, 1, 2, 3])
    Y = RandomVariable(space, [0, 1, 0, 1], name="Y")
    Z = RandomVariable(space, [0, 0, 1, 1], name="Z")
    C = ConstraintSet(space, ConstraintSpec(Y, [0.5]))
    return ApplicationQuery(C, MeasureFamily.uniform_on_base(space), Y, Z, conditioning=conditioning)


# -- affine test -------------------------------------------------------------

def test_affine_identity_component():
    space, face, _ = die()
    sq = face.map(lambda v: v * v, name="sq")
    phi = RandomVariable.stack(face, sq)
    cert = affine_test(face, phi)
    assert isinstance(cert, AffineCertificate) and cert
    np.testing.assert_allclose(cert.coefficients[0], [0, 1, 0], atol=1e-10)
    assert cert.residual <= TOL


def test_affine_log_ratio_matches_dual():
    space, face, C = die()
    M = Measure(space, [1, 2, 1, 2, 1, 2])
    sol = solve_maxent(MaxEntProblem(space, M, C))
    S = sol.support_mask
    psi = RandomVariable(space, -np.log(sol.distribution.probs / M.weights), name="psi")
    cert = affine_test(psi, face, S)
    assert cert
    np.testing.assert_allclose(cert.coefficients[0], -sol.dual, atol=1e-6)


def test_affine_rejection_and_lp_crosscheck():
    space = OutcomeSpace([1, 2, 3])
    phi = RandomVariable.indicator(space, [1], name="phi")
    psi = RandomVariable.indicator(space, [2], name="psi")
    res = affine_test(psi, phi)
    assert isinstance(res, AffineRejection) and not res
    assert res.residual > TOL
    C = ConstraintSet(space, ConstraintSpec(phi, [0.2]))
    lo, hi = lp_range(C, psi.values[:, 0])
    assert hi - lo > 0.5


def test_affine_subset_must_be_nonempty():
    space = OutcomeSpace([0, 1])
    X = RandomVariable.identity(space)
    with pytest.raises(ValueError):
        affine_test(X, X, np.zeros(2, dtype=bool))


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_affine_iff_lp_constant(seed):
    psi, phi, C, _ = instances.random_affine_instance(np.random.default_rng(seed))
    lo, hi = lp_range(C, psi.values[:, 0])
    assert bool(affine_test(psi, phi, C.support_mask())) == (hi - lo <= TOL)


def test_planted_affine_is_certified():
    rng = np.random.default_rng(5)
    seen = 0
    for _ in range(60):
        psi, phi, C, planted = instances.random_affine_instance(rng)
        if planted:
            seen += 1
            assert affine_test(psi, phi, C.support_mask())
    assert seen > 10


# -- classify ----------------------------------------------------------------

def test_affine_query_is_correct():
    space, face, C = die()
    Y = face.map(lambda v: 3 * v - 1, name="Y")
    q = ApplicationQuery(C, MeasureFamily.all_measures(space), Y)
    verdict = classify(q)
    assert verdict.level == CORRECT
    assert all(verdict.evidence["certificates"].values())
    assert not verdict.caveats


def test_three_outcomes_is_ill_defined():
    q = three_outcomes()
    verdict = classify(q)
    assert verdict.level == ILL_DEFINED
    pair = verdict.evidence["separating"]
    assert pair.difference > 1e-3
    assert not verdict.evidence["manual_review"]
    space = q.space
    a, _ = guess(q, Measure.uniform(space), 1)
    b, _ = guess(q, Measure(space, [1, 0.5, 0.5]), 1)
    assert a == pytest.approx(1 / 3, abs=1e-9)
    assert b == pytest.approx(1 / 2, abs=1e-9)


def test_parity_query_is_correct():
    space = OutcomeSpace([1, 2, 3, 4])
    parity = RandomVariable(space, [1, 0, 1, 0], name="parity")
    C = ConstraintSet(space, ConstraintSpec(parity, [0.3]))
    Y = parity.map(lambda v: v * v, name="parity^2")
    q = ApplicationQuery(C, MeasureFamily.compatible_with(parity, Measure.uniform(parity.range_space())), Y)
    assert classify(q).level == CORRECT


def test_parity_family_makes_non_affine_query_well_defined():
    space = OutcomeSpace([1, 2, 3, 4])
    parity = RandomVariable(space, [1, 0, 1, 0], name="parity")
    high = RandomVariable(space, [0, 0, 1, 1], name="high")
    phi = RandomVariable.stack(parity, high, name="phi")
    C = ConstraintSet(space, ConstraintSpec(parity, [0.3]))
    # Y = parity * high is determined by phi but not affine in the constraint
    Y = RandomVariable(space, [0, 0, 1, 0], name="Y")
    fam = MeasureFamily.compatible_with(phi, Measure.uniform(phi.range_space()))
    verdict = classify(ApplicationQuery(C, fam, Y))
    assert verdict.level in (WELL_DEFINED, CALIBRATED, CORRECT)
    assert verdict.level != CORRECT


def test_single_member_family_is_well_defined():
    space = OutcomeSpace([1, 2, 3])
    Y = RandomVariable.indicator(space, [1])
    q = ApplicationQuery(ConstraintSet(space), MeasureFamily.uniform_on_base(space), Y)
    verdict = classify(q)
    assert verdict.level == WELL_DEFINED


def test_inequality_caveat():
    space = OutcomeSpace([1, 2, 3])
    X = RandomVariable.identity(space)
    C = ConstraintSet(space, ConstraintSpec(X, [2.5], relations=["ge"]))
    verdict = classify(ApplicationQuery(C, MeasureFamily.uniform_on_base(space), X))
    assert INEQUALITY_CAVEAT in verdict.caveats


def test_impossible_z_is_noted():
    space = OutcomeSpace([0, 1, 2])
    dead = RandomVariable.indicator(space, [2], name="dead")
    Z = RandomVariable(space, [0, 0, 1], name="Z")
    C = ConstraintSet(space, ConstraintSpec(dead, [0.0]))
    Y = RandomVariable(space, [1, 2, 3], name="Y")
    q = ApplicationQuery(C, MeasureFamily.uniform_on_base(space), Y, Z)
    verdict = classify(q)
    assert any("impossible" in n for n in verdict.notes)


def test_loss_table_front_end():
    space, face, C = die()
    out = classify_loss_table(C, MeasureFamily.all_measures(space), face, [0, 1],
                              lambda y, d: (y - d) ** 2 if d else y, samples=5, attempts=50)
    assert out[0].level == CORRECT
    assert out[1].level == ILL_DEFINED


# -- calibration -------------------------------------------------------------

def test_calibrated_but_not_correct():
    q = calibrated_not_correct()
    assert not calibration_test(q, q.Z)
    trivial = RandomVariable.constant(q.space, 0, name="V")
    verdict = calibration_test(q, trivial)
    assert verdict
    assert verdict.cell_values[0] == pytest.approx([0.5])
    assert classify(q).level == CALIBRATED
    # conditioning by constraint pins each cell down completely
    assert classify(calibrated_not_correct(CONSTRAINT)).level == CORRECT


def test_calibration_with_nontrivial_cells():
    # V splits the space in two; each half fixes E[Y | V = v] through its own rows
    space = OutcomeSpace(list(range(8)))
    V = RandomVariable(space, [0, 0, 0, 0, 1, 1, 1, 1], name="V")
    Z = RandomVariable(space, [0, 0, 1, 1, 2, 2, 3, 3], name="Z")
    Y = RandomVariable(space, [0, 1, 0, 1, 2, 0, 2, 0], name="Y")
    rows = RandomVariable.stack(
        RandomVariable(space, Y.values[:, 0] * (V.values[:, 0] == 0), name="Y0"),
        RandomVariable(space, Y.values[:, 0] * (V.values[:, 0] == 1), name="Y1"),
        RandomVariable.indicator(space, [0, 1, 2, 3], name="V0"),
    )
    C = ConstraintSet(space, ConstraintSpec(rows, [0.2, 0.6, 0.4]))
    q = ApplicationQuery(C, MeasureFamily.uniform_on_base(space), Y, Z)
    verdict = calibration_test(q, V)
    assert verdict
    assert verdict.cell_values[0] == pytest.approx([0.5])
    assert verdict.cell_values[1] == pytest.approx([1.0])
    for v in (0, 1):
        psi = (Y.values[:, 0] - verdict.cell_values[v][0]) * V.event(v)
        lo, hi = lp_range(C, psi)
        assert abs(lo) <= TOL and abs(hi) <= TOL
    assert not calibration_test(q, Z)
    assert classify(q).level == CALIBRATED


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_trivial_v_is_unconditional_check(seed):
    psi, phi, C, _ = instances.random_affine_instance(np.random.default_rng(seed))
    q = ApplicationQuery(C, MeasureFamily.uniform_on_base(C.space), psi)
    V = RandomVariable.constant(C.space, 0)
    lo, hi = lp_range(C, psi.values[:, 0])
    assert bool(calibration_test(q, V)) == (hi - lo <= TOL)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_v_equal_z_is_correctness_per_cell(seed):
    rng = np.random.default_rng(seed)
    psi, phi, C, _ = instances.random_affine_instance(rng)
    n = C.space.size
    Z = RandomVariable(C.space, [int(v) for v in rng.integers(0, 2, size=n)], name="Z")
    q = ApplicationQuery(C, MeasureFamily.uniform_on_base(C.space), psi, Z, conditioning=CONSTRAINT)
    correct, feasible = True, 0
    for z in Z.range():
        try:
            Cz = condition(C, Z, z)
        except Infeasible:
            continue
        feasible += 1
        lo, hi = lp_range(Cz, psi.values[:, 0])
        correct &= hi - lo <= TOL
    # with no feasible cell there is nothing to guess
    assume(feasible)
    assert bool(calibration_test(q, Z)) == correct


def test_calibration_requires_determination():
    q = calibrated_not_correct()
    V = RandomVariable(q.space, [0, 1, 0, 1], name="V")
    with pytest.raises(ZNotDeterminingV):
        calibration_test(q, V)


def test_set_partitions_counts():
    assert [sum(1 for _ in set_partitions(range(k))) for k in range(6)] == [1, 1, 2, 5, 15, 52]
    space = OutcomeSpace(list(range(4)))
    Z = RandomVariable(space, [0, 1, 2, 2])
    V = partition_variable(Z, [[0, 2], [1]])
    assert list(V.values[:, 0]) == [0, 1, 0, 0]
    assert determines(Z, V)


# -- guess -------------------------------------------------------------------

def test_correct_guess_matches_every_vertex():
    space, face, C = die()
    even = RandomVariable(space, [0, 1, 0, 1, 0, 1], name="even")
    Y = face.map(lambda v: 2 * v + 1, name="Y")
    q = ApplicationQuery(C, MeasureFamily.all_measures(space), Y, even, conditioning=CONSTRAINT)
    for z in (0, 1):
        value, verdict = guess(q, Measure(space, [1, 3, 2, 5, 1, 2]), z)
        assert verdict.level == CORRECT
        Cz = condition(C, even, z)
        for sense in ("min", "max"):
            val, P = lp_extremize(Cz, Y.values[:, 0], sense)
            assert value == pytest.approx(val, abs=TOL)


def test_three_outcomes_guess_flagged():
    q = three_outcomes()
    value, verdict = guess(q, Measure.uniform(q.space), 1)
    assert value == pytest.approx(1 / 3, abs=1e-12)
    assert verdict.level == ILL_DEFINED


@pytest.mark.parametrize("n", [2, 5, 9])
def test_unconstrained_guess_is_one_over_n(n):
    space = OutcomeSpace(list(range(n)))
    Y = RandomVariable.indicator(space, [1])
    q = ApplicationQuery(ConstraintSet(space), MeasureFamily.uniform_on_base(space), Y)
    value, _ = guess(q, Measure.uniform(space), 1)
    assert value == pytest.approx(1 / n, abs=1e-12)


def test_guess_rejects_foreign_measure():
    space = OutcomeSpace([0, 1])
    X = RandomVariable.identity(space)
    q = ApplicationQuery(ConstraintSet(space), MeasureFamily.uniform_on_base(space), X)
    with pytest.raises(ValueError):
        guess(q, Measure(space, [1, 2]), 1)


def test_correct_guess_invariant_over_members():
    rng = np.random.default_rng(3)
    space, face, C = die(3.1)
    parity = RandomVariable(space, [1, 0, 1, 0, 1, 0], name="parity")
    fam = MeasureFamily.compatible_with(parity, Measure(parity.range_space(), [1, 1]))
    Y = face.map(lambda v: 0.5 * v, name="Y")
    q = ApplicationQuery(C, fam, Y)
    assert classify(q, samples=10, attempts=20).level == CORRECT
    values = [guess(q, M, 1)[0] for M in fam.sample(rng, 20)]
    assert max(values) - min(values) <= TOL
    assert values[0] == pytest.approx(0.5 * 3.1, abs=TOL)


# -- hierarchy and the determination criterion ----------------------------------

def _random_query(rng):
    psi, phi, C, _ = instances.random_affine_instance(rng, n_range=(3, 6), k_range=(1, 2))
    n = C.space.size
    Z = RandomVariable(C.space, [int(v) for v in rng.integers(0, 2, size=n)], name="Z")
    kind = int(rng.integers(3))
    if kind == 0:
        fam = MeasureFamily.uniform_on_base(C.space)
    elif kind == 1:
        fam = MeasureFamily.all_measures(C.space)
    else:
        fam = MeasureFamily.compatible_with(phi, Measure.uniform(phi.range_space()))
    reading = ("posterior", CONSTRAINT)[int(rng.integers(2))]
    return ApplicationQuery(C, fam, psi, Z, conditioning=reading)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_hierarchy_monotone(seed):
    q = _random_query(np.random.default_rng(seed))
    verdict = classify(q, samples=10, attempts=60, seed=seed)
    assume(not any("vacuously" in n for n in verdict.notes))
    assert verdict.level in LEVELS
    if verdict.level == CORRECT:
        assert calibration_test(q, q.Z, seed=seed)
    if verdict.level == CALIBRATED:
        cal = verdict.evidence["calibration"]
        assert calibration_test(q, cal.V, seed=seed)
    if verdict.at_least(WELL_DEFINED):
        _, _, spread = family_guesses(q, 10, seed + 1)
        assert spread <= 1e-6
    else:
        assert verdict.evidence["separating"] is not None or verdict.evidence["manual_review"]


@pytest.mark.parametrize("seed", range(8))
def test_determination_gives_agreement(seed):
    C, fam, Y = instances.random_determination_instance(np.random.default_rng(seed), True)
    q = ApplicationQuery(C, fam, Y)
    assert determines(q.phi, Y, C.support_mask())
    _, _, spread = family_guesses(q, 50, seed)
    assert spread <= 1e-6
    assert classify(q, samples=20).at_least(WELL_DEFINED)


@pytest.mark.parametrize("seed", range(8))
def test_failed_determination_is_never_silent(seed):
    C, fam, Y = instances.random_determination_instance(np.random.default_rng(100 + seed), False)
    q = ApplicationQuery(C, fam, Y)
    assert not determines(q.phi, Y, C.support_mask())
    verdict = classify(q, samples=20)
    assert verdict.level == ILL_DEFINED
    pair = verdict.evidence["separating"]
    assert pair.difference > 1e-3 or verdict.evidence["manual_review"]
    if pair.difference > 1e-3:
        assert fam.contains(pair.measure_a) and fam.contains(pair.measure_b)
