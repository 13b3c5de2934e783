import glob
import os
from fractions import Fraction

import numpy as np
import pytest
import tomli
from hypothesis import given, strategies as st

from maxentgame.errors import ProblemFileError
from maxentgame.problemfile import parse, parse_file, serialize
from maxentgame.solver import solve_maxent

DIE = """\
outcomes = [1, 2, 3, 4, 5, 6]

[variables]
face = [1, 2, 3, 4, 5, 6]

[[constraints]]
variable = "face"
target = 4.5
"""


def bundled(data_dir):
    return sorted(glob.glob(os.path.join(data_dir, "*.toml")))


def test_bundled_files_parse(data_dir):
    files = bundled(data_dir)
    assert {os.path.basename(f) for f in files} >= {"bertrand.toml", "dice.toml", "disjunctive.toml"}
    for path in files:
        pf = parse_file(path)
        assert pf.space.size >= 2


def test_bundled_files_round_trip(data_dir):
    for path in bundled(data_dir):
        pf = parse_file(path)
        again = parse(serialize(pf))
        assert again.data == pf.data
        assert serialize(again) == serialize(pf)


def test_die_problem():
    pf = parse(DIE)
    sol = solve_maxent(pf.problem)
    assert sol.distribution.probs @ np.arange(1, 7) == pytest.approx(4.5, abs=1e-8)
    assert pf.measure.weights.tolist() == [1.0] * 6


def test_fractions_stay_exact():
    pf = parse('outcomes = ["a", "b"]\nmeasure = ["1/3", 2]\n')
    assert pf.data["measure"] == ["1/3", 2]
    assert tuple(pf.measure.exact) == (Fraction(1, 3), Fraction(2))
    assert tomli.loads(serialize(pf))["measure"] == ["1/3", 2]


def test_kelly_block(data_dir):
    pf = parse_file(os.path.join(data_dir, "dice.toml"))
    k = pf.kelly
    assert k["rounds"] == 2000 and k["trials"] == 50 and k["seed"] == 11
    assert k["true_dist"].probs[5] == pytest.approx(6 / 21)
    assert set(k["strategies"]) == {"maxent", "uniform"}


def test_queries_and_disjunction(data_dir):
    dice = parse_file(os.path.join(data_dir, "dice.toml"))
    assert [q.family.kind for q in dice.queries][:1] == ["all-measures"]
    assert len(dice.queries) == 3
    disj = parse_file(os.path.join(data_dir, "disjunctive.toml"))
    assert len(disj.disjunction.branches) == 2


# -- round trip on generated documents --------------------------------------------

weights = st.one_of(
    st.integers(1, 9),
    st.fractions(min_value=Fraction(1, 7), max_value=5, max_denominator=7).filter(lambda f: f > 0),
)


@st.composite
def documents(draw):
    n = draw(st.integers(2, 6))
    labels = draw(st.one_of(
        st.just(list(range(n))),
        st.lists(st.text("abcxyz", min_size=1, max_size=3), min_size=n, max_size=n, unique=True),
    ))
    doc = {"outcomes": labels}
    if draw(st.booleans()):
        doc["measure"] = [w if isinstance(w, int) else f"{w.numerator}/{w.denominator}"
                          for w in draw(st.lists(weights, min_size=n, max_size=n))]
    values = draw(st.lists(st.integers(-3, 3), min_size=n, max_size=n))
    doc["variables"] = {"v": values, "ind": [1] + [0] * (n - 1)}
    p = np.full(n, 1.0 / n)
    doc["constraints"] = [{"variable": "v", "relation": "eq", "target": float(p @ values)}]
    if draw(st.booleans()):
        doc["constraints"].append({"variable": "ind", "relation": "ge", "target": 0.0})
    if draw(st.booleans()):
        doc["query"] = [{"name": "q", "Y": "v", "family": draw(st.sampled_from(
            ["all-measures", "uniform-on-base"]))}]
    return doc


@given(documents())
def test_generated_round_trip(doc):
    import tomli_w

    pf = parse(tomli_w.dumps(doc))
    again = parse(serialize(pf))
    assert again.data == pf.data
    assert again.space == pf.space
    np.testing.assert_array_equal(again.measure.weights, pf.measure.weights)
    F1, t1, r1 = pf.constraints.features()
    F2, t2, r2 = again.constraints.features()
    np.testing.assert_array_equal(F1, F2)
    np.testing.assert_array_equal(t1, t2)
    assert r1 == r2


# -- errors -------------------------------------------------------------------

def test_syntax_error_position():
    with pytest.raises(ProblemFileError) as e:
        parse("outcomes = [1, 2\nmeasure = [1, 1]\n")
    assert e.value.line is not None and e.value.column is not None


def test_unknown_variable_position():
    text = DIE.replace('variable = "face"', 'variable = "fase"')
    with pytest.raises(ProblemFileError) as e:
        parse(text)
    assert (e.value.line, e.value.column) == (7, 12)
    assert "fase" in str(e.value)


@pytest.mark.parametrize("text, fragment", [
    ("measure = [1]\n", "outcomes"),
    ("outcomes = [1, 1]\n", "distinct"),
    ("outcomes = [1, 2]\nmeasure = [1, 0]\n", "positive"),
    ("outcomes = [1, 2]\nmeasure = [1]\n", "2 weights"),
    ("outcomes = [1, 2]\nmeasure = [1, \"1/0\"]\n", "zero denominator"),
    ("outcomes = [1, 2]\n[variables]\nv = [1]\n", "one value per outcome"),
    ("outcomes = [1, 2]\nbogus = 3\n", "unknown top-level key"),
    (DIE.replace("target = 4.5", 'relation = "le"\ntarget = 4.5'), "relation"),
    (DIE.replace("target = 4.5", "target = [4.5, 1]"), "dimension"),
])
def test_rejections(text, fragment):
    with pytest.raises(ProblemFileError) as e:
        parse(text)
    assert fragment in str(e.value)


def test_error_is_value_error():
    with pytest.raises(ValueError):
        parse("outcomes = []\n")
