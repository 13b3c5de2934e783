"""Worked instances and seeded random generators.

The random generators draw small integer-valued constraint functions so
that fibers, supports and affine relations are exact; every generated
constraint set is feasible by construction (targets are moments of an
explicit distribution).
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .constraints import ConstraintSet, ConstraintSpec, DisjunctiveConstraint
from .core import Distribution, Measure, MeasureFamily, OutcomeSpace, RandomVariable
from .representation import RepresentationShift
from .solver import MaxEntProblem

__all__ = [
    "bertrand",
    "disjunctive",
    "random_problem",
    "random_affine_instance",
    "random_shift_instance",
    "random_determination_instance",
    "kelly_instance",
]


# -- the two worked examples -------------------------------------------------

@dataclass(frozen=True)
class BertrandCase:
    label: str
    problem: MaxEntProblem
    event: tuple
    expected: Fraction


def bertrand():
    """A die-like space {1, 2, 3} and its coarsening {{1}, {2, 3}}: the
    probability of {1} under three MaxEnt choices."""
    fine = OutcomeSpace([1, 2, 3])
    coarse = OutcomeSpace(["{1}", "{2,3}"])
    return [
        BertrandCase("fine space, uniform measure",
                     MaxEntProblem.uniform(ConstraintSet(fine)), (1,), Fraction(1, 3)),
        BertrandCase("coarse space, uniform measure",
                     MaxEntProblem.uniform(ConstraintSet(coarse)), ("{1}",), Fraction(1, 2)),
        BertrandCase("coarse space, measure (1, 2)",
                     MaxEntProblem(coarse, Measure(coarse, [1, 2]), ConstraintSet(coarse)),
                     ("{1}",), Fraction(1, 3)),
    ]


def disjunctive(p=(Fraction(1, 10), Fraction(19, 20))):
    """Binary space; Nature's distribution has ``P(X = 1)`` equal to one of
    the values in ``p``.  Returns ``(D, M)``."""
    space = OutcomeSpace([0, 1])
    ind = RandomVariable.indicator(space, [1], name="X=1")
    branches = [ConstraintSet(space, ConstraintSpec(ind, [float(v)])) for v in p]
    return DisjunctiveConstraint(branches), Measure.uniform(space)


# -- random problems ---------------------------------------------------------

def _dirichlet_with_zeros(rng, n, zero_prob=0.0):
    p = rng.dirichlet(np.ones(n))
    if zero_prob:
        z = rng.random(n) < zero_prob
        if z.all():
            z[rng.integers(n)] = False
        p[z] = 0.0
        p /= p.sum()
    return p


def random_problem(rng, n_range=(2, 10), k_range=(1, 3), values=(-3, 3), zero_prob=0.3,
                   measure="random"):
    """A feasible equality-constrained problem.

    Targets are the moments of a random distribution that vanishes on some
    outcomes with probability ``zero_prob``, so targets on the boundary of
    the moment polytope occur regularly.
    """
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    k = int(rng.integers(k_range[0], k_range[1] + 1))
    space = OutcomeSpace(list(range(n)))
    F = rng.integers(values[0], values[1] + 1, size=(n, k))
    phi = RandomVariable(space, [tuple(int(v) for v in r) for r in F], name="phi")
    P0 = _dirichlet_with_zeros(rng, n, zero_prob)
    spec = ConstraintSpec(phi, P0 @ F)
    C = ConstraintSet(space, spec)
    if measure == "uniform":
        M = Measure.uniform(space)
    else:
        M = Measure(space, np.exp(rng.normal(0.0, 0.7, n)))
    return MaxEntProblem(space, M, C)


def random_affine_instance(rng, n_range=(3, 8), k_range=(1, 3)):
    """``(psi, phi, C, planted_affine)`` with ``psi`` affine in ``phi`` on
    the support of ``C`` about half the time.

    Some instances carry a row forcing a random event to probability zero,
    so the support is a strict subset and ``psi`` is free off it.
    """
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    k = int(rng.integers(k_range[0], k_range[1] + 1))
    space = OutcomeSpace(list(range(n)))
    F = rng.integers(-2, 3, size=(n, k))
    cols = [F]
    P0 = _dirichlet_with_zeros(rng, n, 0.25)
    t = list(P0 @ F)
    if rng.random() < 0.5:
        dead = np.flatnonzero(P0 == 0)
        if dead.size:
            ev = np.zeros(n, dtype=int)
            ev[rng.choice(dead, size=max(1, dead.size // 2), replace=False)] = 1
            cols.append(ev[:, None])
            t.append(0.0)
    G = np.hstack(cols)
    phi = RandomVariable(space, [tuple(int(v) for v in r) for r in G], name="phi")
    C = ConstraintSet(space, ConstraintSpec(phi, t))
    planted = bool(rng.random() < 0.5)
    if planted:
        alpha = rng.integers(-3, 4, size=G.shape[1] + 1)
        psi = alpha[0] + G @ alpha[1:]
        supp = C.support_mask()
        psi = np.where(supp, psi, rng.integers(-5, 6, size=n))
    else:
        psi = rng.integers(-3, 4, size=n)
    psi = RandomVariable(space, [int(v) for v in psi], name="psi")
    return psi, phi, C, planted


def _rational_weights(rng, n, max_den=100):
    out = []
    for _ in range(n):
        den = int(rng.integers(1, max_den + 1))
        num = int(rng.integers(1, 3 * den + 1))
        out.append(Fraction(num, den))
    return out


def _split(rng, total, parts):
    """``total`` split into ``parts`` positive rationals."""
    if parts == 1:
        return [total]
    cuts = sorted(int(v) for v in rng.choice(np.arange(1, 20), size=parts - 1, replace=True))
    w = np.diff([0] + cuts + [20]).astype(int) + 1
    s = int(w.sum())
    return [total * Fraction(int(v), s) for v in w]


def random_shift_instance(rng, kind=None):
    """``(problem, shift, Y)`` with a valid shift and a ``Y`` expressible in
    both spaces.

    ``kind`` is ``"coarsening"``, ``"refinement"`` or ``"mixed"`` (random by
    default).  Measures are rational with denominators at most 100.
    """
    kind = kind or ("coarsening", "refinement", "mixed")[int(rng.integers(3))]
    n = int(rng.integers(2, 7))
    k = int(rng.integers(1, 3))
    space = OutcomeSpace([f"x{i}" for i in range(n)])
    # few distinct values so that fibers of phi have several outcomes
    F = rng.integers(0, 2, size=(n, k))
    phi = RandomVariable(space, [tuple(int(v) for v in r) for r in F], name="phi")
    P0 = _dirichlet_with_zeros(rng, n, 0.2)
    C = ConstraintSet(space, ConstraintSpec(phi, P0 @ F))
    wx = _rational_weights(rng, n)
    M = Measure(space, wx)
    problem = MaxEntProblem(space, M, C)
    fib = phi.fiber_ids

    if kind == "refinement":
        copies = [int(rng.integers(1, 4)) for _ in range(n)]
        shift = RepresentationShift.refinement(space, copies)
        wv = [w for x, c in enumerate(copies) for w in _split(rng, wx[x], c)]
        shift = shift.with_measure(Measure(shift.new_space, wv))
        Y = RandomVariable(space, [int(v) for v in rng.integers(-2, 3, size=n)], name="Y")
        return problem, shift, Y

    if kind == "coarsening":
        blocks = {}
        for i in range(n):
            # split each phi-fiber into at most two blocks at random
            key = (int(fib[i]), int(rng.integers(2)))
            blocks.setdefault(key, []).append(space.outcomes[i])
        blocks = [blocks[k_] for k_ in sorted(blocks)]
        wW = [sum(wx[space.index(x)] for x in b) for b in blocks]
        shift = RepresentationShift.coarsening(space, blocks, wW)
        owner = {x: j for j, b in enumerate(blocks) for x in b}
        g = rng.integers(-2, 3, size=len(blocks))
        Y = RandomVariable(space, [int(g[owner[x]]) for x in space.outcomes], name="Y")
        return problem, shift, Y

    # mixed: refine each outcome, then merge copies that share a phi value
    copies = [int(rng.integers(1, 4)) for _ in range(n)]
    under_labels, to_orig, wv = [], [], []
    for x in range(n):
        parts = _split(rng, wx[x], copies[x])
        for j in range(copies[x]):
            under_labels.append(f"x{x}#{j}")
            to_orig.append(x)
            wv.append(parts[j])
    V = OutcomeSpace(under_labels)
    new_of = []
    for v, x in enumerate(to_orig):
        new_of.append((int(fib[x]), int(rng.integers(2))))
    keys = sorted(set(new_of))
    W = OutcomeSpace([f"w{i}" for i in range(len(keys))])
    to_new = [keys.index(key) for key in new_of]
    wW = [Fraction(0)] * W.size
    for v, w in enumerate(to_new):
        wW[w] += wv[v]
    shift = RepresentationShift(V, space, W, to_orig, to_new, Measure(W, wW))
    g = {f: int(rng.integers(-2, 3)) for f in set(fib.tolist())}
    Y = RandomVariable(space, [g[int(fib[i])] for i in range(n)], name="Y")
    return problem, shift, Y


def random_determination_instance(rng, determined):
    """``(constraints, family, Y)``: the family is every measure compatible
    with the uniform measure on the range of ``phi``.  When ``determined``
    is true, ``Y`` is a function of ``phi``; otherwise some fiber of
    ``phi`` inside the support carries two values of ``Y``."""
    while True:
        n = int(rng.integers(3, 9))
        k = int(rng.integers(1, 3))
        space = OutcomeSpace(list(range(n)))
        F = rng.integers(0, 3, size=(n, k))
        phi = RandomVariable(space, [tuple(int(v) for v in r) for r in F], name="phi")
        P0 = _dirichlet_with_zeros(rng, n, 0.15)
        C = ConstraintSet(space, ConstraintSpec(phi, P0 @ F))
        supp = C.support_mask()
        fib = phi.fiber_ids
        if determined:
            g = rng.integers(-3, 4, size=fib.max() + 1)
            y = g[fib]
        else:
            shared = [f for f in np.unique(fib[supp]) if np.sum(supp & (fib == f)) >= 2]
            if not shared:
                continue
            y = rng.integers(-3, 4, size=n)
            f = shared[int(rng.integers(len(shared)))]
            members = np.flatnonzero(supp & (fib == f))
            if y[members[0]] == y[members[1]]:
                y[members[1]] = y[members[0]] + int(rng.integers(1, 4))
        Y = RandomVariable(space, [int(v) for v in y], name="Y")
        fam = MeasureFamily.compatible_with(phi, Measure.uniform(phi.range_space()))
        return C, fam, Y


def kelly_instance():
    """Two outcomes, even odds, true distribution (0.7, 0.3)."""
    space = OutcomeSpace([1, 2])
    P = Distribution(space, [0.7, 0.3])
    strategies = {
        "true": P,
        "uniform": Distribution.uniform(space),
        "skewed": Distribution(space, [0.9, 0.1]),
    }
    return space, P, strategies
