"""Representation shifts: re-describing a MaxEnt problem on another space.

A shift is given by an underlying space ``V`` with two surjections,
``h: V -> X`` onto the original space and ``w: V -> W`` onto the new one.
It is *valid* for a problem when ``w`` determines the constraint function
pulled back to ``V``, and (if a measure on ``W`` is given) some positive
measure on ``V`` pushes forward to both measures.  Valid shifts leave
MaxEnt inferences about any variable expressible in both spaces unchanged.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .config import DEFAULT
from .constraints import ConstraintSet, ConstraintSpec
from .core import Distribution, Measure, OutcomeSpace, RandomVariable
from .errors import (
    DenominatorOverflow,
    Infeasible,
    InvalidShift,
    IrrationalWeights,
    VerificationFailed,
    YNotExpressibleInNewSpace,
)
from .lp import LPSolver
from .solver import MaxEntProblem, solve_maxent

__all__ = [
    "RepresentationShift",
    "ShiftVerdict",
    "InvarianceReport",
    "validate_shift",
    "induce_problem",
    "check_invariance",
    "measure_to_uniform_space",
    "compatible_measure",
    "two_marginal_compatible",
    "pushed_back",
]

MAX_DENOMINATOR = 10**4
POSITIVITY_FLOOR = 1e-12


def _label_map(space, labels):
    return np.array([space.index(x) for x in labels], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class RepresentationShift:
    """``to_original[v]`` and ``to_new[v]`` are indices into
    ``original_space`` and ``new_space`` for each outcome ``v`` of
    ``underlying``.  ``new_measure`` may be ``None``."""

    underlying: OutcomeSpace
    original_space: OutcomeSpace
    new_space: OutcomeSpace
    to_original: np.ndarray
    to_new: np.ndarray
    new_measure: Measure = None

    def __post_init__(self):
        for name, arr, target in (("to_original", self.to_original, self.original_space),
                                  ("to_new", self.to_new, self.new_space)):
            a = np.array(arr, dtype=np.int64)
            if a.shape != (self.underlying.size,):
                raise ValueError(f"{name} must give one index per underlying outcome")
            if a.size and (a.min() < 0 or a.max() >= target.size):
                raise ValueError(f"{name} points outside its target space")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.new_measure is not None and self.new_measure.space != self.new_space:
            raise ValueError("new_measure must live on new_space")

    @classmethod
    def from_maps(cls, underlying, original_space, new_space, to_original, to_new,
                  new_measure=None):
        """Build from label maps (dicts keyed by underlying labels, or
        sequences aligned with ``underlying.outcomes``)."""
        def seq(m):
            return [m[v] for v in underlying.outcomes] if isinstance(m, dict) else list(m)

        return cls(underlying, original_space, new_space,
                   _label_map(original_space, seq(to_original)),
                   _label_map(new_space, seq(to_new)), new_measure)

    @classmethod
    def identity(cls, space, measure=None):
        idx = np.arange(space.size)
        return cls(space, space, space, idx, idx, measure)

    @classmethod
    def coarsening(cls, space, blocks, new_measure=None, labels=None):
        """``W`` is a partition of ``X`` into ``blocks`` (iterables of labels)."""
        blocks = [list(b) for b in blocks]
        if labels is None:
            labels = ["{" + ",".join(str(x) for x in b) + "}" for b in blocks]
        new_space = OutcomeSpace(labels)
        owner = {}
        for j, b in enumerate(blocks):
            for x in b:
                if x in owner:
                    raise ValueError(f"outcome {x!r} appears in two blocks")
                owner[x] = j
        to_new = [owner[x] if x in owner else -1 for x in space.outcomes]
        if -1 in to_new:
            raise ValueError("blocks must cover the space")
        if new_measure is not None and not isinstance(new_measure, Measure):
            new_measure = Measure(new_space, new_measure)
        return cls(space, space, new_space, np.arange(space.size), to_new, new_measure)

    @classmethod
    def refinement(cls, space, copies, new_measure=None):
        """Split outcome ``x`` into ``copies[x]`` outcomes labelled ``"x#i"``."""
        if isinstance(copies, dict):
            copies = [copies.get(x, 1) for x in space.outcomes]
        labels, to_orig = [], []
        for i, (x, c) in enumerate(zip(space.outcomes, copies)):
            if c < 1:
                raise ValueError("every outcome needs at least one copy")
            for j in range(int(c)):
                labels.append(f"{x}#{j}")
                to_orig.append(i)
        fine = OutcomeSpace(labels)
        if new_measure is not None and not isinstance(new_measure, Measure):
            new_measure = Measure(fine, new_measure)
        return cls(fine, space, fine, to_orig, np.arange(fine.size), new_measure)

    def with_measure(self, measure):
        return RepresentationShift(self.underlying, self.original_space, self.new_space,
                                   self.to_original, self.to_new, measure)

    def pull_back(self, F):
        """Rows of ``F`` (indexed by original outcomes) as rows over ``underlying``."""
        return np.asarray(F)[self.to_original]

    def fiber_representatives(self):
        """For each new outcome, the first underlying outcome mapping to it."""
        rep = np.full(self.new_space.size, -1, dtype=np.int64)
        for v, w in enumerate(self.to_new):
            if rep[w] < 0:
                rep[w] = v
        return rep


@dataclass(frozen=True)
class ShiftVerdict:
    valid: bool
    reasons: tuple = ()
    counterexample: tuple = None
    underlying_measure: Measure = None

    def __bool__(self):
        return self.valid


def _problem_rows(problem):
    C = problem.constraints
    if C.is_hull:
        raise TypeError("representation shifts are defined for moment constraint sets")
    F, t, rel = C.features()
    exact = None
    if C.spec.phi.exact is not None:
        exact = [list(C.spec.phi.exact[i]) + [int(Z.event(z)[i]) for Z, z in C.extra_conditioning]
                 for i in range(C.space.size)]
    return F, t, rel, exact


def _constant_on_fibers(shift, rows_v, exact):
    """First pair of underlying outcomes in one ``W`` fiber with different rows."""
    first = {}
    for v, w in enumerate(shift.to_new):
        if w not in first:
            first[w] = v
            continue
        u = first[w]
        if exact is not None:
            differ = exact[v] != exact[u]
        else:
            differ = np.max(np.abs(rows_v[v] - rows_v[u])) > 1e-9
        if differ:
            lab = shift.underlying.outcomes
            return lab[u], lab[v]
    return None


def _peel_forced(maps_and_measures, n):
    """Fix every variable that is alone in some pushforward row.

    Returns the forced weights, a mask of the variables left for the LP, and
    the residual targets and free counts per row.  ``None`` means a forced
    weight is not strictly positive or a fully fixed row misses its target.
    """
    idx_list = [np.asarray(idx) for idx, _ in maps_and_measures]
    resid = [np.array(M.weights, dtype=float) for _, M in maps_and_measures]
    # free variables per row, and the row of each variable per map
    count = [np.bincount(idx, minlength=r.size) for idx, r in zip(idx_list, resid)]
    members = []
    for idx, r in zip(idx_list, resid):
        order = np.argsort(idx, kind="stable")
        members.append(np.split(order, np.cumsum(np.bincount(idx, minlength=r.size))[:-1]))
    scale = max(1.0, max(float(r.sum()) for r in resid))
    w = np.zeros(n)
    free = np.ones(n, dtype=bool)
    queue = [(k, i) for k in range(len(resid)) for i in np.flatnonzero(count[k] == 1)]
    while queue:
        k, i = queue.pop()
        if count[k][i] != 1:
            continue
        v = next(int(u) for u in members[k][i] if free[u])
        val = resid[k][i]
        if val <= POSITIVITY_FLOOR * scale:
            return None
        w[v] = val
        free[v] = False
        for kk, idx in enumerate(idx_list):
            row = idx[v]
            resid[kk][row] -= val
            count[kk][row] -= 1
            if count[kk][row] == 1:
                queue.append((kk, row))
    for k, r in enumerate(resid):
        if np.any(np.abs(r[count[k] == 0]) > 1e-9 * scale):
            return None
    return w, free, resid, count


def compatible_measure(maps_and_measures, space, config=DEFAULT):
    """A strictly positive measure on ``space`` whose pushforward under each
    ``(index_map, measure)`` pair equals that measure, or ``None``.

    Variables that are the only preimage of some outcome are fixed first;
    the rest is solved as an LP maximising the smallest weight, so strict
    positivity is enforced directly rather than by a perturbation afterwards.
    """
    n = space.size
    peeled = _peel_forced(maps_and_measures, n)
    if peeled is None:
        return None
    w, free, resid, count = peeled
    cols = np.flatnonzero(free)
    if cols.size:
        rows, rhs = [], []
        for (idx, _), r, c in zip(maps_and_measures, resid, count):
            live = np.flatnonzero(c > 0)
            pos = np.full(r.size, -1)
            pos[live] = np.arange(live.size)
            A = np.zeros((live.size, cols.size))
            A[pos[np.asarray(idx)[cols]], np.arange(cols.size)] = 1.0
            rows.append(A)
            rhs.append(r[live])
        A = np.vstack(rows)
        G = np.hstack([A, A.sum(axis=1, keepdims=True)])
        c = np.zeros(cols.size + 1)
        c[-1] = 1.0
        try:
            res = LPSolver(G, np.concatenate(rhs), config).maximize(c)
        except Infeasible:
            return None
        s = res.x[-1]
        if s <= POSITIVITY_FLOOR:
            return None
        w[cols] = res.x[:cols.size] + s
    # the LP point is exact up to rounding; check the pushforwards explicitly
    for idx, M in maps_and_measures:
        if not np.allclose(np.bincount(idx, weights=w, minlength=M.space.size), M.weights,
                           rtol=1e-9, atol=1e-9):
            return None
    return Measure(space, w)


def validate_shift(shift, problem, config=DEFAULT):
    """Check surjectivity, expressibility of the constraints, and measure compatibility."""
    reasons = []
    if problem.space != shift.original_space:
        return ShiftVerdict(False, ("shift does not start from the problem's space",))
    if np.unique(shift.to_original).size != shift.original_space.size:
        reasons.append("map to the original space is not surjective")
    if np.unique(shift.to_new).size != shift.new_space.size:
        reasons.append("map to the new space is not surjective")
    F, _, _, exact = _problem_rows(problem)
    rows_v = shift.pull_back(F)
    exact_v = [exact[x] for x in shift.to_original] if exact is not None else None
    cex = _constant_on_fibers(shift, rows_v, exact_v)
    if cex is not None:
        reasons.append("the new space does not determine the constraint function")
    M_V = None
    if shift.new_measure is not None and not reasons:
        M_V = compatible_measure(
            [(shift.to_original, problem.measure), (shift.to_new, shift.new_measure)],
            shift.underlying, config)
        if M_V is None:
            reasons.append("no positive measure on the underlying space is compatible with both measures")
    return ShiftVerdict(not reasons, tuple(reasons), cex, M_V)


def _default_new_measure(shift, M):
    # split each original weight evenly over its preimage, then push to W
    counts = np.bincount(shift.to_original, minlength=shift.original_space.size)
    w_v = M.weights[shift.to_original] / counts[shift.to_original]
    return Measure(shift.new_space, np.bincount(shift.to_new, weights=w_v,
                                                minlength=shift.new_space.size))


def induce_problem(shift, problem, config=DEFAULT):
    """The MaxEnt problem on the new space induced by a valid shift.

    Without a ``new_measure`` the shift carries the original measure over
    by splitting each weight evenly across its preimage in ``V``.
    """
    verdict = validate_shift(shift, problem, config)
    if not verdict:
        raise InvalidShift("; ".join(verdict.reasons))
    C = problem.constraints
    F, t, rel, exact = _problem_rows(problem)
    reps = shift.to_original[shift.fiber_representatives()]
    if exact is not None:
        values = [tuple(exact[x]) for x in reps]
    else:
        values = F[reps].tolist()
    phi_w = RandomVariable(shift.new_space, values, name=C.spec.phi.name)
    spec = ConstraintSpec(phi_w, t, rel)
    M_W = shift.new_measure or _default_new_measure(shift, problem.measure)
    return MaxEntProblem(shift.new_space, M_W, ConstraintSet(shift.new_space, spec, config=config))


def _expressed_in_new_space(shift, Y):
    rows_v = shift.pull_back(Y.values)
    exact_v = [Y.exact[x] for x in shift.to_original] if Y.exact is not None else None
    cex = _constant_on_fibers(shift, rows_v, exact_v)
    if cex is not None:
        raise YNotExpressibleInNewSpace(
            f"underlying outcomes {cex[0]!r} and {cex[1]!r} share a new outcome but differ in Y")
    reps = shift.to_original[shift.fiber_representatives()]
    if Y.exact is not None:
        vals = [Y.exact[x] for x in reps]
    else:
        vals = Y.values[reps].tolist()
    return RandomVariable(shift.new_space, vals, name=Y.name)


@dataclass(frozen=True)
class InvarianceReport:
    """``rows`` lists ``(y, P_X(Y = y), P_W(Y_W = y))`` for each value of Y."""

    max_discrepancy: float
    rows: tuple = field(default=())

    def __float__(self):
        return self.max_discrepancy


def check_invariance(shift, problem, Y, config=DEFAULT):
    """Solve on both spaces and compare the laws of ``Y``."""
    Y_w = _expressed_in_new_space(shift, Y)
    induced = induce_problem(shift, problem, config)
    P_x = solve_maxent(problem, config).distribution
    P_w = solve_maxent(induced, config).distribution
    rows = []
    worst = 0.0
    for y in Y.range():
        a = float(P_x.probs[Y.event(y)].sum())
        b = float(P_w.probs[Y_w.event(y)].sum())
        rows.append((y, a, b))
        worst = max(worst, abs(a - b))
    return InvarianceReport(worst, tuple(rows))


def _rational_weights(M, cap):
    if M.exact is not None:
        fr = list(M.exact)
    else:
        fr = []
        for w in M.weights:
            f = Fraction(float(w)).limit_denominator(cap)
            if abs(float(f) - w) > 1e-12 * max(1.0, abs(w)):
                raise IrrationalWeights(f"weight {w!r} is not a rational with denominator <= {cap}")
            fr.append(f)
    d = 1
    for f in fr:
        d = d * f.denominator // math.gcd(d, f.denominator)
        if d > cap:
            raise DenominatorOverflow(f"common denominator exceeds {cap}")
    return fr, d


def measure_to_uniform_space(M, problem=None, cap=MAX_DENOMINATOR, config=DEFAULT):
    """Represent a rational measure as a uniform measure on a finer space.

    Outcome ``x`` is split into ``M(x) * d`` copies (``d`` the common
    denominator) and each copy gets weight ``1/d``.  When ``problem`` is
    given, the shift is checked to reproduce its MaxEnt distribution.
    """
    fr, d = _rational_weights(M, cap)
    copies = [int(f * d) for f in fr]
    if sum(copies) > cap * max(1, M.space.size):
        raise DenominatorOverflow("refined space would be too large")
    shift = RepresentationShift.refinement(M.space, copies)
    shift = shift.with_measure(Measure.uniform(shift.new_space, Fraction(1, d)))
    if problem is not None:
        if problem.measure is not M and not np.allclose(problem.measure.weights, M.weights):
            raise ValueError("problem uses a different measure")
        Y = RandomVariable(M.space, list(range(M.space.size)), name="X")
        rep = check_invariance(shift, problem, Y, config)
        if rep.max_discrepancy > 1e-8:
            raise VerificationFailed(
                f"uniform representation disagrees with the original by {rep.max_discrepancy:.3g}")
    return shift


def pushed_back(shift, P_new):
    """Distribution on the original space induced by ``P_new`` when ``W``
    refines ``X`` (every new outcome maps to one original outcome)."""
    reps = shift.to_original[shift.fiber_representatives()]
    p = np.bincount(reps, weights=P_new.probs, minlength=shift.original_space.size)
    return Distribution(shift.original_space, p / p.sum())


def two_marginal_compatible(mu, nu, allowed=None, config=DEFAULT):
    """Experimental: is there a positive measure on the pairs ``(a, b)`` with
    ``allowed[a, b]`` true whose marginals are ``mu`` and ``nu``?

    This is the general two-variable compatibility notion on an implicit
    joint space.  Returns the joint weight matrix or ``None``.
    """
    na, nb = mu.space.size, nu.space.size
    allowed = np.ones((na, nb), dtype=bool) if allowed is None else np.asarray(allowed, bool)
    cells = np.argwhere(allowed)
    joint = OutcomeSpace([f"{a},{b}" for a, b in cells])
    w = compatible_measure([(cells[:, 0], mu), (cells[:, 1], nu)], joint, config)
    if w is None:
        return None
    out = np.zeros((na, nb))
    out[cells[:, 0], cells[:, 1]] = w.weights
    return out

