"""Grading a proposed use of MaxEnt: guessing ``E[Y | Z]`` from ``P^me_M``.

The four levels, strongest first:

conditionally-correct
    the guess equals the true conditional expectation for every member of
    the constraint set (Y is affine in the constraint function on the
    support of each conditioned set);
conditionally-calibrated
    some coarsening ``V`` of ``Z`` makes the guess right on average over
    the cells of ``V``;
well-defined
    the guess does not depend on which measure of the family is used;
ill-defined
    otherwise.  A pair of measures giving different guesses is searched
    for and reported.
"""

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT
from .constraints import condition, lp_extremize
from .core import (
    ALL_MEASURES,
    COMPATIBLE_WITH,
    Measure,
    RandomVariable,
    _check_same_space,
    conditional_expectation,
    determines,
)
from .errors import Infeasible, ZeroProbabilityConditioning, ZNotDeterminingV
from .solver import MaxEntProblem, solve_maxent

__all__ = [
    "CORRECT",
    "CALIBRATED",
    "WELL_DEFINED",
    "ILL_DEFINED",
    "LEVELS",
    "AffineCertificate",
    "AffineRejection",
    "ApplicationQuery",
    "ApplicationClass",
    "CalibrationVerdict",
    "SeparatingPair",
    "affine_test",
    "calibration_test",
    "classify",
    "guess",
    "family_guesses",
    "separating_search",
    "set_partitions",
    "loss_table_variables",
    "classify_loss_table",
]

CORRECT = "conditionally-correct"
CALIBRATED = "conditionally-calibrated"
WELL_DEFINED = "well-defined"
ILL_DEFINED = "ill-defined"
LEVELS = (CORRECT, CALIBRATED, WELL_DEFINED, ILL_DEFINED)

AFFINE_TOL = 1e-7
CALIBRATION_TOL = 1e-7
AGREEMENT_TOL = 1e-6
SEPARATION_TOL = 1e-3
INEQUALITY_CAVEAT = ("constraint set has inequality rows; the hierarchy's criteria are "
                     "derived for equality constraints")

POSTERIOR = "posterior"
CONSTRAINT = "constraint"


# -- affine test ------------------------------------------------------------

@dataclass(frozen=True)
class AffineCertificate:
    """``psi = coefficients[:, 0] + coefficients[:, 1:] @ phi`` on ``subset``
    (one row per component of psi)."""

    coefficients: np.ndarray
    residual: float
    subset: np.ndarray

    def __bool__(self):
        return True


@dataclass(frozen=True)
class AffineRejection:
    worst_outcome: object
    residual: float

    def __bool__(self):
        return False


def _as_matrix(v):
    if isinstance(v, RandomVariable):
        return v.values
    a = np.asarray(v, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def affine_test(psi, phi, subset=None, tol=AFFINE_TOL):
    """Is ``psi`` an affine function of ``phi`` on ``subset``?

    ``phi`` may be a random variable or an ``(n, k)`` array of values.
    ``subset`` is a boolean mask or label iterable (default: everything).
    """
    space = psi.space
    if isinstance(phi, RandomVariable):
        _check_same_space(psi, phi)
    if subset is None:
        mask = np.ones(space.size, dtype=bool)
    elif isinstance(subset, np.ndarray) and subset.dtype == bool:
        mask = subset
    else:
        mask = space.mask(subset)
    if not mask.any():
        raise ValueError("subset must be non-empty")
    F = _as_matrix(phi)[mask]
    Y = psi.values[mask]
    X = np.column_stack([np.ones(F.shape[0]), F])
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    # rounding noise in coefficients of redundant columns
    coef[np.abs(coef) <= 1e-12 * max(1.0, np.abs(coef).max())] = 0.0
    r = np.max(np.abs(X @ coef - Y), axis=1)
    worst = int(np.argmax(r))
    if r[worst] <= tol:
        return AffineCertificate(coef.T.copy(), float(r[worst]), mask.copy())
    label = space.outcomes[int(np.flatnonzero(mask)[worst])]
    return AffineRejection(label, float(r[worst]))


# -- queries ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ApplicationQuery:
    """Guess ``E[Y | Z]`` from MaxEnt over ``constraints`` relative to some
    member of ``family``.

    ``conditioning`` selects how a value of ``Z`` is used: ``"posterior"``
    solves over the constraint set and then conditions the solution on
    ``Z = z``; ``"constraint"`` adds ``P(Z = z) = 1`` as a constraint row
    and solves over the conditioned set.
    """

    constraints: object
    family: object
    Y: RandomVariable
    Z: RandomVariable = None
    name: str = None
    conditioning: str = POSTERIOR

    def __post_init__(self):
        if self.Z is None:
            object.__setattr__(self, "Z", RandomVariable.constant(self.space, 1, name="trivial"))
        _check_same_space(self.constraints, self.Y, self.Z)
        if self.family.space != self.space:
            raise ValueError("measure family lives on a different space")
        if self.conditioning not in (POSTERIOR, CONSTRAINT):
            raise ValueError("conditioning must be 'posterior' or 'constraint'")
        if self.constraints.is_hull:
            raise TypeError("queries need a moment constraint set, not a hull")

    @property
    def space(self):
        return self.constraints.space

    @property
    def phi(self):
        return self.constraints.spec.phi


@dataclass(frozen=True)
class SeparatingPair:
    measure_a: Measure
    measure_b: Measure
    z: object
    guess_a: object
    guess_b: object
    difference: float
    attempts: int
    origin: str = ""


@dataclass(frozen=True)
class CalibrationVerdict:
    holds: bool
    V: RandomVariable
    cell_values: dict = field(default_factory=dict)
    degenerate_cells: tuple = ()
    failures: tuple = ()

    def __bool__(self):
        return self.holds


@dataclass(frozen=True)
class ApplicationClass:
    level: str
    evidence: dict
    caveats: tuple = ()
    notes: tuple = ()

    @property
    def rank(self):
        return LEVELS.index(self.level)

    def at_least(self, level):
        return self.rank <= LEVELS.index(level)

    def summary(self):
        return {"level": self.level, "caveats": list(self.caveats), "notes": list(self.notes)}


# -- guessing ---------------------------------------------------------------

class _Context:
    """Per-query caches: conditioned sets and the values of Z that can occur."""

    def __init__(self, query, config):
        self.q = query
        self.config = config
        self.notes = []
        self.cells = {}
        supp = query.constraints.support_mask()
        # values of Z with positive probability under some member of C
        self.zs = [z for z in query.Z.range() if (query.Z.event(z) & supp).any()]
        for z in query.Z.range():
            try:
                self.cells[z] = condition(query.constraints, query.Z, z)
            except Infeasible:
                if query.conditioning == CONSTRAINT or z not in self.zs:
                    self.notes.append(f"Z = {z!r} is impossible under the constraints; skipped")

    @property
    def keys(self):
        """The values of Z for which a guess can exist."""
        return list(self.cells) if self.q.conditioning == CONSTRAINT else list(self.zs)

    def guess(self, M, z):
        q = self.q
        if q.conditioning == CONSTRAINT:
            C = self.cells.get(z)
            if C is None:
                raise Infeasible(f"no member of the constraint set has Z = {z!r}")
            P = solve_maxent(MaxEntProblem(q.space, M, C), self.config).distribution
            return _vec(P.probs @ q.Y.values)
        P = solve_maxent(MaxEntProblem(q.space, M, q.constraints), self.config).distribution
        return _vec(conditional_expectation(P, q.Y, q.Z, z))

    def guesses(self, M):
        """Guesses for every possible ``z`` (``None`` where undefined)."""
        q = self.q
        out = {}
        if q.conditioning == POSTERIOR:
            P = solve_maxent(MaxEntProblem(q.space, M, q.constraints), self.config).distribution
            for z in self.zs:
                try:
                    out[z] = _vec(conditional_expectation(P, q.Y, q.Z, z))
                except ZeroProbabilityConditioning:
                    out[z] = None
            return out
        for z in self.cells:
            out[z] = self.guess(M, z)
        return out


def _vec(v):
    return np.atleast_1d(np.asarray(v, dtype=float))


def guess(query, M, z, config=DEFAULT, check_family=True):
    """MaxEnt guess of ``E[Y | Z = z]`` relative to ``M``.

    Returns ``(value, verdict)``: a float (or vector) and the query's
    :class:`ApplicationClass`, to be read as a trust label for the value.
    """
    if check_family and not query.family.contains(M):
        raise ValueError("measure is not a member of the query's family")
    query.Z.value_index(z)
    ctx = _Context(query, config)
    value = ctx.guess(M, z)
    verdict = classify(query, config=config)
    out = float(value[0]) if value.size == 1 else value
    return out, verdict


# -- calibration ----------------------------------------------------------

def set_partitions(items):
    """All partitions of ``items`` (a list), finest first."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def partition_variable(Z, blocks, name="V"):
    """Random variable equal to the index of the block containing ``Z``'s value."""
    where = {}
    for j, b in enumerate(blocks):
        for z in b:
            where[Z.value_index(z)] = j
    return RandomVariable(Z.space, [where[i] for i in Z.fiber_ids], name=name)


def _members(query, seed, count):
    fam = query.family
    out = [fam.canonical()]
    if not fam.is_single:
        out.extend(fam.sample(np.random.default_rng(seed), count))
    return out


def _constant_over(C, coeff):
    lo, _ = lp_extremize(C, coeff, "min")
    hi, _ = lp_extremize(C, coeff, "max")
    return max(abs(lo), abs(hi)) <= CALIBRATION_TOL


def calibration_test(query, V, config=DEFAULT, seed=0, samples=4, _ctx=None):
    """Definition-level calibration check of ``query`` through ``V``.

    Under the posterior reading the cell value ``c_v`` is the MaxEnt
    conditional average of Y given ``V = v`` and the check is that
    ``E[(Y - c_v) 1{V = v}]`` vanishes on the whole constraint set, which
    makes every member's conditional average equal ``c_v`` whenever it is
    defined.  Under the constraint reading ``V = v`` is added as a
    constraint and Y's average must be constant on that conditioned set.
    Cells whose probability can reach zero are still checked and are listed
    in ``degenerate_cells``.  Both readings also require the guess for each
    ``z`` to equal the value of its cell, for the canonical measure and
    ``samples`` family members.
    """
    if not determines(query.Z, V):
        raise ZNotDeterminingV("Z does not determine the proposed V")
    ctx = _ctx or _Context(query, config)
    C = query.constraints
    Yv = query.Y.values
    cells, degenerate, failures = {}, [], []
    members = _members(query, seed, samples)
    constraint_mode = query.conditioning == CONSTRAINT
    if not constraint_mode:
        sols = [solve_maxent(MaxEntProblem(query.space, M, C), config).distribution for M in members]
    for v in V.range():
        ev = V.event(v).astype(float)
        if constraint_mode:
            try:
                Cv = condition(C, V, v)
            except Infeasible:
                continue
            cs = [_vec(solve_maxent(MaxEntProblem(query.space, M, Cv), config).distribution.probs @ Yv)
                  for M in members]
        else:
            cs = []
            for P in sols:
                mass = P.probs @ ev
                if mass > 0:
                    cs.append((P.probs * ev) @ Yv / mass)
            if not cs:
                # v is impossible under C: there is nothing to guess
                continue
            pmin, _ = lp_extremize(C, ev, "min")
            if pmin <= config.support_tol:
                degenerate.append(v)
        c = cs[0]
        if any(np.max(np.abs(d - c)) > CALIBRATION_TOL for d in cs[1:]):
            failures.append(("cell value depends on the measure", v))
            continue
        cells[v] = c
        for j in range(Yv.shape[1]):
            ok = _constant_over(Cv, Yv[:, j] - c[j]) if constraint_mode else \
                _constant_over(C, (Yv[:, j] - c[j]) * ev)
            if not ok:
                failures.append(("cell average varies over the constraint set", v))
                break
    # the guess for each z must equal its cell's value
    for z in ctx.keys:
        i = int(np.flatnonzero(query.Z.event(z))[0])
        v = V.range()[V.fiber_ids[i]]
        if v not in cells:
            continue
        for M in members:
            g = ctx.guesses(M)[z]
            if g is not None and np.max(np.abs(g - cells[v])) > CALIBRATION_TOL:
                failures.append(("guess differs from its cell value", z))
                break
    if not cells and not failures:
        failures.append(("no cell of V can occur", None))
    return CalibrationVerdict(not failures, V, cells, tuple(degenerate), tuple(failures))


# -- well-definedness --------------------------------------------------------

def family_guesses(query, count=50, seed=0, config=DEFAULT, _ctx=None):
    """Guesses for ``count`` sampled members of the family; returns
    ``(measures, guesses, max_spread)`` with guesses keyed by ``z``."""
    ctx = _ctx or _Context(query, config)
    fam = query.family
    members = [fam.canonical()] if fam.is_single else \
        fam.sample(np.random.default_rng(seed), count)
    table = [ctx.guesses(M) for M in members]
    spread = 0.0
    for z in ctx.keys:
        vals = [g[z] for g in table if g[z] is not None]
        if len(vals) > 1:
            arr = np.array(vals)
            spread = max(spread, float(np.max(arr.max(axis=0) - arr.min(axis=0))))
    return members, table, spread


def _coarse_candidates(query):
    """Weights ``1 / (size of the cell containing x)`` for the partitions
    induced by Y, Z and phi (within family fibers when the family fixes a
    pushforward)."""
    out = []
    fam = query.family
    base = fam.variable.fiber_ids if fam.kind == COMPATIBLE_WITH else np.zeros(query.space.size, int)
    for nm, var in (("Y", query.Y), ("Z", query.Z), ("phi", query.phi)):
        key = base * (var.fiber_ids.max() + 1) + var.fiber_ids
        _, inv, counts = np.unique(key, return_inverse=True, return_counts=True)
        out.append((f"coarse-uniform({nm})", 1.0 / counts[inv]))
    return out


def _extreme_candidates(query):
    """Concentrate the weight of each family fiber on its largest and on its
    smallest values of Y (first component)."""
    y = query.Y.values[:, 0]
    fam = query.family
    base = fam.variable.fiber_ids if fam.kind == COMPATIBLE_WITH else np.zeros(query.space.size, int)
    hi = np.full(y.size, 1e-3)
    lo = np.full(y.size, 1e-3)
    for f in np.unique(base):
        idx = np.flatnonzero(base == f)
        hi[idx[y[idx] == y[idx].max()]] = 1.0
        lo[idx[y[idx] == y[idx].min()]] = 1.0
    return [("extreme(Y high)", hi), ("extreme(Y low)", lo)]


def _from_raw(query, raw):
    fam = query.family
    if fam.kind == COMPATIBLE_WITH:
        return fam.split_fibers(raw)
    return Measure(query.space, raw)


def separating_search(query, attempts=1000, seed=0, config=DEFAULT, _ctx=None):
    """Look for two family members with different guesses.

    Candidates are tried in a fixed order: the canonical member, the
    coarse-uniform and extreme within-fiber splits, then ``attempts`` seeded
    coordinate perturbations of the fiber weights.  The first pair whose
    guesses differ by more than the reporting threshold is returned;
    otherwise the most separated pair seen.  ``None`` for single-member
    families.
    """
    fam = query.family
    if fam.is_single:
        return None
    ctx = _ctx or _Context(query, config)
    seen = []
    best = None
    tried = 0

    def consider(label, M, against):
        nonlocal best
        g = ctx.guesses(M)
        for prev_label, prev_M, prev_g in against:
            for z, v in g.items():
                u = prev_g.get(z)
                if v is None or u is None:
                    continue
                d = float(np.max(np.abs(v - u)))
                if best is None or d > best.difference:
                    best = SeparatingPair(prev_M, M, z, _scalar(u), _scalar(v), d, tried,
                                          f"{prev_label} vs {label}")
        return g

    cands = [("canonical", None)] + _coarse_candidates(query) + _extreme_candidates(query)
    for label, raw in cands:
        tried += 1
        M = fam.canonical() if raw is None else _from_raw(query, raw)
        seen.append((label, M, consider(label, M, list(seen))))
        if best is not None and best.difference > SEPARATION_TOL:
            return best
    rng = np.random.default_rng(seed)
    raw = np.ones(query.space.size)
    n = query.space.size
    for k in range(attempts):
        tried += 1
        raw = raw.copy()
        raw[int(rng.integers(n))] *= float(np.exp(rng.normal(0.0, 2.0)))
        # perturbations are compared with the canonical member only
        consider(f"perturbation {k}", _from_raw(query, raw), seen[:1])
        if best.difference > SEPARATION_TOL:
            break
    return best


def _scalar(v):
    return float(v[0]) if np.size(v) == 1 else np.asarray(v)


def _family_matches_phi(query):
    fam = query.family
    return bool(determines(fam.variable, query.phi)) and bool(determines(query.phi, fam.variable))


# -- the ladder ---------------------------------------------------------------

def classify(query, config=DEFAULT, seed=0, samples=50, attempts=1000, partitions=None):
    """Place ``query`` on the four-level ladder.

    ``partitions`` optionally supplies candidate ``V`` variables; by default
    every partition of the range of ``Z`` is tried when it has at most 8
    values.
    """
    ctx = _Context(query, config)
    caveats = []
    if query.constraints.has_inequalities:
        caveats.append(INEQUALITY_CAVEAT)
    notes = list(ctx.notes)
    if not ctx.keys:
        notes.append("no value of Z can occur; every level holds vacuously")

    certs = {}
    for z, Cz in ctx.cells.items():
        F, _, _ = Cz.features()
        certs[z] = affine_test(query.Y, F, Cz.support_mask())
    if all(certs.values()):
        if query.conditioning == CONSTRAINT or len(query.Z.range()) == 1:
            return ApplicationClass(CORRECT, {"certificates": certs}, tuple(caveats), tuple(notes))
        # posterior reading: the affine criterion is necessary, the direct
        # check through V = Z decides
        direct = calibration_test(query, query.Z, config, seed, _ctx=ctx)
        if direct:
            return ApplicationClass(CORRECT, {"certificates": certs, "direct": direct},
                                    tuple(caveats), tuple(notes))
        notes.append("affine on every conditioned support, but the posterior guess "
                     "is not correct for every member of the constraint set")

    zr = ctx.keys
    candidates = []
    if partitions is not None:
        candidates = list(partitions)
    elif len(query.Z.range()) <= 8:
        for blocks in set_partitions(query.Z.range()):
            candidates.append(partition_variable(query.Z, blocks))
    else:
        notes.append("Z has more than 8 values; calibration only tried with supplied partitions")
    for V in candidates:
        verdict = calibration_test(query, V, config, seed, _ctx=ctx)
        if verdict:
            if verdict.degenerate_cells:
                notes.append(f"cells that can have probability zero: {list(verdict.degenerate_cells)!r}")
            return ApplicationClass(CALIBRATED, {"calibration": verdict}, tuple(caveats), tuple(notes))

    fam = query.family
    evidence = {"affine_failures": {z: c for z, c in certs.items() if not c}}
    if fam.is_single:
        evidence["reason"] = "the family has a single member"
        return ApplicationClass(WELL_DEFINED, evidence, tuple(caveats), tuple(notes))
    if fam.kind == COMPATIBLE_WITH:
        if _family_matches_phi(query):
            det = {z: determines(query.phi, query.Y, Cz.support_mask()) for z, Cz in ctx.cells.items()}
            evidence["determination"] = det
            if query.conditioning == POSTERIOR and len(zr) > 1:
                notes.append("determination criterion is stated for conditioning by constraint; "
                             "checked empirically as well")
            if all(det.values()):
                _, _, spread = family_guesses(query, samples, seed, config, _ctx=ctx)
                evidence["agreement"] = {"samples": samples, "max_spread": spread}
                if spread <= AGREEMENT_TOL:
                    return ApplicationClass(WELL_DEFINED, evidence, tuple(caveats), tuple(notes))
                notes.append("determination holds but sampled guesses disagree")
        else:
            _, _, spread = family_guesses(query, samples, seed, config, _ctx=ctx)
            evidence["agreement"] = {"samples": samples, "max_spread": spread}
            if spread <= AGREEMENT_TOL:
                caveats.append("well-definedness established by sampling only")
                return ApplicationClass(WELL_DEFINED, evidence, tuple(caveats), tuple(notes))
    elif fam.kind == ALL_MEASURES:
        evidence["reason"] = "over all measures, only conditionally correct guesses are well-defined"

    pair = separating_search(query, attempts, seed, config, _ctx=ctx)
    evidence["separating"] = pair
    evidence["manual_review"] = pair is None or pair.difference <= SEPARATION_TOL
    if evidence["manual_review"]:
        notes.append("no separating pair above the threshold was found; review manually")
    return ApplicationClass(ILL_DEFINED, evidence, tuple(caveats), tuple(notes))


# -- loss tables -------------------------------------------------------------

def loss_table_variables(Y, decisions, loss):
    """One variable ``psi_d(x) = loss(Y(x), d)`` per decision ``d``.

    ``loss`` is a callable ``loss(y, d)`` or a mapping ``{(y, d): value}``.
    """
    fn = loss if callable(loss) else (lambda y, d: loss[(y, d)])
    return {d: Y.map(lambda y, d=d: fn(y, d), name=f"loss[{d}]") for d in decisions}


def classify_loss_table(constraints, family, Y, decisions, loss, Z=None, **kwargs):
    """Classify the guess of expected loss for every decision."""
    out = {}
    for d, psi in loss_table_variables(Y, decisions, loss).items():
        q = ApplicationQuery(constraints, family, psi, Z, name=f"loss[{d}]")
        out[d] = classify(q, **kwargs)
    return out

