"""Finite outcome spaces, measures, distributions and random variables.

Everything here is immutable after construction.  Arrays exposed as
attributes are marked read-only.
"""

from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral, Rational

import numpy as np

from .errors import SpaceMismatch, ZeroProbabilityConditioning

VALUE_TOL = 1e-9
NORMALIZATION_TOL = 1e-12


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


class OutcomeSpace:
    """An ordered, non-empty set of distinct outcome labels.

    Index ``i`` is the canonical encoding of ``outcomes[i]``.
    """

    __slots__ = ("outcomes", "_index")

    def __init__(self, outcomes):
        outcomes = tuple(outcomes)
        if not outcomes:
            raise ValueError("outcome space must be non-empty")
        index = {}
        for i, label in enumerate(outcomes):
            if label in index:
                raise ValueError(f"duplicate outcome label {label!r}")
            index[label] = i
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "_index", index)

    def __setattr__(self, name, value):
        raise AttributeError("OutcomeSpace is immutable")

    @property
    def size(self):
        return len(self.outcomes)

    def __len__(self):
        return len(self.outcomes)

    def __iter__(self):
        return iter(self.outcomes)

    def __contains__(self, label):
        return label in self._index

    def index(self, label):
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"{label!r} is not an outcome of this space") from None

    def indices(self, labels):
        return np.array([self.index(x) for x in labels], dtype=np.int64)

    def mask(self, labels):
        m = np.zeros(self.size, dtype=bool)
        m[self.indices(labels)] = True
        return m

    def __eq__(self, other):
        return isinstance(other, OutcomeSpace) and self.outcomes == other.outcomes

    def __hash__(self):
        return hash(self.outcomes)

    def __repr__(self):
        if self.size <= 8:
            return f"OutcomeSpace({list(self.outcomes)!r})"
        return f"OutcomeSpace(<{self.size} outcomes>)"


def _brief(values, digits, limit=12):
    v = np.round(values, digits).tolist()
    if len(v) <= limit:
        return repr(v)
    head = ", ".join(repr(x) for x in v[:limit // 2])
    return f"[{head}, ... ({len(v)} entries)]"


def _check_same_space(*objs):
    first = objs[0].space
    for o in objs[1:]:
        if o.space is not first and o.space != first:
            raise SpaceMismatch("objects live on different outcome spaces")
    return first


class RandomVariable:
    """A map from outcomes to vectors in R^k.

    ``values`` may be a sequence aligned with ``space.outcomes`` or a mapping
    from labels to values.  Scalars give ``dim == 1``.  When every entry is
    an int or :class:`fractions.Fraction`, value comparisons (ranges, fibers,
    determination) are exact; otherwise values closer than ``1e-9`` in every
    component are identified.
    """

    def __init__(self, space, values, name=None):
        if isinstance(values, dict):
            missing = [x for x in space.outcomes if x not in values]
            if missing:
                raise ValueError(f"no value given for outcomes {missing!r}")
            values = [values[x] for x in space.outcomes]
        rows = [v if isinstance(v, (list, tuple, np.ndarray)) else (v,) for v in values]
        if len(rows) != space.size:
            raise ValueError(f"expected {space.size} values, got {len(rows)}")
        dims = {len(r) for r in rows}
        if len(dims) != 1 or 0 in dims:
            raise ValueError("all values must be vectors of the same positive length")
        flat = [v for r in rows for v in r]
        if all(isinstance(v, (Integral, Rational)) for v in flat):
            self.exact = tuple(tuple(Fraction(v) for v in r) for r in rows)
        else:
            self.exact = None
        self.space = space
        self.name = name
        self.values = _frozen([[float(v) for v in r] for r in rows])
        self._fibers = None

    @classmethod
    def constant(cls, space, c=0, name=None):
        return cls(space, [c] * space.size, name=name)

    @classmethod
    def indicator(cls, space, event, name=None):
        """``1_{X in event}``; ``event`` is an iterable of labels or a predicate."""
        if callable(event):
            vals = [1 if event(x) else 0 for x in space.outcomes]
        else:
            members = set(event)
            for x in members:
                space.index(x)
            vals = [1 if x in members else 0 for x in space.outcomes]
        return cls(space, vals, name=name)

    @classmethod
    def identity(cls, space, name="X"):
        """The outcome itself, for spaces with numeric labels."""
        return cls(space, list(space.outcomes), name=name)

    @classmethod
    def stack(cls, *variables, name=None):
        """Concatenate the components of several variables on one space."""
        space = _check_same_space(*variables)
        if all(v.exact is not None for v in variables):
            rows = [sum((v.exact[i] for v in variables), ()) for i in range(space.size)]
        else:
            rows = np.hstack([v.values for v in variables]).tolist()
        return cls(space, rows, name=name)

    @property
    def dim(self):
        return self.values.shape[1]

    def __call__(self, label):
        row = self.values[self.space.index(label)]
        return float(row[0]) if self.dim == 1 else tuple(float(v) for v in row)

    def component(self, i, name=None):
        if self.exact is not None:
            return RandomVariable(self.space, [r[i] for r in self.exact], name=name)
        return RandomVariable(self.space, self.values[:, i].tolist(), name=name)

    def map(self, fn, name=None):
        """Compose with ``fn`` applied to each outcome's value (scalar if dim 1)."""
        src = self.exact if self.exact is not None else self.values.tolist()
        vals = [fn(r[0] if self.dim == 1 else tuple(r)) for r in src]
        return RandomVariable(self.space, vals, name=name)

    # -- fiber structure ---------------------------------------------------
    def _compute_fibers(self):
        n = self.space.size
        ids = np.empty(n, dtype=np.int64)
        reps = []
        if self.exact is not None:
            seen = {}
            for i, key in enumerate(self.exact):
                if key not in seen:
                    seen[key] = len(reps)
                    reps.append(i)
                ids[i] = seen[key]
        else:
            vals = self.values
            order = np.lexsort(vals.T[::-1])
            cluster = np.empty(n, dtype=np.int64)
            c = -1
            anchor = None
            for i in order:
                if anchor is None or np.max(np.abs(vals[i] - vals[anchor])) > VALUE_TOL:
                    c += 1
                    anchor = i
                cluster[i] = c
            relabel = {}
            for i in range(n):
                cl = cluster[i]
                if cl not in relabel:
                    relabel[cl] = len(reps)
                    reps.append(i)
                ids[i] = relabel[cl]
        self._fibers = (_frozen(ids, np.int64), tuple(reps))

    @property
    def fiber_ids(self):
        """Per-outcome index into :meth:`range`, in first-appearance order."""
        if self._fibers is None:
            self._compute_fibers()
        return self._fibers[0]

    def range(self):
        """Distinct values, as scalars (dim 1) or tuples, in first-appearance order."""
        if self._fibers is None:
            self._compute_fibers()
        return [self._label(i) for i in self._fibers[1]]

    def range_values(self):
        if self._fibers is None:
            self._compute_fibers()
        return self.values[list(self._fibers[1])]

    def _label(self, i):
        if self.exact is not None:
            row = tuple(int(v) if v.denominator == 1 else v for v in self.exact[i])
        else:
            row = tuple(float(v) for v in self.values[i])
        return row[0] if self.dim == 1 else row

    def range_space(self):
        return OutcomeSpace(self.range())

    def value_index(self, value):
        """Index in :meth:`range` of ``value``; raises ``ValueError`` if absent."""
        target = np.atleast_1d(np.array(value, dtype=float))
        if target.shape != (self.dim,):
            raise ValueError(f"value {value!r} has wrong dimension for {self.dim}-dim variable")
        reps = self.range_values()
        if self.exact is not None:
            raw = value if isinstance(value, (tuple, list)) else (value,)
            try:
                key = tuple(Fraction(v) for v in raw)
            except (TypeError, ValueError):
                key = None
            for j, i in enumerate(self._fibers[1]):
                if self.exact[i] == key:
                    return j
        d = np.max(np.abs(reps - target), axis=1)
        j = int(np.argmin(d))
        if d[j] <= VALUE_TOL:
            return j
        raise ValueError(f"{value!r} is not in the range of this variable")

    def event(self, value):
        """Boolean mask of ``{x : self(x) == value}``."""
        return self.fiber_ids == self.value_index(value)

    def __repr__(self):
        nm = f" {self.name!r}" if self.name else ""
        return f"<RandomVariable{nm} dim={self.dim} on {self.space!r}>"


class Measure:
    """Strictly positive weights on the outcomes of a space."""

    def __init__(self, space, weights):
        if isinstance(weights, dict):
            weights = [weights[x] for x in space.outcomes]
        weights = list(weights)
        if len(weights) != space.size:
            raise ValueError(f"expected {space.size} weights, got {len(weights)}")
        if all(isinstance(w, (Integral, Rational)) for w in weights):
            self.exact = tuple(Fraction(w) for w in weights)
        else:
            self.exact = None
        w = _frozen([float(x) for x in weights])
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("measure weights must be finite and strictly positive")
        self.space = space
        self.weights = w

    @classmethod
    def uniform(cls, space, weight=1):
        return cls(space, [weight] * space.size)

    @property
    def total(self):
        return float(self.weights.sum())

    def mass(self, event):
        """``M(A)`` for a label iterable or boolean mask ``A``."""
        if isinstance(event, np.ndarray) and event.dtype == bool:
            return float(self.weights[event].sum())
        return float(self.weights[self.space.indices(event)].sum())

    def scaled(self, c):
        if self.exact is not None and isinstance(c, (Integral, Rational)):
            return Measure(self.space, [w * Fraction(c) for w in self.exact])
        return Measure(self.space, self.weights * float(c))

    def normalized(self):
        return Distribution(self.space, self.weights / self.weights.sum())

    def __repr__(self):
        return f"Measure({_brief(self.weights, 6)})"


class Distribution:
    """Probabilities on the outcomes of a space; zeros are allowed."""

    def __init__(self, space, probs, tol=NORMALIZATION_TOL):
        if isinstance(probs, dict):
            probs = [probs.get(x, 0) for x in space.outcomes]
        probs = list(probs) if not isinstance(probs, np.ndarray) else probs
        p = _frozen([float(x) for x in probs]) if not isinstance(probs, np.ndarray) \
            else _frozen(probs.astype(float))
        if p.shape != (space.size,):
            raise ValueError(f"expected {space.size} probabilities, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > tol:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        self.space = space
        self.probs = p

    @classmethod
    def uniform(cls, space):
        return cls(space, np.full(space.size, 1.0 / space.size))

    @classmethod
    def point_mass(cls, space, label):
        p = np.zeros(space.size)
        p[space.index(label)] = 1.0
        return cls(space, p)

    @classmethod
    def from_weights(cls, space, weights):
        w = np.asarray(weights, dtype=float)
        return cls(space, w / w.sum())

    def __getitem__(self, label):
        return float(self.probs[self.space.index(label)])

    def prob(self, event):
        if isinstance(event, np.ndarray) and event.dtype == bool:
            return float(self.probs[event].sum())
        return float(self.probs[self.space.indices(event)].sum())

    def support(self):
        return tuple(x for x, p in zip(self.space.outcomes, self.probs) if p > 0)

    def __repr__(self):
        return f"Distribution({_brief(self.probs, 9)})"


# -- measure families -----------------------------------------------------

SINGLETON = "singleton"
UNIFORM_ON_BASE = "uniform-on-base"
ALL_MEASURES = "all-measures"
COMPATIBLE_WITH = "compatible-with"
FAMILY_KINDS = (SINGLETON, UNIFORM_ON_BASE, ALL_MEASURES, COMPATIBLE_WITH)


@dataclass(frozen=True, eq=False)
class MeasureFamily:
    """A set of a-priori possible measures on ``space``.

    ``compatible-with`` denotes every positive measure on ``space`` whose
    pushforward under ``variable`` equals ``reference`` (a measure on
    ``variable.range_space()``).
    """

    kind: str
    space: OutcomeSpace
    measure: Measure = None
    variable: RandomVariable = None
    reference: Measure = None

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown measure family kind {self.kind!r}")
        if self.kind == SINGLETON and self.measure is None:
            raise ValueError("singleton family needs a measure")
        if self.kind == COMPATIBLE_WITH:
            if self.variable is None or self.reference is None:
                raise ValueError("compatible-with family needs a variable and a reference measure")
            if self.reference.space.size != len(self.variable.range()):
                raise ValueError("reference measure must live on the variable's range")

    @classmethod
    def singleton(cls, measure):
        return cls(SINGLETON, measure.space, measure=measure)

    @classmethod
    def uniform_on_base(cls, space):
        return cls(UNIFORM_ON_BASE, space)

    @classmethod
    def all_measures(cls, space):
        return cls(ALL_MEASURES, space)

    @classmethod
    def compatible_with(cls, variable, reference):
        return cls(COMPATIBLE_WITH, variable.space, variable=variable, reference=reference)

    @property
    def is_single(self):
        return self.kind in (SINGLETON, UNIFORM_ON_BASE)

    def canonical(self):
        """A distinguished member: the measure itself, ``1`` on every outcome,
        or (compatible-with) the reference weight split evenly over each fiber."""
        if self.kind == SINGLETON:
            return self.measure
        if self.kind in (UNIFORM_ON_BASE, ALL_MEASURES):
            return Measure.uniform(self.space)
        ids = self.variable.fiber_ids
        counts = np.bincount(ids)
        return Measure(self.space, self.reference.weights[ids] / counts[ids])

    def contains(self, M, tol=VALUE_TOL):
        if M.space != self.space:
            return False
        if self.kind == SINGLETON:
            return bool(np.allclose(M.weights, self.measure.weights, rtol=0, atol=tol))
        if self.kind == UNIFORM_ON_BASE:
            return bool(np.allclose(M.weights, 1.0, rtol=0, atol=tol))
        if self.kind == ALL_MEASURES:
            return True
        pushed = np.bincount(self.variable.fiber_ids, weights=M.weights)
        return bool(np.allclose(pushed, self.reference.weights, rtol=0, atol=tol))

    def sample(self, rng, count):
        """Draw ``count`` members.  Single-member families repeat their member."""
        if self.is_single:
            return [self.canonical()] * count
        out = []
        n = self.space.size
        for _ in range(count):
            if self.kind == ALL_MEASURES:
                out.append(Measure(self.space, np.exp(rng.normal(0.0, 1.0, n))))
            else:
                out.append(self.split_fibers(rng.exponential(1.0, n) + 1e-3))
        return out

    def split_fibers(self, raw):
        """Member of a compatible-with family whose within-fiber shares are
        proportional to the positive array ``raw``."""
        ids = self.variable.fiber_ids
        sums = np.bincount(ids, weights=raw)
        return Measure(self.space, raw / sums[ids] * self.reference.weights[ids])

    def describe(self):
        if self.kind == COMPATIBLE_WITH:
            nm = self.variable.name or "variable"
            return f"compatible-with({nm})"
        return self.kind


# -- operations -----------------------------------------------------------

def entropy(P, M):
    """Entropy of ``P`` relative to ``M``: ``sum_x P(x) ln(M(x) / P(x))``."""
    _check_same_space(P, M)
    p = P.probs
    pos = p > 0
    return float(np.sum(p[pos] * (np.log(M.weights[pos]) - np.log(p[pos]))))


def log_loss(x, Q, M):
    """``-ln(Q(x) / M(x))``, or ``inf`` when ``Q(x) == 0``."""
    _check_same_space(Q, M)
    i = Q.space.index(x)
    q = Q.probs[i]
    if q == 0:
        return float("inf")
    return float(np.log(M.weights[i]) - np.log(q))


def loss_vector(Q, M):
    """Per-outcome log-loss of ``Q`` relative to ``M`` (``inf`` where Q is 0)."""
    _check_same_space(Q, M)
    with np.errstate(divide="ignore"):
        return np.log(M.weights) - np.log(Q.probs)


def expected_log_loss(P, Q, M):
    """``E_P[-ln(Q/M)]``; ``inf`` if Q vanishes somewhere P does not."""
    _check_same_space(P, Q, M)
    pos = P.probs > 0
    if np.any(Q.probs[pos] == 0):
        return float("inf")
    return float(np.sum(P.probs[pos] * (np.log(M.weights[pos]) - np.log(Q.probs[pos]))))


def expectation(P, psi):
    """``E_P[psi]`` as a float (dim 1) or a vector."""
    _check_same_space(P, psi)
    v = P.probs @ psi.values
    return float(v[0]) if psi.dim == 1 else v


def conditional_expectation(P, Y, Z, z):
    """``E_P[Y | Z = z]``."""
    _check_same_space(P, Y, Z)
    cell = Z.event(z)
    mass = P.probs[cell].sum()
    if mass <= 0:
        raise ZeroProbabilityConditioning(f"P(Z = {z!r}) = 0")
    v = P.probs[cell] @ Y.values[cell] / mass
    return float(v[0]) if Y.dim == 1 else v


def total_variation(P, Q):
    _check_same_space(P, Q)
    return float(0.5 * np.abs(P.probs - Q.probs).sum())


@dataclass(frozen=True)
class Determination:
    """Outcome of a determination check.

    Truthy iff ``phi`` determines ``psi``; then ``witness`` maps each value
    of ``phi`` on the subset to the value of ``psi``.  Otherwise
    ``counterexample`` is a pair of outcome labels with equal ``phi`` and
    different ``psi``.
    """

    witness: dict = None
    counterexample: tuple = None

    def __bool__(self):
        return self.counterexample is None


def determines(phi, psi, subset=None):
    """Decide whether ``psi`` is a function of ``phi`` on ``subset``.

    ``subset`` is an iterable of labels or a boolean mask (default: all).
    """
    space = _check_same_space(phi, psi)
    if subset is None:
        idx = range(space.size)
    elif isinstance(subset, np.ndarray) and subset.dtype == bool:
        idx = np.flatnonzero(subset)
    else:
        idx = space.indices(subset)
    phi_ids, psi_ids = phi.fiber_ids, psi.fiber_ids
    first = {}
    for i in idx:
        f = phi_ids[i]
        if f not in first:
            first[f] = i
        elif psi_ids[i] != psi_ids[first[f]]:
            return Determination(counterexample=(space.outcomes[first[f]], space.outcomes[i]))
    phi_range, psi_range = phi.range(), psi.range()
    witness = {phi_range[f]: psi_range[psi_ids[i]] for f, i in first.items()}
    return Determination(witness=witness)


def pushforward_measure(M, phi):
    """Measure on ``phi.range_space()`` with the mass of each fiber."""
    _check_same_space(M, phi)
    ids = phi.fiber_ids
    rs = phi.range_space()
    if M.exact is not None:
        w = [Fraction(0)] * rs.size
        for i, m in zip(ids, M.exact):
            w[i] += m
        return Measure(rs, w)
    return Measure(rs, np.bincount(ids, weights=M.weights, minlength=rs.size))


def pushforward(P, phi):
    """Distribution of ``phi(X)`` under ``P``, on ``phi.range_space()``."""
    _check_same_space(P, phi)
    rs = phi.range_space()
    p = np.bincount(phi.fiber_ids, weights=P.probs, minlength=rs.size)
    return Distribution(rs, p / p.sum())


def uniform_measure_on_range(phi):
    """All base measures that push forward to weight 1 on each value of ``phi``."""
    return MeasureFamily.compatible_with(phi, Measure.uniform(phi.range_space()))
