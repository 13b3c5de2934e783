"""Constraint polytopes over a finite space.

A :class:`ConstraintSet` is the set of distributions ``P`` with
``E_P[phi] = t`` (rows may instead be ``>=``), optionally intersected with
conditioning rows ``P(Z = z) = 1``.  The convex hull of a finite disjunction
of such sets is represented by lifting: one scaled copy of each branch plus
mixture weights.

Internally every set is written in standard form ``G z = h, z >= 0`` with
``P = L z``; LP extremisation, support computation and hit-and-run
sampling all operate on that form.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import null_space

from . import kernels
from .config import DEFAULT
from .core import Distribution, RandomVariable, _check_same_space
from .errors import Infeasible
from .lp import LPSolver, relative_interior

EQ = "eq"
GE = "ge"


class ConstraintSpec:
    """Moment rows ``E[phi_i] = t_i`` (``eq``) or ``E[phi_i] >= t_i`` (``ge``)."""

    def __init__(self, phi, target, relations=EQ):
        t = np.atleast_1d(np.asarray(target, dtype=float))
        if t.shape != (phi.dim,):
            raise ValueError(f"target has {t.size} entries, phi has dim {phi.dim}")
        if isinstance(relations, str):
            relations = (relations,) * phi.dim
        relations = tuple(relations)
        if len(relations) != phi.dim or any(r not in (EQ, GE) for r in relations):
            raise ValueError("relations must be 'eq' or 'ge', one per row")
        self.phi = phi
        self.target = t
        self.target.setflags(write=False)
        self.relations = relations

    @classmethod
    def none(cls, space):
        """No information: ``phi == 0`` with target 0."""
        return cls(RandomVariable.constant(space, 0, name="phi"), [0.0])

    @classmethod
    def from_rows(cls, space, rows):
        """Build from ``(variable, relation, target)`` triples."""
        if not rows:
            return cls.none(space)
        phis, targets, rels = [], [], []
        for var, rel, tgt in rows:
            tgt = np.atleast_1d(np.asarray(tgt, dtype=float))
            if tgt.size != var.dim:
                raise ValueError(f"target for {var.name!r} has wrong length")
            phis.append(var)
            targets.extend(tgt.tolist())
            rels.extend([rel] * var.dim)
        return cls(RandomVariable.stack(*phis, name="phi"), targets, rels)

    @property
    def space(self):
        return self.phi.space

    @property
    def has_inequalities(self):
        return GE in self.relations


@dataclass(frozen=True)
class StandardForm:
    G: np.ndarray
    h: np.ndarray
    L: np.ndarray


class ConstraintSet:
    """A non-empty convex set of distributions on ``space``.

    Construct either from a :class:`ConstraintSpec` (plus optional
    ``conditioning`` pairs ``(Z, z)``), or with ``branches=`` to obtain the
    convex hull of several sets (use :func:`convex_hull`).  Feasibility is
    checked at construction unless ``validate=False``.
    """

    def __init__(self, space, spec=None, conditioning=(), *, branches=None,
                 validate=True, config=DEFAULT):
        if spec is None and branches is None:
            spec = ConstraintSpec.none(space)
        if spec is not None and spec.space != space:
            raise ValueError("spec lives on a different space")
        for Z, z in conditioning:
            _check_same_space(Z, spec.phi if spec is not None else branches[0].spec.phi)
            Z.value_index(z)
        self.space = space
        self.spec = spec
        self.extra_conditioning = tuple(conditioning)
        self.branches = tuple(branches) if branches is not None else None
        self.config = config
        if validate:
            self.lp  # noqa: B018  (raises Infeasible)

    # -- descriptive properties ------------------------------------------
    @property
    def is_hull(self):
        return self.branches is not None

    @property
    def has_inequalities(self):
        if self.is_hull:
            return any(b.has_inequalities for b in self.branches)
        return self.spec.has_inequalities

    @property
    def is_plain(self):
        """Pure equality rows on the simplex; the exponential-family route applies."""
        return not self.is_hull and not self.spec.has_inequalities

    def features(self):
        """``(F, t, relations)`` with one column of ``F`` per row, conditioning
        rows (indicator = 1) appended.  Not defined for hulls."""
        if self.is_hull:
            raise TypeError("a convex hull has no single moment representation")
        cols = [self.spec.phi.values]
        t = list(self.spec.target)
        rel = list(self.spec.relations)
        for Z, z in self.extra_conditioning:
            cols.append(Z.event(z).astype(float)[:, None])
            t.append(1.0)
            rel.append(EQ)
        return np.hstack(cols), np.array(t), tuple(rel)

    @cached_property
    def standard_form(self):
        n = self.space.size
        if self.is_hull:
            G, h, L = self._lifted_form()
        else:
            F, t, rel = self.spec.phi.values, self.spec.target, self.spec.relations
            ge = [i for i, r in enumerate(rel) if r == GE]
            k = F.shape[1]
            G = np.zeros((k + 1, n + len(ge)))
            G[:k, :n] = F.T
            for j, i in enumerate(ge):
                G[i, n + j] = -1.0
            G[k, :n] = 1.0
            h = np.append(t, 1.0)
            L = np.zeros((n, n + len(ge)))
            L[:, :n] = np.eye(n)
        rows = [Z.event(z).astype(float) @ L for Z, z in self.extra_conditioning]
        if rows:
            G = np.vstack([G] + rows)
            h = np.append(h, np.ones(len(rows)))
        return StandardForm(G, h, L)

    def _lifted_form(self):
        blocks = [b.standard_form for b in self.branches]
        n = self.space.size
        N = sum(b.G.shape[1] for b in blocks) + len(blocks)
        M = sum(b.G.shape[0] for b in blocks) + 1
        G = np.zeros((M, N))
        h = np.zeros(M)
        L = np.zeros((n, N))
        r = c = 0
        wcols = []
        for b in blocks:
            mb, nb = b.G.shape
            G[r:r + mb, c:c + nb] = b.G
            L[:, c:c + nb] = b.L
            wcols.append((r, mb, c + nb, b.h))
            r += mb
            c += nb + 1
        for r0, mb, wc, hb in wcols:
            G[r0:r0 + mb, wc] = -hb
            G[M - 1, wc] = 1.0
        h[M - 1] = 1.0
        return G, h, L

    # -- LP machinery ------------------------------------------------------
    @cached_property
    def lp(self):
        sf = self.standard_form
        return LPSolver(sf.G, sf.h, self.config)

    def is_feasible(self):
        try:
            self.lp  # noqa: B018
        except Infeasible:
            return False
        return True

    @cached_property
    def _interior(self):
        sf = self.standard_form
        return relative_interior(sf.G, sf.h, self.config)

    def support_mask(self):
        """Boolean mask of SUPP (outcomes positive under some member)."""
        mask, z = self._interior
        return self.standard_form.L @ z > 0

    def interior_point(self):
        """A member that is positive on the whole support."""
        mask, z = self._interior
        return Distribution.from_weights(self.space, self.standard_form.L @ z)

    def to_distribution(self, z):
        return Distribution.from_weights(self.space, np.maximum(self.standard_form.L @ z, 0.0))

    def contains(self, P, tol=1e-9):
        """Membership test for a distribution (within ``tol``)."""
        if P.space != self.space:
            return False
        if not self.is_hull:
            F, t, rel = self.features()
            m = P.probs @ F
            for v, tv, r in zip(m, t, rel):
                if r == EQ and abs(v - tv) > tol:
                    return False
                if r == GE and v < tv - tol:
                    return False
            return True
        sf = self.standard_form
        G = np.vstack([sf.G, sf.L])
        h = np.concatenate([sf.h, P.probs])
        try:
            LPSolver(G, h, self.config)
        except Infeasible:
            return False
        return True

    def sample(self, count, seed=0, thin=None, burn_in=200):
        """Hit-and-run draws from the set, as a ``(count, n)`` array.

        The chain starts at the max-min interior point, moves in the null
        space of the active standard-form rows and is seeded
        deterministically.
        """
        rng = np.random.default_rng(seed)
        sf = self.standard_form
        mask, z0 = self._interior
        idx = np.flatnonzero(mask)
        basis = null_space(sf.G[:, idx]) if idx.size else np.zeros((0, 0))
        if basis.shape[1] == 0:
            P = self.to_distribution(z0).probs
            return np.tile(P, (count, 1))
        if thin is None:
            thin = max(5, basis.shape[1])
        steps = burn_in + count * thin
        g = rng.standard_normal((steps, basis.shape[1]))
        dirs = g @ basis.T
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        u = rng.random(steps)
        chain = kernels.hit_and_run(np.ascontiguousarray(z0[idx]), np.ascontiguousarray(dirs),
                                    u, thin, 1e-12)
        chain = chain[-count:]
        Z = np.zeros((count, sf.G.shape[1]))
        Z[:, idx] = chain
        P = Z @ sf.L.T
        return P / P.sum(axis=1, keepdims=True)

    def __repr__(self):
        kind = f"hull of {len(self.branches)}" if self.is_hull else f"{self.spec.phi.dim} rows"
        return f"<ConstraintSet {kind}, {len(self.extra_conditioning)} conditioning, on {self.space!r}>"


@dataclass(frozen=True)
class Support:
    """SUPP of a constraint set with the per-outcome LP maxima behind it."""

    space: object
    mask: np.ndarray
    max_probability: np.ndarray

    @property
    def outcomes(self):
        return tuple(x for x, m in zip(self.space.outcomes, self.mask) if m)

    def __contains__(self, label):
        return bool(self.mask[self.space.index(label)])

    def __iter__(self):
        return iter(self.outcomes)

    def __len__(self):
        return int(self.mask.sum())


class DisjunctiveConstraint:
    """Finite union of constraint sets on one space; at least one feasible."""

    def __init__(self, branches):
        branches = tuple(branches)
        if not branches:
            raise ValueError("a disjunction needs at least one branch")
        space = branches[0].space
        if any(b.space != space for b in branches):
            raise ValueError("branches live on different spaces")
        self.space = space
        self.branches = branches
        if not self.feasible_branches:
            raise Infeasible("every branch of the disjunction is infeasible")

    @cached_property
    def feasible_branches(self):
        return tuple(b for b in self.branches if b.is_feasible())

    def contains(self, P, tol=1e-9):
        return any(b.contains(P, tol) for b in self.feasible_branches)


def lp_extremize(C, c, sense="max"):
    """Optimise ``sum_x c(x) P(x)`` over ``C``; returns ``(value, argopt)``."""
    c = np.asarray(c, dtype=float)
    if c.shape != (C.space.size,):
        raise ValueError("coefficient vector does not match the space")
    cz = C.standard_form.L.T @ c
    res = C.lp.maximize(cz) if sense == "max" else C.lp.minimize(cz)
    P = C.to_distribution(res.x)
    return float(c @ P.probs), P


def support(C):
    """SUPP(C): outcomes whose LP maximum probability exceeds the zero tolerance."""
    n = C.space.size
    best = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        best[i] = lp_extremize(C, e, "max")[0]
    mask = best > C.config.support_tol
    mask.setflags(write=False)
    best.setflags(write=False)
    return Support(C.space, mask, best)


def condition(C, Z, z):
    """``C`` intersected with ``P(Z = z) = 1``; raises :class:`Infeasible` if empty."""
    Z.value_index(z)
    out = ConstraintSet(C.space, C.spec, C.extra_conditioning + ((Z, z),),
                        branches=C.branches, validate=False, config=C.config)
    if not out.is_feasible():
        raise Infeasible(f"no member of the constraint set puts mass 1 on Z = {z!r}")
    return out


def convex_hull(D):
    """Convex hull of a disjunction (lifted mixture representation)."""
    feas = D.feasible_branches
    if len(feas) == 1:
        return feas[0]
    config = feas[0].config
    return ConstraintSet(D.space, branches=feas, config=config)
