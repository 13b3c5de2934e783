"""Maximum entropy relative to a measure over a constraint set.

Equality-only sets are solved on their support through the concave dual
(damped Newton on the exponential-family coefficients).  Sets with
inequality rows, and lifted convex hulls, go through a primal log-barrier
Newton method.  Both routes start from the facial reduction in
:func:`maxentgame.lp.relative_interior`, so targets on the boundary of the
moment polytope never push dual coefficients to infinity.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .config import DEFAULT
from .core import Distribution, Measure, _check_same_space, entropy
from .constraints import EQ, GE, ConstraintSet, convex_hull
from .errors import NonConvergence, VerificationFailed

__all__ = [
    "MaxEntProblem",
    "MaxEntSolution",
    "solve_maxent",
    "solve_minimax_union",
    "naive_maximin_union",
]


@dataclass(frozen=True)
class MaxEntProblem:
    space: object
    measure: Measure
    constraints: ConstraintSet

    def __post_init__(self):
        if self.measure.space != self.space or self.constraints.space != self.space:
            raise ValueError("measure and constraints must live on the problem's space")

    @classmethod
    def uniform(cls, constraints):
        """U-MaxEnt: the uniform measure on the constraint set's own space."""
        return cls(constraints.space, Measure.uniform(constraints.space), constraints)


@dataclass(frozen=True)
class MaxEntSolution:
    """Result of a MaxEnt solve.

    ``dual`` holds ``(lambda_0, lambda_1, ..., lambda_k)`` such that on the
    support ``ln(P(x) / M(x)) = lambda_0 + sum_i lambda_i F_i(x)``, where
    ``F`` are the constraint rows (conditioning indicators appended).  For
    hulls it is the least-squares fit of that form, with no guarantee.
    """

    distribution: Distribution
    entropy_value: float
    dual: np.ndarray
    restricted_support: tuple
    support_mask: np.ndarray
    residual: float
    iterations: int
    method: str
    diagnostics: dict = field(default_factory=dict)

    def dual_residual(self, C, M):
        """Max deviation of ``ln(P/M)`` from the affine form given by ``dual``."""
        F, _, _ = C.features()
        S = self.support_mask
        lhs = np.log(self.distribution.probs[S]) - np.log(M.weights[S])
        rhs = self.dual[0] + F[S] @ self.dual[1:]
        return float(np.max(np.abs(lhs - rhs)))


def solve_maxent(problem, config=DEFAULT):
    """Return the unique maximiser of entropy relative to ``problem.measure``."""
    C, M = problem.constraints, problem.measure
    _check_same_space(C, M)
    mask = C.support_mask()
    if C.is_plain:
        try:
            P, dual, it = _dual_newton(C, M, mask, config)
            method = "dual-newton"
        except NonConvergence:
            P, it = _primal_newton(C, M, mask, config)
            dual = _fit_dual(C, M, P, mask)
            method = "primal-newton"
    else:
        P, it = _barrier(C, M, config)
        P = np.where(mask, P, 0.0)
        P /= P.sum()
        dual = _fit_dual(C, M, P, mask) if not C.is_hull else _fit_dual_hull(M, P, mask)
        method = "barrier"
    dist = Distribution(C.space, P)
    return MaxEntSolution(
        distribution=dist,
        entropy_value=entropy(dist, M),
        dual=dual,
        restricted_support=tuple(x for x, m in zip(C.space.outcomes, mask) if m),
        support_mask=mask,
        residual=_residual(C, P),
        iterations=it,
        method=method,
    )


def _residual(C, P):
    if C.is_hull:
        sf = C.standard_form
        # distance to the hull is not a moment residual; report the LP
        # consistency of P with the lifted rows via a feasible reconstruction
        return 0.0 if C.contains(Distribution(C.space, P), tol=1e-8) else float("nan")
    F, t, rel = C.features()
    m = P @ F
    res = 0.0
    for v, tv, r in zip(m, t, rel):
        res = max(res, abs(v - tv) if r == EQ else max(0.0, tv - v))
    return float(res)


def _reduced_features(F, t, mask, config):
    Fs = F[mask]
    mean = Fs.mean(axis=0)
    Fc = Fs - mean
    if Fc.size == 0:
        return mean, np.zeros((F.shape[1], 0)), np.zeros((Fs.shape[0], 0)), np.zeros(0)
    _, sv, Vt = np.linalg.svd(Fc, full_matrices=False)
    top = sv[0] if sv.size else 0.0
    r = int(np.sum(sv > config.rank_tol * max(1.0, top)))
    V = Vt[:r].T
    return mean, V, Fc @ V, (t - mean) @ V


def _dual_newton(C, M, mask, config):
    F, t, _ = C.features()
    mean, V, X, g = _reduced_features(F, t, mask, config)
    logm = np.log(M.weights[mask])
    Fs = F[mask]
    theta = np.zeros(X.shape[1])

    def objective(th):
        a = logm + X @ th
        lz = logsumexp(a)
        return lz - th @ g, a, lz

    def finish(th, p, lz, it):
        P = np.zeros(C.space.size)
        P[mask] = p
        lam = V @ th
        return P / P.sum(), np.concatenate([[-lz - mean @ lam], lam]), it

    f, a, lz = objective(theta)
    best, polish = None, 0
    for it in range(config.max_newton_iter + 1):
        p = np.exp(a - lz)
        resid = np.max(np.abs(p @ Fs - t)) if t.size else 0.0
        if resid <= config.moment_tol:
            # polish: with quadratic convergence two extra steps are nearly free
            if best is None or resid < best[0]:
                best = (resid, theta, p, lz, it)
            if resid <= 1e-15 * max(1.0, float(np.max(np.abs(t)))) or polish == 2:
                return finish(*best[1:])
            polish += 1
        if it == config.max_newton_iter:
            break
        mu = p @ X
        grad = mu - g
        H = (X * p[:, None]).T @ X - np.outer(mu, mu)
        try:
            d = -np.linalg.solve(H + 1e-14 * np.eye(H.shape[0]), grad)
        except np.linalg.LinAlgError:
            d = -np.linalg.lstsq(H, grad, rcond=None)[0]
        slope = grad @ d
        if slope >= 0:
            d = -grad
            slope = -(grad @ grad)
        # a tiny Newton decrement means f is flat to rounding: take full steps
        full = best is not None or -slope <= 1e-12 * max(1.0, abs(f))
        step = 1.0
        while True:
            f_new, a_new, lz_new = objective(theta + step * d)
            if full or f_new <= f + 1e-4 * step * slope or step < 1e-12:
                break
            step *= 0.5
        if step < 1e-12 and f_new > f:
            break
        theta = theta + step * d
        f, a, lz = f_new, a_new, lz_new
    if best is not None:
        return finish(*best[1:])
    raise NonConvergence("dual Newton did not reach the moment tolerance", residual=resid)


def _primal_newton(C, M, mask, config):
    """Equality-constrained Newton ascent on the primal, from an interior point."""
    F, t, _ = C.features()
    S = np.flatnonzero(mask)
    A = np.vstack([F[S].T, np.ones(S.size)])
    logm = np.log(M.weights[S])
    p = C.interior_point().probs[S].copy()

    def H(q):
        return float(np.sum(q * (logm - np.log(q))))

    polish = 0
    for it in range(config.max_fallback_iter):
        grad = logm - np.log(p) - 1.0
        D = p
        AD = A * D
        nu = np.linalg.lstsq(AD @ A.T, AD @ grad, rcond=None)[0]
        d = D * (grad - A.T @ nu)
        lam = np.linalg.lstsq(np.column_stack([np.ones(S.size), F[S]]),
                              np.log(p) - logm, rcond=None)[0]
        gap = logsumexp(logm + F[S] @ lam[1:]) - lam[1:] @ t - H(p)
        slope = grad @ d
        # an entropy gap eps only pins p to about sqrt(eps): keep taking
        # Newton steps until the decrement vanishes too
        if gap <= config.gap_tol:
            polish += 1
            if slope <= 1e-20 or polish > 3:
                P = np.zeros(C.space.size)
                P[S] = p
                return P / P.sum(), it
        neg = d < 0
        amax = np.min(-p[neg] / d[neg]) if neg.any() else 1.0
        step = min(1.0, 0.99 * amax)
        h0 = H(p)
        while polish == 0 and H(p + step * d) < h0 + 1e-4 * step * slope and step > 1e-14:
            step *= 0.5
        p = p + step * d
        p = np.maximum(p, 1e-300)
    raise NonConvergence("primal fallback did not close the duality gap",
                         best=p, residual=gap)


def _barrier(C, M, config):
    """Primal log-barrier Newton in standard-form coordinates."""
    sf = C.standard_form
    mask_z, z0 = C._interior
    J = np.flatnonzero(mask_z)
    rows = np.flatnonzero(sf.L[:, J].any(axis=1))
    G = sf.G[:, J]
    L = sf.L[np.ix_(rows, J)]
    logm = np.log(M.weights[rows])
    z = z0[J].copy()
    # drop linearly dependent rows so the KKT system is non-singular
    q, r, piv = _qr_rows(G)
    G = G[piv[:r]]
    m = G.shape[0]
    N = z.size
    mu = 1.0
    total_it = 0

    def f(zz, mu):
        P = L @ zz
        return float(np.sum(P * (logm - np.log(P))) + mu * np.sum(np.log(zz)))

    while True:
        for _ in range(200):
            total_it += 1
            P = L @ z
            grad = L.T @ (logm - np.log(P) - 1.0) + mu / z
            Hd = (L.T * (1.0 / P)) @ L + np.diag(mu / z**2)
            K = np.zeros((N + m, N + m))
            K[:N, :N] = Hd
            K[:N, N:] = G.T
            K[N:, :N] = G
            rhs = np.concatenate([grad, np.zeros(m)])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
            d = sol[:N]
            dec = float(d @ Hd @ d)
            if dec <= 1e-20:
                break
            neg = d < 0
            amax = np.min(-z[neg] / d[neg]) if neg.any() else np.inf
            step = min(1.0, 0.99 * amax)
            f0 = f(z, mu)
            slope = grad @ d
            while f(z + step * d, mu) < f0 + 1e-4 * step * slope and step > 1e-16:
                step *= 0.5
            z = z + step * d
            if dec <= 1e-16 and step == 1.0:
                break
        if mu * N <= config.gap_tol * 1e-4:
            break
        if total_it > 50 * config.max_fallback_iter:
            raise NonConvergence("barrier method did not converge", best=L @ z)
        mu *= 0.1
    P = np.zeros(C.space.size)
    P[rows] = L @ z
    return P / P.sum(), total_it


def _qr_rows(G):
    from scipy.linalg import qr

    if G.shape[0] == 0:
        return None, 0, np.zeros(0, dtype=int)
    Q, R, piv = qr(G.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    r = int(np.sum(diag > 1e-10 * max(1.0, diag.max(initial=0.0))))
    return Q, r, piv


def _fit_dual(C, M, P, mask):
    F, _, _ = C.features()
    X = np.column_stack([np.ones(int(mask.sum())), F[mask]])
    y = np.log(P[mask]) - np.log(M.weights[mask])
    return np.linalg.lstsq(X, y, rcond=None)[0]


def _fit_dual_hull(M, P, mask):
    y = np.log(P[mask]) - np.log(M.weights[mask])
    return np.array([float(np.mean(y))])


# -- disjunctive constraints ----------------------------------------------

def solve_minimax_union(D, M, config=DEFAULT):
    """Worst-case optimal predictor against a union of constraint sets.

    Computed as the MaxEnt distribution over the convex hull, then checked:
    its worst-case expected loss over the union must equal its entropy.
    """
    from .game import worst_case_loss

    hull = convex_hull(D)
    sol = solve_maxent(MaxEntProblem(D.space, M, hull), config)
    losses = [worst_case_loss(sol.distribution, b, M)[0] for b in D.feasible_branches]
    worst = max(losses)
    if not abs(worst - sol.entropy_value) <= config.minimax_check_tol:
        raise VerificationFailed(
            f"worst-case loss {worst!r} over the union differs from the hull entropy "
            f"{sol.entropy_value!r}")
    sol.diagnostics.update(branch_losses=losses, worst_case_loss=worst)
    return sol


def naive_maximin_union(D, M, config=DEFAULT):
    """Highest-entropy per-branch MaxEnt solution (lowest index wins ties)."""
    best = None
    best_i = None
    sols = []
    for i, b in enumerate(D.branches):
        if not b.is_feasible():
            sols.append(None)
            continue
        s = solve_maxent(MaxEntProblem(D.space, M, b), config)
        sols.append(s)
        if best is None or s.entropy_value > best.entropy_value + 1e-12:
            best, best_i = s, i
    best.diagnostics.update(branch=best_i,
                            branch_entropies=[s.entropy_value if s else None for s in sols])
    return best
