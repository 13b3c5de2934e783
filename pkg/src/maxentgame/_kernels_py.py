"""Pure-Python/numpy implementations of the hot loops.

These mirror ``_kernels.pyx`` one for one.  Both backends consume the same
pre-drawn random numbers, so results agree up to floating-point summation
order.
"""

import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2


def simplex_pivot_loop(T, basis, ncols, tol, max_iter):
    """Run Bland's-rule primal simplex in place on a dense tableau.

    ``T`` has shape ``(m + 1, N + 1)``: constraint rows ``[A | b]`` followed
    by a reduced-cost row ``[d | -z]`` for a maximisation.  Only the first
    ``ncols`` columns may enter the basis.  ``basis[i]`` is the column basic
    in row ``i`` and is updated in place.

    Returns ``(status, iterations)``.
    """
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    it = 0
    while it < max_iter:
        d = T[m, :ncols]
        cand = np.flatnonzero(d > tol)
        if cand.size == 0:
            return OPTIMAL, it
        j = int(cand[0])
        col = T[:m, j]
        cmax = col.max(initial=0.0)
        if cmax <= tol:
            return UNBOUNDED, it
        # pivots must be large relative to the column: dividing by
        # round-off-sized entries blows up the tableau
        rows = np.flatnonzero(col > max(tol, 1e-9 * cmax))
        # round-off can leave a basic value slightly negative
        ratios = np.maximum(T[rows, rhs], 0.0) / col[rows]
        rmin = ratios.min()
        ties = rows[ratios <= rmin + tol * (1.0 + abs(rmin))]
        r = int(ties[np.argmin(basis[ties])])
        _pivot(T, r, j)
        basis[r] = j
        it += 1
    return ITERATION_LIMIT, it


def _pivot(T, r, j):
    T[r] /= T[r, j]
    f = T[:, j].copy()
    f[r] = 0.0
    T -= np.outer(f, T[r])
    T[:, j] = 0.0
    T[r, j] = 1.0


def pivot(T, r, j):
    """Single Gauss-Jordan pivot on ``T[r, j]`` (in place)."""
    _pivot(T, r, j)


def hit_and_run(x0, directions, uniforms, thin, eps):
    """Hit-and-run chain inside ``{x + N u : x + N u >= 0}``.

    ``directions`` holds one pre-drawn direction per step (already mapped
    through the null-space basis), ``uniforms`` the position along each
    chord.  Every ``thin``-th state is returned.
    """
    x = np.array(x0, dtype=float)
    steps = directions.shape[0]
    out = np.empty((steps // thin, x.size))
    k = 0
    for s in range(steps):
        d = directions[s]
        neg = d < -eps
        pos = d > eps
        hi = np.min(-x[neg] / d[neg]) if neg.any() else 0.0
        lo = np.max(-x[pos] / d[pos]) if pos.any() else 0.0
        if hi > lo:
            x = x + (lo + uniforms[s] * (hi - lo)) * d
            np.maximum(x, 0.0, out=x)
        if (s + 1) % thin == 0:
            out[k] = x
            k += 1
    return out


def log_capital_paths(log_returns, outcomes):
    """Accumulate per-strategy log-capital along each trial's outcome path.

    ``log_returns[s, x]`` is ``ln(b(x) * strategy_s(x))`` (possibly
    ``-inf``); ``outcomes[t, i]`` is the outcome index of round ``i`` in
    trial ``t``.

    Returns ``(final, last_fail)`` where ``final[t, s]`` is the terminal
    log-capital and ``last_fail[t, a, b]`` is the last 1-based round at
    which strategy ``a`` did *not* strictly lead strategy ``b`` (0 if it led
    from round 1 on).
    """
    T, n = outcomes.shape
    S = log_returns.shape[0]
    final = np.empty((T, S))
    last_fail = np.zeros((T, S, S), dtype=np.int64)
    rounds = np.arange(1, n + 1)
    for t in range(T):
        paths = np.cumsum(log_returns[:, outcomes[t]], axis=1)
        final[t] = paths[:, -1]
        for a in range(S):
            for b in range(S):
                if a == b:
                    continue
                fail = paths[a] <= paths[b]
                if fail.any():
                    last_fail[t, a, b] = rounds[fail][-1]
    return final, last_fail
