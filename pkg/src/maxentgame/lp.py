"""Dense two-phase simplex for small standard-form LPs.

    maximize  c @ z   subject to   G @ z = h,  z >= 0

Pivoting follows Bland's rule, so the method cannot cycle.  The phase-1
tableau is cached on :class:`LPSolver`, so many objectives over one feasible
set cost one phase 1 plus a short phase 2 each.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import DEFAULT
from .errors import Infeasible, NonConvergence


@dataclass(frozen=True)
class LPResult:
    value: float
    x: np.ndarray
    duals: np.ndarray
    basis: np.ndarray
    iterations: int


class LPSolver:
    """Feasible-region cache for ``{z >= 0 : G z = h}``.

    Raises :class:`Infeasible` on construction when the region is empty.
    """

    def __init__(self, G, h, config=DEFAULT):
        G = np.array(G, dtype=float, ndmin=2)
        h = np.array(h, dtype=float).ravel()
        m, N = G.shape
        if h.shape != (m,):
            raise ValueError("G and h have incompatible shapes")
        self.config = config
        self.shape = (m, N)
        self._G0 = G
        self._h0 = h

        scale = np.max(np.abs(G), axis=1)
        scale[scale == 0] = 1.0
        sign = np.where(h < 0, -1.0, 1.0)
        self._row_factor = sign / scale
        Gs = G * self._row_factor[:, None]
        hs = h * self._row_factor

        tol = config.lp_pivot_tol
        T = np.zeros((m + 1, N + m + 1))
        T[:m, :N] = Gs
        T[:m, N:N + m] = np.eye(m)
        T[:m, -1] = hs
        T[m, :N] = Gs.sum(axis=0)
        T[m, -1] = hs.sum()
        basis = np.arange(N, N + m, dtype=np.int64)
        status, it = kernels.simplex_pivot_loop(T, basis, N + m, tol, config.lp_max_iter)
        if status == kernels.ITERATION_LIMIT:
            raise NonConvergence("phase 1 hit the pivot limit")
        self.phase1_iterations = it
        infeas = T[m, -1]
        if infeas > config.lp_feas_tol * max(1.0, np.abs(hs).max(initial=0.0)):
            raise Infeasible(f"constraint system is infeasible (phase-1 residual {infeas:.3g})")

        keep = np.ones(m, dtype=bool)
        redundant = np.zeros(m, dtype=bool)
        for r in range(m):
            if basis[r] < N:
                continue
            row = np.abs(T[r, :N])
            j = int(np.argmax(row)) if N else -1
            # rows are scaled to unit max, so a genuine pivot is not tiny
            if N and row[j] > max(tol, 1e-9):
                # the artificial sits at zero up to round-off; keep it exact
                T[r, -1] = 0.0
                kernels.pivot(T, r, j)
                basis[r] = j
            else:
                # tableau row r is zero: the original row whose artificial
                # is basic here is a combination of the others
                keep[r] = False
                redundant[basis[r] - N] = True
        kept = np.flatnonzero(keep)
        self._rows = np.flatnonzero(~redundant)
        self._tableau = np.ascontiguousarray(np.hstack([T[kept, :N], T[kept, -1:]]))
        self._basis = np.ascontiguousarray(basis[kept])
        self._Gs = Gs[self._rows]
        self._hs = hs[self._rows]

    @property
    def n_vars(self):
        return self.shape[1]

    def feasible_point(self):
        x = np.zeros(self.n_vars)
        x[self._basis] = self._tableau[:, -1]
        return np.maximum(x, 0.0)

    def maximize(self, c):
        c = np.asarray(c, dtype=float)
        N = self.n_vars
        m = len(self._rows)
        T = np.empty((m + 1, N + 1))
        T[:m] = self._tableau
        cB = c[self._basis]
        T[m, :N] = c - cB @ self._tableau[:, :N]
        T[m, -1] = -cB @ self._tableau[:, -1]
        basis = self._basis.copy()
        status, it = kernels.simplex_pivot_loop(
            T, basis, N, self.config.lp_pivot_tol, self.config.lp_max_iter)
        if status == kernels.ITERATION_LIMIT:
            raise NonConvergence("phase 2 hit the pivot limit")
        if status == kernels.UNBOUNDED:
            raise ValueError("LP is unbounded")
        x = np.zeros(N)
        B = self._Gs[:, basis]
        try:
            xb = np.linalg.solve(B, self._hs)
            if not np.all(np.isfinite(xb)) or np.max(np.abs(xb - T[:m, -1])) > 1e-6:
                xb = T[:m, -1]
        except np.linalg.LinAlgError:
            xb = T[:m, -1]
        x[basis] = np.maximum(xb, 0.0)
        try:
            y = np.linalg.solve(B.T, c[basis])
        except np.linalg.LinAlgError:
            y = np.linalg.lstsq(B.T, c[basis], rcond=None)[0]
        duals = np.zeros(self.shape[0])
        duals[self._rows] = y
        duals *= self._row_factor
        return LPResult(float(c @ x), x, duals, basis, it)

    def minimize(self, c):
        r = self.maximize(-np.asarray(c, dtype=float))
        return LPResult(-r.value, r.x, -r.duals, r.basis, r.iterations)


def solve_lp(c, G, h, sense="max", config=DEFAULT):
    solver = LPSolver(G, h, config)
    return solver.maximize(c) if sense == "max" else solver.minimize(c)


def is_feasible(G, h, config=DEFAULT):
    try:
        LPSolver(G, h, config)
    except Infeasible:
        return False
    return True


def relative_interior(G, h, config=DEFAULT):
    """Minimal face of ``{z >= 0 : G z = h}`` and a point strictly inside it.

    Returns ``(mask, z)`` where ``mask[i]`` is True iff some feasible point
    has ``z_i > 0``, and ``z`` is feasible with ``z_i > 0`` exactly on
    ``mask``.

    Each round maximises the smallest coordinate over the remaining face.
    When that optimum is zero, the LP dual certifies a set of coordinates
    that vanish on the whole region; they are dropped and the round repeats.
    """
    G = np.array(G, dtype=float, ndmin=2)
    h = np.asarray(h, dtype=float)
    m, N = G.shape
    active = np.ones(N, dtype=bool)
    s_tol = config.support_tol * 1e-1
    while True:
        idx = np.flatnonzero(active)
        if idx.size == 0:
            raise Infeasible("constraint system admits no point")
        Ga = G[:, idx]
        # z_active = q + s * 1 with q, s >= 0; maximise s.
        A = np.hstack([Ga, Ga.sum(axis=1, keepdims=True)])
        c = np.zeros(idx.size + 1)
        c[-1] = 1.0
        solver = LPSolver(A, h, config)
        res = solver.maximize(c)
        s = res.x[-1]
        if s > s_tol:
            z = np.zeros(N)
            z[idx] = res.x[:-1] + s
            return active, z
        cert = Ga.T @ res.duals
        scale = max(np.abs(cert).max(initial=0.0), 1e-300)
        # a valid certificate is nonnegative with y.h = 0; otherwise fall back
        valid = cert.min(initial=0.0) >= -1e-9 * scale and abs(res.duals @ h) <= 1e-9 * scale
        drop = cert > max(1e-9 * scale, 1e-12) if valid else np.zeros(idx.size, dtype=bool)
        if not drop.any():
            drop = _zero_coordinates(solver, idx.size, config)
            if not drop.any():
                z = np.zeros(N)
                z[idx] = res.x[:-1] + s
                return active, z
        active[idx[drop]] = False


def _zero_coordinates(solver, n, config):
    """Per-coordinate fallback: which of the first ``n`` coordinates are
    identically zero (max over the region below the support tolerance)."""
    out = np.zeros(n, dtype=bool)
    for i in range(n):
        c = np.zeros(solver.n_vars)
        c[i] = 1.0
        c[-1] = 1.0
        out[i] = solver.maximize(c).value <= config.support_tol
    return out
