"""Repeated proportional (Kelly) gambling with odds set by a measure.

A ticket on outcome ``x`` costs 1 and pays ``b(x) = M(Omega) / M(x)``; with
the uniform measure every ticket pays ``|Omega|``.  A strategy is a
distribution: the whole capital is split over tickets in proportion to it
each round, so log-capital grows by ``ln(b(x) P(x))`` when ``x`` occurs.

Outcomes are drawn with numpy's PCG64 generator.  Trial ``i`` uses the
``i``-th child of ``SeedSequence(seed)``, so results do not depend on how
trials are scheduled.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import Distribution, Measure, _check_same_space
from .errors import MaxEntError
from .game import worst_case_loss
from .solver import MaxEntProblem, solve_maxent

__all__ = [
    "KellyConfig",
    "KellyReport",
    "payoffs",
    "expected_growth_rate",
    "simulate",
    "draw_outcomes",
    "recompute_log_capital",
    "worst_case_growth",
    "worst_case_growth_strategy",
]

NEG_INF = float("-inf")


def payoffs(odds):
    """Per-outcome payoff ``b(x) = M(Omega) / M(x)``."""
    return odds.total / odds.weights


def expected_growth_rate(strategy, P_star, odds):
    """``E_{P*}[ln(b(X) strategy(X))]``; ``-inf`` if the strategy can go broke."""
    _check_same_space(strategy, P_star, odds)
    pos = P_star.probs > 0
    s = strategy.probs[pos]
    if np.any(s == 0):
        return NEG_INF
    return float(np.sum(P_star.probs[pos] * np.log(payoffs(odds)[pos] * s)))


@dataclass(frozen=True)
class KellyConfig:
    odds_measure: Measure
    true_dist: Distribution
    strategies: dict
    rounds: int
    trials: int
    seed: int = 0
    initial_capital: float = 1.0

    def __post_init__(self):
        if self.rounds < 1 or self.trials < 1:
            raise ValueError("rounds and trials must be at least 1")
        if not self.strategies:
            raise ValueError("at least one strategy is required")
        if self.initial_capital <= 0:
            raise ValueError("initial capital must be positive")
        for s in self.strategies.values():
            _check_same_space(s, self.true_dist, self.odds_measure)
        object.__setattr__(self, "strategies", dict(self.strategies))

    @property
    def names(self):
        return tuple(self.strategies)


@dataclass(frozen=True)
class KellyReport:
    """Outcome of :func:`simulate`.

    ``final_log_capital[s, t]`` is the log-capital of strategy ``s`` after
    the last round of trial ``t`` (``-inf`` on ruin).  ``win_matrix[a, b]``
    is the fraction of trials where ``a`` finished strictly ahead of ``b``.
    ``first_separation[a, b]`` is the first round after which ``a`` stayed
    strictly ahead of ``b`` in every trial (``None`` if it never did), and
    ``epsilon[a, b]`` the smallest per-round margin observed at the end.
    ``growth_std`` estimates the per-round standard deviation of the log
    return from the spread of realized growth rates across trials.
    """

    names: tuple
    rounds: int
    trials: int
    expected_growth: dict
    final_log_capital: np.ndarray
    win_matrix: np.ndarray
    ruin_counts: dict
    mean_growth: dict
    growth_std: dict
    first_separation: dict
    epsilon: dict
    notes: tuple = field(default=())

    def wins(self, a, b):
        i, j = self.names.index(a), self.names.index(b)
        return int(round(self.win_matrix[i, j] * self.trials))

    def to_dict(self):
        def num(v):
            if v is None:
                return None
            v = float(v)
            return v if math.isfinite(v) else ("-inf" if v < 0 else "inf")

        return {
            "strategies": list(self.names),
            "rounds": self.rounds,
            "trials": self.trials,
            "expected_growth_rate": {k: num(v) for k, v in self.expected_growth.items()},
            "mean_realized_growth_rate": {k: num(v) for k, v in self.mean_growth.items()},
            "realized_growth_std": {k: num(v) for k, v in self.growth_std.items()},
            "ruin_count": dict(self.ruin_counts),
            "win_matrix": [[num(v) for v in row] for row in self.win_matrix],
            "first_separation_round": {f"{a}>{b}": v for (a, b), v in self.first_separation.items()},
            "epsilon": {f"{a}>{b}": num(v) for (a, b), v in self.epsilon.items()},
            "final_log_capital": {n: [num(v) for v in row]
                                  for n, row in zip(self.names, self.final_log_capital)},
            "notes": list(self.notes),
        }


def draw_outcomes(P_star, rounds, trials, seed):
    """``(trials, rounds)`` outcome indices, one PCG64 substream per trial."""
    cdf = np.cumsum(P_star.probs)
    cdf[-1] = 1.0
    children = np.random.SeedSequence(seed).spawn(trials)
    out = np.empty((trials, rounds), dtype=np.int64)
    for t, ss in enumerate(children):
        u = np.random.Generator(np.random.PCG64(ss)).random(rounds)
        out[t] = np.searchsorted(cdf, u, side="right")
    # guard against an index past a trailing zero-probability outcome
    np.minimum(out, np.flatnonzero(P_star.probs > 0)[-1], out=out)
    return out


def _log_returns(config):
    b = payoffs(config.odds_measure)
    with np.errstate(divide="ignore"):
        return np.ascontiguousarray(
            np.array([np.log(b * s.probs) for s in config.strategies.values()]))


def simulate(config):
    names = config.names
    S = len(names)
    n = config.rounds
    outcomes = draw_outcomes(config.true_dist, n, config.trials, config.seed)
    final, last_fail = kernels.log_capital_paths(_log_returns(config), outcomes)
    logK = math.log(config.initial_capital)
    final_log = final.T + logK                       # (S, trials)
    with np.errstate(invalid="ignore"):
        win = np.array([[np.mean(final[:, a] > final[:, b]) if a != b else 0.0
                         for b in range(S)] for a in range(S)])
    ruin = {nm: int(np.sum(np.isneginf(final[:, a]))) for a, nm in enumerate(names)}
    rates = final / n
    mean_growth, growth_std = {}, {}
    for a, nm in enumerate(names):
        r = rates[:, a]
        if np.all(np.isfinite(r)):
            mean_growth[nm] = float(np.mean(r))
            # per-round standard deviation, estimated across trials
            growth_std[nm] = float(np.std(r, ddof=1) * math.sqrt(n)) if r.size > 1 else 0.0
        else:
            mean_growth[nm] = NEG_INF
            growth_std[nm] = None
    sep, eps = {}, {}
    for a in range(S):
        for b in range(S):
            if a == b:
                continue
            key = (names[a], names[b])
            lf = last_fail[:, a, b]
            sep[key] = int(lf.max()) + 1 if lf.max() < n else None
            with np.errstate(invalid="ignore"):
                d = final[:, a] - final[:, b]
            eps[key] = None if np.all(np.isnan(d)) else float(np.nanmin(d) / n)
    expected = {nm: expected_growth_rate(s, config.true_dist, config.odds_measure)
                for nm, s in config.strategies.items()}
    notes = ("first-separation rounds are empirical and do not bound n0",)
    return KellyReport(names, n, config.trials, expected, final_log, win, ruin,
                       mean_growth, growth_std, sep, eps, notes)


def recompute_log_capital(config, trial):
    """Log-capital of each strategy in one trial, summed outcome by outcome
    with :func:`math.fsum` (independent of the kernel)."""
    outcomes = draw_outcomes(config.true_dist, config.rounds, trial + 1, config.seed)[trial]
    lr = _log_returns(config)
    logK = math.log(config.initial_capital)
    out = {}
    for a, nm in enumerate(config.names):
        vals = lr[a, outcomes]
        out[nm] = NEG_INF if np.isneginf(vals).any() else logK + math.fsum(vals.tolist())
    return out


def worst_case_growth(strategy, C, odds):
    """``min_{P* in C}`` expected growth rate of ``strategy`` (exact, by LP)."""
    loss, _ = worst_case_loss(strategy, C, odds)
    return math.log(odds.total) - loss


def worst_case_growth_strategy(C, odds, verify=0, seed=0):
    """The strategy maximising worst-case growth: the MaxEnt distribution
    relative to the odds measure.

    With ``verify > 0`` that many random perturbations are checked to do no
    better in the worst case; a violation raises :class:`MaxEntError`.
    """
    sol = solve_maxent(MaxEntProblem(C.space, odds, C))
    best = sol.distribution
    if verify:
        base = worst_case_growth(best, C, odds)
        rng = np.random.default_rng(seed)
        for _ in range(verify):
            q = best.probs * np.exp(rng.normal(0.0, 0.3, best.probs.size))
            other = Distribution(C.space, q / q.sum())
            if worst_case_growth(other, C, odds) > base + 1e-9:
                raise MaxEntError("a perturbed strategy beats the MaxEnt strategy in the worst case")
    return best
