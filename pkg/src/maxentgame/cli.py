"""Command-line front end.

Exit codes: 0 success; 1 bad input (parse error, unknown demo, unreadable
file); 2 infeasible constraints; 3 solver did not converge; 4 a
verification failed (saddle gap or equalizer spread above 1e-6, invalid
shift, invariance discrepancy above 1e-6, failed minimax check).
"""

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .config import PROFILES
from .errors import Infeasible, MaxEntError, NonConvergence, ProblemFileError, VerificationFailed

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_NONCONVERGENCE = 3
EXIT_VERIFY = 4

VERIFY_TOL = 1e-6


class Output:
    """Collects human lines and a structured record, then prints one of them."""

    def __init__(self, fmt, precision):
        self.fmt = fmt
        self.precision = precision
        self.lines = []

    def num(self, x):
        if x is None:
            return "n/a"
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.{self.precision}g}"

    def line(self, text=""):
        self.lines.append(text)

    def emit(self, record, stream=None):
        stream = stream or sys.stdout
        if self.fmt == "structured":
            stream.write(json.dumps(_jsonable(record), sort_keys=True, indent=2) + "\n")
        else:
            stream.write("\n".join(self.lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, (bool, int, str)) or obj is None:
        return obj
    return str(obj)


def _load(path):
    from .problemfile import parse_file

    try:
        return parse_file(path)
    except OSError as e:
        raise ProblemFileError(f"cannot read {path}: {e.strerror}") from None


def _dist_rows(out, space, probs):
    for x, p in zip(space.outcomes, probs):
        out.line(f"  P({x}) = {out.num(p)}")


# -- solve ---------------------------------------------------------------------

def cmd_solve(args, out):
    from .game import worst_case_loss
    from .solver import naive_maximin_union, solve_maxent, solve_minimax_union

    pf = _load(args.file)
    cfg = PROFILES[args.tolerance_profile]
    rec = {"command": "solve", "outcomes": list(pf.space.outcomes)}
    if pf.disjunction is not None:
        mode = "naive" if args.naive else "minimax"
        sol = (naive_maximin_union if mode == "naive" else solve_minimax_union)(
            pf.disjunction, pf.measure, cfg)
        worst = max(worst_case_loss(sol.distribution, b, pf.measure)[0]
                    for b in pf.disjunction.feasible_branches)
        rec.update(mode=mode, worst_case_loss=worst)
        out.line(f"disjunctive constraints, {mode} solution")
    else:
        sol = solve_maxent(pf.problem, cfg)
        out.line("MaxEnt distribution")
    rec.update(distribution=sol.distribution.probs, entropy=sol.entropy_value,
               dual=sol.dual, residual=sol.residual, iterations=sol.iterations,
               method=sol.method, support=list(sol.restricted_support))
    _dist_rows(out, pf.space, sol.distribution.probs)
    out.line(f"entropy relative to measure: {out.num(sol.entropy_value)}")
    out.line("dual coefficients: " + ", ".join(out.num(v) for v in sol.dual))
    out.line(f"moment residual: {out.num(sol.residual)}")
    out.line(f"support: {', '.join(str(x) for x in sol.restricted_support)}")
    out.line(f"method: {sol.method} ({sol.iterations} iterations)")
    if "worst_case_loss" in rec:
        out.line(f"worst-case expected loss over the union: {out.num(rec['worst_case_loss'])}")
    if "measure" not in pf.data:
        out.line("note: no measure given; the uniform measure on the declared outcomes was used")
    out.emit(rec)
    return EXIT_OK


# -- verify ----------------------------------------------------------------------

def cmd_verify(args, out):
    from .game import verify_saddle, verify_saddle_union

    pf = _load(args.file)
    cfg = PROFILES[args.tolerance_profile]
    if pf.disjunction is not None:
        rep = verify_saddle_union(pf.disjunction, pf.measure, cfg)
    else:
        rep = verify_saddle(pf.problem, cfg)
    ok = abs(rep.gap) <= VERIFY_TOL and rep.equalizer_spread <= VERIFY_TOL
    rec = {"command": "verify", "passed": ok, **rep.to_dict()}
    out.line(f"maximin (entropy of the MaxEnt distribution): {out.num(rep.maximin)}")
    out.line(f"minimax (worst-case expected loss):           {out.num(rep.minimax)}")
    out.line(f"gap:               {out.num(rep.gap)}")
    out.line(f"equalizer spread:  {out.num(rep.equalizer_spread)} over {len(rep.vertex_losses)} vertices")
    for n in rep.notes:
        out.line(f"note: {n}")
    out.line("saddle verified" if ok else "saddle check FAILED (tolerance 1e-6)")
    out.emit(rec)
    return EXIT_OK if ok else EXIT_VERIFY


# -- classify ---------------------------------------------------------------------

def _measure_list(M):
    return [float(w) for w in M.weights]


def _classification_record(q, verdict, out):
    from .classify import CALIBRATED, CORRECT, ILL_DEFINED, WELL_DEFINED

    ev = verdict.evidence
    rec = {"name": q.name, "Y": q.Y.name, "Z": q.Z.name, "family": q.family.describe(),
           **verdict.summary()}
    out.line(f"[{q.name}] guess E[{q.Y.name} | {q.Z.name}] with family {q.family.describe()}")
    out.line(f"  level: {verdict.level}")
    if verdict.level == CORRECT:
        coeffs = {str(z): c.coefficients for z, c in ev["certificates"].items()}
        rec["affine_coefficients"] = coeffs
        for z, c in coeffs.items():
            out.line(f"  Z = {z}: alpha = (" + ", ".join(out.num(v) for v in c.ravel()) + ")")
    elif verdict.level == CALIBRATED:
        cal = ev["calibration"]
        cells = {str(v): c for v, c in cal.cell_values.items()}
        rec["partition"] = {str(v): [str(z) for z in _cell_members(q, cal.V, v)] for v in cal.V.range()}
        rec["cell_values"] = cells
        for v, c in cells.items():
            members = rec["partition"][v]
            out.line(f"  cell {{{', '.join(members)}}}: E[Y] = " + ", ".join(out.num(x) for x in c))
    else:
        if "agreement" in ev:
            rec["agreement"] = ev["agreement"]
            out.line(f"  agreement over {ev['agreement']['samples']} sampled measures: "
                     f"max spread {out.num(ev['agreement']['max_spread'])}")
        if "determination" in ev:
            rec["determination"] = {str(z): bool(d) for z, d in ev["determination"].items()}
        if verdict.level == ILL_DEFINED:
            pair = ev.get("separating")
            if pair is not None:
                rec["separating"] = {"measure_a": _measure_list(pair.measure_a),
                                     "measure_b": _measure_list(pair.measure_b),
                                     "z": str(pair.z), "guess_a": pair.guess_a,
                                     "guess_b": pair.guess_b, "difference": pair.difference,
                                     "origin": pair.origin}
                out.line("  separating measures (" + pair.origin + "):")
                out.line("    M_a = (" + ", ".join(out.num(w) for w in pair.measure_a.weights)
                         + f") -> guess {_fmt_guess(out, pair.guess_a)}")
                out.line("    M_b = (" + ", ".join(out.num(w) for w in pair.measure_b.weights)
                         + f") -> guess {_fmt_guess(out, pair.guess_b)}")
            rec["manual_review"] = bool(ev.get("manual_review"))
        elif verdict.level == WELL_DEFINED and "reason" in ev:
            out.line(f"  reason: {ev['reason']}")
    for c in verdict.caveats:
        out.line(f"  caveat: {c}")
    for n in verdict.notes:
        out.line(f"  note: {n}")
    return rec


def _fmt_guess(out, g):
    if np.ndim(g) == 0:
        return out.num(g)
    return "(" + ", ".join(out.num(v) for v in np.ravel(g)) + ")"


def _cell_members(q, V, v):
    cell = V.event(v)
    return [z for z in q.Z.range() if np.any(cell & q.Z.event(z))]


def cmd_classify(args, out):
    from .classify import classify

    pf = _load(args.file)
    if not pf.queries:
        raise ProblemFileError("the file has no [[query]] blocks")
    cfg = PROFILES[args.tolerance_profile]
    records = []
    for q in pf.queries:
        verdict = classify(q, config=cfg, seed=args.seed)
        records.append(_classification_record(q, verdict, out))
    out.emit({"command": "classify", "queries": records})
    return EXIT_OK


# -- shift --------------------------------------------------------------------------

def cmd_shift(args, out):
    from .errors import YNotExpressibleInNewSpace
    from .representation import check_invariance, validate_shift

    pf = _load(args.file)
    if pf.shift is None:
        raise ProblemFileError("the file has no [shift] block")
    cfg = PROFILES[args.tolerance_profile]
    verdict = validate_shift(pf.shift, pf.problem, cfg)
    rec = {"command": "shift", "valid": verdict.valid, "reasons": list(verdict.reasons),
           "counterexample": list(verdict.counterexample) if verdict.counterexample else None}
    out.line(f"shift is {'valid' if verdict else 'INVALID'}")
    for r in verdict.reasons:
        out.line(f"  reason: {r}")
    if verdict.counterexample:
        a, b = verdict.counterexample
        out.line(f"  counterexample: underlying outcomes {a} and {b}")
    code = EXIT_OK if verdict else EXIT_VERIFY
    if verdict:
        table = {}
        for name in pf.shift_checks:
            try:
                rep = check_invariance(pf.shift, pf.problem, pf.variables[name], cfg)
            except YNotExpressibleInNewSpace:
                table[name] = None
                out.line(f"  {name}: not expressible in the new space; skipped")
                continue
            table[name] = {"max_discrepancy": rep.max_discrepancy,
                           "rows": [[str(y), a, b] for y, a, b in rep.rows]}
            out.line(f"  {name}: max discrepancy {out.num(rep.max_discrepancy)}")
            for y, a, b in rep.rows:
                out.line(f"    P({name} = {y}): original {out.num(a)}, new {out.num(b)}")
            if rep.max_discrepancy > VERIFY_TOL:
                code = EXIT_VERIFY
        rec["invariance"] = table
    out.emit(rec)
    return code


# -- kelly ------------------------------------------------------------------------

def cmd_kelly(args, out):
    from .kelly import KellyConfig, simulate, worst_case_growth_strategy

    pf = _load(args.file)
    if pf.kelly is None:
        raise ProblemFileError("the file has no [kelly] block")
    k = pf.kelly
    strategies = {}
    for name, s in k["strategies"].items():
        strategies[name] = worst_case_growth_strategy(pf.constraints, k["odds"]) if s == "maxent" else s
    seed = k["seed"] if args.seed is None else args.seed
    cfg = KellyConfig(k["odds"], k["true_dist"], strategies, k["rounds"], k["trials"], seed,
                      k["initial_capital"])
    rep = simulate(cfg)
    rec = {"command": "kelly", "seed": seed, **rep.to_dict()}
    out.line(f"{rep.trials} trials of {rep.rounds} rounds (seed {seed})")
    for nm in rep.names:
        out.line(f"  {nm}: expected growth {out.num(rep.expected_growth[nm])}, "
                 f"realized {out.num(rep.mean_growth[nm])}, ruined {rep.ruin_counts[nm]}")
    for (a, b), v in rep.first_separation.items():
        out.line(f"  {a} beats {b} in {rep.wins(a, b)}/{rep.trials} trials; "
                 f"ahead in all trials from round {v if v is not None else 'never'}")
    out.emit(rec)
    return EXIT_OK


# -- demos ---------------------------------------------------------------------------

def demo_bertrand(args, out):
    from .instances import bertrand
    from .solver import solve_maxent

    rows = []
    out.line("P({1}) under three MaxEnt choices")
    for case in bertrand():
        sol = solve_maxent(case.problem, PROFILES[args.tolerance_profile])
        p = sol.distribution.prob(list(case.event))
        rows.append({"case": case.label, "computed": p, "expected": float(case.expected)})
        out.line(f"  {case.label:<32} computed {out.num(p):<12} expected {case.expected}")
    return {"command": "demo", "demo": "bertrand", "rows": rows}


def demo_disjunctive(args, out):
    from .game import worst_case_loss
    from .instances import disjunctive
    from .solver import naive_maximin_union, solve_minimax_union

    D, M = disjunctive()
    cfg = PROFILES[args.tolerance_profile]
    res = {}
    branches = [float(b.spec.target[0]) for b in D.branches]
    out.line("Nature picks P(X=1) = " + " or ".join(out.num(b) for b in branches))
    for label, fn, expected in (("minimax", solve_minimax_union, 0.5),
                                ("naive maximin", naive_maximin_union, 0.1)):
        sol = fn(D, M, cfg)
        p1 = float(sol.distribution.probs[1])
        worst = max(worst_case_loss(sol.distribution, b, M)[0] for b in D.feasible_branches)
        res[label] = {"p1": p1, "expected": expected, "worst_case_loss": worst}
        out.line(f"  {label:<14} P(X=1) = {out.num(p1):<12} (expected {expected})  "
                 f"worst-case loss {out.num(worst)}")
    margin = res["naive maximin"]["worst_case_loss"] - res["minimax"]["worst_case_loss"]
    out.line(f"  minimax saves {out.num(margin)} nats in the worst case")
    return {"command": "demo", "demo": "disjunctive", "branches": branches, "results": res,
            "margin": margin}


DEMOS = {"bertrand": demo_bertrand, "disjunctive": demo_disjunctive}


def cmd_demo(args, out):
    fn = DEMOS.get(args.name)
    if fn is None:
        print(f"error: unknown demo {args.name!r} (choose from {', '.join(DEMOS)})", file=sys.stderr)
        return EXIT_INPUT
    out.emit(fn(args, out))
    return EXIT_OK


# -- entry point ------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("human", "structured"), default="human")
    common.add_argument("--precision", type=int, default=9, help="significant digits (default 9)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--tolerance-profile", choices=sorted(PROFILES), default="default")

    p = argparse.ArgumentParser(prog="maxentgame", description=(
        "Maximum-entropy inference on finite spaces. Without a measure in the problem "
        "file, MaxEnt is taken relative to the uniform measure on the declared outcomes."))
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="compute the MaxEnt distribution")
    s.add_argument("file")
    mode = s.add_mutually_exclusive_group()
    mode.add_argument("--minimax", action="store_true", help="hull solution for disjunctions (default)")
    mode.add_argument("--naive", action="store_true", help="best single-branch solution")
    s.set_defaults(func=cmd_solve)

    for name, fn, text in (("verify", cmd_verify, "check the saddle and equalizer properties"),
                           ("classify", cmd_classify, "grade each query block"),
                           ("shift", cmd_shift, "validate a representation shift"),
                           ("kelly", cmd_kelly, "simulate proportional gambling")):
        c = sub.add_parser(name, parents=[common], help=text)
        c.add_argument("file")
        c.set_defaults(func=fn)

    d = sub.add_parser("demo", parents=[common], help="built-in worked examples")
    d.add_argument("name", help="bertrand or disjunctive")
    d.set_defaults(func=cmd_demo)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is None and args.command != "kelly":
        args.seed = 0
    out = Output(args.format, args.precision)
    try:
        return args.func(args, out)
    except ProblemFileError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Infeasible as e:
        print(f"error: infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NonConvergence as e:
        res = f" (residual {e.residual:.3g})" if e.residual is not None else ""
        print(f"error: {e}{res}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except VerificationFailed as e:
        print(f"error: verification failed: {e}", file=sys.stderr)
        return EXIT_VERIFY
    except MaxEntError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
