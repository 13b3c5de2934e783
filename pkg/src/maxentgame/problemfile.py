"""Problem files: TOML documents describing a MaxEnt problem and what to do with it.

Grammar (all tables optional except ``outcomes``)::

    outcomes = [label, ...]                  # ints or strings, distinct
    measure  = [weight, ...]                 # default: 1 on every outcome

    [variables]
    name = [value, ...]                      # one value (or vector) per outcome

    [[constraints]]                          # E[variable] = target (or >=)
    variable = "name"
    relation = "eq"                          # or "ge"; default "eq"
    target   = number | [number, ...]

    [[conditioning]]                         # P(variable = value) = 1
    variable = "name"
    value    = number | [number, ...]

    [[disjunction]]                          # one block per branch
    constraints = [{variable = "name", relation = "eq", target = 0.1}, ...]

    [shift]
    underlying  = [label, ...]
    to_original = [label, ...]               # aligned with underlying
    to_new      = [label, ...]               # aligned with underlying
    new_space   = [label, ...]               # default: to_new labels in first-seen order
    new_measure = [weight, ...]              # optional, aligned with new_space
    check       = ["name", ...]              # variables to compare; default all

    [[query]]
    name   = "text"
    Y      = "name"
    Z      = "name"                          # default: trivial
    family = "all-measures"                  # singleton | uniform-on-base | compatible-with
    measure   = [weight, ...]                # singleton only; default top-level measure
    variable  = "name"                       # compatible-with only
    reference = [weight, ...]                # compatible-with only; default 1 per value
    conditioning = "posterior"               # or "constraint"

    [kelly]
    true_dist = [p, ...]
    odds      = [weight, ...]                # default: top-level measure
    rounds = 10000
    trials = 100
    seed   = 0
    initial_capital = 1.0
    [kelly.strategies]
    name = [p, ...]                          # or the string "maxent"

Numbers may be written as strings ``"p/q"`` to keep them exact.
"""

import re
from dataclasses import dataclass, field
from fractions import Fraction

import tomli
import tomli_w

from .constraints import EQ, GE, ConstraintSet, ConstraintSpec, DisjunctiveConstraint
from .core import Distribution, Measure, MeasureFamily, OutcomeSpace, RandomVariable
from .errors import ProblemFileError
from .representation import RepresentationShift
from .solver import MaxEntProblem

__all__ = ["ProblemFile", "parse", "parse_file", "serialize"]

_FRACTION = re.compile(r"^\s*(-?\d+)\s*/\s*(\d+)\s*$")
_TOML_POS = re.compile(r"at line (\d+), column (\d+)")


def _locate(text, needle):
    """Line and column (1-based) of the first occurrence of ``needle``."""
    if text is None or needle is None:
        return None, None
    i = text.find(needle)
    if i < 0:
        return None, None
    line = text.count("\n", 0, i) + 1
    col = i - (text.rfind("\n", 0, i) + 1) + 1
    return line, col


def _num(v, where):
    if isinstance(v, bool):
        raise ProblemFileError(f"{where}: expected a number, got a boolean")
    if isinstance(v, (int, float)):
        return v
    if isinstance(v, str):
        m = _FRACTION.match(v)
        if m:
            if int(m.group(2)) == 0:
                raise ProblemFileError(f"{where}: zero denominator in {v!r}")
            return Fraction(int(m.group(1)), int(m.group(2)))
    raise ProblemFileError(f"{where}: expected a number or 'p/q', got {v!r}")


def _canon_num(v):
    """Normalised TOML-ready form of a number."""
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return v


def _canon_value(v, where):
    if isinstance(v, list):
        return [_canon_num(_num(x, where)) for x in v]
    return _canon_num(_num(v, where))


def _as_value(v, where):
    if isinstance(v, list):
        return tuple(_num(x, where) for x in v)
    return _num(v, where)


@dataclass
class ProblemFile:
    """A parsed problem file.

    ``data`` is the normalised document (what :func:`serialize` writes);
    the remaining attributes are the model objects built from it.
    """

    data: dict
    space: OutcomeSpace
    measure: Measure
    variables: dict
    constraints: ConstraintSet = None
    disjunction: DisjunctiveConstraint = None
    shift: RepresentationShift = None
    shift_checks: tuple = ()
    queries: list = field(default_factory=list)
    kelly: dict = None

    @property
    def problem(self):
        if self.constraints is None:
            return None
        return MaxEntProblem(self.space, self.measure, self.constraints)


class _Builder:
    def __init__(self, doc, text):
        self.doc = doc
        self.text = text
        self.out = {}

    def fail(self, message, needle=None):
        line, col = _locate(self.text, needle)
        raise ProblemFileError(message, line=line, column=col)

    def require(self, table, key, where):
        if key not in table:
            self.fail(f"{where}: missing key {key!r}", f"[{where}")
        return table[key]

    def labels(self, raw, where):
        if not isinstance(raw, list) or not raw:
            self.fail(f"{where} must be a non-empty array of labels", where)
        for x in raw:
            if not isinstance(x, (int, str)) or isinstance(x, bool):
                self.fail(f"{where}: labels must be integers or strings, got {x!r}", where)
        if len(set(raw)) != len(raw):
            self.fail(f"{where}: labels must be distinct", where)
        return list(raw)

    def weights(self, raw, size, where):
        if not isinstance(raw, list) or len(raw) != size:
            self.fail(f"{where} must list {size} weights", where)
        try:
            vals = [_num(v, where) for v in raw]
        except ProblemFileError as e:
            self.fail(str(e), where)
        return vals

    def measure(self, raw, space, where):
        vals = self.weights(raw, space.size, where)
        if any(v <= 0 for v in vals):
            self.fail(f"{where}: weights must be strictly positive", where)
        return Measure(space, vals)

    def variable(self, name, where):
        if not isinstance(name, str) or name not in self.variables:
            self.fail(f"{where}: unknown variable {name!r}", f'"{name}"')
        return self.variables[name]

    def rows(self, blocks, where):
        rows = []
        canon = []
        for i, row in enumerate(blocks):
            w = f"{where}[{i}]"
            if not isinstance(row, dict):
                self.fail(f"{w} must be a table", where)
            var = self.variable(self.require(row, "variable", w), w)
            rel = row.get("relation", EQ)
            if rel not in (EQ, GE):
                self.fail(f"{w}: relation must be 'eq' or 'ge', got {rel!r}", f'"{rel}"')
            tgt = self.require(row, "target", w)
            try:
                t = _as_value(tgt, w)
            except ProblemFileError as e:
                self.fail(str(e), "target")
            tl = list(t) if isinstance(t, tuple) else [t]
            if len(tl) != var.dim:
                self.fail(f"{w}: target has {len(tl)} entries, variable has dimension {var.dim}",
                          "target")
            rows.append((var, rel, [float(v) for v in tl]))
            canon.append({"variable": row["variable"], "relation": rel,
                          "target": _canon_value(tgt, w)})
        return rows, canon

    def build(self):
        doc = self.doc
        known = {"outcomes", "measure", "variables", "constraints", "conditioning",
                 "disjunction", "shift", "query", "kelly"}
        for key in doc:
            if key not in known:
                self.fail(f"unknown top-level key {key!r}", key)
        outcomes = self.labels(self.require(doc, "outcomes", "document"), "outcomes")
        space = OutcomeSpace(outcomes)
        self.out["outcomes"] = outcomes
        if "measure" in doc:
            measure = self.measure(doc["measure"], space, "measure")
            self.out["measure"] = [_canon_num(_num(v, "measure")) for v in doc["measure"]]
        else:
            measure = Measure.uniform(space)

        self.variables = {}
        canon_vars = {}
        for name, vals in doc.get("variables", {}).items():
            if not isinstance(vals, list) or len(vals) != space.size:
                self.fail(f"variable {name!r} must list one value per outcome", name)
            try:
                vv = [_as_value(v, f"variable {name!r}") for v in vals]
                canon_vars[name] = [_canon_value(v, name) for v in vals]
                self.variables[name] = RandomVariable(space, vv, name=name)
            except (ProblemFileError, ValueError) as e:
                self.fail(f"variable {name!r}: {e}", name)
        if canon_vars:
            self.out["variables"] = canon_vars

        rows, canon = self.rows(doc.get("constraints", []), "constraints")
        if canon:
            self.out["constraints"] = canon
        cond, canon_c = [], []
        for i, c in enumerate(doc.get("conditioning", [])):
            w = f"conditioning[{i}]"
            Z = self.variable(self.require(c, "variable", w), w)
            val = self.require(c, "value", w)
            z = _as_value(val, w)
            z = z if not isinstance(z, Fraction) or z.denominator != 1 else int(z)
            try:
                Z.value_index(z)
            except ValueError:
                self.fail(f"{w}: {val!r} is not a value of {c['variable']!r}", "value")
            cond.append((Z, z))
            canon_c.append({"variable": c["variable"], "value": _canon_value(val, w)})
        if canon_c:
            self.out["conditioning"] = canon_c

        spec = ConstraintSpec.from_rows(space, rows)
        constraints = ConstraintSet(space, spec, cond, validate=False)

        disjunction = None
        if "disjunction" in doc:
            branches, canon_d = [], []
            for i, block in enumerate(doc["disjunction"]):
                w = f"disjunction[{i}]"
                brows, bcanon = self.rows(block.get("constraints", []), f"{w}.constraints")
                # shared rows apply to every branch
                bspec = ConstraintSpec.from_rows(space, rows + brows)
                branches.append(ConstraintSet(space, bspec, cond, validate=False))
                canon_d.append({"constraints": bcanon})
            if not branches:
                self.fail("disjunction needs at least one branch", "disjunction")
            disjunction = DisjunctiveConstraint(branches)
            self.out["disjunction"] = canon_d

        pf = ProblemFile(self.out, space, measure, self.variables, constraints, disjunction)
        if "shift" in doc:
            self.shift(doc["shift"], pf)
        for i, q in enumerate(doc.get("query", [])):
            pf.queries.append(self.query(q, i, pf))
        if pf.queries:
            self.out["query"] = [q[1] for q in pf.queries]
            pf.queries = [q[0] for q in pf.queries]
        if "kelly" in doc:
            pf.kelly = self.kelly(doc["kelly"], pf)
        return pf

    def shift(self, sh, pf):
        w = "shift"
        under = OutcomeSpace(self.labels(self.require(sh, "underlying", w), "underlying"))
        to_orig = self.require(sh, "to_original", w)
        to_new = self.require(sh, "to_new", w)
        for nm, m in (("to_original", to_orig), ("to_new", to_new)):
            if not isinstance(m, list) or len(m) != under.size:
                self.fail(f"shift.{nm} must list one label per underlying outcome", nm)
        if "new_space" in sh:
            new_labels = self.labels(sh["new_space"], "new_space")
        else:
            new_labels = list(dict.fromkeys(to_new))
        new_space = OutcomeSpace(new_labels)
        for x in to_orig:
            if x not in pf.space:
                self.fail(f"shift.to_original: {x!r} is not an outcome", "to_original")
        for x in to_new:
            if x not in new_space:
                self.fail(f"shift.to_new: {x!r} is not in the new space", "to_new")
        nm = None
        canon = {"underlying": list(under.outcomes), "to_original": list(to_orig),
                 "to_new": list(to_new), "new_space": new_labels}
        if "new_measure" in sh:
            nm = self.measure(sh["new_measure"], new_space, "new_measure")
            canon["new_measure"] = [_canon_num(_num(v, w)) for v in sh["new_measure"]]
        checks = sh.get("check", list(self.variables))
        for c in checks:
            self.variable(c, "shift.check")
        if "check" in sh:
            canon["check"] = list(checks)
        pf.shift = RepresentationShift.from_maps(under, pf.space, new_space, to_orig, to_new, nm)
        pf.shift_checks = tuple(checks)
        self.out["shift"] = canon

    def query(self, q, i, pf):
        from .classify import ApplicationQuery

        w = f"query[{i}]"
        canon = {}
        name = q.get("name", f"query {i + 1}")
        canon["name"] = name
        Y = self.variable(self.require(q, "Y", w), w)
        canon["Y"] = q["Y"]
        Z = None
        if "Z" in q:
            Z = self.variable(q["Z"], w)
            canon["Z"] = q["Z"]
        kind = q.get("family", "all-measures")
        canon["family"] = kind
        if kind == "singleton":
            if "measure" in q:
                M = self.measure(q["measure"], pf.space, f"{w}.measure")
                canon["measure"] = [_canon_num(_num(v, w)) for v in q["measure"]]
            else:
                M = pf.measure
            fam = MeasureFamily.singleton(M)
        elif kind == "uniform-on-base":
            fam = MeasureFamily.uniform_on_base(pf.space)
        elif kind == "all-measures":
            fam = MeasureFamily.all_measures(pf.space)
        elif kind == "compatible-with":
            var = self.variable(self.require(q, "variable", w), w)
            canon["variable"] = q["variable"]
            rs = var.range_space()
            if "reference" in q:
                ref = self.measure(q["reference"], rs, f"{w}.reference")
                canon["reference"] = [_canon_num(_num(v, w)) for v in q["reference"]]
            else:
                ref = Measure.uniform(rs)
            fam = MeasureFamily.compatible_with(var, ref)
        else:
            self.fail(f"{w}: unknown measure family {kind!r}", f'"{kind}"')
        cond = q.get("conditioning", "posterior")
        if cond not in ("posterior", "constraint"):
            self.fail(f"{w}: conditioning must be 'posterior' or 'constraint'", f'"{cond}"')
        if "conditioning" in q:
            canon["conditioning"] = cond
        return ApplicationQuery(pf.constraints, fam, Y, Z, name=name, conditioning=cond), canon

    def kelly(self, k, pf):
        w = "kelly"
        space = pf.space
        canon = {}
        tp = self.weights(self.require(k, "true_dist", w), space.size, "true_dist")
        canon["true_dist"] = [_canon_num(v) for v in tp]
        true = Distribution(space, [float(v) for v in tp], tol=1e-9)
        if "odds" in k:
            odds = self.measure(k["odds"], space, "odds")
            canon["odds"] = [_canon_num(_num(v, w)) for v in k["odds"]]
        else:
            odds = pf.measure
        strategies, canon_s = {}, {}
        raw = self.require(k, "strategies", w)
        if not isinstance(raw, dict) or not raw:
            self.fail("kelly.strategies must be a non-empty table", "strategies")
        for name, vals in raw.items():
            if vals == "maxent":
                strategies[name] = "maxent"
                canon_s[name] = "maxent"
                continue
            ps = self.weights(vals, space.size, f"kelly.strategies.{name}")
            canon_s[name] = [_canon_num(v) for v in ps]
            try:
                strategies[name] = Distribution(space, [float(v) for v in ps], tol=1e-9)
            except ValueError as e:
                self.fail(f"kelly.strategies.{name}: {e}", name)
        canon["strategies"] = canon_s
        opts = {}
        for key, default, typ in (("rounds", 1000, int), ("trials", 100, int), ("seed", 0, int),
                                  ("initial_capital", 1.0, float)):
            v = k.get(key, default)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or (typ is int and not isinstance(v, int)):
                self.fail(f"kelly.{key} must be {'an integer' if typ is int else 'a number'}", key)
            opts[key] = typ(v)
            if key in k:
                canon[key] = k[key]
        self.out["kelly"] = canon
        return {"true_dist": true, "odds": odds, "strategies": strategies, **opts}


def parse(text):
    """Parse problem-file text; raises :class:`ProblemFileError` with a
    line/column when it can be located."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        m = _TOML_POS.search(str(e))
        if m:
            line, col = int(m.group(1)), int(m.group(2))
        elif "end of document" in str(e):
            body = text.rstrip("\n")
            line = body.count("\n") + 1
            col = len(body) - (body.rfind("\n") + 1) + 1
        else:
            line, col = None, None
        raise ProblemFileError(f"syntax error: {e}", line=line, column=col) from None
    try:
        return _Builder(doc, text).build()
    except ProblemFileError:
        raise
    except (ValueError, TypeError, KeyError) as e:
        raise ProblemFileError(str(e)) from None


def parse_file(path):
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def serialize(pf):
    """TOML text for a parsed problem file (normalised form)."""
    return tomli_w.dumps(pf.data)
