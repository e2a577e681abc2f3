"""Best-first forward search over identified terms.

The search keeps every identified term with the justification that produced
it.  Terms are expanded in order of proximity to the target (ties go to the
term identified first); each expansion applies the rules with the expanded
term as one parent and any identified term as the other.
"""

from __future__ import annotations

import heapq
import itertools
import os
import re
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import formula as F
from .ldag import (LDAG, LDAGError, augment_with_interventions, bits, is_regular,
                   label_closure, strip_labels, to_mask)
from .separation import CsiQuery, Separator
from .terms import (Justification, Term, TermError, admissible, format_term,
                    parse_term, rule1_query)

DEFAULT_TIMEOUT = 1800.0
STATUSES = ("identified", "na", "limit")


def default_timeout() -> float:
    raw = os.environ.get("CSICALC_TIMEOUT")
    if raw:
        try:
            return float(raw)
        except ValueError:
            raise ValueError(f"CSICALC_TIMEOUT must be a number of seconds, got {raw!r}") from None
    return DEFAULT_TIMEOUT


class QueryError(ValueError):
    pass


# -- queries -----------------------------------------------------------------

@dataclass(frozen=True)
class QuerySpec:
    """``P(Y | do(X), Z)``: outcome, do-set and conditioning, each split into
    general variables and assignments (``{var: value}``)."""

    outcome: frozenset
    outcome_assigned: tuple = ()
    do: frozenset = frozenset()
    do_assigned: tuple = ()
    cond: frozenset = frozenset()
    cond_assigned: tuple = ()

    @property
    def do_vars(self) -> frozenset:
        return self.do | {v for v, _ in self.do_assigned}

    @property
    def variables(self) -> frozenset:
        return (self.outcome | {v for v, _ in self.outcome_assigned} | self.do_vars
                | self.cond | {v for v, _ in self.cond_assigned})

    def validate(self, g: LDAG):
        parts = [self.outcome | {v for v, _ in self.outcome_assigned}, self.do_vars,
                 self.cond | {v for v, _ in self.cond_assigned}]
        if not parts[0]:
            raise QueryError("query needs at least one outcome variable")
        for a, b in itertools.combinations(parts, 2):
            if a & b:
                names = ", ".join(g.name(v) for v in sorted(a & b))
                raise QueryError(f"outcome, do-set and conditioning overlap in {names}")
        for v in self.variables:
            var = g.variables[v]
            if var.is_intervention:
                raise QueryError(f"intervention node {var.name} cannot appear in a query")
            if not var.observed:
                raise QueryError(f"query variable {var.name} is latent")

    def format(self, g: LDAG) -> str:
        def side(general, assigned):
            items = {v: g.name(v) for v in general}
            items.update({v: f"{g.name(v)}={x}" for v, x in assigned})
            return ",".join(items[v] for v in sorted(items))

        rhs = []
        if self.do_vars:
            rhs.append(f"do({side(self.do, self.do_assigned)})")
        c = side(self.cond, self.cond_assigned)
        if c:
            rhs.append(c)
        s = "P(" + side(self.outcome, self.outcome_assigned)
        return s + (" | " + ", ".join(rhs) if rhs else "") + ")"


_QUERY_RE = re.compile(r"^\s*P\s*\((.*)\)\s*$")
_DO_RE = re.compile(r"do\s*\(([^()]*)\)")


def _query_items(text, g, where):
    general, assigned = set(), {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, eq, val = item.partition("=")
        name = name.strip()
        if name not in g.index:
            raise QueryError(f"unknown variable {name!r} in {where}")
        v = g.index[name]
        if v in general or v in assigned:
            raise QueryError(f"variable {name} repeated in {where}")
        if eq:
            if val.strip() not in ("0", "1"):
                raise QueryError(f"assignment {item!r} must use 0 or 1")
            assigned[v] = int(val)
        else:
            general.add(v)
    return general, assigned


def parse_query(text: str, g: LDAG) -> QuerySpec:
    """Parse ``P(Y | do(X), Z)``; assignments such as ``Z=0`` are allowed anywhere."""
    m = _QUERY_RE.match(text)
    if not m:
        raise QueryError(f"query must look like P(Y | do(X), Z), got {text!r}")
    lhs, _, rhs = m.group(1).partition("|")
    if "|" in rhs:
        raise QueryError("query has more than one '|'")
    y, ya = _query_items(lhs, g, "outcome")
    do_g, do_a = set(), {}
    for dm in _DO_RE.finditer(rhs):
        a, b = _query_items(dm.group(1), g, "do()")
        if (a | set(b)) & (do_g | set(do_a)):
            raise QueryError(f"variable repeated in do() of {text!r}")
        do_g |= a
        do_a.update(b)
    rest = _DO_RE.sub("", rhs)
    if "do" in re.findall(r"[A-Za-z_]+(?=\s*\()", rest) or "(" in rest or ")" in rest:
        raise QueryError(f"malformed do() in {text!r}")
    z, za = _query_items(rest, g, "conditioning part")
    q = QuerySpec(frozenset(y), tuple(sorted(ya.items())), frozenset(do_g),
                  tuple(sorted(do_a.items())), frozenset(z), tuple(sorted(za.items())))
    q.validate(g)
    return q


# -- limits, statistics, results ------------------------------------------------

@dataclass
class Limits:
    timeout: float | None = None  # seconds; None reads CSICALC_TIMEOUT or the default
    max_expansions: int | None = None


@dataclass
class SearchStats:
    expansions: int = 0
    candidates: int = 0
    identified: int = 0
    csi_checks: int = 0
    dsep_calls: int = 0
    wall_ms: float = 0.0
    firings: Counter = field(default_factory=Counter)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("expansions", "candidates", "identified",
                                           "csi_checks", "dsep_calls", "wall_ms")}
        d["firings"] = dict(sorted(self.firings.items()))
        return d


@dataclass
class IdentifyResult:
    status: str
    query: QuerySpec
    graph: LDAG  # the working graph: restricted, closed and augmented
    target: Term
    stats: SearchStats
    formula: F.Formula | None = None
    raw_formula: F.Formula | None = None
    derivation: list = field(default_factory=list)  # [(term, Justification)] in identification order
    inputs: tuple = ()
    mode: str = "combined"
    sources: dict = field(default_factory=dict)  # input-derived term -> input index

    def step_formulas(self) -> dict:
        """Raw formula for every term of the derivation."""
        built: dict = {}
        for t, j in self.derivation:
            built[t] = _step_formula(t, j, built, self.sources)
        return built

    @property
    def identified(self) -> bool:
        return self.status == "identified"

    def render(self, style: str = "plain") -> str:
        if self.formula is None:
            return "NA"
        return F.render(self.formula, self.graph, style)

    def trace_lines(self) -> list[str]:
        """One ``term | rule | parent1 [| parent2] [| csi]`` record per derivation step."""
        g = self.graph
        out = []
        for t, j in self.derivation:
            parts = [format_term(t, g), j.rule] + [format_term(p, g) for p in j.parents]
            if j.csi is not None:
                parts.append(j.csi.format(g))
            out.append(" | ".join(parts))
        return out

    def to_dot(self) -> str:
        g = self.graph
        ids = {t: i for i, (t, _) in enumerate(self.derivation)}
        lines = ["digraph derivation {", "  node [shape=box];"]
        for t, i in ids.items():
            label = format_term(t, g).replace('"', '\\"')
            lines.append(f'  n{i} [label="{label}"];')
        for t, j in self.derivation:
            lab = j.rule
            if j.csi is not None:
                lab += ": " + j.csi.format(g)
            for p in j.parents:
                lines.append(f'  n{ids[p]} -> n{ids[t]} [label="{lab}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# -- proximity -------------------------------------------------------------------

def _popcount(x: int) -> int:
    return bin(x).count("1")


def proximity(t: Term, target: Term) -> int:
    """Closeness of ``t`` to ``target``; higher is closer.

    Twice the number of variables on the same side in both terms, minus the
    variables absent from the target, minus the assignments that disagree.
    """
    joint = _popcount(t.joint & target.joint)
    cond = _popcount(t.cond & target.cond)
    extra = _popcount(t.variables & ~target.variables)
    tv = t.jv | t.cv
    qv = target.jv | target.cv
    conflicts = _popcount((t.ja | t.ca) & (target.ja | target.ca) & (tv ^ qv))
    return 2 * joint + 2 * cond - extra - conflicts


# -- graph preparation ------------------------------------------------------------

def restrict(g: LDAG, keep: int) -> LDAG:
    """Drop edges leaving ``keep``; ``keep`` must be ancestrally closed.  Ids are preserved."""
    edges = {(x, y) for x, y in g.edges if (keep >> y) & 1}
    labels = {e: ls for e, ls in g.labels.items() if e in edges}
    return LDAG(g.variables, edges, labels, check_regular=False)


def prepare_graph(g: LDAG, query: QuerySpec, *, strip: bool = False, universe_only: bool = True):
    """Working graph for ``query``: label closure, ancestral restriction and
    intervention nodes for every observed variable in the ancestral set."""
    if g.intervention_mask:
        raise LDAGError("input graph already contains intervention nodes")
    if strip:
        g = strip_labels(g)
    else:
        g = label_closure(g)
        if not is_regular(g):
            raise LDAGError("label closure makes some edge absent in every context")
    universe = g.ancestors(to_mask(query.variables)) if universe_only else (1 << g.n) - 1
    if universe_only:
        g = restrict(g, universe)
    targets = [v for v in bits(universe & g.observed_mask)]
    return augment_with_interventions(g, targets), universe


def query_term(g: LDAG, q: QuerySpec) -> Term:
    ja = jv = ca = cv = 0
    for v, x in q.outcome_assigned:
        ja |= 1 << v
        jv |= x << v
    for v, x in q.cond_assigned + q.do_assigned:
        ca |= 1 << v
        cv |= x << v
    for v in q.do_vars:
        i = g.intervention_of[v]
        ca |= 1 << i
        cv |= 1 << i
    return Term(to_mask(q.outcome), ja, jv, to_mask(q.do | q.cond), ca, cv)


# -- the search ------------------------------------------------------------------

class _Limit(Exception):
    pass


class Search:
    """One run of the forward search on a prepared graph.

    ``mode`` is ``combined`` (general and assigned variables) or ``fullcs``
    (every term fully assigned, each context handled separately).
    """

    def __init__(self, g: LDAG, inputs: Sequence[Term], target: Term, *, mode: str = "combined",
                 universe: int | None = None, separator: Separator | None = None,
                 score: Callable[[Term, Term], int] = proximity,
                 r1_size: int = 1, r3_size: int = 2, limits: Limits | None = None):
        if mode not in ("combined", "fullcs"):
            raise ValueError(f"mode must be 'combined' or 'fullcs', got {mode!r}")
        self.g = g
        self.mode = mode
        self.fullcs = mode == "fullcs"
        self.target = target
        self.score = score
        self.r1_size = r1_size
        self.r3_size = r3_size
        self.sep = separator or Separator(g)
        self.limits = limits or Limits()
        base = universe if universe is not None else (1 << g.n) - 1
        self.obs = base & g.observed_mask & ~g.intervention_mask
        self.imask = g.intervention_mask
        # assignments only matter for variables that can change a context DAG
        self.assignable = (g.label_var_mask & self.obs) | target.ja | (target.ca & ~self.imask)
        self.known: dict[Term, Justification] = {}
        self.order: dict[Term, int] = {}
        self.by_cond: dict[tuple, list[Term]] = {}
        self.frontier: list = []
        self.stats = SearchStats()
        self.sources: dict[Term, int] = {}
        if self.fullcs:
            self.targets = set(_instantiations(target))
        else:
            self.targets = {target}
        self.remaining = set(self.targets)
        for k, t in enumerate(inputs):
            if t is None:  # input lies outside the ancestral universe
                continue
            for inst in (_instantiations(t) if self.fullcs else [t]):
                if inst not in self.known:
                    self.sources[inst] = k
                    self._add(inst, Justification("input"))

    # bookkeeping

    def _add(self, t: Term, j: Justification):
        self.known[t] = j
        self.order[t] = len(self.order)
        self.by_cond.setdefault((t.cg, t.ca, t.cv), []).append(t)
        heapq.heappush(self.frontier, (-self.score(t, self.target), self.order[t], t))
        self.stats.identified += 1
        self.stats.firings[j.rule] += 1
        self.remaining.discard(t)

    def _offer(self, t: Term, j: Justification) -> bool:
        """Commit a candidate unless known; True once every target is identified."""
        self.stats.candidates += 1
        if t in self.known:
            return False
        self._add(t, j)
        return not self.remaining

    def _offer_r1(self, t: Term, new: Term, base: Term, z: int, rule: str) -> bool:
        self.stats.candidates += 1
        if new in self.known or not admissible(self.g, new):
            return False
        q = rule1_query(self.g, base, z)
        if not self.sep.holds(*q):
            return False
        self._add(new, Justification(rule, (t,), CsiQuery.from_masks(*q), (z,)))
        return not self.remaining

    # main loop

    def run(self) -> str:
        start = time.perf_counter()
        timeout = self.limits.timeout if self.limits.timeout is not None else default_timeout()
        deadline = start + timeout if timeout and timeout > 0 else None
        try:
            if not self.remaining:
                return "identified"
            while self.frontier:
                if self.limits.max_expansions is not None and \
                        self.stats.expansions >= self.limits.max_expansions:
                    return "limit"
                if deadline is not None and time.perf_counter() > deadline:
                    return "limit"
                _, _, t = heapq.heappop(self.frontier)
                self.stats.expansions += 1
                if self._expand(t):
                    return "identified"
            return "na"
        finally:
            self.stats.csi_checks = self.sep.checks
            self.stats.dsep_calls = self.sep.dsep_calls
            self.stats.wall_ms = (time.perf_counter() - start) * 1000.0

    def _expand(self, t: Term) -> bool:
        for gen in (self._rule1, self._rule2, self._rule3, self._rule4, self._rule5,
                    self._rule678):
            if gen(t):
                return True
        return False

    def _rule1(self, t: Term) -> bool:
        g = self.g
        free = self.obs & ~t.variables
        options = []  # (zg, za, zv) single-variable insertions
        for v in bits(free):
            b = 1 << v
            if not self.fullcs:
                options.append((b, 0, 0))
            if self.fullcs or self.assignable & b:
                options.append((0, b, 0))
                options.append((0, b, b))
        for i in bits(self.imask & ~t.ca):
            if not (t.joint >> g.variables[i].intervenes) & 1:
                options.append((0, 1 << i, 1 << i))
        for size in range(1, self.r1_size + 1):
            for combo in itertools.combinations(options, size):
                zg = za = zv = 0
                for a, b, c in combo:
                    zg, za, zv = zg | a, za | b, zv | c
                if _popcount(zg | za) != size:
                    continue
                new = Term(t.jg, t.ja, t.jv, t.cg | zg, t.ca | za, t.cv | zv)
                if self._offer_r1(t, new, t, zg | za, "R1ins"):
                    return True
        # deletion of single conditioning variables
        for v in bits(t.cond):
            b = 1 << v
            new = Term(t.jg, t.ja, t.jv, t.cg & ~b, t.ca & ~b, t.cv & ~b)
            if self._offer_r1(t, new, new, b, "R1del"):
                return True
        return False

    def _rule2(self, t: Term) -> bool:
        for v in bits(t.jg):
            b = 1 << v
            if t.joint & ~b:
                if self._offer(t._replace(jg=t.jg & ~b), Justification("R2", (t,), None, (b,))):
                    return True
        if self.fullcs:
            # P(y, Z=0 | x) + P(y, Z=1 | x) gives P(y | x)
            for v in bits(t.ja):
                b = 1 << v
                if not t.joint & ~b:
                    continue
                sib = t._replace(jv=t.jv ^ b)
                if sib in self.known:
                    new = Term(t.jg, t.ja & ~b, t.jv & ~b, t.cg, t.ca, t.cv)
                    pair = (t, sib) if not t.jv & b else (sib, t)
                    if self._offer(new, Justification("R2", pair, None, (b,))):
                        return True
        return False

    def _rule3(self, t: Term) -> bool:
        # t as the joint term: move a subset of the joint to the conditioning part
        joint = [v for v in bits(t.joint) if not (self.imask >> v) & 1]
        for size in range(1, self.r3_size + 1):
            for combo in itertools.combinations(joint, size):
                z = to_mask(combo)
                if z == t.joint:
                    continue
                new = Term(t.jg & ~z, t.ja & ~z, t.jv & ~z, t.cg | (t.jg & z),
                           t.ca | (t.ja & z), t.cv | (t.jv & z))
                if new in self.known:
                    self.stats.candidates += 1
                    continue
                if new.jg and not (t.ja & ~z):
                    if self._offer(new, Justification("R3", (t,), None, (z,))):
                        return True
                    continue
                den = Term(t.jg & z, t.ja & z, t.jv & z, t.cg, t.ca, t.cv)
                if den in self.known:
                    if self._offer(new, Justification("R3", (t, den), None, (z,))):
                        return True
        # t as the denominator of an identified joint term
        for num in list(self.by_cond.get((t.cg, t.ca, t.cv), ())):
            if num == t or t.joint & ~num.joint or (num.jg & t.joint) != t.jg \
                    or (num.ja & t.joint) != t.ja or (num.jv ^ t.jv) & t.ja:
                continue
            if _popcount(t.joint) > self.r3_size:
                continue
            z = t.joint
            new = Term(num.jg & ~z, num.ja & ~z, num.jv & ~z, num.cg | t.jg,
                       num.ca | t.ja, num.cv | t.jv)
            if self._offer(new, Justification("R3", (num, t), None, (z,))):
                return True
        return False

    def _rule4(self, t: Term) -> bool:
        # t as P(Y | Z, X): look up P(Z | X)
        cond = [v for v in bits(t.cond) if not (self.imask >> v) & 1]
        for size in range(1, len(cond) + 1):
            for combo in itertools.combinations(cond, size):
                s = to_mask(combo)
                t2 = Term(t.cg & s, t.ca & s, t.cv & s, t.cg & ~s, t.ca & ~s, t.cv & ~s)
                if t2 in self.known:
                    new = Term(t.jg | t2.jg, t.ja | t2.ja, t.jv | t2.jv, t2.cg, t2.ca, t2.cv)
                    if admissible(self.g, new) and \
                            self._offer(new, Justification("R4", (t, t2), None, ())):
                        return True
        # t as P(Z | X): look up P(Y | Z, X)
        sig = (t.cg | t.jg, t.ca | t.ja, t.cv | t.jv)
        for t1 in list(self.by_cond.get(sig, ())):
            new = Term(t1.jg | t.jg, t1.ja | t.ja, t1.jv | t.jv, t.cg, t.ca, t.cv)
            if admissible(self.g, new) and \
                    self._offer(new, Justification("R4", (t1, t), None, ())):
                return True
        return False

    def _rule5(self, t: Term) -> bool:
        # t as the case term
        for v in bits(t.ja):
            b = 1 << v
            flipped = t._replace(jv=t.jv ^ b)
            if t.joint == b:
                if self._offer(flipped, Justification("R5", (t,), None, (b,))):
                    return True
                continue
            general = Term(t.jg, t.ja & ~b, t.jv & ~b, t.cg, t.ca, t.cv)
            if general in self.known:
                if self._offer(flipped, Justification("R5", (general, t), None, (b,))):
                    return True
        # t as the general term
        for v in bits(self.obs & ~t.variables):
            b = 1 << v
            for x in (0, b):
                case = Term(t.jg, t.ja | b, t.jv | x, t.cg, t.ca, t.cv)
                if case in self.known:
                    flipped = case._replace(jv=case.jv ^ b)
                    if self._offer(flipped, Justification("R5", (t, case), None, (b,))):
                        return True
        return False

    def _rule678(self, t: Term) -> bool:
        if self.fullcs:
            return False
        for v in bits(t.ja):
            b = 1 << v
            sib = t._replace(jv=t.jv ^ b)
            if sib in self.known:
                t0, t1 = (t, sib) if not t.jv & b else (sib, t)
                new = Term(t.jg | b, t.ja & ~b, t.jv & ~b, t.cg, t.ca, t.cv)
                if self._offer(new, Justification("R6", (t0, t1), None, (b,))):
                    return True
        for v in bits(t.jg & self.assignable):
            b = 1 << v
            for x in (0, 1):
                new = Term(t.jg & ~b, t.ja | b, t.jv | (b if x else 0), t.cg, t.ca, t.cv)
                if self._offer(new, Justification("R7", (t,), None, (b, x))):
                    return True
        for v in bits(t.cg & self.assignable):
            b = 1 << v
            for x in (0, 1):
                new = Term(t.jg, t.ja, t.jv, t.cg & ~b, t.ca | b, t.cv | (b if x else 0))
                if self._offer(new, Justification("R8", (t,), None, (b, x))):
                    return True
        return False

    # results

    def derivation(self, goals: Sequence[Term]) -> list:
        """Terms needed for ``goals`` with their justifications, in identification order."""
        need = set()
        stack = list(goals)
        while stack:
            t = stack.pop()
            if t in need:
                continue
            need.add(t)
            stack.extend(self.known[t].parents)
        return [(t, self.known[t]) for t in sorted(need, key=self.order.__getitem__)]

    def formula_for(self, goals: Sequence[Term]) -> dict:
        built: dict[Term, F.Formula] = {}
        for t, j in self.derivation(goals):
            built[t] = _step_formula(t, j, built, self.sources)
        return built


def _instantiations(t: Term):
    gen = list(bits(t.jg | t.cg))
    for combo in itertools.product((0, 1), repeat=len(gen)):
        jv, cv = t.jv, t.cv
        for v, x in zip(gen, combo):
            if x:
                if (t.jg >> v) & 1:
                    jv |= 1 << v
                else:
                    cv |= 1 << v
        yield Term(0, t.ja | t.jg, jv, 0, t.ca | t.cg, cv)


def _step_formula(t: Term, j: Justification, built: dict, sources: dict) -> F.Formula:
    rule, ps = j.rule, j.parents
    if rule == "input":
        return F.Leaf(t, sources[t])
    f = [built[p] for p in ps]
    if rule == "R1ins":
        return f[0]
    if rule == "R1del":
        z = ps[0].cg & ~t.cg
        out = f[0]
        for v in bits(z):
            out = F.Substitute(v, 0, out)
        return out
    if rule == "R2":
        if len(ps) == 2:
            return F.Add((f[0], f[1]))
        (z,) = j.detail
        out = f[0]
        for v in bits(z):
            out = F.Sum(v, out)
        return out
    if rule == "R3":
        if len(ps) == 2:
            return F.Quotient(f[0], f[1])
        den = f[0]
        for v in bits(t.jg):
            den = F.Sum(v, den)
        return F.Quotient(f[0], den)
    if rule == "R4":
        return F.Product((f[0], f[1]))
    if rule == "R5":
        if len(ps) == 1:
            return F.Difference(F.One(), f[0])
        return F.Difference(f[0], f[1])
    if rule == "R6":
        (b,) = j.detail
        return F.Piecewise(b.bit_length() - 1, f[0], f[1])
    if rule in ("R7", "R8"):
        b, x = j.detail
        return F.Substitute(b.bit_length() - 1, x, f[0])
    raise ValueError(f"unknown rule {rule!r}")


def _assemble(target: Term, built: dict) -> F.Formula:
    """Piecewise formula for a general target from its instantiations."""
    gen = list(bits(target.jg | target.cg))

    def rec(k, t):
        if k == len(gen):
            return built[t]
        v = gen[k]
        b = 1 << v
        if (t.jg >> v) & 1:
            t0 = Term(t.jg & ~b, t.ja | b, t.jv, t.cg, t.ca, t.cv)
        else:
            t0 = Term(t.jg, t.ja, t.jv, t.cg & ~b, t.ca | b, t.cv)
        t1 = t0._replace(jv=t0.jv | b) if (t.jg >> v) & 1 else t0._replace(cv=t0.cv | b)
        return F.Piecewise(v, rec(k + 1, t0), rec(k + 1, t1))

    return rec(0, target)


def default_inputs(g: LDAG) -> list[Term]:
    return [Term(jg=g.observed_mask & ~g.intervention_mask)]


def _restrict_input(t: Term, universe: int) -> Term | None:
    if t.cond & ~universe:
        return None
    r = Term(t.jg & universe, t.ja & universe, t.jv & universe, t.cg, t.ca, t.cv)
    return r if r.joint else None


def identify(g: LDAG, query: QuerySpec | str, inputs: Sequence[Term | str] | None = None, *,
             limits: Limits | None = None, mode: str = "combined", strip: bool = False,
             trace: Callable[[str], None] | None = None, max_depth: int = 2,
             max_cond_size: int = 2, r1_size: int = 1, r3_size: int = 2,
             score: Callable[[Term, Term], int] = proximity) -> IdentifyResult:
    """Search for a formula for ``query`` in terms of the input distributions.

    ``inputs`` defaults to the joint over all observed variables.  Input
    terms are read relative to ``g``; leaves of the returned formula refer to
    them by position.
    """
    if isinstance(query, str):
        query = parse_query(query, g)
    else:
        query.validate(g)
    if inputs is None:
        inputs = default_inputs(g)
    inputs = [parse_term(t, g) if isinstance(t, str) else t for t in inputs]
    for t in inputs:
        if t.variables & ~g.observed_mask:
            raise TermError(f"input {format_term(t, g)} mentions a latent variable")
    wg, universe = prepare_graph(g, query, strip=strip)
    target = query_term(wg, query)
    restricted = [_restrict_input(t, universe) for t in inputs]
    sep = Separator(wg, max_depth=max_depth, max_cond_size=max_cond_size, trace=trace)
    s = Search(wg, restricted, target, mode=mode, universe=universe, separator=sep, score=score,
               r1_size=r1_size, r3_size=r3_size, limits=limits)
    status = s.run()
    res = IdentifyResult(status, query, wg, target, s.stats, inputs=tuple(inputs), mode=mode)
    if status == "identified":
        goals = sorted(s.targets, key=s.order.__getitem__)
        built = s.formula_for(goals)
        raw = built[target] if not s.fullcs else _assemble(target, built)
        res.raw_formula = raw
        res.formula = F.simplify(raw)
        res.derivation = s.derivation(goals)
        res.sources = {t: k for t, k in s.sources.items() if t in built}
    return res
