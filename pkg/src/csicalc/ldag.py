"""Labeled DAGs over binary variables.

Labels mark context-specific independences on edges: an entry on ``X -> Y``
is a (possibly wildcarded) assignment to the other parents of ``Y`` under
which ``Y`` does not depend on ``X``.

Internally sets of variables are bitmasks over variable ids and contexts are
``(mask, values)`` pairs, where ``values`` only carries bits inside ``mask``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Mapping

INTERVENTION_PREFIX = "I_"
WILDCARD = None


class LDAGError(ValueError):
    """Raised for malformed or invalid labeled DAGs."""


class DSLSyntaxError(LDAGError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    observed: bool = True
    intervenes: int | None = None  # base variable id for intervention nodes

    @property
    def is_intervention(self) -> bool:
        return self.intervenes is not None


def bits(mask: int):
    """Yield the indices of set bits in ascending order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def to_mask(ids: Iterable[int]) -> int:
    m = 0
    for i in ids:
        m |= 1 << i
    return m


def context_bits(context: Mapping[int, int]) -> tuple[int, int]:
    mask = vals = 0
    for v, x in context.items():
        if x not in (0, 1):
            raise LDAGError(f"context value for variable {v} must be 0 or 1, got {x!r}")
        mask |= 1 << v
        if x:
            vals |= 1 << v
    return mask, vals


def context_dict(mask: int, vals: int) -> dict[int, int]:
    return {v: (vals >> v) & 1 for v in bits(mask)}


def _covers(patterns, free: int) -> bool:
    """True iff the union of wildcard patterns covers every assignment of ``free``.

    ``patterns`` are ``(fixed_mask, fixed_vals)`` restricted to ``free``.
    Splits on one fixed variable at a time instead of expanding all rows.
    """
    if not patterns:
        return False
    union = 0
    for fm, _ in patterns:
        if fm == 0:
            return True
        union |= fm
    bit = union & -union
    zero = [(fm & ~bit, fv & ~bit) for fm, fv in patterns if not (fm & bit and fv & bit)]
    if not _covers(zero, free & ~bit):
        return False
    one = [(fm & ~bit, fv & ~bit) for fm, fv in patterns if not (fm & bit) or fv & bit]
    return _covers(one, free & ~bit)


class LDAG:
    """An immutable labeled DAG.

    ``labels`` maps an edge ``(x, y)`` to a frozenset of entries; an entry is a
    tuple of ``(variable id, value)`` pairs sorted by id, covering exactly
    ``pa(y) - {x}``, with value ``None`` standing for the wildcard.
    """

    def __init__(self, variables, edges, labels=None, *, check_regular=True):
        self.variables: tuple[Variable, ...] = tuple(variables)
        for i, v in enumerate(self.variables):
            if v.id != i:
                raise LDAGError(f"variable ids must be contiguous, got {v.id} at position {i}")
            if not v.name:
                raise LDAGError("variable names must be nonempty")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise LDAGError("variable names must be unique")
        self.n = len(self.variables)
        self.edges: frozenset[tuple[int, int]] = frozenset(edges)
        for x, y in self.edges:
            if not (0 <= x < self.n and 0 <= y < self.n) or x == y:
                raise LDAGError(f"invalid edge {x}->{y}")
        self.labels: dict[tuple[int, int], frozenset] = {
            e: frozenset(ls) for e, ls in (labels or {}).items() if ls
        }
        for e in self.labels:
            if e not in self.edges:
                raise LDAGError(f"label on missing edge {self._edge_str(e)}")

        self.parents = [0] * self.n
        for x, y in self.edges:
            self.parents[y] |= 1 << x
        self.order = self._topological_order()
        self.index = {v.name: v.id for v in self.variables}
        self.observed_mask = to_mask(v.id for v in self.variables if v.observed)
        self.intervention_mask = to_mask(v.id for v in self.variables if v.is_intervention)
        self.intervention_of = {v.intervenes: v.id for v in self.variables if v.is_intervention}

        # compiled labels: edge -> (label var mask, [(fixed mask, fixed vals)])
        self._compiled = {}
        label_vars = 0
        for (x, y), entries in self.labels.items():
            others = self.parents[y] & ~(1 << x)
            pats = []
            for entry in entries:
                vs = to_mask(v for v, _ in entry)
                if vs != others:
                    raise LDAGError(
                        f"label entry {self._entry_str(entry)} on {self._edge_str((x, y))} "
                        f"must mention exactly the other parents of {self.variables[y].name}"
                    )
                fm = fv = 0
                for v, val in entry:
                    if val is not None:
                        fm |= 1 << v
                        if val:
                            fv |= 1 << v
                pats.append((fm, fv))
            self._compiled[(x, y)] = (others, pats)
            label_vars |= others
        self.label_var_mask = label_vars
        # variables whose assignment can change some context-specific DAG
        self.relevant_context_mask = label_vars | self.intervention_mask
        self._cs_cache: dict[tuple[int, int], tuple[tuple[int, ...], tuple[int, ...]]] = {}

        if check_regular:
            for e in self._compiled:
                if self.spurious(e, 0, 0):
                    raise LDAGError(
                        f"edge {self._edge_str(e)} is absent in every context (regularity violation)"
                    )

    # -- basic accessors -------------------------------------------------

    def __eq__(self, other):
        return (
            isinstance(other, LDAG)
            and self.variables == other.variables
            and self.edges == other.edges
            and self.labels == other.labels
        )

    def __hash__(self):
        return hash((self.variables, self.edges, frozenset(self.labels.items())))

    def __repr__(self):
        return f"LDAG(n={self.n}, edges={len(self.edges)}, labeled={len(self.labels)})"

    def var(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise LDAGError(f"unknown variable {name!r}") from None

    def name(self, v: int) -> str:
        return self.variables[v].name

    def names(self, mask: int) -> list[str]:
        return [self.variables[v].name for v in bits(mask)]

    def parents_of(self, v: int) -> frozenset[int]:
        return frozenset(bits(self.parents[v]))

    def _edge_str(self, e):
        return f"{self.variables[e[0]].name}->{self.variables[e[1]].name}"

    def _entry_str(self, entry):
        return ", ".join(f"{self.variables[v].name}={'*' if x is None else x}" for v, x in entry)

    def _topological_order(self):
        indeg = [bin(self.parents[v]).count("1") for v in range(self.n)]
        children = [[] for _ in range(self.n)]
        for x, y in sorted(self.edges):
            children[x].append(y)
        ready = [v for v in range(self.n) if indeg[v] == 0]
        order = []
        while ready:
            v = ready.pop(0)
            order.append(v)
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != self.n:
            cyc = [self.variables[v].name for v in range(self.n) if indeg[v] > 0]
            raise LDAGError(f"cycle detected among {', '.join(cyc)}")
        return tuple(order)

    def ancestors(self, mask: int) -> int:
        """Ancestors of ``mask`` in the underlying DAG, including ``mask`` itself."""
        result = mask
        frontier = mask
        while frontier:
            nxt = 0
            for v in bits(frontier):
                nxt |= self.parents[v]
            frontier = nxt & ~result
            result |= nxt
        return result

    # -- context-specific structure ----------------------------------------

    def spurious(self, edge: tuple[int, int], ctx_mask: int, ctx_vals: int) -> bool:
        x, y = edge
        iy = self.intervention_of.get(y)
        if iy is not None and x != iy and (ctx_mask >> iy) & 1 and (ctx_vals >> iy) & 1:
            return True  # I_Y = 1 severs every other incoming edge of Y
        compiled = self._compiled.get(edge)
        if compiled is None:
            return False
        others, pats = compiled
        assigned = others & ctx_mask
        free = others & ~ctx_mask
        live = [
            (fm & free, fv & free)
            for fm, fv in pats
            if not ((fv ^ ctx_vals) & fm & assigned)
        ]
        return _covers(live, free)

    def context_parents(self, ctx_mask: int = 0, ctx_vals: int = 0) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Parent and child masks of the context-specific DAG (cached)."""
        m = ctx_mask & self.relevant_context_mask
        key = (m, ctx_vals & m)
        hit = self._cs_cache.get(key)
        if hit is not None:
            return hit
        parents = list(self.parents)
        for x, y in self.edges:
            if (x, y) in self._compiled or y in self.intervention_of:
                if self.spurious((x, y), key[0], key[1]):
                    parents[y] &= ~(1 << x)
        children = [0] * self.n
        for y in range(self.n):
            for x in bits(parents[y]):
                children[x] |= 1 << y
        hit = (tuple(parents), tuple(children))
        self._cs_cache[key] = hit
        return hit

    def underlying(self) -> "LDAG":
        return LDAG(self.variables, self.edges, check_regular=False)


# -- DSL -------------------------------------------------------------------

_NAME = r"[A-Za-z_][A-Za-z0-9_']*"
_DECL = re.compile(rf"^\s*(node|latent|intervention)\s+({_NAME})\s*$")
_EDGE = re.compile(rf"^\s*({_NAME})\s*->\s*({_NAME})\s*(?:\[(.*)\])?\s*$")
_ASSIGN = re.compile(rf"^\s*({_NAME})\s*=\s*([01*])\s*$")


def parse_ldag(text: str, *, check_regular: bool = True) -> LDAG:
    """Parse the line-oriented LDAG DSL.

    Statements: ``node X``, ``latent L``, ``intervention I_X`` (for a declared
    ``X``), ``X -> Y`` and ``X -> Y [A=1, L=*; A=0, L=0]``.
    """
    variables: list[Variable] = []
    index: dict[str, int] = {}
    edges: list[tuple[int, int]] = []
    raw_labels: dict[tuple[int, int], list] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        m = _DECL.match(line)
        if m:
            kind, name = m.groups()
            if name in index:
                raise DSLSyntaxError(f"duplicate variable {name!r}", lineno, line.index(name) + 1)
            if kind == "intervention":
                if not name.startswith(INTERVENTION_PREFIX):
                    raise DSLSyntaxError(
                        f"intervention node must be named {INTERVENTION_PREFIX}<base>", lineno, col
                    )
                base = name[len(INTERVENTION_PREFIX):]
                if base not in index:
                    raise DSLSyntaxError(f"unknown base variable {base!r}", lineno, line.index(name) + 1)
                variables.append(Variable(len(variables), name, True, index[base]))
            else:
                if name.startswith(INTERVENTION_PREFIX):
                    raise DSLSyntaxError(
                        f"names starting with {INTERVENTION_PREFIX!r} are reserved", lineno, line.index(name) + 1
                    )
                variables.append(Variable(len(variables), name, kind == "node"))
            index[name] = len(variables) - 1
            continue
        m = _EDGE.match(line)
        if not m:
            raise DSLSyntaxError(f"cannot parse statement {line.strip()!r}", lineno, col)
        a, b, label = m.groups()
        for nm in (a, b):
            if nm not in index:
                raise DSLSyntaxError(f"unknown variable {nm!r}", lineno, line.index(nm) + 1)
        e = (index[a], index[b])
        if e in raw_labels or e in edges:
            raise DSLSyntaxError(f"duplicate edge {a}->{b}", lineno, col)
        edges.append(e)
        if label is not None:
            lab_col = line.index("[") + 2
            entries = []
            for chunk in label.split(";"):
                if not chunk.strip():
                    continue
                entry = {}
                for item in chunk.split(","):
                    am = _ASSIGN.match(item)
                    if not am:
                        raise DSLSyntaxError(f"bad label assignment {item.strip()!r}", lineno, lab_col)
                    nm, val = am.groups()
                    if nm not in index:
                        raise DSLSyntaxError(f"unknown variable {nm!r} in label", lineno, lab_col)
                    v = index[nm]
                    if v in entry:
                        raise DSLSyntaxError(f"variable {nm!r} repeated in label entry", lineno, lab_col)
                    entry[v] = None if val == "*" else int(val)
                entries.append(tuple(sorted(entry.items())))
            raw_labels[e] = (entries, lineno, lab_col)

    parents: dict[int, set[int]] = {}
    for x, y in edges:
        parents.setdefault(y, set()).add(x)
    labels = {}
    for (x, y), (entries, lineno, col) in raw_labels.items():
        others = parents[y] - {x}
        for entry in entries:
            got = {v for v, _ in entry}
            if got != others:
                bad = sorted(got - others)
                if bad:
                    msg = f"label mentions non-parent {variables[bad[0]].name!r} of {variables[y].name!r}"
                else:
                    missing = ", ".join(variables[v].name for v in sorted(others - got))
                    msg = f"label entry on {variables[x].name}->{variables[y].name} misses parents {missing}"
                raise DSLSyntaxError(msg, lineno, col)
        labels[(x, y)] = frozenset(entries)
    return LDAG(variables, edges, labels, check_regular=check_regular)


def render_ldag(g: LDAG) -> str:
    """Deterministic DSL text for ``g``; ``parse_ldag`` inverts it."""
    lines = []
    for v in g.variables:
        if v.is_intervention:
            lines.append(f"intervention {v.name}")
        else:
            lines.append(f"{'node' if v.observed else 'latent'} {v.name}")
    for x, y in sorted(g.edges):
        s = f"{g.name(x)} -> {g.name(y)}"
        entries = g.labels.get((x, y))
        if entries:
            s += " [" + "; ".join(g._entry_str(e) for e in sorted(entries, key=_entry_key)) + "]"
        lines.append(s)
    return "\n".join(lines) + "\n"


def _entry_key(entry):
    return tuple((v, 2 if x is None else x) for v, x in entry)


# -- operations --------------------------------------------------------------

def context_specific_dag(g: LDAG, context: Mapping[int, int] | None = None) -> frozenset[tuple[int, int]]:
    """Edges of ``g`` that are not spurious in ``context``."""
    mask, vals = context_bits(context or {})
    if mask & ~((1 << g.n) - 1):
        raise LDAGError("context assigns variables outside the graph")
    parents, _ = g.context_parents(mask, vals)
    return frozenset((x, y) for y in range(g.n) for x in bits(parents[y]))


def augment_with_interventions(g: LDAG, targets: Iterable[int]) -> LDAG:
    """Add an intervention node ``I_X`` with edge ``I_X -> X`` for each target.

    Every label on an incoming edge ``Z -> X`` is rewritten so that the edge is
    also spurious whenever ``I_X = 1``.
    """
    targets = sorted(set(targets))
    if not targets:
        return g
    variables = list(g.variables)
    edges = set(g.edges)
    labels = dict(g.labels)
    for t in targets:
        if not 0 <= t < g.n:
            raise LDAGError(f"intervention target {t} not in graph")
        if g.variables[t].is_intervention:
            raise LDAGError(f"{g.name(t)} is already an intervention node")
        if t in g.intervention_of:
            raise LDAGError(f"{g.name(t)} already has an intervention node")
        iv = Variable(len(variables), INTERVENTION_PREFIX + g.name(t), True, t)
        variables.append(iv)
        for z in sorted(bits(g.parents[t])):
            others = sorted(bits(g.parents[t] & ~(1 << z)))
            new = {tuple(sorted(entry + ((iv.id, None),))) for entry in g.labels.get((z, t), ())}
            new.add(tuple(sorted([(o, None) for o in others] + [(iv.id, 1)])))
            labels[(z, t)] = frozenset(new)
        edges.add((iv.id, t))
    return LDAG(variables, edges, labels, check_regular=False)


def strip_labels(g: LDAG) -> LDAG:
    """Drop every label, keeping intervention-node labels intact."""
    labels = {}
    for t, iv in g.intervention_of.items():
        for z in bits(g.parents[t] & ~(1 << iv)):
            others = sorted(bits(g.parents[t] & ~(1 << z) & ~(1 << iv)))
            labels[(z, t)] = frozenset([tuple(sorted([(o, None) for o in others] + [(iv, 1)]))])
    return LDAG(g.variables, g.edges, labels, check_regular=False)


def _row_classes(g: LDAG, y: int):
    """Union-find over assignments to pa(y), uniting rows equated by labels.

    Returns (parent list, find function).  Rows are integers whose bit ``i``
    is the value of the ``i``-th parent of ``y`` in id order.
    """
    pas = list(bits(g.parents[y]))
    pos = {p: i for i, p in enumerate(pas)}
    parent = list(range(1 << len(pas)))

    def find(r):
        while parent[r] != r:
            parent[r] = parent[parent[r]]
            r = parent[r]
        return r

    for x in pas:
        for entry in g.labels.get((x, y), ()):
            fixed = [(pos[v], val) for v, val in entry if val is not None]
            wild = [pos[v] for v, val in entry if val is None]
            base = 0
            for p, val in fixed:
                if val:
                    base |= 1 << p
            for combo in itertools.product((0, 1), repeat=len(wild)):
                row = base
                for p, val in zip(wild, combo):
                    if val:
                        row |= 1 << p
                a, b = find(row & ~(1 << pos[x])), find(row | (1 << pos[x]))
                if a != b:
                    parent[a] = b
    return pas, find


def row_classes(g: LDAG, y: int) -> list[int]:
    """Class representative for every row of y's CPT."""
    pas, find = _row_classes(g, y)
    return [find(r) for r in range(1 << len(pas))]


def label_closure(g: LDAG) -> LDAG:
    """Extend labels with every entry implied by the declared ones."""
    labels = {e: set(ls) for e, ls in g.labels.items()}
    for y in range(g.n):
        pas, find = _row_classes(g, y)
        for i, x in enumerate(pas):
            others = [p for p in pas if p != x]
            existing = g._compiled.get((x, y), (0, []))[1]
            for combo in itertools.product((0, 1), repeat=len(others)):
                row = 0
                fm = fv = 0
                for p, val in zip(others, combo):
                    fm |= 1 << p
                    if val:
                        row |= 1 << pas.index(p)
                        fv |= 1 << p
                if find(row) != find(row | (1 << i)):
                    continue
                if any(not ((fv ^ pv) & pm) for pm, pv in existing):
                    continue  # already covered by a declared pattern
                labels.setdefault((x, y), set()).add(tuple(zip(others, combo)))
    return LDAG(g.variables, g.edges, labels, check_regular=False)


def is_regular(g: LDAG) -> bool:
    return not any(g.spurious(e, 0, 0) for e in g._compiled)
