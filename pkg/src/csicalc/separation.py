"""Deciding context-specific independence statements implied by an LDAG.

The decision procedure is sound but incomplete: ``True`` means the statement
was shown to be implied, ``False`` only means it was not shown.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .ldag import LDAG, bits, context_bits, context_dict, to_mask


@dataclass(frozen=True)
class CsiQuery:
    """The statement ``y_set _||_ z_set | cond_set, context``."""

    y_set: frozenset
    z_set: frozenset
    cond_set: frozenset = frozenset()
    context: tuple = ()  # sorted (variable, value) pairs

    @classmethod
    def make(cls, y, z, cond=(), context: Mapping[int, int] | None = None) -> "CsiQuery":
        q = cls(frozenset(y), frozenset(z), frozenset(cond), tuple(sorted((context or {}).items())))
        q.validate()
        return q

    @classmethod
    def from_masks(cls, y, z, cond, cm, cv) -> "CsiQuery":
        return cls(frozenset(bits(y)), frozenset(bits(z)), frozenset(bits(cond)),
                   tuple(sorted(context_dict(cm, cv).items())))

    def validate(self):
        if not self.y_set or not self.z_set:
            raise ValueError("both sides of a CSI statement must be nonempty")
        parts = [self.y_set, self.z_set, self.cond_set, {v for v, _ in self.context}]
        for a, b in itertools.combinations(parts, 2):
            if set(a) & set(b):
                raise ValueError("CSI statement parts must be disjoint")

    def masks(self) -> tuple[int, int, int, int, int]:
        cm, cv = context_bits(dict(self.context))
        return to_mask(self.y_set), to_mask(self.z_set), to_mask(self.cond_set), cm, cv

    def swapped(self) -> "CsiQuery":
        return CsiQuery(self.z_set, self.y_set, self.cond_set, self.context)

    def format(self, g: LDAG) -> str:
        def names(vs):
            return ",".join(g.name(v) for v in sorted(vs))

        rhs = [names(self.cond_set)] if self.cond_set else []
        rhs += [f"{g.name(v)}={x}" for v, x in self.context]
        s = f"{names(self.y_set)} ⫫ {names(self.z_set)}"
        return s + (" | " + ",".join(rhs) if rhs else "")


def _dsep(parents, children, y: int, z: int, cond: int) -> bool:
    """Reachability (Bayes-ball) d-separation test on bitmask adjacency."""
    # restrict to the ancestral set of everything involved
    relevant = y | z | cond
    frontier = relevant
    while frontier:
        nxt = 0
        for v in bits(frontier):
            nxt |= parents[v]
        frontier = nxt & ~relevant
        relevant |= nxt
    anc_cond = cond
    frontier = cond
    while frontier:
        nxt = 0
        for v in bits(frontier):
            nxt |= parents[v]
        frontier = nxt & ~anc_cond
        anc_cond |= nxt

    up_seen = down_seen = 0
    up = y  # arrived from a child (or start)
    down = 0  # arrived from a parent
    while up or down:
        up &= ~up_seen
        down &= ~down_seen
        up_seen |= up
        down_seen |= down
        if (up | down) & z & ~cond:
            return False
        nup = ndown = 0
        for v in bits(up & ~cond):
            nup |= parents[v]
            ndown |= children[v] & relevant
        for v in bits(down):
            if not (cond >> v) & 1:
                ndown |= children[v] & relevant
            if (anc_cond >> v) & 1:
                nup |= parents[v]
        up, down = nup, ndown
    return True


def d_separated(dag_edges: Iterable[tuple[int, int]], y_set, z_set, cond_set=()) -> bool:
    """Standard d-separation of ``y_set`` and ``z_set`` given ``cond_set``."""
    edges = list(dag_edges)
    n = 1 + max([v for e in edges for v in e] + list(y_set) + list(z_set) + list(cond_set) + [0])
    parents = [0] * n
    children = [0] * n
    for a, b in edges:
        parents[b] |= 1 << a
        children[a] |= 1 << b
    y, z, c = to_mask(y_set), to_mask(z_set), to_mask(cond_set)
    if (y & z) or (y & c) or (z & c):
        raise ValueError("d-separation sets must be disjoint")
    return _dsep(parents, children, y, z, c)


class Separator:
    """Cached CSI decision procedure for one LDAG.

    ``max_cond_size`` caps the auxiliary sets searched in the recursive
    criterion, ``max_depth`` caps how deeply that criterion nests.  ``trace``
    receives one line per top-level query when set.
    """

    def __init__(self, g: LDAG, *, max_cond_size: int = 2, max_depth: int = 2,
                 use_cache: bool = True, trace: Callable[[str], None] | None = None):
        self.g = g
        self.max_cond_size = max_cond_size
        self.max_depth = max_depth
        self.use_cache = use_cache
        self.trace = trace
        self.checks = 0
        self.dsep_calls = 0
        self._pos: set = set()
        self._neg: set = set()
        self._sep: dict = {}
        # edges that no context can remove: unlabeled and head has no intervention node
        self._fixed_adj = [0] * g.n
        for x, y in g.edges:
            if (x, y) not in g.labels and y not in g.intervention_of:
                self._fixed_adj[x] |= 1 << y
                self._fixed_adj[y] |= 1 << x

    # -- primitive checks --------------------------------------------------

    def separated(self, y: int, z: int, cond: int, cm: int, cv: int) -> bool:
        """CSI-separation: d-separation in the context-specific DAG."""
        rel = self.g.relevant_context_mask
        if y > z:
            y, z = z, y
        key = (y, z, cond | cm, cm & rel, cv & cm & rel)
        if self.use_cache:
            hit = self._sep.get(key)
            if hit is not None:
                return hit
        parents, children = self.g.context_parents(cm, cv)
        self.dsep_calls += 1
        res = _dsep(parents, children, y, z, cond | cm)
        if self.use_cache:
            self._sep[key] = res
        return res

    def representatives(self, c_mask: int, cm: int, cv: int) -> list[tuple[int, int]]:
        """One context per class of assignments to ``c_mask`` inducing the same DAG."""
        rel = self.g.relevant_context_mask
        if not c_mask & rel:
            return [(c_mask, 0)]
        seen = {}
        cvars = list(bits(c_mask))
        for combo in itertools.product((0, 1), repeat=len(cvars)):
            vals = 0
            for v, x in zip(cvars, combo):
                if x:
                    vals |= 1 << v
            dag = self.g.context_parents(cm | c_mask, cv | vals)
            if dag not in seen:
                seen[dag] = vals
        return [(c_mask, vals) for vals in seen.values()]

    def separated_split(self, y: int, z: int, cond: int, cm: int, cv: int) -> bool:
        """CSI-separation for every value of the label-relevant conditioning variables."""
        split = cond & self.g.relevant_context_mask
        if not split:
            return self.separated(y, z, cond, cm, cv)
        rest = cond & ~split
        for mask, vals in self.representatives(split, cm, cv):
            if not self.separated(y, z, rest, cm | mask, cv | vals):
                return False
        return True

    def label_encoded(self, y: int, z: int, cond: int, cm: int, cv: int) -> bool:
        if y & (y - 1) or z & (z - 1):
            return False
        g = self.g
        a, b = y.bit_length() - 1, z.bit_length() - 1
        for x, w in ((a, b), (b, a)):
            if (x, w) in g.labels and (cond | cm) == g.parents[w] & ~(1 << x):
                if g.spurious((x, w), cm, cv):
                    return True
        return False

    # -- recursive criterion ---------------------------------------------

    def holds(self, y: int, z: int, cond: int = 0, cm: int = 0, cv: int = 0) -> bool:
        self.checks += 1
        res = self._holds(y, z, cond, cm, cv & cm, 0, self.max_depth)
        if self.trace is not None:
            q = CsiQuery.from_masks(y, z, cond, cm, cv)
            self.trace(f"CSI {q.format(self.g)} -> {'implied' if res else 'unknown'}")
        return res

    def _holds(self, y, z, cond, cm, cv, forbidden, depth) -> bool:
        if y > z:
            y, z = z, y
        key = (y, z, cond, cm, cv)
        if self.use_cache:
            if key in self._pos:
                return True
            nkey = (key, forbidden, depth)
            if nkey in self._neg:
                return False
        for v in bits(y):
            if self._fixed_adj[v] & z:
                return False
        if self.label_encoded(y, z, cond, cm, cv) or self.separated_split(y, z, cond, cm, cv):
            if self.use_cache:
                self._pos.add(key)
            return True
        if depth > 0 and self._auxiliary(y, z, cond, cm, cv, forbidden, depth):
            if self.use_cache:
                self._pos.add(key)
            return True
        if self.use_cache:
            self._neg.add(nkey)
        return False

    def _auxiliary(self, y, z, cond, cm, cv, forbidden, depth) -> bool:
        """Search a set C with Y _||_ Z | X,w,C plus one of four side conditions."""
        pool = self.g.label_var_mask & ~(y | z | cond | cm | forbidden)
        cands = list(bits(pool))
        for size in range(1, self.max_cond_size + 1):
            for combo in itertools.combinations(cands, size):
                c = to_mask(combo)
                if not all(self.separated_split(y, z, cond, cm | mask, cv | vals)
                           for mask, vals in self.representatives(c, cm, cv)):
                    continue
                f = forbidden | c
                d = depth - 1
                if (self._holds(y, c, cond, cm, cv, f, d)
                        or self._holds(c, z, cond, cm, cv, f, d)
                        or self._holds(y, c, cond | z, cm, cv, f, d)
                        or self._holds(z, c, cond | y, cm, cv, f, d)):
                    return True
        return False


def csi_separated(g: LDAG, q: CsiQuery) -> bool:
    y, z, cond, cm, cv = q.masks()
    parents, children = g.context_parents(cm, cv)
    return _dsep(parents, children, y, z, cond | cm)


def csi_holds(g: LDAG, q: CsiQuery, *, max_depth: int = 2, max_cond_size: int = 2,
              separator: Separator | None = None) -> bool:
    sep = separator or Separator(g, max_depth=max_depth, max_cond_size=max_cond_size)
    return sep.holds(*q.masks())


def representatives(g: LDAG, c_set, base: Mapping[int, int] | None = None) -> list[dict[int, int]]:
    cm, cv = context_bits(base or {})
    c = to_mask(c_set)
    if c & cm:
        raise ValueError("c_set must be disjoint from the base context")
    return [context_dict(m, v) for m, v in Separator(g).representatives(c, cm, cv)]
