"""Reference identifiability test for label-free graphs (the ID algorithm).

Only the verdict is computed.  Latent variables are projected out into an
ADMG first; the recursion follows the standard seven-line ID procedure.
"""

from __future__ import annotations

from .ldag import LDAG, bits


class ADMG:
    def __init__(self, nodes: int, directed: set, bidirected: set):
        self.nodes = nodes  # mask
        self.parents: dict[int, int] = {v: 0 for v in bits(nodes)}
        for a, b in directed:
            self.parents[b] |= 1 << a
        self.siblings: dict[int, int] = {v: 0 for v in bits(nodes)}
        for a, b in bidirected:
            self.siblings[a] |= 1 << b
            self.siblings[b] |= 1 << a

    def sub(self, keep: int) -> "ADMG":
        g = ADMG.__new__(ADMG)
        g.nodes = keep
        g.parents = {v: self.parents[v] & keep for v in bits(keep)}
        g.siblings = {v: self.siblings[v] & keep for v in bits(keep)}
        return g

    def ancestors(self, mask: int, cut_incoming: int = 0) -> int:
        """Ancestors of ``mask`` (inclusive); edges into ``cut_incoming`` are ignored."""
        out = frontier = mask & self.nodes
        while frontier:
            nxt = 0
            for v in bits(frontier):
                if not (cut_incoming >> v) & 1:
                    nxt |= self.parents[v]
            frontier = nxt & ~out
            out |= nxt
        return out

    def districts(self) -> list[int]:
        seen, out = 0, []
        for v in bits(self.nodes):
            if (seen >> v) & 1:
                continue
            comp = frontier = 1 << v
            while frontier:
                nxt = 0
                for u in bits(frontier):
                    nxt |= self.siblings[u]
                frontier = nxt & ~comp
                comp |= nxt
            seen |= comp
            out.append(comp)
        return out


def latent_projection(g: LDAG) -> ADMG:
    obs = g.observed_mask & ~g.intervention_mask
    children = [0] * g.n
    for a, b in g.edges:
        children[a] |= 1 << b

    def reach(v):
        """Observed nodes reachable from v through latent-only directed paths."""
        out, seen, stack = 0, 0, [v]
        while stack:
            u = stack.pop()
            for w in bits(children[u]):
                if (obs >> w) & 1:
                    out |= 1 << w
                elif not (seen >> w) & 1:
                    seen |= 1 << w
                    stack.append(w)
        return out

    directed, bidirected = set(), set()
    for v in bits(obs):
        for w in bits(reach(v)):
            directed.add((v, w))
    for lat in range(g.n):
        if (obs >> lat) & 1 or g.variables[lat].is_intervention:
            continue
        r = list(bits(reach(lat)))
        for i, a in enumerate(r):
            for b in r[i + 1:]:
                bidirected.add((a, b))
    return ADMG(obs, directed, bidirected)


def identifiable(g: LDAG, y: int, x: int) -> bool:
    """True when P(y | do(x)) is identifiable in the label-free graph ``g``."""
    return _id(latent_projection(g), y, x)


def _id(g: ADMG, y: int, x: int) -> bool:
    v = g.nodes
    if not x:
        return True
    an = g.ancestors(y)
    if v & ~an:
        return _id(g.sub(an), y, x & an)
    w = (v & ~x) & ~g.ancestors(y, cut_incoming=x)
    if w:
        return _id(g, y, x | w)
    rest = g.sub(v & ~x)
    parts = rest.districts()
    if len(parts) > 1:
        return all(_id(g, s, v & ~s) for s in parts)
    (s,) = parts
    whole = g.districts()
    if whole == [v]:
        return False
    if s in whole:
        return True
    for sp in whole:
        if s & ~sp == 0:
            return _id(g.sub(sp), y, x & sp)
    raise AssertionError("district of G minus X not contained in a district of G")
