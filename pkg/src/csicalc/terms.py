"""Terms P(Y1, y2 | X1, x2) and the eight rewrite rules of the calculus.

A term stores six bitmasks: general joint variables, assigned joint
variables and their values, general conditioning variables, assigned
conditioning variables and their values.  Intervention nodes only ever appear
as conditioning assignments ``I_X=1``; an intervention node that a term does
not mention is implicitly 0 (passive observation).
"""

from __future__ import annotations

import re
from typing import NamedTuple

from .ldag import LDAG, bits, context_bits, context_dict, to_mask
from .separation import CsiQuery, Separator

RULES = ("input", "R1ins", "R1del", "R2", "R3", "R4", "R5", "R6", "R7", "R8")


class TermError(ValueError):
    pass


class Term(NamedTuple):
    jg: int = 0  # joint, general
    ja: int = 0  # joint, assigned
    jv: int = 0  # values of ja
    cg: int = 0  # conditioning, general
    ca: int = 0  # conditioning, assigned
    cv: int = 0  # values of ca

    @classmethod
    def make(cls, joint_general=(), joint_assigned=None, cond_general=(), cond_assigned=None) -> "Term":
        ja, jv = context_bits(joint_assigned or {})
        ca, cv = context_bits(cond_assigned or {})
        t = cls(to_mask(joint_general), ja, jv, to_mask(cond_general), ca, cv)
        t.check()
        return t

    @property
    def joint_general(self) -> frozenset:
        return frozenset(bits(self.jg))

    @property
    def joint_assigned(self) -> dict:
        return context_dict(self.ja, self.jv)

    @property
    def cond_general(self) -> frozenset:
        return frozenset(bits(self.cg))

    @property
    def cond_assigned(self) -> dict:
        return context_dict(self.ca, self.cv)

    @property
    def joint(self) -> int:
        return self.jg | self.ja

    @property
    def cond(self) -> int:
        return self.cg | self.ca

    @property
    def variables(self) -> int:
        return self.jg | self.ja | self.cg | self.ca

    @property
    def general(self) -> int:
        return self.jg | self.cg

    def check(self):
        parts = (self.jg, self.ja, self.cg, self.ca)
        total = 0
        for p in parts:
            if total & p:
                raise TermError("term parts must be pairwise disjoint")
            total |= p
        if not (self.jg | self.ja):
            raise TermError("term needs a nonempty joint part")
        if self.jv & ~self.ja or self.cv & ~self.ca:
            raise TermError("assigned values outside assigned variables")

    def format(self, g: LDAG, rename: dict | None = None) -> str:
        return format_term(self, g, rename)


class Justification(NamedTuple):
    """How a term was identified: the rule, its parent terms and the CSI used."""

    rule: str
    parents: tuple = ()
    csi: CsiQuery | None = None
    detail: tuple = ()


def _part(mask_g, mask_a, vals, g, rename):
    out = []
    for v in bits(mask_g | mask_a):
        nm = rename.get(v, g.name(v)) if rename else g.name(v)
        if (mask_a >> v) & 1:
            out.append(f"{nm}={(vals >> v) & 1}")
        else:
            out.append(nm)
    return ",".join(out)


def format_term(t: Term, g: LDAG, rename: dict | None = None) -> str:
    s = "P(" + _part(t.jg, t.ja, t.jv, g, rename)
    if t.cg | t.ca:
        s += "|" + _part(t.cg, t.ca, t.cv, g, rename)
    return s + ")"


_TERM_RE = re.compile(r"^\s*P\s*\((.*)\)\s*$")


def _parse_side(text, g, where):
    general, assigned = set(), {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            raise TermError(f"empty item in {where} of term")
        if "=" in item:
            nm, val = (s.strip() for s in item.split("=", 1))
            if val not in ("0", "1"):
                raise TermError(f"assignment {item!r} must use 0 or 1")
            v = g.var(nm.rstrip("'"))
            if v in assigned or v in general:
                raise TermError(f"variable {nm} repeated")
            assigned[v] = int(val)
        else:
            v = g.var(item.rstrip("'"))
            if v in assigned or v in general:
                raise TermError(f"variable {item} repeated")
            general.add(v)
    return general, assigned


def parse_term(text: str, g: LDAG) -> Term:
    """Parse ``P(Y, A=0 | X, I_X=1)``; primes on names are ignored."""
    m = _TERM_RE.match(text)
    if not m:
        raise TermError(f"not a term: {text!r}")
    body = m.group(1)
    if body.count("|") > 1:
        raise TermError(f"more than one '|' in {text!r}")
    lhs, _, rhs = body.partition("|")
    jg, ja = _parse_side(lhs, g, "joint part")
    cg, ca = _parse_side(rhs, g, "conditioning part") if rhs.strip() else (set(), {})
    return Term.make(jg, ja, cg, ca)


# -- admissibility and the implicit intervention context -----------------------

def intervened(g: LDAG, t: Term) -> int:
    """Base variables whose intervention node is set to 1 in ``t``."""
    m = 0
    for i in bits(t.ca & g.intervention_mask):
        if (t.cv >> i) & 1:
            m |= 1 << g.variables[i].intervenes
    return m


def admissible(g: LDAG, t: Term) -> bool:
    """Intervention nodes only as ``I_X=1`` in the conditioning part, X not in the joint."""
    im = g.intervention_mask
    if (t.jg | t.ja | t.cg) & im:
        return False
    if (t.ca & im) & ~t.cv:
        return False
    return not (intervened(g, t) & t.joint)


def implicit_context(g: LDAG, mentioned: int) -> int:
    """Intervention nodes not mentioned are passive: they enter the context as 0."""
    return g.intervention_mask & ~mentioned


def rule1_query(g: LDAG, t: Term, z: int) -> tuple[int, int, int, int, int]:
    """Masks of the CSI that licenses adding or removing ``z`` from ``t``'s conditioning part.

    ``t`` is the term *without* ``z``.
    """
    cm = t.ca | implicit_context(g, t.ca | z)
    return t.jg | t.ja, z, t.cg, cm, t.cv


# -- the rules ---------------------------------------------------------------

def rule1(t: Term, z_general, z_assigned, direction: str, g: LDAG,
          separator: Separator | None = None):
    """Insert (``direction='insert'``) or delete observations in the conditioning part."""
    zg = to_mask(z_general)
    za, zv = context_bits(z_assigned or {})
    z = zg | za
    if not z or zg & za:
        return None
    if direction == "delete":
        if (zg & ~t.cg) or (za & ~t.ca) or ((t.cv ^ zv) & za):
            return None
        new = Term(t.jg, t.ja, t.jv, t.cg & ~zg, t.ca & ~za, t.cv & ~za)
        base, rule = new, "R1del"
    elif direction == "insert":
        if z & t.variables:
            return None
        new = Term(t.jg, t.ja, t.jv, t.cg | zg, t.ca | za, t.cv | zv)
        base, rule = t, "R1ins"
    else:
        raise ValueError(f"direction must be 'insert' or 'delete', got {direction!r}")
    if not admissible(g, new):
        return None
    q = rule1_query(g, base, z)
    sep = separator or Separator(g)
    if not sep.holds(*q):
        return None
    return new, Justification(rule, (t,), CsiQuery.from_masks(*q), (z,))


def rule2(t: Term, z_set):
    """Marginalize general joint variables: known P(Y, Z | X) gives P(Y | X)."""
    z = to_mask(z_set)
    if z & ~t.jg:
        return None
    if not z:
        return t, Justification("R2", (t,), None, (0,))
    new = Term(t.jg & ~z, t.ja, t.jv, t.cg, t.ca, t.cv)
    if not new.joint:
        return None
    return new, Justification("R2", (t,), None, (z,))


def rule3(t: Term, z_general, z_assigned=None):
    """Condition on part of the joint: P(Y, Z, z) gives P(Y | Z, z).

    Every assigned joint variable has to move, otherwise the quotient does not
    define the conditional.
    """
    zg = to_mask(z_general)
    za, zv = context_bits(z_assigned or {})
    if not zg and not za:
        return t, Justification("R3", (t,), None, (0,))
    if zg & ~t.jg or za != t.ja or (zv ^ t.jv) & za:
        return None
    if not t.jg & ~zg:
        return None
    new = Term(t.jg & ~zg, 0, 0, t.cg | zg, t.ca | za, t.cv | zv)
    return new, Justification("R3", (t,), None, (zg | za,))


def rule4(t1: Term, t2: Term, g: LDAG | None = None):
    """Product rule: P(Y | Z, X) P(Z | X) gives P(Y, Z | X)."""
    if t2.cg & ~t1.cg or t2.ca & ~t1.ca or (t1.cv ^ t2.cv) & t2.ca:
        return None
    if t1.cg & ~t2.cg != t2.jg or t1.ca & ~t2.ca != t2.ja or (t1.cv ^ t2.jv) & t2.ja:
        return None
    new = Term(t1.jg | t2.jg, t1.ja | t2.ja, t1.jv | t2.jv, t2.cg, t2.ca, t2.cv)
    if g is not None and not admissible(g, new):
        return None
    return new, Justification("R4", (t1, t2), None, ())


def rule5(t_general: Term | None, t_case: Term):
    """Complement: P(Y) - P(Y, z) gives P(Y, 1-z).

    ``t_general`` is ``None`` when ``t_case`` is ``P(z | X)``; the result is
    then ``P(1-z | X) = 1 - P(z | X)``.
    """
    if t_general is None:
        if t_case.jg or not t_case.ja or t_case.ja & (t_case.ja - 1):
            return None
        z = t_case.ja
        new = t_case._replace(jv=t_case.jv ^ z)
        return new, Justification("R5", (t_case,), None, (z,))
    extra = t_case.ja & ~t_general.ja
    if extra == 0 or extra & (extra - 1):
        return None
    if t_case._replace(ja=t_case.ja & ~extra, jv=t_case.jv & ~extra) != t_general:
        return None
    new = t_case._replace(jv=t_case.jv ^ extra)
    return new, Justification("R5", (t_general, t_case), None, (extra,))


def rule6(t0: Term, t1: Term):
    """Case-by-case: P(Y, Z=0 | X) and P(Y, Z=1 | X) give P(Y, Z | X)."""
    diff = t0.jv ^ t1.jv
    if t0._replace(jv=t1.jv) != t1 or diff == 0 or diff & (diff - 1) or not diff & t0.ja:
        return None
    if (t0.jv & diff):
        t0, t1 = t1, t0
    new = Term(t0.jg | diff, t0.ja & ~diff, t0.jv & ~diff, t0.cg, t0.ca, t0.cv)
    return new, Justification("R6", (t0, t1), None, (diff,))


def rule7(t: Term, z: int, v: int):
    """Instantiate a general joint variable."""
    b = 1 << z
    if not t.jg & b or v not in (0, 1):
        return None
    new = Term(t.jg & ~b, t.ja | b, t.jv | (b if v else 0), t.cg, t.ca, t.cv)
    return new, Justification("R7", (t,), None, (b, v))


def rule8(t: Term, z: int, v: int):
    """Instantiate a general conditioning variable."""
    b = 1 << z
    if not t.cg & b or v not in (0, 1):
        return None
    new = Term(t.jg, t.ja, t.jv, t.cg & ~b, t.ca | b, t.cv | (b if v else 0))
    return new, Justification("R8", (t,), None, (b, v))
