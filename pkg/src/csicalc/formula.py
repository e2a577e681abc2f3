"""Identifying formulas: AST, evaluation, local simplification and rendering."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .ldag import LDAG, bits
from .terms import Term, format_term, parse_term

DIVISION_FLOOR = 1e-12


class EvaluationError(ArithmeticError):
    pass


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class One:
    pass


@dataclass(frozen=True)
class Leaf:
    term: Term
    source: int = 0  # index of the input distribution the term is read from


@dataclass(frozen=True)
class Sum:
    var: int
    body: "Formula"


@dataclass(frozen=True)
class Product:
    factors: tuple


@dataclass(frozen=True)
class Quotient:
    num: "Formula"
    den: "Formula"


@dataclass(frozen=True)
class Difference:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Add:
    terms: tuple


@dataclass(frozen=True)
class Piecewise:
    var: int
    zero: "Formula"
    one: "Formula"


@dataclass(frozen=True)
class Substitute:
    var: int
    value: int
    body: "Formula"


Formula = Union[One, Leaf, Sum, Product, Quotient, Difference, Add, Piecewise, Substitute]


def free_vars(f: Formula) -> int:
    if isinstance(f, One):
        return 0
    if isinstance(f, Leaf):
        return f.term.jg | f.term.cg
    if isinstance(f, Sum):
        return free_vars(f.body) & ~(1 << f.var)
    if isinstance(f, Product):
        m = 0
        for x in f.factors:
            m |= free_vars(x)
        return m
    if isinstance(f, Add):
        m = 0
        for x in f.terms:
            m |= free_vars(x)
        return m
    if isinstance(f, Quotient):
        return free_vars(f.num) | free_vars(f.den)
    if isinstance(f, Difference):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, Piecewise):
        return free_vars(f.zero) | free_vars(f.one) | (1 << f.var)
    if isinstance(f, Substitute):
        return free_vars(f.body) & ~(1 << f.var)
    raise TypeError(f"not a formula node: {f!r}")


def children(f: Formula) -> tuple:
    if isinstance(f, (Sum, Substitute)):
        return (f.body,)
    if isinstance(f, Product):
        return f.factors
    if isinstance(f, Add):
        return f.terms
    if isinstance(f, Quotient):
        return (f.num, f.den)
    if isinstance(f, Difference):
        return (f.left, f.right)
    if isinstance(f, Piecewise):
        return (f.zero, f.one)
    return ()


def operator_count(f: Formula) -> int:
    own = 0 if isinstance(f, (One, Leaf)) else 1
    return own + sum(operator_count(c) for c in children(f))


# -- numeric factors ------------------------------------------------------------

class Factor:
    """A table over binary variables, one axis per variable id in ascending order."""

    __slots__ = ("vars", "values")

    def __init__(self, vars_: Sequence[int], values):
        self.vars = tuple(vars_)
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != len(self.vars):
            raise ValueError("factor dimensionality mismatch")

    @classmethod
    def scalar(cls, x: float) -> "Factor":
        return cls((), np.asarray(x, dtype=float))

    def __repr__(self):
        return f"Factor(vars={self.vars}, shape={self.values.shape})"

    def expand(self, vars_: Sequence[int]) -> np.ndarray:
        """Values broadcast onto the sorted variable list ``vars_``."""
        vars_ = tuple(vars_)
        missing = set(self.vars) - set(vars_)
        if missing:
            raise ValueError(f"cannot expand factor: variables {sorted(missing)} dropped")
        shape = [2 if v in self.vars else 1 for v in vars_]
        arr = self.values.reshape([2] * len(self.vars)) if self.vars else self.values
        return np.broadcast_to(arr.reshape(shape), [2] * len(vars_))

    def _binary(self, other: "Factor", op) -> "Factor":
        vs = tuple(sorted(set(self.vars) | set(other.vars)))
        return Factor(vs, op(self.expand(vs), other.expand(vs)))

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __add__(self, other):
        return self._binary(other, np.add)

    def divide(self, other: "Factor") -> "Factor":
        if np.any(np.abs(other.values) < DIVISION_FLOOR):
            raise EvaluationError("division by a value below 1e-12")
        return self._binary(other, np.divide)

    def sum_out(self, v: int) -> "Factor":
        if v not in self.vars:
            raise EvaluationError(f"cannot sum over variable {v} absent from the table")
        i = self.vars.index(v)
        return Factor(self.vars[:i] + self.vars[i + 1:], self.values.sum(axis=i))

    def select(self, v: int, x: int) -> "Factor":
        if v not in self.vars:
            return self
        i = self.vars.index(v)
        return Factor(self.vars[:i] + self.vars[i + 1:], np.take(self.values, x, axis=i))

    def select_all(self, mask: int, vals: int) -> "Factor":
        f = self
        for v in bits(mask):
            f = f.select(v, (vals >> v) & 1)
        return f

    def marginal(self, keep: int) -> "Factor":
        f = self
        for v in self.vars:
            if not (keep >> v) & 1:
                f = f.sum_out(v)
        return f

    def item(self) -> float:
        if self.vars:
            raise ValueError("factor is not a scalar")
        return float(self.values)


@dataclass(frozen=True)
class InputTable:
    """An input distribution ``P(joint | cond)`` tabulated over its general variables."""

    term: Term
    factor: Factor


def conditional(table: InputTable, t: Term) -> Factor:
    """Read the term ``t`` off an input table by marginalization and conditioning."""
    it = table.term
    if it.cond & ~t.cond or (it.ca & t.ca and (it.cv ^ t.cv) & it.ca & t.ca):
        raise EvaluationError("term does not condition on the input's conditioning part")
    if t.variables & ~it.variables:
        raise EvaluationError("term mentions variables outside its input")
    clash = (it.ja | it.ca) & (t.ja | t.ca)
    if clash & ((it.jv | it.cv) ^ (t.jv | t.cv)):
        raise EvaluationError("term assignment conflicts with the input")
    if it.ja & ~(t.ja | t.ca):
        raise EvaluationError("cannot sum over a variable the input fixes")
    f = table.factor
    num = f.select_all(t.ja | t.ca, t.jv | t.cv).marginal(t.jg | t.cg)
    moved = t.cond & it.joint
    if not moved:
        return num
    if it.ja & ~moved:
        raise EvaluationError("cannot normalize over a variable the input fixes")
    den = f.select_all(t.ca, t.cv).marginal(t.cg)
    return num.divide(den)


# -- evaluation --------------------------------------------------------------

def evaluate(f: Formula, tables: Sequence[InputTable] | Mapping[int, InputTable],
             binding: Mapping[int, int] | None = None) -> Factor:
    """Evaluate ``f`` as a table over its free variables.

    With ``binding``, bound variables are selected at the end; unbound free
    variables stay as axes.
    """
    memo: dict = {}
    res = _eval(f, tables, memo)
    if binding:
        for v, x in binding.items():
            res = res.select(v, x)
    return res


def _eval(f, tables, memo):
    key = id(f)
    hit = memo.get(key)
    if hit is not None and hit[0] is f:
        return hit[1]
    if isinstance(f, One):
        r = Factor.scalar(1.0)
    elif isinstance(f, Leaf):
        try:
            table = tables[f.source]
        except (KeyError, IndexError):
            raise EvaluationError(f"missing input table {f.source}") from None
        r = conditional(table, f.term)
    elif isinstance(f, Sum):
        body = _eval(f.body, tables, memo)
        if f.var not in body.vars:
            raise EvaluationError("summation variable does not occur in the body")
        r = body.sum_out(f.var)
    elif isinstance(f, Product):
        r = Factor.scalar(1.0)
        for x in f.factors:
            r = r * _eval(x, tables, memo)
    elif isinstance(f, Add):
        r = Factor.scalar(0.0)
        for x in f.terms:
            r = r + _eval(x, tables, memo)
    elif isinstance(f, Quotient):
        r = _eval(f.num, tables, memo).divide(_eval(f.den, tables, memo))
    elif isinstance(f, Difference):
        r = _eval(f.left, tables, memo) - _eval(f.right, tables, memo)
    elif isinstance(f, Piecewise):
        a = _eval(f.zero, tables, memo).select(f.var, 0)
        b = _eval(f.one, tables, memo).select(f.var, 1)
        vs = tuple(sorted(set(a.vars) | set(b.vars)))
        stacked = np.stack([a.expand(vs), b.expand(vs)], axis=0)
        allv = (f.var,) + vs
        order = sorted(range(len(allv)), key=lambda i: allv[i])
        r = Factor(tuple(allv[i] for i in order), np.transpose(stacked, order))
    elif isinstance(f, Substitute):
        r = _eval(f.body, tables, memo).select(f.var, f.value)
    else:
        raise TypeError(f"not a formula node: {f!r}")
    memo[key] = (f, r)
    return r


# -- simplification ----------------------------------------------------------

def simplify(f: Formula) -> Formula:
    """Local, evaluation-preserving rewrites applied bottom-up to a fixpoint."""
    memo: dict = {}
    return _simp(f, memo)


def _simp(f, memo):
    hit = memo.get(f)
    if hit is not None:
        return hit
    if isinstance(f, Sum):
        g = Sum(f.var, _simp(f.body, memo))
    elif isinstance(f, Substitute):
        g = Substitute(f.var, f.value, _simp(f.body, memo))
    elif isinstance(f, Product):
        g = Product(tuple(_simp(x, memo) for x in f.factors))
    elif isinstance(f, Add):
        g = Add(tuple(_simp(x, memo) for x in f.terms))
    elif isinstance(f, Quotient):
        g = Quotient(_simp(f.num, memo), _simp(f.den, memo))
    elif isinstance(f, Difference):
        g = Difference(_simp(f.left, memo), _simp(f.right, memo))
    elif isinstance(f, Piecewise):
        g = Piecewise(f.var, _simp(f.zero, memo), _simp(f.one, memo))
    else:
        g = f
    r = _rewrite(g)
    if r is not g and r != g:
        r = _simp(r, memo)
    memo[f] = r
    return r


def _leaf_remove_joint(t: Term, m: int) -> Term | None:
    new = Term(t.jg & ~m, t.ja & ~m, t.jv & ~m, t.cg, t.ca, t.cv)
    return new if new.joint else None


def _substitute(v: int, x: int, f: Formula) -> Formula:
    b = 1 << v
    if not free_vars(f) & b:
        return f
    if isinstance(f, Leaf):
        t = f.term
        if t.jg & b:
            t = Term(t.jg & ~b, t.ja | b, t.jv | (b if x else 0), t.cg, t.ca, t.cv)
        else:
            t = Term(t.jg, t.ja, t.jv, t.cg & ~b, t.ca | b, t.cv | (b if x else 0))
        return Leaf(t, f.source)
    if isinstance(f, Product):
        return Product(tuple(_substitute(v, x, c) for c in f.factors))
    if isinstance(f, Add):
        return Add(tuple(_substitute(v, x, c) for c in f.terms))
    if isinstance(f, Quotient):
        return Quotient(_substitute(v, x, f.num), _substitute(v, x, f.den))
    if isinstance(f, Difference):
        return Difference(_substitute(v, x, f.left), _substitute(v, x, f.right))
    if isinstance(f, Sum):
        return Sum(f.var, _substitute(v, x, f.body))
    if isinstance(f, Piecewise):
        if f.var == v:
            return f.one if x else f.zero
        return Piecewise(f.var, _substitute(v, x, f.zero), _substitute(v, x, f.one))
    if isinstance(f, Substitute):
        return Substitute(f.var, f.value, _substitute(v, x, f.body))
    return Substitute(v, x, f)


def _chain_merge(a: Leaf, b: Leaf) -> Leaf | None:
    """P(A | B, C) P(B | C) -> P(A, B | C) for leaves of the same input."""
    if a.source != b.source:
        return None
    s, t = a.term, b.term
    if s.cg & ~t.cg != t.jg or s.ca & ~t.ca != t.ja or (s.cv ^ t.jv) & t.ja:
        return None
    if t.cg & ~s.cg or t.ca & ~s.ca or (s.cv ^ t.cv) & t.ca:
        return None
    if not t.joint:
        return None
    return Leaf(Term(s.jg | t.jg, s.ja | t.ja, s.jv | t.jv, t.cg, t.ca, t.cv), a.source)


def _rewrite(f: Formula) -> Formula:
    if isinstance(f, Substitute):
        if not free_vars(f.body) & (1 << f.var):
            return f.body
        return _substitute(f.var, f.value, f.body)

    if isinstance(f, Product):
        flat = []
        for x in f.factors:
            if isinstance(x, Product):
                flat.extend(x.factors)
            elif not isinstance(x, One):
                flat.append(x)
        changed = True
        while changed:
            changed = False
            for i in range(len(flat)):
                for j in range(len(flat)):
                    if i == j or not (isinstance(flat[i], Leaf) and isinstance(flat[j], Leaf)):
                        continue
                    m = _chain_merge(flat[i], flat[j])
                    if m is not None:
                        flat = [x for k, x in enumerate(flat) if k not in (i, j)]
                        flat.insert(min(i, j), m)
                        changed = True
                        break
                if changed:
                    break
        if not flat:
            return One()
        if len(flat) == 1:
            return flat[0]
        new = Product(tuple(flat))
        return new if new != f else f

    if isinstance(f, Add):
        flat = []
        for x in f.terms:
            flat.extend(x.terms if isinstance(x, Add) else (x,))
        # P(y, z=0 | X) + P(y, z=1 | X) -> P(y | X)
        for i in range(len(flat)):
            for j in range(i + 1, len(flat)):
                a, b = flat[i], flat[j]
                if isinstance(a, Leaf) and isinstance(b, Leaf) and a.source == b.source:
                    s, t = a.term, b.term
                    d = s.jv ^ t.jv
                    if s._replace(jv=t.jv) == t and d and not d & (d - 1) and d & s.ja:
                        m = _leaf_remove_joint(s, d)
                        if m is not None:
                            rest = [x for k, x in enumerate(flat) if k not in (i, j)]
                            return Add(tuple([Leaf(m, a.source)] + rest)) if rest else Leaf(m, a.source)
        if len(flat) == 1:
            return flat[0]
        new = Add(tuple(flat))
        return new if new != f else f

    if isinstance(f, Sum):
        b = 1 << f.var
        body = f.body
        if isinstance(body, Leaf) and body.term.jg & b:
            m = _leaf_remove_joint(body.term, b)
            return One() if m is None else Leaf(m, body.source)
        if isinstance(body, Piecewise) and body.var == f.var:
            return Add((_substitute(f.var, 0, body.zero), _substitute(f.var, 1, body.one)))
        if isinstance(body, Product):
            outside = [x for x in body.factors if not free_vars(x) & b]
            if outside:
                inside = [x for x in body.factors if free_vars(x) & b]
                inner = inside[0] if len(inside) == 1 else Product(tuple(inside))
                return Product(tuple(outside) + (Sum(f.var, inner),))
        return f

    if isinstance(f, Quotient):
        if f.num == f.den:
            return One()
        if isinstance(f.den, One):
            return f.num
        if isinstance(f.num, Leaf) and isinstance(f.den, Leaf) and f.num.source == f.den.source:
            s, t = f.num.term, f.den.term
            if (t.cg, t.ca, t.cv) == (s.cg, s.ca, s.cv) and t.jg & ~s.jg == 0 and t.ja & ~s.ja == 0 \
                    and not (s.jv ^ t.jv) & t.ja and t.joint != s.joint:
                return Leaf(Term(s.jg & ~t.jg, s.ja & ~t.ja, s.jv & ~t.ja,
                                 s.cg | t.jg, s.ca | t.ja, s.cv | t.jv), f.num.source)
        return f

    if isinstance(f, Difference):
        a, b = f.left, f.right
        if isinstance(b, Leaf) and b.term.ja and not b.term.jg:
            t = b.term
            if isinstance(a, One) and not t.ja & (t.ja - 1):
                return Leaf(t._replace(jv=t.jv ^ t.ja), b.source)
            if isinstance(a, Leaf) and a.source == b.source:
                extra = t.ja & ~a.term.ja
                if extra and not extra & (extra - 1) and \
                        t._replace(ja=t.ja & ~extra, jv=t.jv & ~extra) == a.term:
                    return Leaf(t._replace(jv=t.jv ^ extra), b.source)
        if isinstance(b, Leaf) and isinstance(a, Leaf) and a.source == b.source:
            t = b.term
            extra = t.ja & ~a.term.ja
            if extra and not extra & (extra - 1) and \
                    t._replace(ja=t.ja & ~extra, jv=t.jv & ~extra) == a.term:
                return Leaf(t._replace(jv=t.jv ^ extra), b.source)
        return f

    if isinstance(f, Piecewise):
        z0, z1 = f.zero, f.one
        b = 1 << f.var
        if isinstance(z0, Leaf) and isinstance(z1, Leaf) and z0.source == z1.source:
            s, t = z0.term, z1.term
            if s._replace(jv=t.jv, cv=t.cv) == t:
                if s.ja & b and (s.jv ^ t.jv) == b and t.jv & b and s.cv == t.cv:
                    return Leaf(Term(s.jg | b, s.ja & ~b, s.jv & ~b, s.cg, s.ca, s.cv), z0.source)
                if s.ca & b and (s.cv ^ t.cv) == b and t.cv & b and s.jv == t.jv:
                    return Leaf(Term(s.jg, s.ja, s.jv, s.cg | b, s.ca & ~b, s.cv & ~b), z0.source)
        if z0 == z1 and not free_vars(z0) & b:
            return z0
        return f
    return f


# -- rendering ---------------------------------------------------------------

def render(f: Formula, g: LDAG, style: str = "plain") -> str:
    """Deterministic text for ``f``; ``style`` is ``plain`` or ``latex``.

    Summation variables that shadow a name already in scope get primes.
    """
    if style not in ("plain", "latex"):
        raise ValueError(f"unknown style {style!r}")
    scope = {g.name(v) for v in bits(free_vars(f))}
    return _render(f, g, style, {}, scope)


def _bind(v, g, rename, scope):
    name = g.name(v)
    while name in scope:
        name += "'"
    rename = dict(rename)
    rename[v] = name
    return rename, scope | {name}


def _render(f, g, style, rename, scope):
    latex = style == "latex"

    def sub(x):
        return _render(x, g, style, rename, scope)

    def wrap(x, kinds):
        s = sub(x)
        if isinstance(x, kinds):
            return (r"\left(" + s + r"\right)") if latex else "(" + s + ")"
        return s

    if isinstance(f, One):
        return "1"
    if isinstance(f, Leaf):
        return format_term(f.term, g, rename)
    if isinstance(f, Product):
        return "".join(wrap(x, (Add, Difference)) for x in f.factors)
    if isinstance(f, Add):
        return " + ".join(sub(x) for x in f.terms)
    if isinstance(f, Difference):
        return f"{sub(f.left)} - {wrap(f.right, (Add, Difference))}"
    if isinstance(f, Quotient):
        if latex:
            return r"\frac{" + sub(f.num) + "}{" + sub(f.den) + "}"
        kinds = (Add, Difference, Product, Quotient)
        return f"{wrap(f.num, kinds)}/{wrap(f.den, kinds)}"
    if isinstance(f, Sum):
        inner_rename, inner_scope = _bind(f.var, g, rename, scope)
        name = inner_rename[f.var]
        body = _render(f.body, g, style, inner_rename, inner_scope)
        if latex:
            if isinstance(f.body, (Add, Difference)):
                body = r"\left(" + body + r"\right)"
            idx = name if len(name) == 1 else "{" + name + "}"
            return r"\sum_" + idx + " " + body
        return f"sum_{name}[{body}]"
    if isinstance(f, Piecewise):
        name = rename.get(f.var, g.name(f.var))
        if latex:
            return (r"\begin{cases} " + sub(f.zero) + f" & {name}=0 \\\\ " + sub(f.one)
                    + f" & {name}=1 \\end{{cases}}")
        return f"cases_{name}[{sub(f.zero)}; {sub(f.one)}]"
    if isinstance(f, Substitute):
        name = rename.get(f.var, g.name(f.var))
        if latex:
            return r"\left." + sub(f.body) + r"\right|_{" + f"{name}={f.value}" + "}"
        return f"subst_{name}={f.value}[{sub(f.body)}]"
    raise TypeError(f"not a formula node: {f!r}")


# -- parsing (plain style) -----------------------------------------------------

class FormulaSyntaxError(ValueError):
    pass


_TOKEN = re.compile(
    r"\s*(?:(?P<term>P\([^()]*\))|(?P<sum>sum_[A-Za-z_][A-Za-z0-9_']*\[)"
    r"|(?P<cases>cases_[A-Za-z_][A-Za-z0-9_']*\[)|(?P<subst>subst_[A-Za-z_][A-Za-z0-9_']*=[01]\[)"
    r"|(?P<one>1)|(?P<op>[-+/()\];]))"
)


def parse_formula(text: str, g: LDAG) -> Formula:
    """Parse the plain rendering back into an AST (leaves read from input 0)."""
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise FormulaSyntaxError(f"unexpected input at offset {pos}: {text[pos:pos + 12]!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
        pos = m.end()
    p = _Parser(tokens, g)
    f = p.expr()
    if p.i != len(tokens):
        raise FormulaSyntaxError(f"trailing tokens after position {p.i}")
    return f


class _Parser:
    def __init__(self, tokens, g):
        self.toks = tokens
        self.i = 0
        self.g = g

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            raise FormulaSyntaxError(f"expected {value or 'token'} at token {self.i}, got {tok[1]!r}")
        self.i += 1
        return tok

    def var(self, name):
        return self.g.var(name.rstrip("'"))

    def expr(self):
        terms = [self.product()]
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.product()
            if op == "+":
                terms.append(rhs)
            else:
                left = terms[0] if len(terms) == 1 else Add(tuple(terms))
                terms = [Difference(left, rhs)]
        return terms[0] if len(terms) == 1 else Add(tuple(terms))

    def product(self):
        factors = [self.unary()]
        while self.peek()[0] in ("term", "sum", "cases", "subst", "one") or self.peek() == ("op", "("):
            factors.append(self.unary())
        return factors[0] if len(factors) == 1 else Product(tuple(factors))

    def unary(self):
        a = self.atom()
        if self.peek() == ("op", "/"):
            self.take("/")
            return Quotient(a, self.atom())
        return a

    def atom(self):
        kind, val = self.peek()
        if kind == "term":
            self.take()
            return Leaf(parse_term(val, self.g), 0)
        if kind == "one":
            self.take()
            return One()
        if kind == "sum":
            self.take()
            v = self.var(val[4:-1])
            body = self.expr()
            self.take("]")
            return Sum(v, body)
        if kind == "cases":
            self.take()
            v = self.var(val[6:-1])
            a = self.expr()
            self.take(";")
            b = self.expr()
            self.take("]")
            return Piecewise(v, a, b)
        if kind == "subst":
            self.take()
            name, x = val[6:-1].split("=")
            body = self.expr()
            self.take("]")
            return Substitute(self.var(name), int(x), body)
        if (kind, val) == ("op", "("):
            self.take()
            e = self.expr()
            self.take(")")
            return e
        raise FormulaSyntaxError(f"unexpected token {val!r} at position {self.i}")


# -- JSON ------------------------------------------------------------------------

def to_json(f: Formula, g: LDAG) -> dict:
    if isinstance(f, One):
        return {"kind": "One"}
    if isinstance(f, Leaf):
        return {"kind": "Leaf", "term": format_term(f.term, g), "source": f.source}
    if isinstance(f, (Sum, Piecewise, Substitute)):
        d = {"kind": type(f).__name__, "var": g.name(f.var)}
        if isinstance(f, Sum):
            d["body"] = to_json(f.body, g)
        elif isinstance(f, Piecewise):
            d["zero"], d["one"] = to_json(f.zero, g), to_json(f.one, g)
        else:
            d["value"], d["body"] = f.value, to_json(f.body, g)
        return d
    if isinstance(f, Product):
        return {"kind": "Product", "factors": [to_json(x, g) for x in f.factors]}
    if isinstance(f, Add):
        return {"kind": "Add", "terms": [to_json(x, g) for x in f.terms]}
    if isinstance(f, Quotient):
        return {"kind": "Quotient", "num": to_json(f.num, g), "den": to_json(f.den, g)}
    if isinstance(f, Difference):
        return {"kind": "Difference", "left": to_json(f.left, g), "right": to_json(f.right, g)}
    raise TypeError(f"not a formula node: {f!r}")


def from_json(d: dict, g: LDAG) -> Formula:
    k = d["kind"]
    if k == "One":
        return One()
    if k == "Leaf":
        return Leaf(parse_term(d["term"], g), d.get("source", 0))
    if k == "Sum":
        return Sum(g.var(d["var"]), from_json(d["body"], g))
    if k == "Piecewise":
        return Piecewise(g.var(d["var"]), from_json(d["zero"], g), from_json(d["one"], g))
    if k == "Substitute":
        return Substitute(g.var(d["var"]), d["value"], from_json(d["body"], g))
    if k == "Product":
        return Product(tuple(from_json(x, g) for x in d["factors"]))
    if k == "Add":
        return Add(tuple(from_json(x, g) for x in d["terms"]))
    if k == "Quotient":
        return Quotient(from_json(d["num"], g), from_json(d["den"], g))
    if k == "Difference":
        return Difference(from_json(d["left"], g), from_json(d["right"], g))
    raise ValueError(f"unknown formula kind {k!r}")


def dumps(f: Formula, g: LDAG) -> str:
    return json.dumps(to_json(f, g), sort_keys=True)
