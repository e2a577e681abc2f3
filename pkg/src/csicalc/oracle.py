"""Ground truth: random label-consistent models and exact distributions over them."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import formula as F
from .ldag import LDAG, bits, row_classes, to_mask
from .terms import Term

EPSILON = 1e-3
MAX_JOINT_VARIABLES = 20


class OracleError(ValueError):
    pass


@dataclass
class DiscreteModel:
    """Binary CPTs for an LDAG.

    ``cpts[v][r]`` is P(v = 1 | row r), where bit ``i`` of ``r`` is the value
    of the ``i``-th parent of ``v`` in id order.
    """

    ldag: LDAG
    cpts: list

    def parents(self, v: int) -> list[int]:
        return list(bits(self.ldag.parents[v]))

    def validate(self, tol: float = 0.0):
        g = self.ldag
        for v in range(g.n):
            p = np.asarray(self.cpts[v])
            if p.shape != (1 << len(self.parents(v)),):
                raise OracleError(f"CPT of {g.name(v)} has shape {p.shape}")
            if np.any(p < EPSILON - 1e-15) or np.any(p > 1 - EPSILON + 1e-15):
                raise OracleError(f"CPT of {g.name(v)} violates the positivity floor")
        bad = label_violations(self, tol)
        if bad:
            raise OracleError(f"label consistency violated on {bad[0]}")


def label_violations(m: DiscreteModel, tol: float = 0.0) -> list[str]:
    """Edges whose labels are not respected by the CPT rows."""
    g = m.ldag
    out = []
    for (x, y), entries in g.labels.items():
        pas = m.parents(y)
        i = pas.index(x)
        others = [k for k, p in enumerate(pas) if p != x]
        for entry in entries:
            fixed = {pas.index(v): val for v, val in entry if val is not None}
            for combo in itertools.product((0, 1), repeat=len(others)):
                if any(fixed.get(k, c) != c for k, c in zip(others, combo)):
                    continue
                row = sum(c << k for k, c in zip(others, combo))
                if abs(m.cpts[y][row] - m.cpts[y][row | (1 << i)]) > tol:
                    out.append(f"{g.name(x)}->{g.name(y)}")
                    break
    return out


def class_structure(g: LDAG) -> list[tuple[np.ndarray, int]]:
    """Per variable: (row -> class index array, number of classes)."""
    out = []
    for v in range(g.n):
        reps = row_classes(g, v)
        uniq = {r: k for k, r in enumerate(dict.fromkeys(reps))}
        out.append((np.array([uniq[r] for r in reps], dtype=int), len(uniq)))
    return out


def model_from_params(g: LDAG, theta: np.ndarray, classes=None) -> DiscreteModel:
    classes = classes or class_structure(g)
    cpts, k = [], 0
    for idx, count in classes:
        cpts.append(np.asarray(theta[k:k + count], dtype=float)[idx])
        k += count
    return DiscreteModel(g, cpts)


def n_params(g: LDAG, classes=None) -> int:
    return sum(c for _, c in (classes or class_structure(g)))


def random_model(g: LDAG, seed: int, eps: float = EPSILON) -> DiscreteModel:
    """One draw per row-equivalence class, uniform on [eps, 1 - eps]."""
    rng = np.random.default_rng(seed)
    classes = class_structure(g)
    theta = rng.uniform(eps, 1 - eps, size=n_params(g, classes))
    return model_from_params(g, theta, classes)


# -- exact tables -----------------------------------------------------------------

def _cpt_factor(v: int, pas: list[int], p1: np.ndarray) -> F.Factor:
    """Factor over sorted(pas + [v]) holding P(v | pas)."""
    k = len(pas)
    rows = np.arange(1 << k)
    vals = np.empty((1 << k, 2))
    vals[:, 1] = p1
    vals[:, 0] = 1 - p1
    arr = np.zeros([2] * (k + 1))
    for r in rows:
        idx = tuple((r >> i) & 1 for i in range(k))
        arr[idx + (0,)] = vals[r, 0]
        arr[idx + (1,)] = vals[r, 1]
    axes = pas + [v]
    order = sorted(range(k + 1), key=lambda i: axes[i])
    return F.Factor(tuple(axes[i] for i in order), np.transpose(arr, order))


def joint_distribution(m: DiscreteModel, *, cap: int = MAX_JOINT_VARIABLES,
                       do: Mapping[int, int] | None = None,
                       interventions: Mapping[int, int] | None = None) -> F.Factor:
    """Exact joint table over every variable of the model.

    ``do`` fixes variables by truncated factorization (their factor becomes an
    indicator).  ``interventions`` maps extra variable ids to the base
    variable they intervene on: each such node is a fair coin, and when it is
    1 its base variable is a fair coin independent of its parents.
    """
    g = m.ldag
    extra = dict(interventions or {})
    total = g.n + len(extra)
    if total > cap:
        raise OracleError(f"{total} variables exceed the joint-table cap of {cap}")
    do = dict(do or {})
    inode = {b: i for i, b in extra.items()}
    result = F.Factor.scalar(1.0)
    for v in range(g.n):
        pas = m.parents(v)
        if v in do:
            arr = np.zeros(2)
            arr[do[v]] = 1.0
            fac = F.Factor((v,), arr)
        elif v in inode:
            base = _cpt_factor(v, pas, np.asarray(m.cpts[v]))
            i = inode[v]
            fac = F.Factor(base.vars + (i,), np.stack(
                [base.values, np.full(base.values.shape, 0.5)], axis=-1))
            fac = F.Factor(tuple(sorted(fac.vars)), np.moveaxis(
                fac.values, -1, sorted(fac.vars).index(i)))
        else:
            fac = _cpt_factor(v, pas, np.asarray(m.cpts[v]))
        result = result * fac
    for i in sorted(extra):
        result = result * F.Factor((i,), np.array([0.5, 0.5]))
    return result


def observed_distribution(m: DiscreteModel, **kw) -> F.Factor:
    return joint_distribution(m, **kw).marginal(m.ldag.observed_mask)


def interventional(m: DiscreteModel, do_assign: Mapping[int, int]) -> F.Factor:
    """Truncated factorization: P(remaining observed variables | do(assignment))."""
    g = m.ldag
    for v in do_assign:
        if not 0 <= v < g.n:
            raise OracleError(f"do() variable {v} not in model")
    keep = g.observed_mask & ~to_mask(do_assign)
    return joint_distribution(m, do=do_assign).marginal(keep).select_all(0, 0)


def term_value(joint: F.Factor, t: Term, intervention_mask: int = 0) -> F.Factor:
    """P(t.joint | t.cond) read off a joint table.  Intervention nodes that ``t``
    does not mention are conditioned to 0."""
    implicit = intervention_mask & ~t.ca
    ca, cv = t.ca | implicit, t.cv
    num = joint.select_all(t.ja | ca, t.jv | cv).marginal(t.jg | t.cg)
    den = joint.select_all(ca, cv).marginal(t.cg)
    return num.divide(den)


class Evaluator:
    """Caches the tables of one model needed to evaluate terms and formulas."""

    def __init__(self, m: DiscreteModel):
        self.m = m
        self._joint = None
        self._aug: dict = {}

    @property
    def joint(self) -> F.Factor:
        if self._joint is None:
            self._joint = joint_distribution(self.m)
        return self._joint

    def augmented(self, work: LDAG) -> F.Factor:
        key = tuple(sorted(work.intervention_of.items()))
        if key not in self._aug:
            self._aug[key] = joint_distribution(
                self.m, interventions={i: b for b, i in work.intervention_of.items()})
        return self._aug[key]

    def term(self, t: Term, work: LDAG | None = None) -> F.Factor:
        if work is None or not work.intervention_mask:
            return term_value(self.joint, t)
        return term_value(self.augmented(work), t, work.intervention_mask)

    def input_tables(self, inputs: Sequence[Term]) -> list[F.InputTable]:
        return [F.InputTable(t, self.term(t)) for t in inputs]

    def evaluate(self, f: F.Formula, inputs: Sequence[Term]) -> F.Factor:
        return F.evaluate(f, self.input_tables(inputs))


def effect(m: DiscreteModel, query) -> F.Factor:
    """Ground truth for ``P(Y | do(X), Z)`` by truncated factorization, as a
    table over the query's general variables."""
    do_general = sorted(query.do)
    do_fixed = dict(query.do_assigned)
    out_vars = sorted(query.outcome | query.do | query.cond)
    arr = np.zeros([2] * len(out_vars))
    for combo in itertools.product((0, 1), repeat=len(do_general)):
        do = dict(do_fixed)
        do.update(zip(do_general, combo))
        p = interventional(m, do)
        t = Term(to_mask(query.outcome), *_ctx(query.outcome_assigned),
                 to_mask(query.cond), *_ctx(query.cond_assigned))
        val = term_value(p, t)
        full = val.expand(tuple(v for v in out_vars if v not in do))
        index = []
        for v in out_vars:
            index.append(do[v] if v in do else slice(None))
        arr[tuple(index)] = full
    return F.Factor(tuple(out_vars), arr)


def _ctx(pairs):
    m = v = 0
    for var, x in pairs:
        m |= 1 << var
        v |= x << var
    return m, v


def independence_gap(joint: F.Factor, y: int, z: int, cond: int = 0, cm: int = 0,
                     cv: int = 0) -> float:
    """Max of |P(y,z,c,w) P(c,w) - P(y,c,w) P(z,c,w)| over all values."""
    f = joint.select_all(cm, cv).marginal(y | z | cond)
    return max_abs_diff(f * f.marginal(cond), f.marginal(y | cond) * f.marginal(z | cond))


def max_abs_diff(a: F.Factor, b: F.Factor) -> float:
    vs = tuple(sorted(set(a.vars) | set(b.vars)))
    return float(np.max(np.abs(a.expand(vs) - b.expand(vs))))


@dataclass
class VerificationReport:
    trials: int
    max_error: float
    tol: float
    errors: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tol

    def lines(self) -> list[str]:
        status = "pass" if self.passed else "fail"
        return [f"trials {self.trials}", f"max_error {self.max_error:.3e}",
                f"tol {self.tol:.1e}", f"status {status}"]

    def summary(self) -> dict:
        return {"trials": self.trials, "max_error": self.max_error, "tol": self.tol,
                "status": "pass" if self.passed else "fail"}


def verify_formula(g: LDAG, f: F.Formula, query, *, inputs: Sequence[Term] | None = None,
                   trials: int = 100, tol: float = 1e-9, seed: int = 0) -> VerificationReport:
    """Compare ``f`` against truncated factorization on ``trials`` random models."""
    if inputs is None:
        inputs = [Term(jg=g.observed_mask & ~g.intervention_mask)]
    errors = []
    for s in range(seed, seed + trials):
        m = random_model(g, s)
        ev = Evaluator(m)
        try:
            got = ev.evaluate(f, inputs)
            err = max_abs_diff(got, effect(m, query))
        except (F.EvaluationError, ValueError):
            err = float("inf")
        errors.append(err)
    return VerificationReport(trials, max(errors) if errors else 0.0, tol, errors)


# -- counterexamples --------------------------------------------------------------

@dataclass
class Counterexample:
    model1: DiscreteModel
    model2: DiscreteModel
    observed_gap: float
    effect_gap: float


def counterexample_search(g: LDAG, query, *, budget: int = 40, seed: int = 0,
                          eps: float = EPSILON, max_variables: int = 8) -> Counterexample | None:
    """Look for two label-consistent models with equal P(W) but different effects.

    Each attempt draws a model, perturbs its class parameters and projects
    the perturbed point back onto the set of models with the same observed
    distribution.  ``None`` means inconclusive.
    """
    if g.n > max_variables:
        raise OracleError(f"counterexample search limited to {max_variables} variables")
    classes = class_structure(g)
    k = n_params(g, classes)
    rng = np.random.default_rng(seed)

    def obs(theta):
        return observed_distribution(model_from_params(g, theta, classes)).values.ravel()

    def eff(theta):
        return effect(model_from_params(g, theta, classes), query).values.ravel()

    lo, hi = eps, 1 - eps
    for attempt in range(budget):
        theta1 = rng.uniform(0.1, 0.9, size=k)
        target = obs(theta1)
        e1 = eff(theta1)
        scale = 0.3 if attempt % 2 == 0 else 0.1
        start = np.clip(theta1 + rng.normal(0, scale, size=k), lo, hi)
        sol = least_squares(lambda th: obs(th) - target, start, bounds=(lo, hi),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
        theta2 = sol.x
        gap = float(np.max(np.abs(obs(theta2) - target)))
        if gap >= 1e-9:
            continue
        diff = float(np.max(np.abs(eff(theta2) - e1)))
        if diff > 1e-3:
            return Counterexample(model_from_params(g, theta1, classes),
                                  model_from_params(g, theta2, classes), gap, diff)
    return None


# -- text format --------------------------------------------------------------------

def dump_model(m: DiscreteModel) -> str:
    """One line per CPT row: ``V | A=0,L=1 : p0 p1``."""
    g = m.ldag
    lines = []
    for v in range(g.n):
        pas = m.parents(v)
        for r, p1 in enumerate(m.cpts[v]):
            row = ",".join(f"{g.name(p)}={(r >> i) & 1}" for i, p in enumerate(pas))
            lines.append(f"{g.name(v)} | {row} : {float(1 - p1)!r} {float(p1)!r}")
    return "\n".join(lines) + "\n"


_ROW_RE = re.compile(r"^\s*(\S+)\s*\|\s*(.*?)\s*:\s*(\S+)\s+(\S+)\s*$")


def load_model(text: str, g: LDAG) -> DiscreteModel:
    cpts = [np.full(1 << len(list(bits(g.parents[v]))), np.nan) for v in range(g.n)]
    for k, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        mt = _ROW_RE.match(line)
        if not mt:
            raise OracleError(f"line {k}: expected 'V | pa-assignment : p0 p1'")
        v = g.var(mt.group(1))
        pas = list(bits(g.parents[v]))
        row = 0
        seen = set()
        for item in filter(None, (s.strip() for s in mt.group(2).split(","))):
            name, _, val = item.partition("=")
            p = g.var(name.strip())
            if p not in pas or val.strip() not in ("0", "1"):
                raise OracleError(f"line {k}: bad parent assignment {item!r}")
            seen.add(p)
            row |= int(val) << pas.index(p)
        if seen != set(pas):
            raise OracleError(f"line {k}: row must assign every parent of {g.name(v)}")
        p0, p1 = float(mt.group(3)), float(mt.group(4))
        if abs(p0 + p1 - 1) > 1e-9:
            raise OracleError(f"line {k}: probabilities must sum to 1")
        cpts[v][row] = p1
    for v in range(g.n):
        if np.isnan(cpts[v]).any():
            raise OracleError(f"missing CPT rows for {g.name(v)}")
    return DiscreteModel(g, cpts)
