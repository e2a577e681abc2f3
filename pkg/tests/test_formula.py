import numpy as np
import pytest

from csicalc import formula as F
from csicalc.oracle import DiscreteModel, Evaluator, effect, max_abs_diff, random_model
from csicalc.search import parse_query
from csicalc.terms import parse_term

from conftest import FIXTURES, load, solved


def leaf(text, g, source=0):
    return F.Leaf(parse_term(text, g), source)


def eq1(g):
    """The textbook adjustment for the running example, written out by hand."""
    return F.Add((F.Product((leaf("P(Y|A=0,X)", g), leaf("P(A=0)", g))),
                  F.Product((leaf("P(Y|A=1)", g), leaf("P(A=1)", g)))))


def joint_input(g):
    return [parse_term("P(A,X,Y)", g)]


def fig1b_model(g):
    # X's table is the published one; the others are arbitrary but positive.
    # rows: bit 0 is A, bit 1 is L
    cpts = [None] * g.n
    cpts[g.var("A")] = np.array([0.3])
    cpts[g.var("L")] = np.array([0.45])
    cpts[g.var("X")] = np.array([0.9, 0.5, 0.9, 0.4])
    # rows: bit 0 A, bit 1 L, bit 2 X; A=1 rows ignore X
    cpts[g.var("Y")] = np.array([0.2, 0.7, 0.35, 0.6, 0.15, 0.7, 0.5, 0.6])
    return DiscreteModel(g, cpts)


def test_eq1_on_published_table(fig1d):
    m = fig1b_model(fig1d)
    m.validate()
    got = Evaluator(m).evaluate(eq1(fig1d), joint_input(fig1d))
    want = effect(m, parse_query("P(Y | do(X))", fig1d))
    assert max_abs_diff(got, want) < 1e-12


def test_leaf_and_normalization(fig1d):
    m = random_model(fig1d, 3)
    ev = Evaluator(m)
    tables = ev.input_tables(joint_input(fig1d))
    f = leaf("P(A,X,Y)", fig1d)
    assert np.allclose(F.evaluate(f, tables).values, tables[0].factor.values)
    assert F.evaluate(F.Sum(fig1d.var("A"), leaf("P(A)", fig1d)), tables).item() == pytest.approx(1.0)
    val = F.evaluate(f, tables, {fig1d.var("A"): 1, fig1d.var("X"): 0, fig1d.var("Y"): 1}).item()
    assert val == pytest.approx(tables[0].factor.values[1, 0, 1])


def test_evaluation_errors(fig1d):
    tables = Evaluator(random_model(fig1d, 0)).input_tables(joint_input(fig1d))
    with pytest.raises(F.EvaluationError):
        F.evaluate(leaf("P(Y)", fig1d, source=4), tables)
    with pytest.raises(F.EvaluationError):
        F.evaluate(F.Sum(fig1d.var("A"), leaf("P(Y)", fig1d)), tables)
    zero = F.Difference(leaf("P(Y)", fig1d), leaf("P(Y)", fig1d))
    with pytest.raises(F.EvaluationError):
        F.evaluate(F.Quotient(F.One(), zero), tables)


def test_render_eq1(fig1d):
    assert F.render(eq1(fig1d), fig1d) == "P(Y|A=0,X)P(A=0) + P(Y|A=1)P(A=1)"


def test_render_latex_sum():
    g = load("fig6e")
    f = F.Sum(g.var("Z"), F.Product((leaf("P(Z|A=0)", g), leaf("P(Y|X,Z,A=0)", g))))
    assert F.render(f, g, "latex") == r"\sum_Z P(Z|A=0)P(Y|X,Z,A=0)"
    assert F.render(f, g) == "sum_Z[P(Z|A=0)P(Y|X,Z,A=0)]"


def test_primes_for_shadowed_names(fig1d):
    x = fig1d.var("X")
    f = F.Product((leaf("P(Y|X)", fig1d), F.Sum(x, leaf("P(X,A)", fig1d))))
    assert F.render(f, fig1d) == "P(Y|X)sum_X'[P(A,X')]"


def test_simplify_examples(fig1d):
    p = leaf("P(Y|A)", fig1d)
    assert F.simplify(F.Quotient(p, p)) == F.One()
    a = fig1d.var("A")
    out = F.simplify(F.Substitute(a, 0, leaf("P(Y,A|X)", fig1d)))
    assert out == leaf("P(Y,A=0|X)", fig1d)
    out = F.simplify(F.Product((F.One(), F.Product((p, F.One())))))
    assert out == p
    assert F.simplify(F.Difference(F.One(), leaf("P(A=1|X)", fig1d))) == leaf("P(A=0|X)", fig1d)


IDENTIFIED = [n for n in FIXTURES if n != "bow"]


@pytest.mark.parametrize("name", IDENTIFIED)
def test_simplify_preserves_values(name):
    g, res = load(name), solved(name)
    assert F.operator_count(res.formula) <= F.operator_count(res.raw_formula)
    for s in range(30):
        ev = Evaluator(random_model(g, s))
        a = ev.evaluate(res.formula, res.inputs)
        b = ev.evaluate(res.raw_formula, res.inputs)
        assert max_abs_diff(a, b) < 1e-12


@pytest.mark.parametrize("name", IDENTIFIED)
def test_plain_roundtrip(name):
    g, res = load(name), solved(name)
    text = res.render()
    back = F.parse_formula(text, res.graph)
    assert F.render(back, res.graph) == text
    ev = Evaluator(random_model(g, 11))
    assert max_abs_diff(ev.evaluate(back, res.inputs), ev.evaluate(res.formula, res.inputs)) < 1e-12


@pytest.mark.parametrize("name", IDENTIFIED)
def test_json_roundtrip(name):
    res = solved(name)
    assert F.from_json(F.to_json(res.formula, res.graph), res.graph) == res.formula
    assert F.dumps(res.formula, res.graph) == F.dumps(res.formula, res.graph)


def test_parse_errors(fig1d):
    for bad in ("P(Y", "sum_Q[P(Y)]", "P(Y) +", "cases_A[P(Y)]"):
        with pytest.raises((F.FormulaSyntaxError, ValueError, KeyError)):
            F.parse_formula(bad, fig1d)


def test_parse_handles_operators(fig1d):
    text = "1 - P(A=1)"
    f = F.parse_formula(text, fig1d)
    assert isinstance(f, F.Difference)
    f = F.parse_formula("cases_A[P(Y|A=0); P(Y|A=1)]", fig1d)
    assert F.simplify(f) == leaf("P(Y|A)", fig1d)
    f = F.parse_formula("(P(A=0) + P(A=1))/P(Y)", fig1d)
    assert F.render(f, fig1d) == "(P(A=0) + P(A=1))/P(Y)"
