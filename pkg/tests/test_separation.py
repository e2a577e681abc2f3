import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csicalc.bench import random_ldag
from csicalc.ldag import augment_with_interventions, bits
from csicalc.oracle import independence_gap, joint_distribution, random_model
from csicalc.separation import (CsiQuery, Separator, csi_holds, csi_separated, d_separated,
                                representatives)


def test_d_separation_basics():
    chain = [(0, 1), (1, 2)]
    assert not d_separated(chain, {0}, {2})
    assert d_separated(chain, {0}, {2}, {1})
    collider = [(0, 2), (1, 2)]
    assert d_separated(collider, {0}, {1})
    assert not d_separated(collider, {0}, {1}, {2})
    # conditioning on a descendant of the collider also opens it
    assert not d_separated(collider + [(2, 3)], {0}, {1}, {3})
    with pytest.raises(ValueError):
        d_separated(chain, {0}, {0})


def test_running_example_statements(fig1d):
    g = fig1d
    a, l, x, y = (g.var(n) for n in "ALXY")
    assert csi_holds(g, CsiQuery.make({x}, {l}, (), {a: 0}))
    assert csi_holds(g, CsiQuery.make({x}, {y}, {l}, {a: 1}))
    assert not csi_holds(g, CsiQuery.make({x}, {l}, (), {a: 1}))
    assert csi_separated(g, CsiQuery.make({a}, {l}))
    assert not csi_separated(g, CsiQuery.make({x}, {l}))


def test_augmented_statements(fig1d):
    ga = augment_with_interventions(fig1d, [fig1d.var("X")])
    a, x, y, ix = (ga.var(n) for n in ("A", "X", "Y", "I_X"))
    assert csi_holds(ga, CsiQuery.make({a}, {ix}))
    assert csi_holds(ga, CsiQuery.make({y}, {ix}, {x}, {a: 0}))
    assert not csi_holds(ga, CsiQuery.make({y}, {ix}, {x}, {a: 1}))
    assert csi_holds(ga, CsiQuery.make({y}, {x}, (), {a: 1, ix: 1}))


def test_query_validation(fig1d):
    with pytest.raises(ValueError):
        CsiQuery.make({0}, {0})
    with pytest.raises(ValueError):
        CsiQuery.make({0}, ())
    q = CsiQuery.make({3}, {2}, {1}, {0: 1})
    assert q.format(fig1d) == "Y ⫫ X | L,A=1"
    assert q.swapped().y_set == {2}


def test_representatives_group_by_dag(fig1d):
    a, l = fig1d.var("A"), fig1d.var("L")
    assert len(representatives(fig1d, {a})) == 2
    assert len(representatives(fig1d, {l})) == 1
    assert len(representatives(fig1d, {a, l})) == 2


def test_cache_does_not_change_verdicts(rng):
    for _ in range(10):
        g, _, _ = random_ldag(5, rng, latent_count=0)
        on, off = Separator(g), Separator(g, use_cache=False)
        for y, z in itertools.permutations(range(5), 2):
            rest = [v for v in range(5) if v not in (y, z)]
            for cm in range(1 << len(rest)):
                m = sum(1 << rest[i] for i in range(len(rest)) if (cm >> i) & 1)
                assert on.holds(1 << y, 1 << z, 0, m, 0) == off.holds(1 << y, 1 << z, 0, m, 0)


def test_trace_records_queries(fig1d):
    lines = []
    sep = Separator(fig1d, trace=lines.append)
    a, l, x = (fig1d.var(n) for n in "ALX")
    sep.holds(1 << x, 1 << l, 0, 1 << a, 0)
    assert lines == ["CSI X ⫫ L | A=0 -> implied"]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_representatives_match_full_enumeration(seed):
    rng = np.random.default_rng(seed)
    g, _, _ = random_ldag(int(rng.integers(3, 7)), rng, latent_count=0)
    sep = Separator(g)
    n = g.n
    for _ in range(10):
        y, z = (int(v) for v in rng.choice(n, 2, replace=False))
        c = sum(1 << v for v in range(n) if v not in (y, z) and rng.random() < 0.5)
        reps = all(sep.separated(1 << y, 1 << z, 0, c, vals)
                   for _, vals in sep.representatives(c, 0, 0))
        full = all(sep.separated(1 << y, 1 << z, 0, c, vals)
                   for vals in (sum(1 << v for v, b in zip(bits(c), combo) if b)
                                for combo in itertools.product((0, 1), repeat=bin(c).count("1"))))
        assert reps == full


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 100_000))
def test_implied_statements_hold_numerically(seed):
    rng = np.random.default_rng(seed)
    g, _, _ = random_ldag(int(rng.integers(3, 6)), rng, latent_count=0, label_prob=0.7)
    sep = Separator(g)
    true = []
    for _ in range(25):
        perm = [int(v) for v in rng.permutation(g.n)]
        cond = cm = cv = 0
        for v in perm[2:]:
            r = rng.random()
            if r < 0.3:
                cond |= 1 << v
            elif r < 0.6:
                cm |= 1 << v
                cv |= (1 << v) if rng.random() < 0.5 else 0
        q = (1 << perm[0], 1 << perm[1], cond, cm, cv)
        if sep.holds(*q):
            true.append(q)
    for s in range(10):
        joint = joint_distribution(random_model(g, s))
        for q in true:
            assert independence_gap(joint, *q) < 1e-9
