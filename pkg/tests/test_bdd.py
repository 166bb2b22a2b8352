import itertools
import random

import pytest

from atlstar.bdd import BddError, BudgetExceeded, new_store


def fresh(nvars=6):
    return new_store([("x", nvars)])


def random_bdd(store, block, rng, depth=4):
    if depth == 0 or rng.random() < 0.2:
        choice = rng.random()
        if choice < 0.1:
            return store.true
        if choice < 0.2:
            return store.false
        return store.var(rng.choice(block.vars))
    op = rng.choice(["and", "or", "xor", "not"])
    a = random_bdd(store, block, rng, depth - 1)
    if op == "not":
        return ~a
    b = random_bdd(store, block, rng, depth - 1)
    return store.apply(op, a, b)


def truth_table(store, f, vars_):
    rows = []
    for bits in itertools.product([False, True], repeat=len(vars_)):
        rows.append(store.evaluate(f, dict(zip(vars_, bits))))
    return tuple(rows)


def test_canonicity_random_pairs():
    store = fresh(8)
    block = store.block("x")
    rng = random.Random(42)
    for _ in range(2000):
        f = random_bdd(store, block, rng)
        g = random_bdd(store, block, rng)
        same = truth_table(store, f, block.vars) == \
            truth_table(store, g, block.vars)
        assert (f == g) == same


def test_apply_matches_truth_tables():
    store = fresh(6)
    block = store.block("x")
    rng = random.Random(7)
    ops = {
        "and": lambda a, b: a and b,
        "or": lambda a, b: a or b,
        "xor": lambda a, b: a != b,
        "implies": lambda a, b: (not a) or b,
        "iff": lambda a, b: a == b,
    }
    for _ in range(300):
        f = random_bdd(store, block, rng)
        g = random_bdd(store, block, rng)
        tf = truth_table(store, f, block.vars)
        tg = truth_table(store, g, block.vars)
        for op, fn in ops.items():
            h = store.apply(op, f, g)
            assert truth_table(store, h, block.vars) == \
                tuple(fn(a, b) for a, b in zip(tf, tg))


def test_ite_terminal_cases():
    store = fresh(4)
    x = store.var(0)
    y = store.var(1)
    assert store.apply("ite", store.true, x, y) == x
    assert store.apply("ite", store.false, x, y) == y
    assert store.apply("ite", x, store.true, store.false) == x
    assert store.apply("ite", x, y, y) == y


def test_quantifier_duality():
    store = fresh(6)
    block = store.block("x")
    rng = random.Random(13)
    for _ in range(200):
        f = random_bdd(store, block, rng)
        vs = rng.sample(block.vars, rng.randint(1, 3))
        ex = store.exists(vs, f)
        fa = store.forall(vs, f)
        assert ex == ~store.forall(vs, ~f)
        assert fa == ~store.exists(vs, ~f)
        # forall implies the original only where vars are irrelevant
        assert (fa & ~ex).is_false()


def test_and_exists_is_relational_product():
    store = fresh(6)
    block = store.block("x")
    rng = random.Random(99)
    for _ in range(200):
        f = random_bdd(store, block, rng)
        g = random_bdd(store, block, rng)
        vs = rng.sample(block.vars, rng.randint(1, 3))
        assert store.and_exists(f, g, vs) == store.exists(vs, f & g)


def test_rename_is_a_swap():
    store = new_store([("a", 3), ("a'", 3)])
    a = store.block("a")
    ap = store.block("a'")
    rng = random.Random(5)
    for _ in range(100):
        f = random_bdd(store, a, rng)
        assert store.rename(store.rename(f, a, ap), ap, a) == f


def test_evaluate_and_minterms():
    store = fresh(4)
    block = store.block("x")
    f = store.cube(block, 5) | store.cube(block, 9)
    assert store.minterms(f, block) == [5, 9]
    assert store.sat_count(f, block) == 2


def test_sat_count_rejects_free_variables():
    store = new_store([("a", 2), ("b", 2)])
    f = store.var(store.block("b").vars[0])
    with pytest.raises(BddError):
        store.sat_count(f, store.block("a"))


def test_audit_reduced():
    store = fresh(6)
    block = store.block("x")
    rng = random.Random(21)
    for _ in range(50):
        random_bdd(store, block, rng)
    assert store.audit_reduced()


def test_budget_exceeded():
    store = new_store([("x", 24)], byte_budget=20_000)
    block = store.block("x")
    with pytest.raises(BudgetExceeded):
        acc = store.false
        for i in range(1 << 12):
            acc = acc | store.cube(block, i * 7919 % (1 << 24))


def test_cross_store_mixing_rejected():
    s1 = fresh(3)
    s2 = fresh(3)
    with pytest.raises(BddError):
        s1.true & s2.true
