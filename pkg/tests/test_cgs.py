import random

import pytest

from atlstar import cgs


BASIC = """
# a tiny two-agent arena
agents: a b
atoms: p goal
states: s0 s1 s2
initial: s0
final: s2
actions a: go stay
actions b: go stay
label s1: p
label s2: p goal
trans s0 (go,go) -> s2
trans s0 (go,stay) -> s1
trans s0 (stay,go) -> s1
trans s0 (stay,stay) -> s0
trans s1 (go,go) -> s2
trans s1 (go,stay) -> s2
trans s1 (stay,go) -> s1
trans s1 (stay,stay) -> s1
trans s2 (go,go) -> s2
trans s2 (go,stay) -> s2
trans s2 (stay,go) -> s2
trans s2 (stay,stay) -> s2
"""


def random_model(rng, n_states, agents=("a", "b"), n_actions=2):
    import itertools
    states = [f"s{i}" for i in range(n_states)]
    actions = {ag: [f"m{j}" for j in range(n_actions)] for ag in agents}
    atoms = ["p", "q"]
    labels = [frozenset(x for x in atoms if rng.random() < 0.4)
              for _ in states]
    trans = {}
    for q in range(n_states):
        for ja in itertools.product(range(n_actions), repeat=len(agents)):
            trans[(q, ja)] = rng.randrange(n_states)
    final = frozenset(q for q in range(n_states) if rng.random() < 0.3)
    return cgs.Cgs(agents=list(agents), atoms=atoms, states=states,
                   initial=0, final=final, actions=actions,
                   transitions=trans, labels=labels)


def test_parse_basic():
    g = cgs.parse_model(BASIC)
    assert g.agents == ["a", "b"]
    assert len(g.states) == 3
    assert g.final == frozenset({2})
    assert g.labels[1] == frozenset({"p"})
    cgs.validate(g)


def test_emit_roundtrip():
    g = cgs.parse_model(BASIC)
    g2 = cgs.parse_model(g.to_text())
    assert g2.to_text() == g.to_text()
    assert g2.transitions == g.transitions


def test_parse_error_messages():
    missing = BASIC.replace("trans s0 (go,go) -> s2\n", "")
    with pytest.raises(cgs.CgsError, match="not total"):
        cgs.parse_model(missing)
    with pytest.raises(cgs.CgsError, match="line"):
        cgs.parse_model("agents: a\nbogus line here\n")
    with pytest.raises(cgs.CgsError):
        cgs.parse_model(BASIC.replace("atoms: p goal", "atoms: __p goal"))
    with pytest.raises(cgs.CgsError):
        cgs.parse_model(BASIC.replace("-> s1", "-> nowhere", 1))


def test_reserved_atom_prefix():
    with pytest.raises(cgs.CgsError, match="__"):
        cgs.parse_model(
            "agents: a\natoms: __x\nstates: s\ninitial: s\n"
            "actions a: m\nlabel s: __x\ntrans s (m) -> s\n")


def test_symbolic_encoding_soundness():
    rng = random.Random(17)
    for _ in range(20):
        g = random_model(rng, rng.randint(1, 9))
        store = cgs.make_store(g, automaton_bits=2)
        sg = cgs.encode_symbolic(g, store)
        cgs.audit_determinism(sg)
        # every explicit transition is in delta, and nothing else
        import itertools
        for q in range(len(g.states)):
            for ja in g.joint_actions():
                t = g.transitions[(q, ja)]
                parts = [store.cube(sg.q, q), store.cube(sg.q_next, t)]
                for i, a in enumerate(g.agents):
                    parts.append(store.cube(sg.action_blocks[a], ja[i]))
                row = store.big_and(parts)
                assert not (row & sg.delta).is_false()


def test_labels_inverted():
    g = cgs.parse_model(BASIC)
    store = cgs.make_store(g, automaton_bits=1)
    sg = cgs.encode_symbolic(g, store)
    p_states = set(sg.decode(sg.lambda_["p"]))
    assert p_states == {1, 2}
    assert set(sg.decode(sg.lambda_["goal"])) == {2}


def test_reachable_matches_bfs():
    rng = random.Random(23)
    for _ in range(20):
        g = random_model(rng, rng.randint(1, 12))
        store = cgs.make_store(g, automaton_bits=1)
        sg = cgs.encode_symbolic(g, store)
        got = set(sg.decode(cgs.reachable(sg)))
        assert got == g.reachable_states()


def test_coalition_actions():
    g = cgs.parse_model(BASIC)
    store = cgs.make_store(g, automaton_bits=1)
    sg = cgs.encode_symbolic(g, store)
    vars_ab, avail = cgs.coalition_actions(sg, ("a", "b"))
    assert len(vars_ab) == 2
    vars_none, avail_none = cgs.coalition_actions(sg, ())
    assert vars_none == []
    assert avail_none == store.true
    with pytest.raises(cgs.CgsError):
        cgs.coalition_actions(sg, ("zz",))


def test_store_too_small():
    g = cgs.parse_model(BASIC)
    from atlstar.bdd import new_store
    store = new_store([("q", 1), ("q'", 1), ("s", 1), ("s'", 1),
                       ("a_a", 1), ("a_b", 1)])
    with pytest.raises(cgs.CgsError):
        cgs.encode_symbolic(g, store)
