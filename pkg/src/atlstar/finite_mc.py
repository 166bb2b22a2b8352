"""Finite-trace strategic checking via DFA products and safety games.

For a strategic subformula <<A>> psi the path formula psi is translated
to a DFA, the complement automaton is run in lockstep with the game
structure, and the coalition wins from exactly the states where it can
keep the product inside the safe region forever.  Everything here works
on the symbolic encodings from ``cgs`` and ``ltlf2dfa``; an explicit
product construction is kept alongside as an independent baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import cgs as cgsmod
from . import formula as fm
from . import ltlf2dfa


class FiniteMcError(Exception):
    pass


@dataclass
class ProductSpace:
    """Joint reachable space of a CGS and a symbolic DFA."""

    sg: object
    sd: object
    coalition: tuple
    action_vars: list      # coalition action variables
    avail: object          # coalition action availability Bdd
    other_vars: list       # remaining action variables
    other_avail: object
    delta: object          # Bdd over (q, s, aA, q', s'): coalition moves only
    entry: object          # Bdd over (q, s): automaton state entered at q
    reachable: object      # Bdd over (q, s)
    unsafe: object         # Bdd over (q, s): final CGS state, non-final DFA


def entry_relation(sg, sd):
    """Pair each CGS state with the DFA state reached on its own label.

    The automaton starts in its initial state and immediately reads the
    label of the current CGS state, so state q enters the product at
    delta(s0, lambda(q)).
    """
    store = sg.store
    step = sd.init & sd.delta          # over (q', s') after fixing s = s0
    step = store.exists(sd.s.vars, step)
    step = store.rename(step, sg.q_next, sg.q)
    step = store.rename(step, sd.s_next, sd.s)
    return step


def build_product(sg, sd, coalition):
    """Assemble the safety-game arena for a coalition against a DFA."""
    store = sg.store
    avars, avail = cgsmod.coalition_actions(sg, coalition)
    others = tuple(a for a in sg.g.agents if a not in coalition)
    ovars, oavail = cgsmod.coalition_actions(sg, others)

    # resolve opponent moves: the transition relation as seen by the
    # coalition is the set of successors some opponent response yields
    delta_g = store.exists(ovars, sg.delta & oavail)
    delta = delta_g & sd.delta

    entry = entry_relation(sg, sd)
    reach_g = cgsmod.reachable(sg)

    # product reachability from the entry points of all reachable states
    frontier = reach_g & entry
    reach = frontier
    qs = sg.q.vars + sd.s.vars
    qsn = sg.q_next.vars + sd.s_next.vars
    step = store.exists(avars, delta & avail)
    while True:
        img = store.and_exists(frontier, step, qs)
        img = store.rename(img, sg.q_next, sg.q)
        img = store.rename(img, sd.s_next, sd.s)
        nxt = reach | img
        if nxt == reach:
            break
        frontier = img & ~reach
        reach = nxt

    # unsafe: the trace may stop here (final CGS state) with the
    # complement automaton accepting, i.e. the DFA for psi rejecting
    unsafe = sg.final & sd.valid & ~sd.finals
    return ProductSpace(
        sg=sg, sd=sd, coalition=tuple(coalition), action_vars=avars,
        avail=avail, other_vars=ovars, other_avail=oavail, delta=delta,
        entry=entry, reachable=reach, unsafe=unsafe,
    )


@dataclass
class SafetyResult:
    winning: object        # Bdd over (q, s)
    iterations: int


def solve_safety(prod):
    """Greatest fixpoint of Y -> Safe(Y): states the coalition can hold.

    Pre(Y) holds where some coalition action forces every successor of
    the product into Y, regardless of the opponents' response.
    """
    sg, sd = prod.sg, prod.sd
    store = sg.store
    qs = sg.q.vars + sd.s.vars
    safe0 = prod.reachable & ~prod.unsafe

    def pre(y):
        yn = store.rename(y, sg.q, sg.q_next)
        yn = store.rename(yn, sd.s, sd.s_next)
        # bad: this joint coalition choice admits a successor outside Y
        bad = store.exists(sg.q_next.vars + sd.s_next.vars,
                           prod.delta & ~yn)
        forced = prod.avail & ~bad
        return store.exists(prod.action_vars, forced)

    y = safe0
    n = 0
    while True:
        nxt = y & pre(y)
        n += 1
        if nxt == y:
            return SafetyResult(winning=y, iterations=n)
        y = nxt


def game_solving(sg, psi, coalition, dfa=None):
    """States of the CGS from which the coalition can enforce psi.

    Returns a set of explicit CGS state ids.  A pre-translated DFA can
    be supplied to share work across calls.
    """
    if dfa is None:
        dfa = ltlf2dfa.translate(psi)
    sd = ltlf2dfa.encode_dfa(dfa, sg)
    prod = build_product(sg, sd, coalition)
    res = solve_safety(prod)
    return project_states(sg, sd, res.winning & prod.entry)


def project_states(sg, sd, win):
    """CGS states whose product entry point lies in the winning region."""
    store = sg.store
    states = store.exists(sd.s.vars, win) & sg.valid
    return set(store.minterms(states, sg.q))


# ---------------------------------------------------------------------------
# Explicit baseline

DEFAULT_PRODUCT_CAP = 4096


def explicit_game_solving(g, psi, coalition, dfa=None,
                          product_cap=DEFAULT_PRODUCT_CAP):
    """Explicit-state safety-game solver over the same product.

    Builds the product adjacency structure directly and removes states
    from which the coalition cannot avoid the unsafe region.  Intended
    as an oracle for the symbolic engine on small models; raises once
    the product exceeds ``product_cap`` states.
    """
    if dfa is None:
        dfa = ltlf2dfa.translate(psi)
    if len(g.states) * dfa.n_states > product_cap:
        raise FiniteMcError(
            f"explicit product {len(g.states)} x {dfa.n_states} exceeds "
            f"{product_cap} states; use the symbolic engine or raise "
            "product_cap"
        )
    coalition = tuple(coalition)
    others = tuple(a for a in g.agents if a not in coalition)

    def entry(q):
        return dfa.step(dfa.initial, g.labels[q])

    n = len(g.states)
    nodes = {}
    order = []

    def get(q, s):
        key = (q, s)
        if key not in nodes:
            if len(order) >= product_cap:
                raise FiniteMcError(
                    f"explicit product exceeds {product_cap} states; "
                    "use the symbolic engine or raise product_cap"
                )
            nodes[key] = len(order)
            order.append(key)
        return nodes[key]

    reach_g = g.reachable_states()
    frontier = [(q, entry(q)) for q in sorted(reach_g)]
    for key in frontier:
        get(*key)
    # moves[v] : coalition joint action -> set of successor product nodes
    moves = {}
    i = 0
    while i < len(order):
        q, s = order[i]
        per_action = {}
        for ja in g.joint_actions():
            mine = tuple(ja[g.agents.index(a)] for a in coalition)
            ti = g.transitions[(q, ja)]
            ts = dfa.step(s, g.labels[ti])
            per_action.setdefault(mine, set()).add(get(ti, ts))
        moves[i] = per_action
        i += 1

    unsafe = {
        v for v, (q, s) in enumerate(order)
        if q in g.final and s not in dfa.finals
    }
    alive = set(range(len(order))) - unsafe
    changed = True
    while changed:
        changed = False
        for v in list(alive):
            if not any(succ <= alive for succ in moves[v].values()):
                alive.discard(v)
                changed = True
    return {q for q in reach_g if nodes.get((q, entry(q))) in alive}
