"""Concurrent game structures: data model, CGSL text format, BDD encoding."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .bdd import BddStore, new_store
from .formula import FRESH_PREFIX


class CgsError(Exception):
    pass


@dataclass
class Cgs:
    """Explicit concurrent game structure with final states.

    States and actions are kept by name; indices follow declaration order.
    ``transitions`` maps (state index, tuple of per-agent action indices)
    to a successor index and is total by construction.
    """

    agents: list
    atoms: list
    states: list
    initial: int
    final: frozenset
    actions: dict            # agent name -> list of action names
    transitions: dict        # (state, joint action) -> state
    labels: list             # state -> frozenset of atoms

    def joint_actions(self):
        ranges = [range(len(self.actions[a])) for a in self.agents]
        return itertools.product(*ranges)

    def n_states(self):
        return len(self.states)

    def successors(self, s):
        return {self.transitions[(s, j)] for j in self.joint_actions()}

    def reachable_states(self):
        seen = {self.initial}
        frontier = [self.initial]
        while frontier:
            s = frontier.pop()
            for t in self.successors(s):
                if t not in seen:
                    seen.add(t)
                    frontier.append(t)
        return seen

    def to_text(self):
        lines = []
        lines.append("agents: " + " ".join(self.agents))
        lines.append("atoms: " + " ".join(self.atoms))
        lines.append("states: " + " ".join(self.states))
        lines.append("initial: " + self.states[self.initial])
        if self.final:
            lines.append(
                "final: " + " ".join(self.states[s] for s in sorted(self.final))
            )
        for a in self.agents:
            lines.append(f"actions {a}: " + " ".join(self.actions[a]))
        for s in range(len(self.states)):
            if self.labels[s]:
                lines.append(
                    f"label {self.states[s]}: " + " ".join(sorted(self.labels[s]))
                )
        for s in range(len(self.states)):
            for j in self.joint_actions():
                acts = ",".join(
                    self.actions[a][j[i]] for i, a in enumerate(self.agents)
                )
                t = self.transitions[(s, j)]
                lines.append(
                    f"trans {self.states[s]} ({acts}) -> {self.states[t]}"
                )
        return "\n".join(lines) + "\n"


def validate(g):
    if not g.agents:
        raise CgsError("at least one agent required")
    if not g.states:
        raise CgsError("at least one state required")
    for a in g.agents:
        if not g.actions.get(a):
            raise CgsError(f"agent {a} has no actions")
    if not 0 <= g.initial < len(g.states):
        raise CgsError("initial state out of range")
    for s in g.final:
        if not 0 <= s < len(g.states):
            raise CgsError("final state out of range")
    for p in g.atoms:
        if p.startswith(FRESH_PREFIX) or p.startswith("__"):
            raise CgsError(f"atom {p!r} uses the reserved '__' prefix")
    njoint = 1
    for a in g.agents:
        njoint *= len(g.actions[a])
    for s in range(len(g.states)):
        for j in g.joint_actions():
            if (s, j) not in g.transitions:
                acts = ",".join(
                    g.actions[a][j[i]] for i, a in enumerate(g.agents)
                )
                raise CgsError(
                    "transition function not total: no row for "
                    f"state {g.states[s]} and joint action ({acts})"
                )
    if len(g.transitions) != len(g.states) * njoint:
        raise CgsError("spurious transition rows present")
    return g


# ---------------------------------------------------------------------------
# CGSL parser

def parse_model(text):
    """Parse the CGSL model format into a validated Cgs."""
    agents = None
    atoms = None
    states = None
    initial = None
    final = []
    actions = {}
    label_lines = []
    trans_lines = []

    def err(lineno, msg):
        raise CgsError(f"line {lineno}: {msg}")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("agents:"):
            if agents is not None:
                err(lineno, "duplicate agents declaration")
            agents = line[len("agents:"):].split()
            if len(set(agents)) != len(agents):
                err(lineno, "duplicate agent names")
        elif line.startswith("atoms:"):
            if atoms is not None:
                err(lineno, "duplicate atoms declaration")
            atoms = line[len("atoms:"):].split()
            if len(set(atoms)) != len(atoms):
                err(lineno, "duplicate atoms")
        elif line.startswith("states:"):
            if states is not None:
                err(lineno, "duplicate states declaration")
            states = line[len("states:"):].split()
            if len(set(states)) != len(states):
                err(lineno, "duplicate state names")
        elif line.startswith("initial:"):
            if initial is not None:
                err(lineno, "duplicate initial declaration")
            initial = (line[len("initial:"):].strip(), lineno)
        elif line.startswith("final:"):
            final.append((line[len("final:"):].split(), lineno))
        elif line.startswith("actions "):
            rest = line[len("actions "):]
            if ":" not in rest:
                err(lineno, "malformed actions line")
            agent, acts = rest.split(":", 1)
            agent = agent.strip()
            if agent in actions:
                err(lineno, f"duplicate actions declaration for agent {agent}")
            actions[agent] = (acts.split(), lineno)
        elif line.startswith("label "):
            rest = line[len("label "):]
            if ":" not in rest:
                err(lineno, "malformed label line")
            state, props = rest.split(":", 1)
            label_lines.append((state.strip(), props.split(), lineno))
        elif line.startswith("trans "):
            rest = line[len("trans "):]
            if "->" not in rest or "(" not in rest or ")" not in rest:
                err(lineno, "malformed trans line")
            src_part, dst = rest.split("->", 1)
            src, acts = src_part.split("(", 1)
            acts = acts.rsplit(")", 1)[0]
            trans_lines.append(
                (src.strip(), [a.strip() for a in acts.split(",")],
                 dst.strip(), lineno)
            )
        else:
            err(lineno, f"unrecognized line: {line!r}")

    if agents is None:
        raise CgsError("missing agents declaration")
    if states is None:
        raise CgsError("missing states declaration")
    if atoms is None:
        atoms = []
    if initial is None:
        raise CgsError("missing initial declaration")

    sidx = {name: i for i, name in enumerate(states)}
    init_name, lineno = initial
    if init_name not in sidx:
        err(lineno, f"undefined initial state {init_name!r}")
    init = sidx[init_name]

    finals = set()
    for names, lineno in final:
        for n in names:
            if n not in sidx:
                err(lineno, f"undefined final state {n!r}")
            finals.add(sidx[n])

    act_lists = {}
    aidx = {}
    for a in agents:
        if a not in actions:
            raise CgsError(f"missing actions declaration for agent {a}")
        acts, lineno = actions[a]
        if not acts:
            err(lineno, f"agent {a} must have at least one action")
        if len(set(acts)) != len(acts):
            err(lineno, f"duplicate actions for agent {a}")
        act_lists[a] = acts
        aidx[a] = {n: i for i, n in enumerate(acts)}
    for a in actions:
        if a not in agents:
            raise CgsError(f"actions declared for unknown agent {a}")

    atom_set = set(atoms)
    labels = [set() for _ in states]
    seen_labels = set()
    for state, props, lineno in label_lines:
        if state not in sidx:
            err(lineno, f"undefined state {state!r} in label")
        if state in seen_labels:
            err(lineno, f"duplicate label declaration for state {state}")
        seen_labels.add(state)
        for p in props:
            if p not in atom_set:
                err(lineno, f"undefined atom {p!r} in label")
            labels[sidx[state]].add(p)

    transitions = {}
    for src, acts, dst, lineno in trans_lines:
        if src not in sidx:
            err(lineno, f"undefined state {src!r} in trans")
        if dst not in sidx:
            err(lineno, f"undefined state {dst!r} in trans")
        if len(acts) != len(agents):
            err(lineno, f"expected {len(agents)} actions, got {len(acts)}")
        j = []
        for i, a in enumerate(agents):
            if acts[i] not in aidx[a]:
                err(lineno, f"undefined action {acts[i]!r} for agent {a}")
            j.append(aidx[a][acts[i]])
        key = (sidx[src], tuple(j))
        if key in transitions:
            err(lineno, f"duplicate transition row for {src} ({','.join(acts)})")
        transitions[key] = sidx[dst]

    g = Cgs(
        agents=list(agents),
        atoms=list(atoms),
        states=list(states),
        initial=init,
        final=frozenset(finals),
        actions=act_lists,
        transitions=transitions,
        labels=[frozenset(s) for s in labels],
    )
    return validate(g)


# ---------------------------------------------------------------------------
# Symbolic encoding

def bits_for(n):
    if n <= 1:
        return 1
    return (n - 1).bit_length()


def action_block_name(agent):
    return f"a_{agent}"


def store_blocks(g, automaton_bits, game=False):
    """Block layout for a store hosting this model plus an automaton.

    Current/next pairs are adjacent so the store interleaves them; the
    automaton block follows the model state block and action blocks come
    last.  With ``game=True`` a vertex-layer bit and primed action blocks
    are added for parity-game edge relations.
    """
    blocks = []
    if game:
        blocks += [("l", 1), ("l'", 1)]
    nq = bits_for(len(g.states))
    blocks += [("q", nq), ("q'", nq)]
    blocks += [("s", automaton_bits), ("s'", automaton_bits)]
    for a in g.agents:
        na = bits_for(len(g.actions[a]))
        blocks.append((action_block_name(a), na))
        if game:
            blocks.append((action_block_name(a) + "'", na))
    return blocks


def make_store(g, automaton_bits, game=False, byte_budget=256 * 1024 * 1024):
    return new_store(store_blocks(g, automaton_bits, game=game),
                     byte_budget=byte_budget)


@dataclass
class SymbolicCgs:
    """Bit-level encoding of a Cgs in a shared store."""

    g: Cgs
    store: BddStore
    q: object            # VarBlock for current state bits
    q_next: object
    action_blocks: dict  # agent -> VarBlock
    delta: object        # Bdd over (q, a, q')
    lambda_: dict        # atom -> Bdd over q
    init: object
    final: object
    valid: object        # encodings of real states
    action_valid: dict   # agent -> Bdd excluding padded action encodings

    def state_bdd(self, s, block=None):
        return self.store.cube(block or self.q, s)

    def set_bdd(self, states, block=None):
        st = self.store
        blk = block or self.q
        return st.big_or([st.cube(blk, s) for s in sorted(states)])

    def decode(self, f, block=None):
        """Sorted state ids in a BDD over the state block."""
        return [
            s for s in self.store.minterms(f, block or self.q)
            if s < len(self.g.states)
        ]


def encode_symbolic(g, store):
    """Encode a Cgs into BDDs over the store's q/q'/action blocks."""
    nq = bits_for(len(g.states))
    try:
        q = store.block("q")
        qn = store.block("q'")
    except KeyError:
        raise CgsError("store lacks q/q' blocks")
    if len(q.vars) < nq:
        raise CgsError(
            f"store too small: {len(q.vars)} state bits, need {nq}"
        )
    action_blocks = {}
    for a in g.agents:
        try:
            blk = store.block(action_block_name(a))
        except KeyError:
            raise CgsError(f"store lacks action block for agent {a}")
        if len(blk.vars) < bits_for(len(g.actions[a])):
            raise CgsError(f"store too small for actions of agent {a}")
        action_blocks[a] = blk

    cubes = []
    for (s, j), t in g.transitions.items():
        parts = [store.cube(q, s), store.cube(qn, t)]
        for i, a in enumerate(g.agents):
            parts.append(store.cube(action_blocks[a], j[i]))
        cubes.append(store.big_and(parts))
    delta = store.big_or(cubes)

    valid = store.big_or([store.cube(q, s) for s in range(len(g.states))])
    lam = {}
    for p in g.atoms:
        holds = [s for s in range(len(g.states)) if p in g.labels[s]]
        lam[p] = store.big_or([store.cube(q, s) for s in holds])
    init = store.cube(q, g.initial)
    final = store.big_or([store.cube(q, s) for s in sorted(g.final)])
    action_valid = {}
    for a in g.agents:
        blk = action_blocks[a]
        action_valid[a] = store.big_or(
            [store.cube(blk, i) for i in range(len(g.actions[a]))]
        )

    return SymbolicCgs(
        g=g, store=store, q=q, q_next=qn, action_blocks=action_blocks,
        delta=delta, lambda_=lam, init=init, final=final, valid=valid,
        action_valid=action_valid,
    )


def all_action_vars(sg):
    out = []
    for a in sg.g.agents:
        out.extend(sg.action_blocks[a].vars)
    return out


def reachable(sg):
    """Least fixpoint of the post-image from the initial state (over q)."""
    st = sg.store
    avs = all_action_vars(sg)
    r = sg.init
    frontier = sg.init
    while not frontier.is_false():
        img = st.and_exists(frontier, sg.delta, list(sg.q.vars) + avs)
        img = st.rename(img, sg.q_next, sg.q)
        frontier = img & ~r
        r = r | frontier
    return r


def coalition_actions(sg, coalition):
    """Joint-action vars for a coalition and its availability BDD."""
    for a in coalition:
        if a not in sg.g.agents:
            raise CgsError(f"unknown agent {a!r} in coalition")
    members = [a for a in sg.g.agents if a in set(coalition)]
    vars_ = []
    act = sg.store.true
    for a in members:
        vars_.extend(sg.action_blocks[a].vars)
        act = act & sg.action_valid[a]
    return vars_, act


def audit_determinism(sg):
    """Check that each (state, joint action) has exactly one successor."""
    st = sg.store
    avs = all_action_vars(sg)
    g = sg.g
    for s in range(len(g.states)):
        for j in g.joint_actions():
            parts = [st.cube(sg.q, s)]
            for i, a in enumerate(g.agents):
                parts.append(st.cube(sg.action_blocks[a], j[i]))
            row = st.big_and(parts) & sg.delta
            succ = st.exists(list(sg.q.vars) + avs, row)
            if len(st.minterms(succ, sg.q_next)) != 1:
                raise CgsError(
                    f"nondeterministic encoding at state {s}, action {j}"
                )
    return True
