"""Infinite-trace strategic checking via parity games.

The coalition and its opponents induce a two-player parity game on the
product of the game structure with a deterministic parity automaton for
the path formula.  Coalition vertices pick a joint coalition action,
opponent vertices resolve the remaining agents and advance the
automaton.  Acceptance is min-even throughout: player 0 wins a play iff
the minimal priority occurring infinitely often is even.

Two solvers are provided: a recursive attractor decomposition on an
explicit arena (the oracle) and a set-based small-progress-measures
iteration that works directly on the symbolic arena.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import cgs as cgsmod


class InfiniteMcError(Exception):
    pass


# ---------------------------------------------------------------------------
# Explicit parity games

@dataclass
class ExplicitGame:
    """Adjacency-list parity game; every vertex must have a successor."""

    owner: list        # vertex -> 0 or 1
    priority: list     # vertex -> non-negative int
    succ: list         # vertex -> list of successor ids
    names: list = None

    def n(self):
        return len(self.owner)

    def validate(self):
        for v, ss in enumerate(self.succ):
            if not ss:
                raise InfiniteMcError(f"vertex {v} has no successors")
            for w in ss:
                if not 0 <= w < self.n():
                    raise InfiniteMcError(f"vertex {v}: bad successor {w}")


def attractor(game, player, target, region):
    """Vertices in ``region`` from which ``player`` can force ``target``."""
    region = set(region)
    attr = set(target) & region
    pred = [[] for _ in range(game.n())]
    for v in region:
        for w in game.succ[v]:
            if w in region:
                pred[w].append(v)
    # count of escape edges for opponent vertices
    out = {
        v: sum(1 for w in game.succ[v] if w in region)
        for v in region if game.owner[v] != player
    }
    work = list(attr)
    while work:
        w = work.pop()
        for v in pred[w]:
            if v in attr:
                continue
            if game.owner[v] == player:
                attr.add(v)
                work.append(v)
            else:
                out[v] -= 1
                if out[v] == 0:
                    attr.add(v)
                    work.append(v)
    return attr


def solve_zielonka(game):
    """Full winning-region partition (W0, W1) by attractor decomposition."""
    game.validate()

    def solve(region):
        if not region:
            return set(), set()
        p = min(game.priority[v] for v in region)
        player = p % 2
        target = {v for v in region if game.priority[v] == p}
        a = attractor(game, player, target, region)
        w0, w1 = solve(region - a)
        win_opp = w1 if player == 0 else w0
        if not win_opp:
            full = set(region)
            return (full, set()) if player == 0 else (set(), full)
        b = attractor(game, 1 - player, win_opp, region)
        w0b, w1b = solve(region - b)
        if player == 0:
            return w0b, w1b | b
        return w0b | b, w1b

    return solve(set(range(game.n())))


def region_cap_check(n, cap=1 << 20):
    if n > cap:
        raise InfiniteMcError(
            f"explicit arena would have {n} vertices (cap {cap}); "
            "use the symbolic solver"
        )


def build_explicit_game(g, dpa, coalition):
    """Explicit product arena of a Cgs and a state-based min-even Dpa.

    Vertex keys are (q, s) for coalition positions and (q, s, move) for
    opponent positions, where ``move`` fixes the coalition's actions.
    Returns (game, index map key -> vertex id).
    """
    coalition = tuple(coalition)
    others = [a for a in g.agents if a not in coalition]
    cidx = [g.agents.index(a) for a in coalition]
    oidx = [g.agents.index(a) for a in others]
    letters = [dpa.letter(g.labels[q]) for q in range(len(g.states))]

    import itertools
    coal_moves = list(itertools.product(
        *[range(len(g.actions[a])) for a in coalition]))
    opp_moves = list(itertools.product(
        *[range(len(g.actions[a])) for a in others]))

    reach = sorted(g.reachable_states())
    region_cap_check(len(reach) * dpa.n_states * (1 + len(coal_moves)))

    ids = {}
    owner, priority, succ, names = [], [], [], []

    def get(key):
        if key not in ids:
            ids[key] = len(owner)
            owner.append(0 if len(key) == 2 else 1)
            priority.append(dpa.priority[key[1]])
            succ.append([])
            names.append(key)
        return ids[key]

    def joint(cmove, omove):
        ja = [0] * len(g.agents)
        for i, m in zip(cidx, cmove):
            ja[i] = m
        for i, m in zip(oidx, omove):
            ja[i] = m
        return tuple(ja)

    # entry points: the automaton reads the label of the current state
    entry = {q: dpa.delta[(dpa.initial, letters[q])] for q in reach}
    work = [(q, entry[q]) for q in reach]
    for key in work:
        get(key)
    done = set()
    while work:
        key = work.pop()
        if key in done:
            continue
        done.add(key)
        v = ids[key]
        if len(key) == 2:
            q, s = key
            for m in coal_moves:
                t = (q, s, m)
                if t not in ids:
                    work.append(t)
                succ[v].append(get(t))
        else:
            q, s, m = key
            for omove in opp_moves:
                qq = g.transitions[(q, joint(m, omove))]
                ss = dpa.delta[(s, letters[qq])]
                t = (qq, ss)
                if t not in ids:
                    work.append(t)
                succ[v].append(get(t))

    game = ExplicitGame(owner=owner, priority=priority, succ=succ,
                        names=names)
    return game, ids


def winning_states_explicit(g, dpa, coalition):
    """CGS states from which the coalition wins, by the explicit solver."""
    game, ids = build_explicit_game(g, dpa, coalition)
    w0, _ = solve_zielonka(game)
    letters = {q: dpa.letter(g.labels[q]) for q in g.reachable_states()}
    out = set()
    for q, a in letters.items():
        v = ids.get((q, dpa.delta[(dpa.initial, a)]))
        if v is not None and v in w0:
            out.add(q)
    return out


# ---------------------------------------------------------------------------
# PGSolver interchange format

def write_pgsolver(game):
    lines = [f"parity {game.n() - 1};"]
    for v in range(game.n()):
        ss = ",".join(str(w) for w in game.succ[v])
        name = ""
        if game.names:
            name = f' "{game.names[v]}"'
        lines.append(f"{v} {game.priority[v]} {game.owner[v]} {ss}{name};")
    return "\n".join(lines) + "\n"


def parse_pgsolver(text):
    owner, priority, succ, names = {}, {}, {}, {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("parity"):
            continue
        line = line.rstrip(";")
        name = None
        if '"' in line:
            line, _, rest = line.partition('"')
            name = rest.rstrip('"')
        parts = line.split()
        if len(parts) != 4:
            raise InfiniteMcError(f"malformed pgsolver line: {raw!r}")
        v, p, o = int(parts[0]), int(parts[1]), int(parts[2])
        if o not in (0, 1):
            raise InfiniteMcError(f"vertex {v}: owner must be 0 or 1")
        owner[v] = o
        priority[v] = p
        succ[v] = [int(x) for x in parts[3].split(",")]
        names[v] = name
    if not owner:
        raise InfiniteMcError("empty parity game")
    n = max(owner) + 1
    if set(owner) != set(range(n)):
        raise InfiniteMcError("vertex ids must be contiguous from 0")
    return ExplicitGame(
        owner=[owner[v] for v in range(n)],
        priority=[priority[v] for v in range(n)],
        succ=[succ[v] for v in range(n)],
        names=[names[v] for v in range(n)],
    )


# ---------------------------------------------------------------------------
# Symbolic parity games

@dataclass
class SymbolicParityGame:
    """Arena over (layer, q, s, coalition actions) with primed copies."""

    store: object
    sg: object
    sdpa: object
    coalition: tuple
    blocks: list         # (unprimed VarBlock, primed VarBlock) pairs in use
    v0: object           # coalition position vertices (layer 0)
    v1: object           # opponent choice vertices (layer 1)
    e: object            # edge relation over both copies
    priorities: dict     # p -> Bdd over unprimed vertex vars

    @property
    def vertices(self):
        return self.v0 | self.v1

    def vertex_vars(self):
        out = []
        for b, _ in self.blocks:
            out.extend(b.vars)
        return out

    def primed_vars(self):
        out = []
        for _, bp in self.blocks:
            out.extend(bp.vars)
        return out

    def prime(self, f):
        for b, bp in self.blocks:
            f = self.store.rename(f, b, bp)
        return f

    def pre_exists(self, target):
        """Vertices with some edge into ``target``."""
        # fixpoint solvers ask for the same targets over many rounds;
        # BDDs are canonical, so caching per target node is sound
        cache = self.__dict__.setdefault("_pre_e_cache", {})
        hit = cache.get(target.node)
        if hit is not None:
            return hit
        st = self.store
        out = st.and_exists(self.e, self.prime(target),
                            self.primed_vars()) & self.vertices
        cache[target.node] = out
        return out

    def pre_forall(self, target):
        """Vertices all of whose edges stay in ``target``."""
        cache = self.__dict__.setdefault("_pre_a_cache", {})
        hit = cache.get(target.node)
        if hit is not None:
            return hit
        st = self.store
        escape = st.and_exists(self.e, self.prime(self.vertices & ~target),
                               self.primed_vars())
        out = self.vertices & ~escape
        cache[target.node] = out
        return out


def _block_eq(store, b1, b2):
    parts = []
    for v1, v2 in zip(b1.vars, b2.vars):
        parts.append(store.apply("iff", store.var(v1), store.var(v2)))
    return store.big_and(parts)


def _zero(store, block):
    return store.cube(block, 0)


def build_game(sg, sdpa, coalition):
    """Parity-game arena for a coalition against a min-even DPA.

    The store must have been created with ``game=True`` so the layer bit
    and primed action blocks exist.  Coalition positions carry action
    value 0 as a normal form; priorities come from the automaton state
    on both layers.
    """
    st = sg.store
    coalition = tuple(coalition)
    try:
        l = st.block("l")
        lp = st.block("l'")
    except KeyError:
        raise InfiniteMcError("store lacks game blocks; build with game=True")

    members = [a for a in sg.g.agents if a in set(coalition)]
    ablocks = [st.block(cgsmod.action_block_name(a)) for a in members]
    apblocks = [st.block(cgsmod.action_block_name(a) + "'") for a in members]
    avars, avail = cgsmod.coalition_actions(sg, coalition)
    others = tuple(a for a in sg.g.agents if a not in set(coalition))
    ovars, oavail = cgsmod.coalition_actions(sg, others)

    layer0 = ~st.var(l.vars[0])
    layer1 = st.var(l.vars[0])
    layer0p = ~st.var(lp.vars[0])
    layer1p = st.var(lp.vars[0])

    azero = st.big_and([_zero(st, b) for b in ablocks]) if ablocks else st.true
    azero_p = (st.big_and([_zero(st, b) for b in apblocks])
               if apblocks else st.true)
    avail_p = avail
    for b, bp in zip(ablocks, apblocks):
        avail_p = st.rename(avail_p, b, bp)

    base = sg.valid & sdpa.valid
    v0 = layer0 & base & azero
    v1 = layer1 & base & avail

    eq_q = _block_eq(st, sg.q, st.block("q'"))
    eq_s = _block_eq(st, sdpa.s, st.block("s'"))
    eq_a = st.big_and([_block_eq(st, b, bp)
                       for b, bp in zip(ablocks, apblocks)]) \
        if ablocks else st.true

    # coalition picks an available joint action; position data unchanged
    e0 = v0 & layer1p & eq_q & eq_s & avail_p
    # opponents respond; the automaton reads the successor's label
    move = st.exists(ovars, sg.delta & oavail) & sdpa.delta
    e1 = v1 & layer0p & azero_p & move

    # re-express e0 target actions: primed copy carries the chosen action
    e = e0 | e1

    blocks = [(l, lp), (sg.q, st.block("q'")), (sdpa.s, st.block("s'"))]
    blocks += list(zip(ablocks, apblocks))

    priorities = {}
    for p, pset in sdpa.priority_sets.items():
        cls = (v0 | v1) & pset
        if not cls.is_false():
            priorities[p] = cls

    return SymbolicParityGame(
        store=st, sg=sg, sdpa=sdpa, coalition=coalition, blocks=blocks,
        v0=v0, v1=v1, e=e, priorities=priorities,
    )


def encode_explicit_game(game, byte_budget=64 * 1024 * 1024):
    """Symbolic arena for an explicit game (for solver cross-checks)."""
    from .bdd import new_store
    from .cgs import bits_for

    game.validate()
    nb = bits_for(game.n())
    st = new_store([("v", nb), ("v'", nb)], byte_budget=byte_budget)
    v = st.block("v")
    vp = st.block("v'")
    v0 = st.big_or([st.cube(v, x) for x in range(game.n())
                    if game.owner[x] == 0])
    v1 = st.big_or([st.cube(v, x) for x in range(game.n())
                    if game.owner[x] == 1])
    e = st.big_or([st.cube(v, x) & st.cube(vp, w)
                   for x in range(game.n()) for w in game.succ[x]])
    priorities = {}
    for x in range(game.n()):
        p = game.priority[x]
        cube = st.cube(v, x)
        priorities[p] = priorities.get(p, st.false) | cube
    out = SymbolicParityGame(
        store=st, sg=None, sdpa=None, coalition=(),
        blocks=[(v, vp)], v0=v0, v1=v1, e=e, priorities=priorities,
    )
    # the explicit vertex list enables the dense set backend of
    # solve_progress_measure; pipeline-built games have no such list
    out.__dict__["_explicit"] = game
    return out


# ---------------------------------------------------------------------------
# Set-based small progress measures

TOP = "top"


def _prog_value(value, p, odds, caps):
    """Least measure m with m >=_p value (strict when p is odd)."""
    if value is TOP:
        return TOP
    keep = [odds.index(o) for o in odds if o <= p]
    out = [value[i] if i in keep else 0 for i in range(len(odds))]
    if p % 2 == 0:
        return tuple(out)
    # strict increase on the components up to and including p
    i = odds.index(p)
    while i >= 0:
        if out[i] < caps[i]:
            out[i] += 1
            return tuple(out)
        out[i] = 0
        i -= 1
    return TOP


def _solve_progress_measure_dense(game, exp, max_rounds):
    """Dense-bitset backend of the set-based progress-measure solver.

    Runs the exact same lifting rounds as the BDD backend, but keeps
    every vertex set as an integer bitmask over the explicit game's
    vertices.  Pre-image sweeps then cost one machine-word scan per
    class instead of a BDD traversal, which matters for games with long
    lifting chains.  Returns (w0, w1) as vertex BDDs like the BDD path.
    """
    n = exp.n()
    st = game.store
    succ = [0] * n
    for x in range(n):
        m = 0
        for w in exp.succ[x]:
            m |= 1 << w
        succ[x] = m
    v0m = 0
    for x in range(n):
        if exp.owner[x] == 0:
            v0m |= 1 << x
    full = (1 << n) - 1
    v1m = full & ~v0m
    prio = {}
    for x in range(n):
        prio[exp.priority[x]] = prio.get(exp.priority[x], 0) | (1 << x)

    odds = sorted(p for p in prio if p % 2 == 1)
    if not odds:
        return game.vertices, st.false
    caps = [bin(prio[p]).count("1") for p in odds]

    pre_e_cache = {}
    pre_a_cache = {}

    def pre_e(t):
        hit = pre_e_cache.get(t)
        if hit is None:
            hit = 0
            for x in range(n):
                if succ[x] & t:
                    hit |= 1 << x
            pre_e_cache[t] = hit
        return hit

    def pre_a(t):
        hit = pre_a_cache.get(t)
        if hit is None:
            hit = 0
            for x in range(n):
                if succ[x] & t == succ[x]:
                    hit |= 1 << x
            pre_a_cache[t] = hit
        return hit

    classes = [((0,) * len(odds), full)]
    rounds = 0
    while True:
        rounds += 1
        if max_rounds is not None and rounds > max_rounds:
            raise InfiniteMcError("progress-measure iteration cap exceeded")

        best = []
        assigned = 0
        cumulative = 0
        for value, sset in classes:
            cumulative |= sset
            got = (((v0m & pre_e(sset)) | (v1m & pre_a(cumulative)))
                   & ~assigned)
            if got:
                best.append((value, got))
                assigned |= got

        new = {}
        for value, sset in best:
            for p, pset in prio.items():
                part = sset & pset
                if not part:
                    continue
                nv = _prog_value(value, p, odds, caps)
                new[nv] = new.get(nv, 0) | part
        next_classes = sorted(
            new.items(), key=lambda c: (c[0] is TOP, c[0]))
        if next_classes == classes:
            break
        classes = next_classes

    w1m = 0
    for value, sset in classes:
        if value is TOP:
            w1m |= sset
    vblock = game.blocks[0][0]
    w1 = st.big_or([st.cube(vblock, x) for x in range(n)
                    if (w1m >> x) & 1])
    return game.vertices & ~w1, w1


def solve_progress_measure(game, max_rounds=None, backend="auto"):
    """Winning region of player 0 by set-based small progress measures.

    The measure assignment is kept as a partition of the vertex set into
    value classes; each lifting round recomputes the best successor
    value per vertex with cumulative pre-image sweeps and applies the
    priority-dependent progress step.  Returns (w0, w1) vertex BDDs.

    ``backend`` selects the set representation: ``"bdd"`` runs every
    set operation symbolically, ``"dense"`` uses integer bitmasks and
    requires a game built by :func:`encode_explicit_game`, and
    ``"auto"`` picks dense when an explicit game is attached.
    """
    if backend not in ("auto", "bdd", "dense"):
        raise InfiniteMcError(f"unknown backend: {backend!r}")
    exp = game.__dict__.get("_explicit")
    if backend == "dense" and exp is None:
        raise InfiniteMcError(
            "dense backend requires a game built from an explicit game")
    if exp is not None and backend != "bdd":
        return _solve_progress_measure_dense(game, exp, max_rounds)
    st = game.store
    v = game.vertices
    odds = sorted(p for p in game.priorities if p % 2 == 1)
    if not odds:
        return v, st.false

    vvars = game.vertex_vars()
    caps = [int(st.sat_count(game.priorities[p], vvars)) for p in odds]

    classes = [((0,) * len(odds), v)]
    rounds = 0
    while True:
        rounds += 1
        if max_rounds is not None and rounds > max_rounds:
            raise InfiniteMcError("progress-measure iteration cap exceeded")

        # best successor value per vertex: min for player 0, max for 1
        best = []   # (value, vertex set) partition
        assigned0 = st.false
        assigned1 = st.false
        cumulative = st.false
        ordered = sorted(classes, key=lambda c: (c[0] is TOP, c[0]))
        for value, sset in ordered:
            cumulative = cumulative | sset
            n0 = game.v0 & game.pre_exists(sset) & ~assigned0
            n1 = game.v1 & game.pre_forall(cumulative) & ~assigned1
            got = n0 | n1
            if not got.is_false():
                best.append((value, got))
            assigned0 = assigned0 | n0
            assigned1 = assigned1 | n1

        # progress step per own priority; Kleene iteration of the lift
        # operator from the bottom assignment is pointwise monotone
        # (successor values never decrease, so neither does the
        # progressed value), hence no max with the old assignment is
        # needed and ``new`` already partitions the vertex set
        new = {}
        prov = {}    # output value -> list of (source value, priority)
        for value, sset in best:
            for p, pset in game.priorities.items():
                part = sset & pset
                if part.is_false():
                    continue
                nv = _prog_value(value, p, odds, caps)
                if nv in new:
                    new[nv] = new[nv] | part
                else:
                    new[nv] = part
                prov.setdefault(nv, []).append((value, p))
        next_classes = sorted(
            new.items(), key=lambda c: (c[0] is TOP, c[0]))

        if len(next_classes) == len(classes) and all(
            a[0] == b[0] and a[1] == b[1]
            for a, b in zip(next_classes, sorted(
                classes, key=lambda c: (c[0] is TOP, c[0])))
        ):
            break

        # Fast-forward: when a round maps the class family onto itself,
        # the pre-image sweep of the next round reproduces the same
        # partition (pre-images and ascending order are unchanged), so
        # further rounds only permute class values.  Replay them on the
        # value tuples alone until the structure would change: a source
        # disagreement (a class would split), a value collision or new
        # TOP (classes would merge), or a change in the ascending order
        # (the best-successor selection would differ).
        if {s.node for _, s in classes} == {s.node for _, s in next_classes}:
            v2n = {val: s.node for val, s in classes}
            prov_node = {
                new[nv].node: [(v2n[val], p) for val, p in pairs]
                for nv, pairs in prov.items()
            }
            node_set = {s.node: s for _, s in next_classes}
            node_value = {s.node: val for val, s in next_classes}

            def skey(val):
                return (1,) if val is TOP else (0, val)

            order = sorted(node_value, key=lambda n: skey(node_value[n]))
            while True:
                step = {}
                consistent = True
                for node, sources in prov_node.items():
                    vals = {_prog_value(node_value[sn], p, odds, caps)
                            for sn, p in sources}
                    if len(vals) != 1:
                        consistent = False
                        break
                    step[node] = vals.pop()
                if not consistent:
                    break
                if step == node_value:
                    # global fixpoint reached during replay
                    next_classes = None
                    break
                fresh_top = any(
                    step[n] is TOP and node_value[n] is not TOP
                    for n in step)
                node_value = step
                collided = len(set(node_value.values())) < len(node_value)
                new_order = sorted(
                    node_value, key=lambda n: skey(node_value[n]))
                if fresh_top or collided or new_order != order:
                    break

            rebuilt = {}
            for node, val in node_value.items():
                if val in rebuilt:
                    rebuilt[val] = rebuilt[val] | node_set[node]
                else:
                    rebuilt[val] = node_set[node]
            if next_classes is None:
                classes = sorted(
                    rebuilt.items(), key=lambda c: (c[0] is TOP, c[0]))
                break
            next_classes = sorted(
                rebuilt.items(), key=lambda c: (c[0] is TOP, c[0]))

        classes = next_classes

    w1 = st.false
    for value, sset in classes:
        if value is TOP:
            w1 = w1 | sset
    return v & ~w1, w1


def winning_states(sg, sdpa, coalition, game=None):
    """CGS state ids from which the coalition wins, symbolically."""
    if game is None:
        game = build_game(sg, sdpa, coalition)
    st = sg.store
    w0, _ = solve_progress_measure(game)

    # entry: position vertex at the automaton state reached on the
    # current state's label from the initial automaton state
    entry = sdpa.init & sdpa.delta
    entry = st.exists(sdpa.s.vars, entry)
    entry = st.rename(entry, sg.q_next, sg.q)
    entry = st.rename(entry, sdpa.s_next, sdpa.s)

    reach = cgsmod.reachable(sg)
    pos = w0 & game.v0 & entry & reach
    other_vars = [x for b, _ in game.blocks if b is not sg.q
                  for x in b.vars]
    states = st.exists(other_vars, pos)
    return set(st.minterms(states & sg.valid, sg.q))
