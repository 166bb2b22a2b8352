"""Deterministic parity automata for LTL path formulas.

Automata come either from external translator tools speaking the HOA v1
format (run as a race, first valid output wins) or from a built-in
fallback covering the safety / co-safety fragments plus the propositional
response pattern G(a -> F b).  Transition-based acceptance is converted
to state-based priorities and polarity is normalized to min-even:
coalition-accepting runs are exactly those whose minimal recurring
priority is even.
"""

from __future__ import annotations

import concurrent.futures
import os
import re
import subprocess
import tempfile
from dataclasses import dataclass, field

from . import formula as fm
from . import ltlf2dfa


class HoaError(Exception):
    pass


class DpaError(Exception):
    pass


# ---------------------------------------------------------------------------
# HOA v1 parsing

@dataclass
class HoaEdge:
    label: object      # label expression AST, or None for implicit
    dest: int
    acc_sets: tuple


@dataclass
class HoaState:
    sid: int
    label: object
    acc_sets: tuple
    edges: list


@dataclass
class HoaAutomaton:
    n_states: int
    start: int
    aps: list
    acc_name: tuple          # tokens of the acc-name header, may be empty
    acceptance: str
    properties: list
    states: dict             # sid -> HoaState

    def alphabet(self):
        return range(1 << len(self.aps))


_HOA_TOKEN = re.compile(r"\s+|\"(?:[^\"\\]|\\.)*\"|\[|\]|\{|\}|[()!&|]|[^\s\[\]{}()!&|]+")


def _parse_label_expr(text):
    """Parse a HOA label expression into a nested tuple AST."""
    tokens = [t for t in re.findall(r"[()!&|]|t|f|\d+", text)]
    pos = [0]

    def peek():
        return tokens[pos[0]] if pos[0] < len(tokens) else None

    def eat():
        t = tokens[pos[0]]
        pos[0] += 1
        return t

    def expr():
        left = term()
        while peek() == "|":
            eat()
            left = ("or", left, term())
        return left

    def term():
        left = factor()
        while peek() == "&":
            eat()
            left = ("and", left, factor())
        return left

    def factor():
        t = peek()
        if t == "!":
            eat()
            return ("not", factor())
        if t == "(":
            eat()
            e = expr()
            if eat() != ")":
                raise HoaError(f"unbalanced parentheses in label [{text}]")
            return e
        if t == "t":
            eat()
            return ("true",)
        if t == "f":
            eat()
            return ("false",)
        if t is not None and t.isdigit():
            eat()
            return ("ap", int(t))
        raise HoaError(f"bad label expression [{text}]")

    e = expr()
    if pos[0] != len(tokens):
        raise HoaError(f"trailing tokens in label [{text}]")
    return e


def eval_label(expr, letter):
    op = expr[0]
    if op == "true":
        return True
    if op == "false":
        return False
    if op == "ap":
        return bool((letter >> expr[1]) & 1)
    if op == "not":
        return not eval_label(expr[1], letter)
    if op == "and":
        return eval_label(expr[1], letter) and eval_label(expr[2], letter)
    if op == "or":
        return eval_label(expr[1], letter) or eval_label(expr[2], letter)
    raise HoaError(f"bad label op {op!r}")


def parse_hoa(text):
    """Parse a HOA v1 automaton (deterministic, single start state)."""
    if "--BODY--" not in text:
        raise HoaError("missing --BODY-- marker")
    header_text, body_text = text.split("--BODY--", 1)
    if "--END--" in body_text:
        body_text = body_text.split("--END--", 1)[0]

    n_states = None
    start = None
    aps = []
    acc_name = ()
    acceptance = ""
    properties = []
    for raw in header_text.splitlines():
        line = raw.strip()
        if not line or line.startswith("HOA:"):
            continue
        if ":" not in line:
            raise HoaError(f"malformed header line: {line!r}")
        key, rest = line.split(":", 1)
        key = key.strip()
        rest = rest.strip()
        if key == "States":
            n_states = int(rest)
        elif key == "Start":
            start = int(rest)
        elif key == "AP":
            parts = re.findall(r'"((?:[^"\\]|\\.)*)"|(\S+)', rest)
            count = int([a or b for a, b in parts][0])
            aps = [a or b for a, b in parts][1:]
            if len(aps) != count:
                raise HoaError("AP count mismatch")
        elif key == "acc-name":
            acc_name = tuple(rest.split())
        elif key == "Acceptance":
            acceptance = rest
        elif key == "properties":
            properties.extend(rest.split())
        # tool, name, etc. ignored

    if start is None:
        raise HoaError("missing Start header")

    states = {}
    current = None
    for raw in body_text.splitlines():
        line = raw.strip()
        if not line or line.startswith("/*"):
            continue
        if line.startswith("State:"):
            rest = line[len("State:"):].strip()
            label = None
            if rest.startswith("["):
                lbl, rest = rest[1:].split("]", 1)
                label = _parse_label_expr(lbl)
                rest = rest.strip()
            m = re.match(r"(\d+)\s*(?:\"[^\"]*\")?\s*(\{[^}]*\})?", rest)
            if not m:
                raise HoaError(f"malformed State line: {line!r}")
            sid = int(m.group(1))
            acc = ()
            if m.group(2):
                acc = tuple(int(x) for x in m.group(2)[1:-1].split())
            current = HoaState(sid=sid, label=label, acc_sets=acc, edges=[])
            states[sid] = current
        else:
            if current is None:
                raise HoaError(f"edge before any State: {line!r}")
            label = None
            rest = line
            if rest.startswith("["):
                lbl, rest = rest[1:].split("]", 1)
                label = _parse_label_expr(lbl)
                rest = rest.strip()
            m = re.match(r"(\d+)\s*(\{[^}]*\})?", rest)
            if not m:
                raise HoaError(f"malformed edge line: {line!r}")
            dest = int(m.group(1))
            acc = ()
            if m.group(2):
                acc = tuple(int(x) for x in m.group(2)[1:-1].split())
            current.edges.append(HoaEdge(label=label, dest=dest, acc_sets=acc))

    if n_states is None:
        n_states = (max(states) + 1) if states else 0
    for sid in range(n_states):
        if sid not in states:
            raise HoaError(f"state {sid} missing from body")

    return HoaAutomaton(
        n_states=n_states, start=start, aps=aps, acc_name=acc_name,
        acceptance=acceptance, properties=properties, states=states,
    )


def write_hoa(dpa):
    """Serialize a state-based Dpa as HOA v1 text."""
    k = max(dpa.priority.values()) + 1 if dpa.priority else 1
    lines = [
        "HOA: v1",
        f"States: {dpa.n_states}",
        f"Start: {dpa.initial}",
        f"AP: {len(dpa.atoms)} " + " ".join(f'"{p}"' for p in dpa.atoms),
        f"acc-name: parity {dpa.polarity} {k}",
        "Acceptance: %d %s" % (k, _parity_acceptance_expr(dpa.polarity, k)),
        "properties: deterministic state-acc complete",
        "--BODY--",
    ]
    for s in range(dpa.n_states):
        lines.append(f"State: {s} {{{dpa.priority[s]}}}")
        for a in range(1 << len(dpa.atoms)):
            expr = " & ".join(
                (f"{i}" if (a >> i) & 1 else f"!{i}")
                for i in range(len(dpa.atoms))
            ) or "t"
            lines.append(f"  [{expr}] {dpa.delta[(s, a)]}")
    lines.append("--END--")
    return "\n".join(lines) + "\n"


def _parity_acceptance_expr(polarity, k):
    # standard HOA parity acceptance formula, built innermost-first
    kind, par = polarity.split()
    expr = None
    order = list(range(k - 1, -1, -1)) if kind == "min" else list(range(k))
    for i in order:
        accepting = (i % 2 == 0) == (par == "even")
        atom = f"Inf({i})" if accepting else f"Fin({i})"
        if expr is None:
            expr = atom
        else:
            expr = f"({atom} | {expr})" if accepting else f"({atom} & {expr})"
    return expr or "t"


# ---------------------------------------------------------------------------
# Deterministic parity automata

@dataclass
class Dpa:
    """State-based deterministic parity automaton over letter bitmasks."""

    atoms: tuple
    n_states: int
    initial: int
    delta: dict              # (state, letter mask) -> state
    priority: dict           # state -> non-negative int
    polarity: str = "min even"   # acceptance convention for this priority map

    def letter(self, labels):
        mask = 0
        for i, p in enumerate(self.atoms):
            if p in labels:
                mask |= 1 << i
        return mask

    def accepts_lasso(self, prefix, loop):
        """Acceptance of the ultimately periodic word prefix . loop^omega.

        ``prefix``/``loop`` are sequences of letter masks; loop nonempty.
        """
        s = self.initial
        for a in prefix:
            s = self.delta[(s, a)]
        seen = {}
        trail = []
        i = 0
        while s not in seen:
            seen[s] = i
            trail.append(s)
            s = self.delta[(s, loop[i % len(loop)])]
            i += len(loop)  # advance a whole loop iteration at a time
        # recompute with single steps for exact recurring set
        s0 = self.initial
        for a in prefix:
            s0 = self.delta[(s0, a)]
        seen2 = {}
        s, pos = s0, 0
        path = []
        while (s, pos % len(loop)) not in seen2:
            seen2[(s, pos % len(loop))] = len(path)
            path.append(s)
            s = self.delta[(s, loop[pos % len(loop)])]
            pos += 1
        start = seen2[(s, pos % len(loop))]
        recurring = path[start:]
        prios = [self.priority[q] for q in recurring]
        kind, par = self.polarity.split()
        rec = min(prios) if kind == "min" else max(prios)
        return (rec % 2 == 0) == (par == "even")


def state_based_priorities(hoa):
    """Convert a parity HOA automaton to a state-based Dpa.

    Transition-based priorities are handled by splitting states per
    incoming priority class, which preserves the language (unlike a
    first-discovered assignment).  Unreachable states are dropped.
    """
    polarity, k = _parity_polarity(hoa)
    letters = list(hoa.alphabet())

    # edge priority: explicit mark, else the state mark, else the neutral
    # priority that cannot affect any acceptance decision
    neutral = k if polarity.startswith("min") else 0

    def edge_priority(state, edge):
        if edge.acc_sets:
            return min(edge.acc_sets)
        if state.acc_sets:
            return min(state.acc_sets)
        return neutral

    def resolve(sid, letter):
        st = hoa.states[sid]
        implicit = [e for e in st.edges if e.label is None]
        if implicit:
            if len(implicit) != len(letters):
                raise HoaError(
                    f"state {sid}: implicit edges must cover the alphabet"
                )
            return implicit[letter]
        matches = [e for e in st.edges if eval_label(e.label, letter)]
        if len(matches) != 1:
            raise HoaError(
                f"automaton not deterministic-total at state {sid}, "
                f"letter {letter}"
            )
        return matches[0]

    state_based = all(
        not e.acc_sets for st in hoa.states.values() for e in st.edges
    )

    ids = {}
    order = []

    def get_id(key):
        if key not in ids:
            ids[key] = len(order)
            order.append(key)
        return ids[key]

    start_key = (hoa.start, None)
    get_id(start_key)
    delta = {}
    priority = {}
    i = 0
    while i < len(order):
        key = order[i]
        sid, prio = key
        me = get_id(key)
        if prio is None:
            st = hoa.states[sid]
            priority[me] = min(st.acc_sets) if st.acc_sets else neutral
        else:
            priority[me] = prio
        for a in letters:
            e = resolve(sid, a)
            if state_based:
                tkey = (e.dest, None)
            else:
                tkey = (e.dest, edge_priority(hoa.states[sid], e))
            delta[(me, a)] = get_id(tkey)
        i += 1

    return Dpa(
        atoms=tuple(hoa.aps),
        n_states=len(order),
        initial=0,
        delta=delta,
        priority=priority,
        polarity=polarity,
    )


def _parity_polarity(hoa):
    """Extract ('min even'/'min odd'/'max even'/'max odd', k) from headers."""
    name = hoa.acc_name
    if name and name[0] == "parity":
        if len(name) < 4:
            raise HoaError(f"malformed parity acc-name: {name}")
        return f"{name[1]} {name[2]}", int(name[3])
    if name and name[0] == "Buchi":
        return "buchi", 1
    if name and name[0] in ("co-Buchi", "coBuchi"):
        return "co-buchi", 1
    raise HoaError(
        f"unsupported acceptance family: {name or hoa.acceptance!r}"
    )


def hoa_to_dpa(hoa):
    """Full pipeline: state-based priorities, then min-even normal form."""
    polarity, _ = _parity_polarity(hoa)
    if polarity == "buchi":
        d = state_based_priorities(_as_parity(hoa, "min even"))
        # acc set 0 = Buchi accepting: visited infinitely often
        prio = {s: (0 if p == 0 else 1) for s, p in d.priority.items()}
        return Dpa(d.atoms, d.n_states, d.initial, d.delta, prio, "min even")
    if polarity == "co-buchi":
        d = state_based_priorities(_as_parity(hoa, "min even"))
        prio = {s: (1 if p == 0 else 2) for s, p in d.priority.items()}
        return Dpa(d.atoms, d.n_states, d.initial, d.delta, prio, "min even")
    return normalize_acceptance(state_based_priorities(hoa))


def _as_parity(hoa, polarity):
    kind, par = polarity.split()
    return HoaAutomaton(
        n_states=hoa.n_states, start=hoa.start, aps=hoa.aps,
        acc_name=("parity", kind, par, "2"), acceptance=hoa.acceptance,
        properties=hoa.properties, states=hoa.states,
    )


def normalize_acceptance(d):
    """Rewrite priorities so acceptance means: minimal recurring is even."""
    if d.polarity == "min even":
        return d
    prios = d.priority
    if not prios:
        return d
    top = max(prios.values())
    kind, par = d.polarity.split()
    if kind == "max":
        # flip max to min; parity of each priority flips iff top is odd
        new = {s: top - p for s, p in prios.items()}
        par = par if top % 2 == 0 else ("odd" if par == "even" else "even")
    else:
        new = dict(prios)
    if par == "odd":
        # uniform shift keeps relative order and swaps parity
        if min(new.values()) >= 1:
            new = {s: p - 1 for s, p in new.items()}
        else:
            new = {s: p + 1 for s, p in new.items()}
    return Dpa(d.atoms, d.n_states, d.initial, d.delta, new, "min even")


# ---------------------------------------------------------------------------
# Symbolic encoding

@dataclass
class SymbolicDpa:
    dpa: Dpa
    store: object
    s: object
    s_next: object
    c: object          # priority bits
    delta: object      # Bdd over (s, q', s')
    omega: object      # Bdd over (s, c)
    init: object
    valid: object
    priority_sets: dict  # priority -> Bdd over s


def encode_dpa(dpa, sg, extra_labels=None):
    """Symbolic DPA transition relation and priority map against a CGS."""
    if dpa.polarity != "min even":
        raise DpaError("encode_dpa requires a min-even normalized automaton")
    store = sg.store
    s = store.block("s")
    sn = store.block("s'")
    labels = dict(sg.lambda_)
    if extra_labels:
        labels.update(extra_labels)

    guards = {}
    for (st_, a), t in dpa.delta.items():
        guards.setdefault((st_, t), []).append(a)
    cubes = []
    for (src, dst), letters in sorted(guards.items()):
        guard = store.big_or([
            ltlf2dfa._letter_guard(store, sg, dpa.atoms, a, labels)
            for a in letters
        ])
        guard = store.rename(guard, sg.q, sg.q_next)
        cubes.append(store.cube(s, src) & guard & store.cube(sn, dst))
    delta = store.big_or(cubes)

    k = max(dpa.priority.values()) + 1
    try:
        c = store.block("c")
    except KeyError:
        c = None
    omega = store.false
    priority_sets = {}
    for p in range(k):
        members = [q for q in range(dpa.n_states) if dpa.priority[q] == p]
        if not members:
            continue
        pset = store.big_or([store.cube(s, q) for q in members])
        priority_sets[p] = pset
        if c is not None:
            omega = omega | (pset & store.cube(c, p))

    valid = store.big_or([store.cube(s, i) for i in range(dpa.n_states)])
    return SymbolicDpa(
        dpa=dpa, store=store, s=s, s_next=sn, c=c, delta=delta,
        omega=omega, init=store.cube(s, dpa.initial), valid=valid,
        priority_sets=priority_sets,
    )


# ---------------------------------------------------------------------------
# Built-in fallback translator

def _is_cosafety(f):
    k = f.kind
    if k in ("release", "globally", "wnext"):
        return False
    return all(_is_cosafety(c) for c in f.children)


def _is_safety(f):
    k = f.kind
    if k in ("until", "finally", "next"):
        return False
    return all(_is_safety(c) for c in f.children)


def _response_pattern(psi):
    """Match G(a -> F b) with propositional a, b; return (a, b) or None."""
    if psi.kind != "globally":
        return None
    body = psi.children[0]
    trigger = None
    target = None
    if body.kind == "or":
        l, r = body.children
        if r.kind == "finally":
            trigger, target = fm.not_(l), r.children[0]
        elif l.kind == "finally":
            trigger, target = fm.not_(r), l.children[0]
    elif body.kind == "finally":
        trigger, target = fm.TRUE, body.children[0]
    if trigger is None:
        return None

    def propositional(f):
        return f.kind in ("atom", "true", "false") or (
            f.kind in ("not", "and", "or")
            and all(propositional(c) for c in f.children)
        )

    if propositional(trigger) and propositional(target):
        return trigger, target
    return None


def _prop_holds(f, labels):
    k = f.kind
    if k == "atom":
        return f.name in labels
    if k == "true":
        return True
    if k == "false":
        return False
    if k == "not":
        return not _prop_holds(f.children[0], labels)
    if k == "and":
        return all(_prop_holds(c, labels) for c in f.children)
    if k == "or":
        return any(_prop_holds(c, labels) for c in f.children)
    raise DpaError("not a propositional formula")


def fallback_translate(psi):
    """Direct DPA construction for the supported LTL fragments.

    Covers syntactic co-safety (no G/R), syntactic safety (no F/U/X),
    and the response pattern G(a -> F b) with propositional a, b.
    """
    core = fm.normalize(psi)

    resp = _response_pattern(psi) or _response_pattern(core_as_gl(core))
    if resp is not None:
        trigger, target = resp
        atoms = tuple(sorted(fm.atoms_of(trigger) | fm.atoms_of(target)))
        delta = {}
        for st in (0, 1):  # 0 = no pending obligation, 1 = pending
            for a in range(1 << len(atoms)):
                labels = {atoms[i] for i in range(len(atoms)) if (a >> i) & 1}
                if _prop_holds(target, labels):
                    nxt = 0
                elif _prop_holds(trigger, labels):
                    nxt = 1
                else:
                    nxt = st
                delta[(st, a)] = nxt
        return Dpa(
            atoms=atoms, n_states=2, initial=0, delta=delta,
            priority={0: 0, 1: 1}, polarity="min even",
        )

    if _is_cosafety(core):
        # good prefixes are extension-closed: DFA-accepting visited
        # infinitely often iff some good prefix exists
        d = ltlf2dfa.translate(psi)
        prio = {s: (0 if s in d.finals else 1) for s in range(d.n_states)}
        return Dpa(d.atoms, d.n_states, d.initial, dict(d.delta), prio,
                   "min even")

    if _is_safety(core):
        # bad prefixes of psi = good prefixes of !psi, a co-safety formula
        d = ltlf2dfa.translate(fm.not_(psi))
        prio = {s: (1 if s in d.finals else 0) for s in range(d.n_states)}
        return Dpa(d.atoms, d.n_states, d.initial, dict(d.delta), prio,
                   "min even")

    raise DpaError(
        "no external translator configured and the built-in fallback does "
        f"not cover this formula: {psi}"
    )


def core_as_gl(core):
    # the NNF of G(a -> F b) is false R (!a | true U b); recover a G shape
    if core.kind == "release" and core.children[0].kind == "false":
        body = core.children[1]
        return fm.globally(_unexpand_f(body))
    return core


def _unexpand_f(f):
    if f.kind == "until" and f.children[0].kind == "true":
        return fm.finally_(_unexpand_f(f.children[1]))
    if not f.children:
        return f
    return fm.Formula(
        f.kind, tuple(_unexpand_f(c) for c in f.children), f.name, f.coalition
    )


# ---------------------------------------------------------------------------
# Translator race

@dataclass
class RaceResult:
    hoa: HoaAutomaton
    tool: str


def race_translate(psi, tools, timeout=60.0):
    """Run external translator commands concurrently; first valid HOA wins.

    ``tools`` are command templates with ``{formula}`` and optional
    ``{outfile}`` placeholders.  With no tools configured the built-in
    fallback is used and reported with tool name "builtin".
    """
    if not tools:
        d = fallback_translate(psi)
        return RaceResult(hoa=parse_hoa(write_hoa(d)), tool="builtin")

    text = str(psi)
    errors = {}
    procs = []

    def run(template):
        outfile = None
        try:
            fd, outfile = tempfile.mkstemp(suffix=".hoa")
            os.close(fd)
            cmd = template.format(formula=text, outfile=outfile)
            proc = subprocess.Popen(
                cmd, shell=True, stdout=subprocess.PIPE,
                stderr=subprocess.PIPE, text=True,
            )
            procs.append(proc)
            out, err = proc.communicate(timeout=timeout)
            if proc.returncode != 0:
                raise DpaError(f"exit code {proc.returncode}: {err.strip()}")
            data = out
            if "{outfile}" in template:
                with open(outfile) as fh:
                    data = fh.read()
            return parse_hoa(data)
        finally:
            if outfile and os.path.exists(outfile):
                os.unlink(outfile)

    with concurrent.futures.ThreadPoolExecutor(len(tools)) as pool:
        futures = {pool.submit(run, t): t for t in tools}
        winner = None
        for fut in concurrent.futures.as_completed(futures, timeout=timeout * 2):
            t = futures[fut]
            try:
                hoa = fut.result()
            except Exception as e:  # invalid output or tool failure
                errors[t] = str(e)
                continue
            winner = RaceResult(hoa=hoa, tool=t)
            break
        for p in procs:
            if p.poll() is None:
                p.kill()
    if winner is not None:
        return winner
    causes = "; ".join(f"{t}: {e}" for t, e in errors.items())
    raise DpaError(f"all translator tools failed: {causes}")


def obtain_dpa(psi, tools=(), timeout=60.0):
    """Translate an LTL path formula to a normalized state-based Dpa."""
    if not tools:
        return fallback_translate(psi), "builtin"
    res = race_translate(psi, list(tools), timeout=timeout)
    return hoa_to_dpa(res.hoa), res.tool
