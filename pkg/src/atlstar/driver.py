"""Top-level model-checking driver.

Checks an ATL* state formula against a concurrent game structure by
recursive labelling: strategic subformulas are solved innermost-first,
their winning state sets become fresh labels, and the boolean skeleton
is evaluated per state.  Explicit state-id sets are the common currency
between engines, so each strategic subformula can pick its own store
and automaton size.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field

from . import cgs as cgsmod
from . import dpa as dpamod
from . import finite_mc
from . import formula as fm
from . import infinite_mc
from . import ltlf2dfa


class DriverError(Exception):
    pass


@dataclass
class CheckRequest:
    model: object            # Cgs
    formula: object          # Formula or str
    semantics: str = "finite"      # "finite" | "infinite"
    engine: str = "symbolic"       # "symbolic" | "explicit"
    solver: str = "progress"       # infinite only: "progress" | "zielonka"
    tools: tuple = ()              # external DPA translator commands
    byte_budget: int = 256 * 1024 * 1024
    product_cap: int = finite_mc.DEFAULT_PRODUCT_CAP


@dataclass
class CheckResult:
    formula: str
    semantics: str
    engine: str
    holds: bool
    states: list             # sorted ids where the formula holds
    state_names: list
    timings_ms: dict         # translate / build / solve / total
    details: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps({
            "formula": self.formula,
            "semantics": self.semantics,
            "engine": self.engine,
            "holds": self.holds,
            "states": self.states,
            "state_names": self.state_names,
            "timings_ms": {k: round(v, 3)
                           for k, v in sorted(self.timings_ms.items())},
            "details": self.details,
        }, indent=2, sort_keys=False)


def check(request=None, **kwargs):
    """Check a state formula; returns a CheckResult.

    Either pass a CheckRequest or the same fields as keywords.
    """
    req = request or CheckRequest(**kwargs)
    if isinstance(req.formula, str):
        psi = fm.parse_formula(req.formula)
    else:
        psi = req.formula
    if fm.classify(psi) != "state":
        raise DriverError(
            f"not a state formula (path operators must sit under a "
            f"strategic quantifier): {psi}"
        )
    if req.semantics not in ("finite", "infinite"):
        raise DriverError(f"unknown semantics {req.semantics!r}")
    if req.engine not in ("symbolic", "explicit"):
        raise DriverError(f"unknown engine {req.engine!r}")
    if req.solver not in ("progress", "zielonka"):
        raise DriverError(f"unknown solver {req.solver!r}")

    g = req.model
    cgsmod.validate(g)
    if req.semantics == "finite" and not g.final:
        warnings.warn("finite-trace semantics on a model with no final "
                      "states: traces never terminate, safety is vacuous")
    if req.semantics == "infinite" and g.final:
        warnings.warn("infinite-trace semantics ignores final states")

    timings = {"translate": 0.0, "build": 0.0, "solve": 0.0}
    details = {"subformulas": []}
    reachable = frozenset(g.reachable_states())

    extra = {}    # fresh atom -> set of states where it holds

    def label(f):
        k = f.kind
        if k == "true":
            return set(reachable)
        if k == "false":
            return set()
        if k == "atom":
            if f.name in extra:
                return set(extra[f.name])
            return {q for q in reachable if f.name in g.labels[q]}
        if k == "not":
            return set(reachable) - label(f.children[0])
        if k == "and":
            return label(f.children[0]) & label(f.children[1])
        if k == "or":
            return label(f.children[0]) | label(f.children[1])
        if k == "strategic":
            return label_strategic(f)
        raise DriverError(f"path operator outside strategic scope: {f}")

    def label_strategic(f):
        body, mapping = fm.extract_state_subformulas(f.children[0])
        for fresh, sub in mapping.items():
            extra[fresh] = label(sub)
        coalition = f.coalition
        for a in coalition:
            if a not in g.agents:
                raise DriverError(f"unknown agent {a!r} in coalition")
        if req.semantics == "finite":
            win = solve_finite(body, coalition)
        else:
            win = solve_infinite(body, coalition)
        details["subformulas"].append({
            "formula": str(f),
            "winning": sorted(win),
        })
        return win & reachable

    def solve_finite(body, coalition):
        t0 = time.perf_counter()
        dfa = ltlf2dfa.translate(body)
        t1 = time.perf_counter()
        timings["translate"] += (t1 - t0) * 1000
        if req.engine == "explicit":
            g2 = _with_extra_labels(g, extra)
            t2 = time.perf_counter()
            win = finite_mc.explicit_game_solving(
                g2, body, coalition, dfa=dfa,
                product_cap=req.product_cap)
            timings["solve"] += (time.perf_counter() - t2) * 1000
            return win
        store = cgsmod.make_store(
            g, automaton_bits=cgsmod.bits_for(dfa.n_states),
            byte_budget=req.byte_budget)
        sg = cgsmod.encode_symbolic(g, store)
        extra_bdds = {name: sg.set_bdd(states)
                      for name, states in extra.items()}
        sd = ltlf2dfa.encode_dfa(dfa, sg, extra_labels=extra_bdds)
        t2 = time.perf_counter()
        prod = finite_mc.build_product(sg, sd, coalition)
        t3 = time.perf_counter()
        res = finite_mc.solve_safety(prod)
        t4 = time.perf_counter()
        timings["build"] += (t3 - t2) * 1000
        timings["solve"] += (t4 - t3) * 1000
        return finite_mc.project_states(sg, sd, res.winning & prod.entry)

    def solve_infinite(body, coalition):
        t0 = time.perf_counter()
        dpa, tool = dpamod.obtain_dpa(body, tools=req.tools)
        t1 = time.perf_counter()
        timings["translate"] += (t1 - t0) * 1000
        details.setdefault("translators", []).append(tool)
        if req.engine == "explicit" or req.solver == "zielonka":
            g2 = _with_extra_labels(g, extra)
            infinite_mc.region_cap_check(
                len(g2.reachable_states()) * dpa.n_states)
            t2 = time.perf_counter()
            win = infinite_mc.winning_states_explicit(g2, dpa, coalition)
            timings["solve"] += (time.perf_counter() - t2) * 1000
            return win
        store = cgsmod.make_store(
            g, automaton_bits=cgsmod.bits_for(dpa.n_states), game=True,
            byte_budget=req.byte_budget)
        sg = cgsmod.encode_symbolic(g, store)
        extra_bdds = {name: sg.set_bdd(states)
                      for name, states in extra.items()}
        sd = dpamod.encode_dpa(dpa, sg, extra_labels=extra_bdds)
        t2 = time.perf_counter()
        game = infinite_mc.build_game(sg, sd, coalition)
        t3 = time.perf_counter()
        win = infinite_mc.winning_states(sg, sd, coalition, game=game)
        t4 = time.perf_counter()
        timings["build"] += (t3 - t2) * 1000
        timings["solve"] += (t4 - t3) * 1000
        return win

    t_start = time.perf_counter()
    states = label(psi)
    timings["total"] = (time.perf_counter() - t_start) * 1000
    holds = g.initial in states
    return CheckResult(
        formula=str(psi),
        semantics=req.semantics,
        engine=req.engine,
        holds=holds,
        states=sorted(states),
        state_names=[g.states[q] for q in sorted(states)],
        timings_ms=timings,
        details=details,
    )


def _with_extra_labels(g, extra):
    """Copy of the model with fresh labelling atoms added."""
    if not extra:
        return g
    atoms = list(g.atoms) + sorted(extra)
    labels = []
    for q in range(len(g.states)):
        row = set(g.labels[q])
        for name, states in extra.items():
            if q in states:
                row.add(name)
        labels.append(frozenset(row))
    return cgsmod.Cgs(
        agents=g.agents, atoms=atoms, states=g.states, initial=g.initial,
        final=g.final, actions=g.actions, transitions=g.transitions,
        labels=labels,
    )
