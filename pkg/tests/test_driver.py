import json
import warnings

import pytest

from atlstar import cgs
from atlstar import driver


MODEL = """
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


def model(final=True):
    text = MODEL if final else MODEL.replace("final: s2\n", "")
    return cgs.parse_model(text)


def run(formula, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return driver.check(model=model(final=kw.pop("final", True)),
                            formula=formula, **kw)


def test_basic_check():
    res = run("<<a,b>> F goal")
    assert res.holds is True
    assert res.states == [0, 1, 2]
    assert res.state_names == ["s0", "s1", "s2"]
    assert set(res.timings_ms) >= {"translate", "build", "solve", "total"}


def test_double_negation():
    a = run("<<a>> G p")
    b = run("!!(<<a>> G p)")
    assert a.states == b.states


def test_boolean_combinations():
    conj = run("(<<a>> G p) & (<<a,b>> F goal)")
    left = run("<<a>> G p")
    right = run("<<a,b>> F goal")
    assert set(conj.states) == set(left.states) & set(right.states)
    disj = run("(<<a>> G p) | (<<a,b>> F goal)")
    assert set(disj.states) == set(left.states) | set(right.states)


def test_nested_strategic():
    res = run("<<a>> F (goal & <<a,b>> G goal)")
    assert res.holds in (True, False)
    assert len(res.details["subformulas"]) == 2


def test_engines_agree_finite():
    for text in ("<<a,b>> F goal", "<<a>> G p", "<<>> F p"):
        sym = run(text, engine="symbolic")
        exp = run(text, engine="explicit")
        assert sym.states == exp.states, text


def test_engines_and_solvers_agree_infinite():
    for text in ("<<a,b>> F goal", "<<a>> G p", "<<a>> G (p -> F goal)"):
        sym = run(text, semantics="infinite", engine="symbolic",
                  final=False)
        exp = run(text, semantics="infinite", engine="explicit",
                  final=False)
        zie = run(text, semantics="infinite", solver="zielonka",
                  final=False)
        assert sym.states == exp.states == zie.states, text


def test_path_formula_rejected_at_top_level():
    with pytest.raises(driver.DriverError, match="strategic"):
        run("F goal")


def test_unknown_agent():
    with pytest.raises(driver.DriverError, match="unknown agent"):
        run("<<zz>> F goal")


def test_bad_options():
    with pytest.raises(driver.DriverError, match="semantics"):
        run("<<a>> F goal", semantics="bogus")
    with pytest.raises(driver.DriverError, match="engine"):
        run("<<a>> F goal", engine="bogus")
    with pytest.raises(driver.DriverError, match="solver"):
        run("<<a>> F goal", solver="bogus")


def test_warnings():
    with pytest.warns(UserWarning, match="no final"):
        driver.check(model=model(final=False), formula="<<a>> G p")
    with pytest.warns(UserWarning, match="ignores final"):
        driver.check(model=model(), formula="<<a>> G p", semantics="infinite")


def test_to_json_shape():
    res = run("<<a,b>> F goal")
    data = json.loads(res.to_json())
    assert data["holds"] is True
    assert data["states"] == [0, 1, 2]
    assert data["formula"]
    assert isinstance(data["timings_ms"]["total"], (int, float))


def test_request_object_equivalent():
    req = driver.CheckRequest(model=model(), formula="<<a,b>> F goal")
    assert driver.check(req).states == run("<<a,b>> F goal").states
