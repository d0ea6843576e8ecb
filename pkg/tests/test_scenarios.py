import copy
import json
from fractions import Fraction

import pytest

from cellkit.cells import fiber
from cellkit.errors import ScenarioError
from cellkit.scenario import load_scenario, parse_scenario, shipped_scenarios

import oracles

SCN = shipped_scenarios()

BASE = {
    "name": "t",
    "p": 3,
    "window": {"lo": 0, "N": 3},
    "cell": {"kind": "small", "n": 1, "m": 1, "lambda": "p^0 * (1)", "gamma": {"s": 0}},
    "sigma": {"s": [{"center": "0", "radius": 1}]},
}


def test_corpus_is_nonempty_and_parses():
    assert len(SCN) >= 20
    for name, path in SCN.items():
        scn = load_scenario(path)
        assert scn.name == name
        assert scn.window.size() <= 10**6


@pytest.mark.parametrize("name", sorted(SCN))
def test_fibers_match_brute_force(name):
    scn = load_scenario(SCN[name])
    if scn.cell is None:
        pytest.skip("no cell")
    w = scn.window
    for s in scn.cell.base:
        got = set(fiber(scn.cell, s, w).codes().tolist())
        centers = oracles.balls_codes(scn.sigma[s], w.p, w.lo, w.N)
        assert got == oracles.fiber_codes(scn.cell.condition, centers, s, w.p, w.lo, w.N)


def test_hash_is_key_order_independent():
    a = parse_scenario(BASE)
    b = parse_scenario(json.loads(json.dumps(BASE, sort_keys=True)))
    assert a.sha256 == b.sha256
    other = copy.deepcopy(BASE)
    other["name"] = "u"
    assert parse_scenario(other).sha256 != a.sha256


def test_lambda_read_exactly():
    d = copy.deepcopy(BASE)
    d["cell"]["lambda"] = "p^0 * (2,1)"
    d["cell"]["m"] = 2
    scn = parse_scenario(d)
    assert scn.cell.condition.lam.to_fraction() == 5


def test_translate_by_f():
    d = copy.deepcopy(BASE)
    d["sigma"] = {"translate_by": "f", "balls": [{"center": "0", "radius": 0}]}
    d["f"] = {"opaque": True, "values": {"s": "p^-1 * (1)"}}
    d["window"] = {"lo": -1, "N": 3}
    scn = parse_scenario(d)
    assert [b.key for b in scn.sigma["s"]] == [Fraction(1, 3)]


def _bad(mutate):
    d = copy.deepcopy(BASE)
    mutate(d)
    with pytest.raises(ScenarioError):
        parse_scenario(d)


def test_rejections():
    _bad(lambda d: d.update(p="three"))
    _bad(lambda d: d.update(extra=1))
    _bad(lambda d: d["cell"].update(gamma={}))
    _bad(lambda d: d["cell"].pop("gamma"))
    _bad(lambda d: d["cell"].update(kind="large", alpha={"s": 0}, beta={"s": 1}))
    _bad(lambda d: d["cell"].update(kind="large"))
    _bad(lambda d: d.update(base=["s", "t"]))
    _bad(lambda d: d["sigma"].update(t=[]))
    _bad(lambda d: d["window"].update(lo=5))
    _bad(lambda d: d["cell"].update(**{"lambda": "0"}))
    _bad(lambda d: d.update(sigma={"translate_by": "f", "balls": []}))
    _bad(lambda d: d["sigma"]["s"].append({"center": "0", "radius": 2}))


def test_invalid_corpus_rejected():
    from importlib import resources
    for entry in (resources.files("cellkit") / "scenarios" / "invalid").iterdir():
        with pytest.raises(ScenarioError):
            load_scenario(entry)
