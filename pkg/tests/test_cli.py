import json
import subprocess
import sys

import pytest

from polytower.cli import main, replay
from polytower.field import SpaceShape
from polytower.multiaffine import MultiLinearMap
from polytower.poly import Poly
from polytower.serialize import (collection_to_json, map_from_json, map_to_json,
                                 tower_from_json, tower_to_json)
from polytower.tower import Tower


@pytest.fixture
def run(tmp_path):
    counter = iter(range(10**6))

    def _run(*argv):
        out = tmp_path / f"out{next(counter)}.json"
        code = main([*map(str, argv), "--out", str(out)])
        return code, json.loads(out.read_text())
    return _run


@pytest.fixture
def put(tmp_path):
    def _put(name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return path
    return _put


def xy():
    return Poly(3, 2, {(1, 1): 1})


def x1x2_x3x4(p=3):
    return Poly(p, 4, {(1, 1, 0, 0): 1, (0, 0, 1, 1): 1})


def test_bias(run, put):
    code, man = run("bias", "--poly", put("f.json", map_to_json(xy())))
    assert code == 0
    assert man["format"] == "polytower.manifest/1"
    assert man["payload"]["histogram"] == [5, 2, 2]
    assert abs(man["payload"]["bias"] - 1 / 3) < 1e-12
    code, man = run("bias", "--poly", put("z.json", map_to_json(Poly.zero(3, 2))))
    assert man["payload"]["bias"] == 1.0


def test_bias_monte_carlo(run, put):
    f = put("f.json", map_to_json(Poly(3, 3, {(1, 1, 0): 1, (0, 0, 1): 1})))
    t = put("t.json", tower_to_json(Tower.from_polys([Poly.linear(3, [0, 0, 1])])))
    code, man = run("bias", "--poly", f, "--on", t, "--mc", 100000, "--seed", 7)
    assert code == 0
    est = man["payload"]
    _, exact = run("bias", "--poly", f, "--on", t)
    assert abs(est["bias"] - exact["payload"]["bias"]) <= est["half_width"]


def test_rank_modes(run, put):
    code, man = run("rank", "--mode", "schmidt", "--poly", put("q.json", map_to_json(x1x2_x3x4())))
    assert code == 0 and man["payload"]["lower"] == 2 and man["payload"]["upper"] == 2
    assert man["payload"]["certificate"]["claimed_rank"] == 2
    p = put("p.json", map_to_json(Poly(3, 2, {(1, 1): 1})))
    t = put("t.json", tower_to_json(Tower.from_polys([Poly.linear(3, [1, 0])])))
    code, man = run("rank", "--mode", "relative", "--poly", p, "--tower", t)
    assert man["payload"]["upper"] == 0
    sh = SpaceShape(3, (2, 2))
    m = put("m.json", map_to_json(MultiLinearMap(sh, (0, 1), {(0, 0): 1, (1, 1): 1})))
    code, man = run("rank", "--mode", "partition", "--ml", m)
    assert man["payload"]["upper"] == 2


def test_rank_certificate_replay(run, put, tmp_path):
    q = put("q.json", map_to_json(x1x2_x3x4(5)))
    _, man = run("rank", "--mode", "schmidt", "--poly", q)
    cert = put("cert.json", man["payload"]["certificate"])
    code, man = run("rank", "--mode", "schmidt", "--poly", q, "--certificate", cert)
    assert code == 0 and man["payload"]["certificate_check"]
    doc = json.loads(cert.read_text())
    doc["pairs"][0][0]["terms"][0]["c"] = doc["pairs"][0][0]["terms"][0]["c"] % 4 + 1
    bad = put("bad.json", doc)
    code, man = run("rank", "--mode", "schmidt", "--poly", q, "--certificate", bad)
    assert code == 1 and not man["payload"]["certificate_check"]


def test_rank_require_exact(run, put):
    P = Poly(5, 6, {(1, 1, 1, 0, 0, 0): 1, (0, 0, 0, 1, 1, 1): 1, (1, 0, 0, 1, 0, 1): 2})
    f = put("c.json", map_to_json(P))
    code, man = run("rank", "--mode", "schmidt", "--poly", f, "--budget", 1, "--require-exact")
    if man["payload"]["status"] == "Exact":
        assert code == 0
    else:
        assert code == 4


def test_regularize(run, put):
    P = x1x2_x3x4()
    code, man = run("regularize", "--polys", put("one.json", collection_to_json([P])),
                    "--s", 0.5)
    assert code == 0
    out = man["payload"]
    assert out["result"]["towers"][0]["layers"][0]["maps"] == [map_to_json(P)]
    R = [Poly(3, 6, {(1, 1, 0, 0, 0, 0): 1, (0, 0, 1, 1, 0, 0): 1, (0, 0, 0, 0, 1, 1): 1})] * 2
    code, man = run("regularize", "--polys", put("dup.json", collection_to_json(R)), "--s", 0.5)
    assert code == 0 and man["payload"]["verification"]["disjoint_union"]
    first = man["payload"]["result"]["towers"][0]
    assert sum(len(l["maps"]) for l in first["layers"] if l["degree"] == 2) == 1


def test_verify_checks(run, put):
    lin = Tower.from_polys([Poly.linear(3, [1, 0, 0]), Poly.linear(3, [0, 1, 1])])
    code, man = run("verify", "atom-size", "--tower", put("lin.json", tower_to_json(lin)),
                    "--s", 2)
    assert code == 0 and man["payload"]["defect"] == "0"
    code, man = run("verify", "fibers", "--polys",
                    put("f.json", collection_to_json([x1x2_x3x4()])))
    assert code == 1 and man["payload"]["deviation"] == 0.375
    x1, x3 = Poly.linear(3, [1, 0, 0]), Poly.linear(3, [0, 0, 1])
    member = Poly(3, 3, {(1, 1, 0): 1, (0, 0, 1): 1})
    code, man = run("verify", "nullstellensatz", "--poly", put("m.json", map_to_json(member)),
                    "--tower", put("t.json", tower_to_json(Tower.from_polys([x1, x3]))))
    assert code == 0 and man["payload"]["feasible"]


def test_random_and_round_trip(run, tmp_path):
    code, a = run("random", "poly", "--p", 5, "--n", 3, "--d", 2, "--seed", 4, "--payload-only")
    code2, b = run("random", "poly", "--p", 5, "--n", 3, "--d", 2, "--seed", 4, "--payload-only")
    assert code == code2 == 0 and a == b
    assert map_to_json(map_from_json(a)) == a
    code, t = run("random", "tower", "--p", 5, "--n", 3, "--degrees", "1,2",
                  "--sizes", "2,1", "--seed", 1, "--payload-only")
    assert code == 0
    from polytower.serialize import tower_to_json as back
    assert back(tower_from_json(t)) == t
    code, err = run("random", "poly", "--p", 3, "--n", 2, "--d", 3)
    assert code == 2 and err["error"] == "CharacteristicTooSmall"


def test_parse_and_limit_errors(run, put, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, err = run("bias", "--poly", bad)
    assert code == 2 and err["error"] == "ParseError"
    big = put("big.json", map_to_json(Poly.linear(3, [1] * 12)))
    code, err = run("bias", "--poly", big, "--limit", 1000)
    assert code == 3 and err["error"] == "LimitExceeded"


def test_replay_identical(run, put, tmp_path):
    f = put("f.json", map_to_json(xy()))
    _, man = run("bias", "--poly", f)
    same, new = replay(man)
    assert same and new["payload_sha256"] == man["payload_sha256"]
    path = put("man.json", man)
    code, rep = run("replay", path)
    assert code == 0 and rep["identical"]
    man["payload"]["bias"] = 0.5
    code, rep = run("replay", put("tampered.json", man))
    assert code == 1 and not rep["identical"]


def test_module_entry_point(tmp_path):
    f = tmp_path / "f.json"
    f.write_text(json.dumps(map_to_json(xy())))
    proc = subprocess.run([sys.executable, "-m", "polytower", "bias", "--poly", str(f),
                           "--payload-only", "--format", "json"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["histogram"] == [5, 2, 2]
