import json

import pytest
from hypothesis import given, strategies as st

from polytower.errors import ParseError
from polytower.field import SpaceShape, make_rng
from polytower.multiaffine import MultiAffineMap, MultiLinearMap
from polytower.poly import Poly, random_poly
from polytower.rank import partition_rank, schmidt_rank, verify_certificate
from polytower.serialize import (certificate_from_json, certificate_to_json,
                                 collection_from_json, collection_to_json, digest, dumps,
                                 map_from_json, map_to_json, tower_from_json, tower_to_json)
from polytower.tower import Tower, random_tower


def through_text(doc):
    return json.loads(dumps(doc))


@given(st.integers(0, 10**6))
def test_poly_round_trip(seed):
    P = random_poly(7, 3, 3, make_rng(seed), density=0.5)
    assert map_from_json(through_text(map_to_json(P))) == P


@given(st.integers(0, 10**6))
def test_multiaffine_round_trip(seed):
    sh = SpaceShape(3, (2, 1, 2))
    rng = make_rng(seed)
    m = MultiAffineMap.random(sh, (0, 2), rng, density=0.6)
    assert map_from_json(through_text(map_to_json(m))) == m
    ml = MultiLinearMap.random(sh, (0, 1, 2), rng, density=0.6)
    assert map_from_json(through_text(map_to_json(ml))) == ml


def test_documented_multilinear_layout():
    doc = {"p": 3, "dims": [2, 2, 2], "support": [1, 2, 3],
           "entries": [{"idx": [0, 1, 0], "c": 2}]}
    m = map_from_json(doc)
    assert isinstance(m, MultiLinearMap)
    assert m.support == (0, 1, 2) and m.entries == {(0, 1, 0): 2}
    back = map_to_json(m)
    assert back["support"] == [1, 2, 3] and back["entries"] == doc["entries"]


def test_multiaffine_masks():
    sh = SpaceShape(3, (1, 1))
    m = MultiAffineMap.from_poly(sh, Poly(3, 2, {(1, 1): 1, (0, 1): 2, (0, 0): 1}), (0, 1))
    doc = map_to_json(m)
    assert sorted(c["mask"] for c in doc["components"]) == [0, 2, 3]


def test_tower_round_trip():
    T = random_tower(5, 3, [1, 2, 3], [1, 2, 1], make_rng(2))
    assert tower_from_json(through_text(tower_to_json(T))) == T
    sh = SpaceShape(3, (1, 2))
    ml = Tower.from_maps("multilinear", sh, [MultiLinearMap.random(sh, (0, 1), make_rng(1))])
    doc = tower_to_json(ml)
    assert doc["layers"][0]["support"] == [1, 2]
    assert tower_from_json(through_text(doc)) == ml


def test_collection_accepts_variants():
    polys = [random_poly(3, 2, 2, make_rng(i)) for i in range(3)]
    doc = collection_to_json(polys)
    assert collection_from_json(doc) == polys
    assert collection_from_json(doc["maps"]) == polys
    assert collection_from_json(doc["maps"][0]) == polys[:1]
    T = Tower.from_polys(polys)
    assert collection_from_json(tower_to_json(T)) == T.maps()


def test_certificate_round_trip():
    P = Poly(5, 4, {(1, 1, 0, 0): 1, (0, 0, 1, 1): 3})
    cert = schmidt_rank(P).certificate
    back = certificate_from_json(through_text(certificate_to_json(cert)))
    assert verify_certificate(P, None, back)[0]
    sh = SpaceShape(3, (2, 2, 2))
    m = MultiLinearMap.random(sh, (0, 1, 2), make_rng(4))
    cert = partition_rank(m).certificate
    back = certificate_from_json(through_text(certificate_to_json(cert)))
    assert verify_certificate(m, None, back)[0]


@pytest.mark.parametrize("doc", [
    {"p": 4, "n": 1, "terms": []},
    {"p": 3, "n": 2, "terms": [{"c": 0, "e": [1, 0]}]},
    {"p": 3, "n": 2, "terms": [{"c": 3, "e": [1, 0]}]},
    {"p": 3, "n": 2, "terms": [{"c": 1, "e": [1]}]},
    {"p": 3, "n": 2, "terms": [{"c": 1, "e": [1, 0]}, {"c": 2, "e": [1, 0]}]},
    {"p": 3, "n": 2, "terms": [{"c": 1, "e": [-1, 0]}]},
    {"p": 3, "dims": [2], "support": [2], "entries": []},
    {"p": 3, "dims": [2], "support": [1], "entries": [{"idx": [2], "c": 1}]},
    {"p": 3, "dims": [1, 1], "support": [1], "components": [{"mask": 2, "entries": []}]},
    {"format": "polytower.nonsense/1"},
])
def test_rejects_malformed(doc):
    with pytest.raises(ParseError):
        map_from_json(doc)


def test_dumps_canonical():
    a = {"b": 1, "a": [1, 2]}
    assert dumps(a) == '{"a":[1,2],"b":1}'
    assert digest(a) == digest({"a": [1, 2], "b": 1})
