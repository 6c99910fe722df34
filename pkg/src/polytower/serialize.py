"""JSON interchange for polynomials, multilinear/multi-affine maps, towers,
certificates and membership solutions.

Factor indices are 1-based on disk and 0-based in memory.  Multi-affine
components are keyed by a bitmask over factors (bit t-1 for factor t).
Every top-level document carries a "format" field.
"""
from __future__ import annotations

import hashlib
import json

from .errors import ParseError, PolytowerError
from .field import SpaceShape, check_prime
from .multiaffine import MultiAffineMap, MultiLinearMap
from .poly import Poly
from .tower import FLAVORS, Layer, Tower

POLY = "polytower.poly/1"
MULTILINEAR = "polytower.multilinear/1"
MULTIAFFINE = "polytower.multiaffine/1"
TOWER = "polytower.tower/1"
COLLECTION = "polytower.collection/1"
CERTIFICATE = "polytower.certificate/1"
MEMBERSHIP = "polytower.membership/1"


def dumps(obj, pretty=False):
    """Canonical JSON text: sorted keys, fixed separators."""
    if pretty:
        return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False)
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest(obj):
    return hashlib.sha256(dumps(obj).encode("utf-8")).hexdigest()


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


def _int(v, what):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{what} must be an integer, got {v!r}")
    return v


def _prime(d):
    try:
        return check_prime(_int(d.get("p"), "p"))
    except PolytowerError as exc:
        raise ParseError(str(exc)) from exc


def _coef(c, p):
    c = _int(c, "coefficient")
    if c == 0:
        raise ParseError("zero coefficient")
    if not 0 < c < p:
        raise ParseError(f"coefficient {c} out of range for p={p}")
    return c


# -- polynomials --------------------------------------------------------------

def poly_to_json(P):
    return {"format": POLY, "p": P.p, "n": P.n,
            "terms": [{"c": int(c), "e": [int(x) for x in e]} for e, c in P.terms]}


def poly_from_json(d):
    if not isinstance(d, dict) or "terms" not in d:
        raise ParseError("not a polynomial document")
    p = _prime(d)
    n = _int(d.get("n"), "n")
    if n < 0:
        raise ParseError("n must be non-negative")
    coeffs = {}
    for t in d["terms"]:
        e = t.get("e")
        if not isinstance(e, list) or len(e) != n:
            raise ParseError(f"exponent vector must have length {n}")
        e = tuple(_int(x, "exponent") for x in e)
        if any(x < 0 for x in e):
            raise ParseError("negative exponent")
        if e in coeffs:
            raise ParseError(f"duplicate exponent vector {list(e)}")
        coeffs[e] = _coef(t.get("c"), p)
    return Poly(p, n, coeffs)


# -- multilinear / multi-affine -------------------------------------------------

def _shape_from(d):
    p = _prime(d)
    dims = d.get("dims")
    if not isinstance(dims, list) or not dims:
        raise ParseError("dims must be a non-empty list")
    dims = tuple(_int(x, "dim") for x in dims)
    if any(x < 1 for x in dims):
        raise ParseError("dims must be positive")
    return SpaceShape(p, dims)


def _support_from(shape, sup):
    if not isinstance(sup, list):
        raise ParseError("support must be a list")
    out = []
    for t in sup:
        t = _int(t, "support factor")
        if not 1 <= t <= shape.k:
            raise ParseError(f"support factor {t} out of range")
        out.append(t - 1)
    if len(set(out)) != len(out):
        raise ParseError("repeated support factor")
    return tuple(sorted(out))


def _entries_to_json(m):
    return [{"idx": list(idx), "c": int(c)} for idx, c in m.entries.items()]


def _entries_from(shape, support, rows):
    ent = {}
    for r in rows:
        idx = r.get("idx")
        if not isinstance(idx, list) or len(idx) != len(support):
            raise ParseError("entry index length differs from support size")
        idx = tuple(_int(i, "index") for i in idx)
        for t, i in zip(support, idx):
            if not 0 <= i < shape.dims[t]:
                raise ParseError(f"index {i} out of range for factor {t + 1}")
        if idx in ent:
            raise ParseError(f"duplicate entry {list(idx)}")
        ent[idx] = _coef(r.get("c"), shape.p)
    return MultiLinearMap(shape, support, ent)


def _mask(J):
    return sum(1 << t for t in J)


def _unmask(shape, mask):
    mask = _int(mask, "mask")
    if mask < 0 or mask >= 1 << shape.k:
        raise ParseError(f"component mask {mask} out of range")
    return tuple(t for t in range(shape.k) if mask >> t & 1)


def multilinear_to_json(m):
    return {"format": MULTILINEAR, "p": m.p, "dims": list(m.shape.dims),
            "support": [t + 1 for t in m.support], "entries": _entries_to_json(m)}


def multilinear_from_json(d):
    shape = _shape_from(d)
    support = _support_from(shape, d.get("support", []))
    return _entries_from(shape, support, d.get("entries", []))


def multiaffine_to_json(m):
    return {"format": MULTIAFFINE, "p": m.p, "dims": list(m.shape.dims),
            "support": [t + 1 for t in m.support],
            "components": [{"mask": _mask(J), "entries": _entries_to_json(c)}
                           for J, c in m.components.items()]}


def multiaffine_from_json(d):
    shape = _shape_from(d)
    support = _support_from(shape, d.get("support", []))
    comps = {}
    for c in d.get("components", []):
        J = _unmask(shape, c.get("mask"))
        if not set(J) <= set(support):
            raise ParseError(f"component {[t + 1 for t in J]} outside the support")
        if J in comps:
            raise ParseError("duplicate component mask")
        comps[J] = _entries_from(shape, J, c.get("entries", []))
    return MultiAffineMap(shape, support, comps)


def map_to_json(m):
    if isinstance(m, Poly):
        return poly_to_json(m)
    if isinstance(m, MultiLinearMap):
        return multilinear_to_json(m)
    if isinstance(m, MultiAffineMap):
        return multiaffine_to_json(m)
    raise TypeError(f"cannot serialize {type(m).__name__}")


def map_from_json(d):
    if not isinstance(d, dict):
        raise ParseError("map document must be an object")
    fmt = d.get("format")
    if fmt == MULTIAFFINE or (fmt is None and "components" in d):
        return multiaffine_from_json(d)
    if fmt == MULTILINEAR or (fmt is None and "entries" in d):
        return multilinear_from_json(d)
    if fmt in (POLY, None):
        return poly_from_json(d)
    raise ParseError(f"unknown map format {fmt!r}")


# -- towers and collections ----------------------------------------------------

def tower_to_json(T):
    out = {"format": TOWER, "flavor": T.flavor, "p": T.p, "n": T.shape.n}
    if T.flavor != "polynomial":
        out["dims"] = list(T.shape.dims)
        out["domain"] = [t + 1 for t in T.domain]
    layers = []
    for l in T.layers:
        entry = {"degree": l.degree, "maps": [map_to_json(m) for m in l.maps]}
        if T.flavor != "polynomial":
            sup = l.support
            entry["support"] = None if sup is None else [t + 1 for t in sup]
        layers.append(entry)
    out["layers"] = layers
    return out


def tower_from_json(d):
    if not isinstance(d, dict) or "layers" not in d:
        raise ParseError("not a tower document")
    flavor = d.get("flavor", "polynomial")
    if flavor not in FLAVORS:
        raise ParseError(f"unknown flavor {flavor!r}")
    p = _prime(d)
    if flavor == "polynomial":
        shape = SpaceShape(p, (_int(d.get("n"), "n"),))
        domain = None
    else:
        shape = _shape_from(d)
        domain = _support_from(shape, d["domain"]) if "domain" in d else None
    layers = []
    try:
        for l in d["layers"]:
            maps = tuple(map_from_json(m) for m in l.get("maps", []))
            if flavor == "multiaffine":
                maps = tuple(m.as_affine() if isinstance(m, MultiLinearMap) else m for m in maps)
            layers.append(Layer(maps, _int(l.get("degree"), "degree")))
        return Tower(flavor, shape, layers, domain)
    except ParseError:
        raise
    except PolytowerError as exc:
        raise ParseError(str(exc)) from exc


def collection_to_json(maps):
    return {"format": COLLECTION, "maps": [map_to_json(m) for m in maps]}


def collection_from_json(d):
    """Maps from a collection, a tower, a bare list or a single map."""
    if isinstance(d, list):
        return [map_from_json(m) for m in d]
    if not isinstance(d, dict):
        raise ParseError("expected a collection")
    if d.get("format") == COLLECTION or ("maps" in d and "layers" not in d):
        return [map_from_json(m) for m in d.get("maps", [])]
    if "layers" in d:
        return list(tower_from_json(d).maps())
    return [map_from_json(d)]


# -- certificates ---------------------------------------------------------------

def certificate_to_json(cert):
    return {"format": CERTIFICATE, "kind": cert.kind, "degree": cert.degree,
            "support": None if cert.support is None else [t + 1 for t in cert.support],
            "claimed_rank": cert.claimed_rank,
            "pairs": [[map_to_json(a), map_to_json(b)] for a, b in cert.pairs],
            "multipliers": [{"index": i, "R": map_to_json(R)} for i, R in cert.multipliers]}


def certificate_from_json(d):
    from .rank import RankCertificate

    if d.get("format") not in (CERTIFICATE, None):
        raise ParseError("not a certificate document")
    sup = d.get("support")
    support = None if sup is None else tuple(int(t) - 1 for t in sup)
    pairs = [(map_from_json(a), map_from_json(b)) for a, b in d.get("pairs", [])]
    mult = [(int(m["index"]), map_from_json(m["R"])) for m in d.get("multipliers", [])]
    return RankCertificate(d["kind"], int(d["degree"]), support, pairs, mult,
                           int(d["claimed_rank"]))


def membership_to_json(sol):
    if sol.feasible:
        return {"format": MEMBERSHIP, "feasible": True,
                "multipliers": [None if R is None else map_to_json(R)
                                for R in sol.multipliers]}
    return {"format": MEMBERSHIP, "feasible": False, "reason": sol.reason,
            "functional": [{"e": list(e), "c": int(c)} for e, c in sol.functional.items()]}
