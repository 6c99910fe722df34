"""Regular decomposition of a collection of maps into relatively regular towers.

The loop: arrange the maps in layers (by degree for polynomials, by support
for multi-affine maps), look top-down for a layer whose rank relative to
everything below is at most A(n_i + s)^B, express a combination of that
layer through lower-order pieces, delete one map, add the pieces below and
branch over the values the pieces take.  Every branch repeats the process.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BudgetOverflow, IterationCapExceeded, ShapeMismatch
from .field import SpaceShape, check_limit, index_to_points, random_points
from .multiaffine import MultiAffineMap, MultiLinearMap
from .poly import Poly
from .rank import DEFAULT_BUDGET, Budget, collection_rank, combine_full, nullstellensatz_solve
from .tower import Layer, Tower, check_regularity, to_poly

OVERFLOW = 1 << 63


# ---------------------------------------------------------------------------
# configuration and schedule

@dataclass
class RegularizationConfig:
    A: float = 1
    B: float = 1
    s: float = 1
    rank_budget: int = DEFAULT_BUDGET
    max_iterations: int = 10000
    limit: int | None = None

    def __post_init__(self):
        if self.A < 1 or self.B < 1:
            raise ValueError("A and B must be at least 1")
        if self.s <= 0:
            raise ValueError("s must be positive")
        if self.rank_budget < 0 or self.max_iterations < 1:
            raise ValueError("budgets must be positive")

    def to_json(self):
        return {"A": self.A, "B": self.B, "s": self.s, "rank_budget": self.rank_budget,
                "max_iterations": self.max_iterations, "limit": self.limit}

    @classmethod
    def from_json(cls, d):
        keys = ("A", "B", "s", "rank_budget", "max_iterations", "limit")
        return cls(**{k: d[k] for k in keys if k in d})


def _exact(v):
    if isinstance(v, (int, Fraction)):
        return Fraction(v)
    if isinstance(v, float) and v.is_integer():
        return Fraction(int(v))
    return None


@dataclass
class BudgetSchedule:
    sizes: list
    n: list
    A: float
    B: float
    s: float
    d: int

    @property
    def total(self):
        return sum(self.n)

    def threshold(self, i):
        """A (n_i + s)^B for the 0-based layer index i."""
        return self.A * (self.n[i] + self.s) ** self.B

    def to_json(self):
        return {"sizes": self.sizes, "n": self.n, "total": self.total,
                "A": self.A, "B": self.B, "s": self.s, "d": self.d}


def budget_schedule(sizes, A=1, B=1, s=1, d=1):
    """n_top = m_top and n_i = m_i + n_{i+1} * ceil(2A(s + n_{i+1})^B + 2^d).

    sizes are listed bottom layer first and so is the result.  Integer B
    with rational A, s is evaluated exactly.
    """
    sizes = [int(m) for m in sizes]
    if not sizes:
        raise ValueError("need at least one layer")
    if any(m < 0 for m in sizes):
        raise ValueError("layer sizes must be non-negative")
    h = len(sizes)
    n = [0] * h
    n[-1] = sizes[-1]
    Ae, se, Be = _exact(A), _exact(s), _exact(B)
    for i in range(h - 2, -1, -1):
        up = n[i + 1]
        if Ae is not None and se is not None and Be is not None and Be.denominator == 1:
            factor = math.ceil(2 * Ae * (se + up) ** int(Be) + 2 ** d)
        else:
            factor = math.ceil(2 * A * (s + up) ** B + 2 ** d)
        n[i] = sizes[i] + up * factor
        if n[i] >= OVERFLOW:
            raise BudgetOverflow(f"budget for layer {i + 1} exceeds 2^63 ({n[i]})")
    return BudgetSchedule(sizes, n, A, B, s, d)


# ---------------------------------------------------------------------------
# categories

class _PolyCat:
    flavor = "polynomial"

    def __init__(self, maps, base):
        if not maps:
            raise ValueError("empty collection")
        self.p, self.n = maps[0].p, maps[0].n
        self.shape = SpaceShape(self.p, (self.n,))
        self.d = max(m.degree for m in maps)
        self.keys = list(range(1, self.d + 1))
        self.base = base if base is not None else Tower.empty("polynomial", self.shape)

    def key(self, m):
        return m.degree

    def degree(self, key):
        return key

    def prepare(self, m):
        if not isinstance(m, Poly) or m.p != self.p or m.n != self.n:
            raise ShapeMismatch("all maps must be polynomials in one ring")
        return m

    def shift(self, m, b):
        return m - Poly.constant(self.p, self.n, b)

    def tower(self, state):
        layers = [Layer(tuple(state[k]), k) for k in sorted(state) if state[k]]
        return Tower("polynomial", self.shape, layers)

    def pieces(self, comb, below, cert):
        u = comb
        for i, R in cert.multipliers:
            u = u + R * to_poly(below[i])
        for A, B in cert.pairs:
            u = u - A * B
        if u.degree >= cert.degree:
            raise AssertionError("decomposition left a top-degree remainder")
        return [(A, B) for A, B in cert.pairs], [u] if not u.is_zero() else []


class _MultiCat:
    flavor = "multiaffine"

    def __init__(self, maps, base):
        self.shape = maps[0].shape
        self.p = self.shape.p
        self.d = max(len(m.support) for m in maps)
        k = self.shape.k
        self.keys = [(len(J), J) for r in range(1, k + 1)
                     for J in itertools.combinations(range(k), r)]
        self.base = base if base is not None else Tower.empty("multiaffine", self.shape)

    def key(self, m):
        return (len(m.support), tuple(m.support))

    def degree(self, key):
        return key[0]

    def prepare(self, m):
        if isinstance(m, MultiLinearMap):
            m = m.as_affine()
        if not isinstance(m, MultiAffineMap) or m.shape != self.shape:
            raise ShapeMismatch("all maps must be multi-affine on one shape")
        if not m.is_full():
            raise ValueError("multi-affine inputs must be full")
        return m

    def shift(self, m, b):
        m = m.as_affine() if isinstance(m, MultiLinearMap) else m
        if not b:
            return m
        comps = dict(m.components)
        const = MultiLinearMap(self.shape, (), {(): -b})
        comps[()] = comps[()] + const if () in comps else const
        return MultiAffineMap(self.shape, m.support, comps)

    def tower(self, state):
        layers = [Layer(tuple(state[k]), k[0]) for k in sorted(state) if state[k]]
        return Tower("multiaffine", self.shape, layers)

    def pieces(self, comb, below, cert):
        S = cert.support
        poly = comb.to_poly()
        for i, R in cert.multipliers:
            poly = poly + R.to_poly() * below[i].to_poly()
        for A, B in cert.pairs:
            poly = poly - A.to_poly() * B.to_poly()
        u = MultiAffineMap.from_poly(self.shape, poly, S)
        if not u.component(S).is_zero():
            raise AssertionError("decomposition left a top component")
        rest = [m for J, m in u.components.items() if J]
        const = u.components.get((), None)
        singles = [m.as_affine() for m in rest]
        if const is not None:
            singles.append(const.as_affine())
        return [(A, B) for A, B in cert.pairs], singles


# ---------------------------------------------------------------------------
# results

@dataclass
class StepRecord:
    step: int
    path: tuple
    layer: object
    threshold: float
    combination: list
    pivot: int
    rank_upper: float
    pairs: list
    singles: list
    multipliers: list
    branch_values: list

    def to_json(self):
        from .serialize import map_to_json
        return {
            "step": self.step, "path": list(self.path),
            "layer": self.layer if isinstance(self.layer, int) else
            {"degree": self.layer[0], "support": [t + 1 for t in self.layer[1]]},
            "threshold": self.threshold, "combination": self.combination,
            "pivot": self.pivot, "rank_upper": self.rank_upper,
            "pairs": [[map_to_json(a), map_to_json(b)] for a, b in self.pairs],
            "singles": [map_to_json(u) for u in self.singles],
            "multipliers": [{"index": i, "R": map_to_json(R)} for i, R in self.multipliers],
            "branch_values": [list(b) for b in self.branch_values],
        }


@dataclass
class DecompositionResult:
    towers: list
    branch_values: list
    log: list
    schedule: BudgetSchedule
    config: RegularizationConfig
    flavor: str
    status: str = "Complete"
    blocked: list = field(default_factory=list)
    blocked_leaves: list = field(default_factory=list)
    polarization_mode: bool = False

    @property
    def first(self):
        return self.towers[0] if self.towers else None

    def to_json(self):
        from .serialize import tower_to_json
        return {
            "format": "polytower.decomposition/1",
            "status": self.status,
            "flavor": self.flavor,
            "config": self.config.to_json(),
            "schedule": self.schedule.to_json(),
            "towers": [tower_to_json(T) for T in self.towers],
            "branch_values": [[[s, list(b)] for s, b in path] for path in self.branch_values],
            "blocked": self.blocked,
            "blocked_leaves": self.blocked_leaves,
            "polarization_mode": self.polarization_mode,
            "log": [r.to_json() for r in self.log],
        }


# ---------------------------------------------------------------------------
# the loop

def _points(cat, limit):
    n = cat.shape.n
    check_limit(cat.p, n, limit)
    return index_to_points(cat.p, n, np.arange(cat.p ** n))


def _vanish_mask(maps, X):
    mask = np.ones(len(X), dtype=bool)
    for m in maps:
        mask &= to_poly(m).evaluate_many(X) == 0
    return mask


def _metric(state, cat):
    counts = {}
    for k, ms in state.items():
        e = cat.degree(k)
        counts[e] = counts.get(e, 0) + len(ms)
    return tuple(counts.get(e, 0) for e in range(cat.d, -1, -1))


def _find_witness(state, cat, schedule, budget):
    """Top-down scan.  Returns ("witness", ...), ("regular", None) or ("blocked", info)."""
    keys = sorted(k for k in state if state[k])
    blocked = []
    for k in reversed(keys):
        idx = cat.keys.index(k)
        thr = schedule.threshold(idx)
        below = list(cat.base.maps())
        for k2 in keys:
            if k2 < k:
                below.extend(state[k2])
        maps = state[k]
        rb = collection_rank(maps, below, budget=Budget(budget), target=thr)
        if rb.upper <= thr and rb.certificate is not None:
            return "witness", (k, thr, rb, below)
        if rb.lower <= thr:
            blocked.append({"layer": k if isinstance(k, int) else
                            {"degree": k[0], "support": [t + 1 for t in k[1]]},
                            "threshold": thr, "lower": rb.lower,
                            "upper": "inf" if rb.upper == math.inf else rb.upper})
    if blocked:
        return "blocked", blocked
    return "regular", None


def _decompose(cat, R, cfg, polarization_mode=False):
    R = [cat.prepare(m) for m in R]
    sizes = [0] * len(cat.keys)
    for m in R:
        sizes[cat.keys.index(cat.key(m))] += 1
    schedule = budget_schedule(sizes, cfg.A, cfg.B, cfg.s, cat.d)
    X = _points(cat, cfg.limit)
    base_mask = _vanish_mask(cat.base.maps(), X)
    state0 = {}
    for m in R:
        state0.setdefault(cat.key(m), []).append(m)
    towers, values, log, blocked, blocked_leaves = [], [], [], [], []
    stack = [(state0, (), [])]
    steps = 0
    while stack:
        state, path, bvals = stack.pop()
        kind, info = _find_witness(state, cat, schedule, cfg.rank_budget)
        if kind == "regular":
            towers.append(cat.tower(state))
            values.append(bvals)
            continue
        if kind == "blocked":
            blocked_leaves.append(len(towers))
            towers.append(cat.tower(state))
            values.append(bvals)
            blocked.append({"path": list(path), "layers": info})
            continue
        steps += 1
        if steps > cfg.max_iterations:
            raise IterationCapExceeded(f"more than {cfg.max_iterations} decomposition steps")
        key, thr, rb, below = info
        layer = state[key]
        a = rb.combination
        pivot = max(i for i, c in enumerate(a) if c)
        comb = combine_full(layer, a)
        pairs, singles = cat.pieces(comb, below, rb.certificate)
        rest = {k: (list(v) if k != key else [m for i, m in enumerate(v) if i != pivot])
                for k, v in state.items()}
        pieces = [m for pr in pairs for m in pr] + singles
        mask = base_mask & _vanish_mask([m for v in rest.values() for m in v], X)
        pts = X[mask]
        if pieces:
            V = np.stack([to_poly(m).evaluate_many(pts) for m in pieces], axis=1) \
                if len(pts) else np.zeros((0, len(pieces)), dtype=np.int64)
        else:
            V = np.zeros((len(pts), 0), dtype=np.int64)
        np_ = len(pairs)
        total = np.zeros(len(pts), dtype=np.int64)
        for j in range(np_):
            total = (total + V[:, 2 * j] * V[:, 2 * j + 1]) % cat.p
        for j in range(2 * np_, len(pieces)):
            total = (total + V[:, j]) % cat.p
        consistent = total == 0
        piv = to_poly(layer[pivot]).evaluate_many(pts) == 0 if len(pts) else consistent
        if not np.array_equal(consistent, piv):
            raise AssertionError("piece values do not determine the pivot map")
        good = np.unique(V[consistent], axis=0) if consistent.any() else np.zeros((0, len(pieces)), dtype=np.int64)
        branch_vals = [tuple(int(v) for v in row) for row in good]
        log.append(StepRecord(steps, path, key, thr, list(a), pivot, rb.upper,
                              pairs, singles, list(rb.certificate.multipliers), branch_vals))
        before = _metric(state, cat)
        children = []
        for bi, b in enumerate(branch_vals):
            new_state = {k: list(v) for k, v in rest.items()}
            for m, val in zip(pieces, b):
                sh = cat.shift(m, val)
                if sh.is_zero():
                    continue
                if to_poly(sh).degree <= 0:
                    raise AssertionError("a shifted piece became a nonzero constant")
                new_state.setdefault(cat.key(sh), []).append(sh)
            after = _metric(new_state, cat)
            if not after < before:
                raise AssertionError("termination metric failed to decrease")
            children.append((new_state, path + (bi,), bvals + [(steps, b)]))
        stack.extend(reversed(children))
    status = "Unknown" if blocked else "Complete"
    return DecompositionResult(towers, values, log, schedule, cfg, cat.flavor, status,
                               blocked, blocked_leaves, polarization_mode)


def regular_decomposition(Q, R, cfg=None):
    """Decompose Z(Q u R) into zero loci of towers regular relative to Q."""
    cfg = cfg or RegularizationConfig()
    R = list(R)
    if not R:
        raise ValueError("empty collection")
    if isinstance(R[0], Poly):
        cat = _PolyCat(R, Q)
    else:
        cat = _MultiCat(R, Q)
    return _decompose(cat, R, cfg)


def polynomial_regularize(polys, cfg=None, base=None, polarization_mode=False):
    """Polynomial regularization; the first tower is the containing tower.

    polarization_mode is recorded in the result for diagnostics; the loop
    itself always uses Schmidt-rank presentations directly.
    """
    cfg = cfg or RegularizationConfig()
    polys = list(polys)
    for P in polys:
        if P.degree >= P.p:
            from .errors import CharacteristicTooSmall
            raise CharacteristicTooSmall("degrees must be below p")
    cat = _PolyCat(polys, base)
    return _decompose(cat, polys, cfg, polarization_mode)


# ---------------------------------------------------------------------------
# verification

@dataclass
class DecompositionReport:
    regular: object
    degree_height: bool
    dimension: bool
    disjoint_union: bool
    evidence: dict

    @property
    def all_pass(self):
        return bool(self.regular) and self.degree_height and self.dimension and self.disjoint_union

    def to_json(self):
        return {"regular": self.regular, "degree_height": self.degree_height,
                "dimension": self.dimension, "disjoint_union": self.disjoint_union,
                "all_pass": self.all_pass, "evidence": self.evidence}


def _as_base(Q, flavor, shape):
    if Q is None:
        return Tower.empty(flavor, shape)
    return Q


def verify_decomposition(Q, R, result, cfg=None, samples=20000, seed=0):
    """Check the four output properties; property 4 by exact enumeration."""
    cfg = cfg or result.config
    R = list(R)
    flavor = result.flavor
    if flavor == "polynomial":
        shape = SpaceShape(R[0].p, (R[0].n,))
        d = max(m.degree for m in R)
        height_cap = d
    else:
        shape = R[0].shape
        d = max(len(m.support) for m in R)
        height_cap = 2 ** shape.k
    base = _as_base(Q, flavor, shape)
    ev = {"towers": len(result.towers), "status": result.status}
    # 1. regularity relative to Q
    stats = []
    for T in result.towers:
        rep = check_regularity(T, cfg.A, cfg.B, cfg.s, budget=cfg.rank_budget, base=base)
        stats.append(rep.status)
    if all(s == "Proven" for s in stats):
        regular = True
    elif any(s == "Refuted" for s in stats):
        regular = False
    else:
        regular = None
    ev["regularity"] = stats
    # 2. degree and height, both conventions
    heights_deg = [len({l.degree for l in T.layers if l.size}) for T in result.towers]
    heights_sup = [len({(l.degree, l.support) for l in T.layers if l.size}) for T in result.towers]
    degs = [T.degree for T in result.towers]
    ev["heights_by_degree"] = heights_deg
    ev["heights_by_support"] = heights_sup
    ev["degrees"] = degs
    hcheck = heights_deg if flavor == "polynomial" else heights_sup
    deg_ok = all(g <= d for g in degs) and all(h <= height_cap for h in hcheck)
    # 3. dimension against the schedule total
    dims = [T.dimension for T in result.towers]
    ev["dimensions"] = dims
    ev["schedule_total"] = result.schedule.total
    dim_ok = all(x <= result.schedule.total for x in dims)
    # 4. disjoint union of zero loci
    n = shape.n
    p = shape.p
    try:
        check_limit(p, n, cfg.limit)
        X = index_to_points(p, n, np.arange(p ** n))
        ev["mode"] = "exact"
    except Exception:
        X = random_points(SpaceShape(p, (n,)), seed, 0, samples)
        ev["mode"] = "sampled"
        ev["samples"] = samples
    base_mask = _vanish_mask(base.maps(), X)
    target = base_mask & _vanish_mask(R, X)
    cover = np.zeros(len(X), dtype=np.int64)
    for T in result.towers:
        cover += base_mask & _vanish_mask(T.maps(), X)
    bad = np.nonzero(cover != target.astype(np.int64))[0]
    union_ok = bad.size == 0
    if not union_ok:
        i = int(bad[0])
        ev["witness_point"] = [int(v) for v in X[i]]
        ev["witness_cover_count"] = int(cover[i])
        ev["witness_in_original"] = bool(target[i])
    return DecompositionReport(regular, deg_ok, dim_ok, union_ok, ev)


def ideal_containment(Q, R, result):
    """For every output tower, is every input map in its degree-bounded ideal?"""
    out = []
    for T in result.towers:
        maps = list(Q.maps()) if Q is not None else []
        maps += list(T.maps())
        polys = [to_poly(m) for m in maps]
        ok = True
        for m in R:
            sol = nullstellensatz_solve(to_poly(m), polys)
            if not sol.feasible:
                ok = False
                break
        out.append(ok)
    return out
