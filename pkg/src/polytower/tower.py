"""Towers: ordered layers of maps, bottom layer first.

Three flavors share one container:

* ``polynomial``  -- layers of Poly values, one degree per layer;
* ``multiaffine`` -- layers of MultiAffineMap values on a common support;
* ``multilinear`` -- layers of MultiLinearMap values on a common support.

A tower also records its *domain*: the factors on which its zero locus
lives.  Deriving a tower at a partial point removes the fixed factors
from the domain but keeps the shape, so factor labels stay stable.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CharacteristicTooSmall, FlavorMismatch, IndexOutOfRange, ShapeMismatch
from .field import SpaceShape
from .multiaffine import MultiAffineMap, MultiLinearMap, diagonal_poly
from .poly import Poly

FLAVORS = ("polynomial", "multiaffine", "multilinear")


def map_degree(m):
    if isinstance(m, Poly):
        return m.degree
    return len(m.support)


def map_tilde(m):
    """Top homogeneous part (polynomials) or multilinear part (multi-affine)."""
    if isinstance(m, Poly):
        return m.homogeneous_part()
    if isinstance(m, MultiAffineMap):
        return m.multilinear_part()
    return m


def to_poly(m):
    return m if isinstance(m, Poly) else m.to_poly()


def is_zero_map(m):
    return m.is_zero()


@dataclass(frozen=True)
class Layer:
    maps: tuple
    degree: int
    original_size: int = -1

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        if self.original_size < 0:
            object.__setattr__(self, "original_size", len(self.maps))

    @property
    def size(self):
        return len(self.maps)

    @property
    def support(self):
        sups = {getattr(m, "support", None) for m in self.maps}
        if len(sups) == 1:
            return sups.pop()
        return None


class Tower:
    def __init__(self, flavor, shape, layers=(), domain=None):
        if flavor not in FLAVORS:
            raise FlavorMismatch(f"unknown flavor {flavor}")
        self.flavor = flavor
        self.shape = shape
        self.layers = tuple(l if isinstance(l, Layer) else Layer(*l) for l in layers)
        self.domain = tuple(range(shape.k)) if domain is None else tuple(sorted(domain))
        for layer in self.layers:
            for m in layer.maps:
                self._check_map(m)

    def _check_map(self, m):
        want = Poly if self.flavor == "polynomial" else (
            MultiAffineMap if self.flavor == "multiaffine" else MultiLinearMap)
        if not isinstance(m, want):
            raise FlavorMismatch(f"{type(m).__name__} in a {self.flavor} tower")
        if isinstance(m, Poly):
            if m.p != self.shape.p or m.n != self.shape.n:
                raise ShapeMismatch("polynomial ring differs from tower shape")
        elif m.shape != self.shape:
            raise ShapeMismatch("map shape differs from tower shape")

    # -- constructors ------------------------------------------------------
    @classmethod
    def empty(cls, flavor, shape):
        return cls(flavor, shape, ())

    @classmethod
    def from_polys(cls, polys, p=None, n=None):
        """Arrange polynomials in layers by degree (lowest degree at the bottom).

        Maps of equal degree share one layer, in input order.
        """
        polys = list(polys)
        if polys:
            p, n = polys[0].p, polys[0].n
        shape = SpaceShape(p, (n,))
        t = cls("polynomial", shape, ())
        return t.with_maps(polys)

    @classmethod
    def from_maps(cls, flavor, shape, maps):
        return cls(flavor, shape, ()).with_maps(maps)

    # -- bookkeeping -------------------------------------------------------
    @property
    def p(self):
        return self.shape.p

    @property
    def height(self):
        return len(self.layers)

    @property
    def dimension(self):
        return sum(l.size for l in self.layers)

    @property
    def degree(self):
        return max((l.degree for l in self.layers if l.size), default=0)

    @property
    def sizes(self):
        return [l.size for l in self.layers]

    def nonempty_height(self):
        return sum(1 for l in self.layers if l.size)

    def maps(self):
        return [m for l in self.layers for m in l.maps]

    def polys(self):
        return [to_poly(m) for m in self.maps()]

    def domain_vars(self):
        out = []
        for t in self.domain:
            out.extend(self.shape.block(t))
        return out

    def domain_polys(self):
        """Maps as polynomials in the domain variables only."""
        dv = self.domain_vars()
        pos = {v: i for i, v in enumerate(dv)}
        out = []
        for P in self.polys():
            for e, _ in P.terms:
                if any(k and v not in pos for v, k in enumerate(e)):
                    raise ShapeMismatch("map depends on a factor outside the domain")
            out.append(Poly(P.p, len(dv), {tuple(e[v] for v in dv): c for e, c in P.terms}))
        return out

    def __eq__(self, other):
        if not isinstance(other, Tower):
            return NotImplemented
        return (self.flavor == other.flavor and self.shape == other.shape
                and self.domain == other.domain
                and [(l.maps, l.degree) for l in self.layers]
                == [(l.maps, l.degree) for l in other.layers])

    def __repr__(self):
        desc = ", ".join(f"d={l.degree}:{l.size}" for l in self.layers)
        return f"Tower({self.flavor}, dims={self.shape.dims}, [{desc}])"

    # -- placement ---------------------------------------------------------
    def with_maps(self, maps):
        """Add maps by degree: join the top-most layer of that degree (and,
        for multi-affine flavors, that support) or open a new layer just
        below every layer of higher degree."""
        layers = [list(l.maps) for l in self.layers]
        degs = [l.degree for l in self.layers]
        sups = [l.support for l in self.layers]
        for m in maps:
            if m.is_zero():
                continue
            e = map_degree(m)
            sup = getattr(m, "support", None)
            target = None
            for i in range(len(layers) - 1, -1, -1):
                if degs[i] == e and (sup is None or sups[i] == sup or not layers[i]):
                    target = i
                    break
            if target is None:
                pos = len(layers)
                for i, d in enumerate(degs):
                    if d > e:
                        pos = i
                        break
                layers.insert(pos, [])
                degs.insert(pos, e)
                sups.insert(pos, sup)
                target = pos
            layers[target].append(m)
            if sups[target] is None:
                sups[target] = sup
        new = [Layer(tuple(ms), d) for ms, d in zip(layers, degs)]
        return Tower(self.flavor, self.shape, new, self.domain)

    # -- truncation & restriction ----------------------------------------
    def truncate_below(self, i):
        """Layers 1..i-1 (1-based, as Q_{<i})."""
        if not 1 <= i <= self.height + 1:
            raise IndexOutOfRange(f"layer index {i} outside 1..{self.height + 1}")
        return Tower(self.flavor, self.shape, self.layers[: i - 1], self.domain)

    def restrict_index(self, I):
        """Keep the layers whose support lies inside I; the domain becomes I."""
        if self.flavor == "polynomial":
            raise FlavorMismatch("restrict_index needs a multi-affine flavor")
        I = set(I)
        keep = [l for l in self.layers
                if all(set(m.support) <= I for m in l.maps) and
                (l.size or (l.support is not None and set(l.support) <= I))]
        return Tower(self.flavor, self.shape, keep, sorted(I & set(self.domain)))

    def derive(self, y):
        """Substitute y (factor -> vector) into every map.

        Zero maps are dropped from their layer; empty layers are kept.
        """
        if self.flavor == "polynomial":
            raise FlavorMismatch("derive needs a multi-affine flavor")
        for t in y:
            if t not in self.domain:
                raise ShapeMismatch(f"factor {t} is not free in this tower")
        layers = []
        for l in self.layers:
            maps = []
            for m in l.maps:
                sub = m.substitute(y)
                if self.flavor == "multilinear":
                    sub = sub if isinstance(sub, MultiLinearMap) else sub.multilinear_part()
                if not sub.is_zero():
                    maps.append(sub)
            deg = len(set(l.support or ()) - set(y)) if l.support is not None else l.degree
            layers.append(Layer(tuple(maps), deg, l.original_size))
        domain = [t for t in self.domain if t not in y]
        return Tower(self.flavor, self.shape, layers, domain)


# ---------------------------------------------------------------------------
# multi-coordinate constructions

def _check_multiplicities(shape, l):
    l = [int(v) for v in l]
    if len(l) != shape.k or any(v < 1 for v in l):
        raise ShapeMismatch("multiplicity vector must have one positive entry per factor")
    return l


def _place(m, shape, new_shape, target):
    """Move a multi-affine map to new_shape; target(t) = (new factor, offset)."""
    offs, noffs = shape.offsets(), new_shape.offsets()
    positions = [0] * shape.n
    for t in range(shape.k):
        f, off = target(t)
        for j in range(shape.dims[t]):
            positions[offs[t] + j] = noffs[f] + off + j
    poly = m.to_poly().embed(new_shape.n, positions)
    sup = tuple(sorted({target(t)[0] for t in m.support}))
    if isinstance(m, MultiLinearMap):
        return MultiLinearMap.from_poly(new_shape, poly, sup)
    return MultiAffineMap.from_poly(new_shape, poly, sup)


def _copies(T, l, grouped):
    """Copy groups per layer, one per choice of copy index on each support factor.

    grouped: factor t of the new shape is V_t^{l_t} (copy j at offset j*n_t);
    otherwise the copies of V_t are separate factors.
    """
    if T.flavor == "polynomial":
        raise FlavorMismatch("tensor powers need a multi-affine flavor")
    shape = T.shape
    l = _check_multiplicities(shape, l)
    if grouped:
        new_shape = SpaceShape(shape.p, tuple(d * c for d, c in zip(shape.dims, l)))
        domain = list(T.domain)
    else:
        start = [sum(l[:t]) for t in range(shape.k)]
        new_shape = SpaceShape(shape.p, tuple(d for d, c in zip(shape.dims, l) for _ in range(c)))
        domain = [start[t] + j for t in T.domain for j in range(l[t])]
    out = []
    for layer in T.layers:
        sup = layer.support
        if sup is None:
            sup = tuple(sorted({t for m in layer.maps for t in m.support}))
        groups = []
        for js in itertools.product(*[range(l[t]) for t in sup]):
            pick = dict(zip(sup, js))
            if grouped:
                def target(t, pick=pick):
                    return t, pick.get(t, 0) * shape.dims[t]
            else:
                def target(t, pick=pick):
                    return start[t] + pick.get(t, 0), 0
            groups.append([_place(m, shape, new_shape, target) for m in layer.maps])
        out.append((layer, groups))
    return new_shape, out, domain


def tensor_multiply(T, l):
    """Q^(x)l on V_1^{l_1} x ... x V_k^{l_k}: each layer holds one copy per
    choice of copies of its factors, so a layer keeps a common support."""
    new_shape, out, domain = _copies(T, l, grouped=True)
    layers = [Layer(tuple(m for g in groups for m in g), layer.degree)
              for layer, groups in out]
    return Tower(T.flavor, new_shape, layers, domain)


def split_layers(T, l):
    """Q^xl: the same equations on the split product V^[k l_1...], one copy
    group per layer, groups in enumeration order."""
    new_shape, out, domain = _copies(T, l, grouped=False)
    layers = [Layer(tuple(g), layer.degree) for layer, groups in out for g in groups]
    return Tower(T.flavor, new_shape, layers, domain)


# ---------------------------------------------------------------------------
# polynomial constructions

def _need_poly(T):
    if T.flavor != "polynomial":
        raise FlavorMismatch("needs a polynomial tower")


def parallelepiped_tower(T, x, l):
    """Maps t -> Q(x + w.t) for w in {0,1}^l with 0 < |w| <= deg Q, on (F^n)^l."""
    _need_poly(T)
    if l < 1:
        raise ValueError("l must be positive")
    n, p = T.shape.n, T.p
    x = tuple(int(v) % p for v in x)
    if len(x) != n:
        raise ShapeMismatch("base point length mismatch")
    shape = SpaceShape(p, (n,) * l)
    N = n * l
    layers = []
    for layer in T.layers:
        maps = []
        for P in layer.maps:
            for w in itertools.product((0, 1), repeat=l):
                if not 0 < sum(w) <= layer.degree:
                    continue
                images = []
                for i in range(n):
                    g = Poly.constant(p, N, x[i])
                    for s, ws in enumerate(w):
                        if ws:
                            g = g + Poly.variable(p, N, s * n + i)
                    images.append(g)
                maps.append(P.compose(images))
        layers.append(Layer(tuple(maps), layer.degree))
    return Tower("polynomial", shape, layers)


def polarized_tower(T, k):
    """Q(k): each layer of degree e spawns one layer per e-subset E of [k]."""
    _need_poly(T)
    if k >= T.p:
        raise CharacteristicTooSmall(f"k = {k} needs p > k")
    if T.degree > k:
        raise ValueError("tower degree exceeds k")
    n, p = T.shape.n, T.p
    shape = SpaceShape(p, (n,) * k)
    layers = []
    for layer in T.layers:
        e = layer.degree
        pols = [P.polarize() if e > 0 else None for P in layer.maps]
        for E in itertools.combinations(range(k), e):
            maps = []
            for P, bar in zip(layer.maps, pols):
                if bar is None:
                    maps.append(MultiLinearMap(shape, (), {(): P.constant_term()}))
                    continue
                positions = [E[v // n] * n + v % n for v in range(n * e)]
                maps.append(MultiLinearMap.from_poly(shape, bar.to_poly().embed(n * k, positions), E))
            layers.append(Layer(tuple(maps), e))
    return Tower("multilinear", shape, layers)


def diagonal_tower(T):
    """Q o D: every map evaluated at (x, ..., x)."""
    if T.flavor == "polynomial":
        raise FlavorMismatch("diagonal needs a multi-affine flavor")
    n = T.shape.dims[0]
    if any(d != n for d in T.shape.dims):
        raise ShapeMismatch("diagonal needs equal factor dimensions")
    shape = SpaceShape(T.p, (n,))
    layers = []
    for layer in T.layers:
        maps = [diagonal_poly(m) for m in layer.maps]
        kept = tuple(P for P in maps if not P.is_zero())
        layers.append(Layer(kept, layer.degree, len(maps)))
    return Tower("polynomial", shape, layers)


def derivative_tower(T, t):
    """Q_t = Q together with D_t Q; derivatives placed by degree."""
    _need_poly(T)
    derivs = [P.discrete_derivative(t) for P in T.maps()]
    return T.with_maps([D for D in derivs if not D.is_zero()])


def iterated_derivative_tower(T, ts):
    for t in ts:
        T = derivative_tower(T, t)
    return T


# ---------------------------------------------------------------------------
# regularity

@dataclass
class LayerRegularity:
    layer: int
    size: int
    degree: int
    threshold: float
    lower: float
    upper: float
    status: str
    linear_convention: bool = False
    combination: list = field(default_factory=list)


@dataclass
class RegularityReport:
    entries: list
    A: float
    B: float
    s: float

    @property
    def status(self):
        st = {e.status for e in self.entries}
        if not st or st == {"Proven"}:
            return "Proven"
        if "Refuted" in st:
            return "Refuted"
        return "Unknown"

    def to_json(self):
        def num(v):
            return "inf" if v == math.inf else v
        return {
            "status": self.status,
            "A": self.A, "B": self.B, "s": self.s,
            "layers": [
                {"layer": e.layer, "size": e.size, "degree": e.degree,
                 "threshold": e.threshold, "lower": num(e.lower), "upper": num(e.upper),
                 "status": e.status, "linear_convention": e.linear_convention,
                 "combination": e.combination}
                for e in self.entries
            ],
        }


def layer_threshold(sizes, i, A, B, s):
    """A (m_i + ... + m_h + s)^B for the 0-based layer index i."""
    return A * (sum(sizes[i:]) + s) ** B


def check_regularity(T, A=1.0, B=1.0, s=1.0, budget=None, base=None):
    """Per-layer (A,B,s)-regularity of T, optionally relative to a base tower.

    Layer i is compared against everything below it (and the base).
    """
    from .rank import DEFAULT_BUDGET, collection_rank

    budget = DEFAULT_BUDGET if budget is None else budget
    sizes = T.sizes
    entries = []
    below = [] if base is None else base.maps()
    for i, layer in enumerate(T.layers):
        thr = layer_threshold(sizes, i, A, B, s)
        if layer.size == 0:
            entries.append(LayerRegularity(i + 1, 0, layer.degree, thr, math.inf, math.inf, "Proven"))
        else:
            rb = collection_rank(list(layer.maps), below, budget=budget, flavor=T.flavor,
                                 shape=T.shape, target=thr)
            if rb.lower > thr:
                status = "Proven"
            elif rb.upper <= thr:
                status = "Refuted"
            else:
                status = "Unknown"
            entries.append(LayerRegularity(i + 1, layer.size, layer.degree, thr, rb.lower,
                                           rb.upper, status, rb.linear_convention,
                                           list(rb.combination or [])))
        below = below + list(layer.maps)
    return RegularityReport(entries, A, B, s)


def random_tower(p, n, degrees, sizes, rng, homogeneous=False, density=1.0):
    """Seeded polynomial tower with the given layer degrees and sizes."""
    from .poly import random_poly

    if any(d >= p for d in degrees):
        raise CharacteristicTooSmall("layer degree must be below p")
    shape = SpaceShape(p, (n,))
    layers = []
    for d, m in zip(degrees, sizes):
        maps = tuple(random_poly(p, n, d, rng, density=density, homogeneous=homogeneous)
                     for _ in range(m))
        layers.append(Layer(maps, d))
    return Tower("polynomial", shape, layers)


def tower_from_arrays(p, n, rows):
    """Linear tower from coefficient rows (each row = linear form)."""
    maps = [Poly.linear(p, [int(v) for v in r]) for r in np.atleast_2d(rows)]
    return Tower("polynomial", SpaceShape(p, (n,)), [Layer(tuple(maps), 1)])
