"""Multilinear and multi-affine maps on products V_1 x ... x V_k.

A multilinear map on the factors I is a sparse tensor: keys are tuples
holding one basis index per factor of I (in increasing factor order).
A multi-affine map on I is a family of multilinear components, one per
subset J of I; the decomposition is unique, so we always rebuild it from
the underlying polynomial after an operation.

Factor indices are 0-based internally and never renumbered: substituting
some factors leaves the shape alone and just shrinks the support.
"""
from __future__ import annotations

import itertools

import numpy as np

from .errors import ShapeMismatch
from .field import SpaceShape
from .poly import Poly


def _support(shape, support):
    s = tuple(sorted(set(int(t) for t in support)))
    if any(t < 0 or t >= shape.k for t in s):
        raise ShapeMismatch(f"support {s} outside factors of {shape.dims}")
    return s


def _block_of(shape):
    """Flat variable index -> (factor, position within factor)."""
    out = []
    for t, d in enumerate(shape.dims):
        out.extend((t, j) for j in range(d))
    return out


class MultiLinearMap:
    __slots__ = ("shape", "support", "entries", "_hash")

    def __init__(self, shape, support, entries=None):
        self.shape = shape
        self.support = _support(shape, support)
        p = shape.p
        clean = {}
        for idx, c in (entries or {}).items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != len(self.support):
                raise ShapeMismatch("entry index length differs from support size")
            for t, i in zip(self.support, idx):
                if not 0 <= i < shape.dims[t]:
                    raise ShapeMismatch(f"index {i} out of range for factor {t}")
            v = (clean.get(idx, 0) + int(c)) % p
            if v:
                clean[idx] = v
            else:
                clean.pop(idx, None)
        self.entries = dict(sorted(clean.items()))
        self._hash = None

    @property
    def p(self):
        return self.shape.p

    @property
    def degree(self):
        return len(self.support)

    def is_zero(self):
        return not self.entries

    def __eq__(self, other):
        if not isinstance(other, MultiLinearMap):
            return NotImplemented
        return (self.shape == other.shape and self.support == other.support
                and self.entries == other.entries)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.shape, self.support, tuple(self.entries.items())))
        return self._hash

    def __repr__(self):
        return f"MultiLinearMap(support={self.support}, entries={self.entries})"

    def __add__(self, other):
        if self.support != other.support or self.shape != other.shape:
            raise ShapeMismatch("adding multilinear maps with different supports")
        d = dict(self.entries)
        for k, v in other.entries.items():
            d[k] = d.get(k, 0) + v
        return MultiLinearMap(self.shape, self.support, d)

    def scale(self, a):
        return MultiLinearMap(self.shape, self.support,
                              {k: v * a for k, v in self.entries.items()})

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def to_poly(self):
        shape = self.shape
        offs = shape.offsets()
        n = shape.n
        terms = {}
        for idx, c in self.entries.items():
            e = [0] * n
            for t, i in zip(self.support, idx):
                e[offs[t] + i] = 1
            terms[tuple(e)] = c
        return Poly(shape.p, n, terms)

    def evaluate(self, x):
        x = tuple(x)
        if len(x) != self.shape.n:
            raise ShapeMismatch("point does not match shape")
        p = self.p
        offs = self.shape.offsets()
        total = 0
        for idx, c in self.entries.items():
            t = c
            for f, i in zip(self.support, idx):
                t = t * x[offs[f] + i] % p
                if not t:
                    break
            total += t
        return total % p

    __call__ = evaluate

    def evaluate_many(self, X):
        return self.to_poly().evaluate_many(X)

    def as_affine(self):
        return MultiAffineMap(self.shape, self.support, {self.support: self})

    def substitute(self, assign):
        """Fix the factors in `assign` (factor -> vector); support shrinks."""
        return self.as_affine().substitute(assign).multilinear_part()

    def contract(self, pivot):
        """Vector-valued A on the other factors with P(x) = <A(x), x_pivot>.

        Returned as one multilinear map per coordinate of the pivot factor.
        """
        if pivot not in self.support:
            raise ShapeMismatch("pivot factor not in support")
        pos = self.support.index(pivot)
        rest = tuple(t for t in self.support if t != pivot)
        comps = [dict() for _ in range(self.shape.dims[pivot])]
        for idx, c in self.entries.items():
            comps[idx[pos]][idx[:pos] + idx[pos + 1:]] = c
        return [MultiLinearMap(self.shape, rest, d) for d in comps]

    def matrix(self):
        """Coefficient matrix of a bilinear map (rows: first support factor)."""
        if len(self.support) != 2:
            raise ShapeMismatch("matrix() needs a bilinear map")
        a, b = self.support
        M = np.zeros((self.shape.dims[a], self.shape.dims[b]), dtype=np.int64)
        for (i, j), c in self.entries.items():
            M[i, j] = c
        return M

    @classmethod
    def from_poly(cls, shape, poly, support=None):
        aff = MultiAffineMap.from_poly(shape, poly, support)
        if any(J != aff.support and not m.is_zero() for J, m in aff.components.items()):
            raise ShapeMismatch("polynomial has lower-order components")
        return aff.multilinear_part()

    @classmethod
    def random(cls, shape, support, rng, density=1.0, nonzero=False):
        support = _support(shape, support)
        entries = {}
        ranges = [range(shape.dims[t]) for t in support]
        for idx in itertools.product(*ranges):
            if density >= 1.0 or rng.random() < density:
                entries[idx] = int(rng.integers(0, shape.p))
        m = cls(shape, support, entries)
        if nonzero and m.is_zero():
            idx = tuple(int(rng.integers(0, shape.dims[t])) for t in support)
            m = cls(shape, support, {idx: int(rng.integers(1, shape.p))})
        return m


class MultiAffineMap:
    __slots__ = ("shape", "support", "components", "_hash")

    def __init__(self, shape, support, components=None):
        self.shape = shape
        self.support = _support(shape, support)
        comps = {}
        for J, m in (components or {}).items():
            J = _support(shape, J)
            if not set(J) <= set(self.support):
                raise ShapeMismatch(f"component {J} not inside support {self.support}")
            if not isinstance(m, MultiLinearMap):
                raise TypeError("components must be MultiLinearMap values")
            if m.support != J:
                raise ShapeMismatch("component support mismatch")
            if not m.is_zero():
                comps[J] = comps[J] + m if J in comps else m
        self.components = dict(sorted(comps.items(), key=lambda kv: (len(kv[0]), kv[0])))
        self._hash = None

    @property
    def p(self):
        return self.shape.p

    @property
    def degree(self):
        return len(self.support)

    def is_full(self):
        return self.support in self.components

    def is_zero(self):
        return not self.components

    def multilinear_part(self):
        return self.components.get(self.support, MultiLinearMap(self.shape, self.support))

    tilde = multilinear_part

    def component(self, J):
        J = _support(self.shape, J)
        return self.components.get(J, MultiLinearMap(self.shape, J))

    def __eq__(self, other):
        if not isinstance(other, MultiAffineMap):
            return NotImplemented
        return (self.shape == other.shape and self.support == other.support
                and self.components == other.components)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.shape, self.support, tuple(self.components.items())))
        return self._hash

    def __repr__(self):
        return f"MultiAffineMap(support={self.support}, components={list(self.components.values())})"

    def to_poly(self):
        out = Poly.zero(self.shape.p, self.shape.n)
        for m in self.components.values():
            out = out + m.to_poly()
        return out

    def evaluate(self, x):
        return sum(m.evaluate(x) for m in self.components.values()) % self.p

    __call__ = evaluate

    def evaluate_many(self, X):
        return self.to_poly().evaluate_many(X)

    def __add__(self, other):
        support = tuple(sorted(set(self.support) | set(other.support)))
        return MultiAffineMap.from_poly(self.shape, self.to_poly() + other.to_poly(), support)

    def scale(self, a):
        return MultiAffineMap(self.shape, self.support,
                              {J: m.scale(a) for J, m in self.components.items()})

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def substitute(self, assign):
        """Partial evaluation at y on the factors in `assign`."""
        shape = self.shape
        fixed = {}
        for t, vec in assign.items():
            vec = tuple(vec)
            if len(vec) != shape.dims[t]:
                raise ShapeMismatch(f"factor {t} expects {shape.dims[t]} coordinates")
            for j, v in zip(shape.block(t), vec):
                fixed[j] = int(v) % shape.p
        poly = self.to_poly().substitute(fixed)
        support = tuple(t for t in self.support if t not in assign)
        return MultiAffineMap.from_poly(shape, poly, support)

    @classmethod
    def from_poly(cls, shape, poly, support=None):
        """Split a multi-affine polynomial into its multilinear components."""
        if poly.n != shape.n:
            raise ShapeMismatch("polynomial ring does not match shape")
        where = _block_of(shape)
        groups = {}
        for e, c in poly.terms:
            J, idx = [], []
            for v, k in enumerate(e):
                if not k:
                    continue
                if k > 1:
                    raise ShapeMismatch("polynomial is not multi-affine")
                t, j = where[v]
                if J and J[-1] == t:
                    raise ShapeMismatch("two variables from one factor in a monomial")
                J.append(t)
                idx.append(j)
            groups.setdefault(tuple(J), {})[tuple(idx)] = c
        if support is None:
            support = tuple(sorted({t for J in groups for t in J}))
        support = _support(shape, support)
        comps = {}
        for J, ent in groups.items():
            if not set(J) <= set(support):
                raise ShapeMismatch(f"monomials outside support {support}")
            comps[J] = MultiLinearMap(shape, J, ent)
        return cls(shape, support, comps)

    @classmethod
    def random(cls, shape, support, rng, density=1.0, full=True):
        support = _support(shape, support)
        comps = {}
        for r in range(len(support) + 1):
            for J in itertools.combinations(support, r):
                comps[J] = MultiLinearMap.random(shape, J, rng, density,
                                                 nonzero=(full and J == support))
        return cls(shape, support, comps)


def as_affine(m):
    return m.as_affine() if isinstance(m, MultiLinearMap) else m


def contract_last(P, pivot=None):
    """Contraction against the pivot factor (default: last factor of the support)."""
    if pivot is None:
        pivot = P.support[-1]
    return P.contract(pivot)


def diagonal_poly(m):
    """Q(x, ..., x): compose a map on equal factors with the diagonal."""
    shape = m.shape
    n = shape.dims[0]
    if any(d != n for d in shape.dims):
        raise ShapeMismatch("diagonal needs equal factor dimensions")
    positions = [v % n for v in range(shape.n)]
    return m.to_poly().embed(n, positions)
