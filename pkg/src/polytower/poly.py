"""Sparse multivariate polynomials over F_p.

A polynomial is a mapping from exponent tuples to nonzero coefficients in
[0, p).  Terms are kept in graded-lex order (higher total degree first,
then lexicographically larger exponent vectors first), so two polynomials
are equal exactly when their term tuples are equal.  The zero polynomial
has degree -1.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import CharacteristicTooSmall, ShapeMismatch
from .field import check_prime


def _key(e):
    return (-sum(e), tuple(-x for x in e))


def monomials(n, d):
    """Exponent tuples of total degree exactly d, in graded-lex order."""
    if d < 0:
        return []
    out = []

    def rec(prefix, left, slots):
        if slots == 1:
            out.append(prefix + (left,))
            return
        for a in range(left, -1, -1):
            rec(prefix + (a,), left - a, slots - 1)

    if n == 0:
        return [()] if d == 0 else []
    rec((), d, n)
    return out


def monomials_upto(n, d):
    out = []
    for e in range(d, -1, -1):
        out.extend(monomials(n, e))
    return out


class Poly:
    __slots__ = ("p", "n", "_c", "_terms", "degree", "_hash")

    def __init__(self, p, n, coeffs=None):
        self.p = p
        self.n = n
        c = {}
        if coeffs:
            items = coeffs.items() if isinstance(coeffs, dict) else coeffs
            for e, v in items:
                e = tuple(int(x) for x in e)
                if len(e) != n:
                    raise ShapeMismatch(f"exponent {e} has length != {n}")
                if any(x < 0 for x in e):
                    raise ValueError("negative exponent")
                v = (c.get(e, 0) + int(v)) % p
                if v:
                    c[e] = v
                else:
                    c.pop(e, None)
        self._c = c
        self._terms = tuple(sorted(c.items(), key=lambda t: _key(t[0])))
        self.degree = max((sum(e) for e in c), default=-1)
        self._hash = None

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls, p, n):
        return cls(p, n)

    @classmethod
    def constant(cls, p, n, c):
        return cls(p, n, {(0,) * n: c})

    @classmethod
    def variable(cls, p, n, i):
        e = [0] * n
        e[i] = 1
        return cls(p, n, {tuple(e): 1})

    @classmethod
    def linear(cls, p, coeffs, const=0):
        n = len(coeffs)
        d = {}
        for i, a in enumerate(coeffs):
            e = [0] * n
            e[i] = 1
            d[tuple(e)] = int(a)
        d[(0,) * n] = const
        return cls(p, n, d)

    @classmethod
    def from_terms(cls, p, n, terms):
        """terms: iterable of (coefficient, exponents)."""
        return cls(p, n, [(e, c) for c, e in terms])

    # -- basic access ------------------------------------------------------
    @property
    def terms(self):
        return self._terms

    def coeff(self, e):
        return self._c.get(tuple(e), 0)

    def coeff_dict(self):
        return dict(self._c)

    def is_zero(self):
        return not self._c

    def __bool__(self):
        return bool(self._c)

    def __len__(self):
        return len(self._c)

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.p == other.p and self.n == other.n and self._terms == other._terms
        if isinstance(other, int):
            return self == Poly.constant(self.p, self.n, other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.p, self.n, self._terms))
        return self._hash

    def _check(self, other):
        if self.p != other.p or self.n != other.n:
            raise ShapeMismatch("polynomials over different rings")

    def _lift(self, other):
        if isinstance(other, Poly):
            self._check(other)
            return other
        if isinstance(other, (int, np.integer)):
            return Poly.constant(self.p, self.n, int(other))
        return None

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        d = dict(self._c)
        for e, v in other._c.items():
            d[e] = d.get(e, 0) + v
        return Poly(self.p, self.n, d)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.p, self.n, {e: -v for e, v in self._c.items()})

    def __sub__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def scale(self, a):
        a %= self.p
        if a == 0:
            return Poly.zero(self.p, self.n)
        return Poly(self.p, self.n, {e: v * a for e, v in self._c.items()})

    def __mul__(self, other):
        if isinstance(other, (int, np.integer)):
            return self.scale(int(other))
        other = self._lift(other)
        if other is None:
            return NotImplemented
        p = self.p
        d = {}
        for e1, v1 in self._c.items():
            for e2, v2 in other._c.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                d[e] = (d.get(e, 0) + v1 * v2) % p
        return Poly(p, self.n, d)

    __rmul__ = __mul__

    def __pow__(self, k):
        out = Poly.constant(self.p, self.n, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- evaluation --------------------------------------------------------
    def evaluate(self, x):
        x = tuple(x)
        if len(x) != self.n:
            raise ShapeMismatch(f"point has {len(x)} coordinates, expected {self.n}")
        p = self.p
        total = 0
        for e, c in self._terms:
            t = c
            for xi, k in zip(x, e):
                if k:
                    t = t * pow(int(xi), k, p) % p
            total += t
        return total % p

    __call__ = evaluate

    def evaluate_many(self, X):
        """Values at every row of the (N, n) integer array X."""
        X = np.asarray(X, dtype=np.int64)
        if X.ndim != 2 or X.shape[1] != self.n:
            raise ShapeMismatch("point array has wrong width")
        p = self.p
        out = np.zeros(X.shape[0], dtype=np.int64)
        powers = {}

        def pw(i, k):
            key = (i, k)
            if key not in powers:
                if k == 1:
                    powers[key] = X[:, i] % p
                else:
                    powers[key] = (pw(i, k - 1) * (X[:, i] % p)) % p
            return powers[key]

        for e, c in self._terms:
            t = np.full(X.shape[0], c, dtype=np.int64)
            for i, k in enumerate(e):
                if k:
                    t = (t * pw(i, k)) % p
            out = (out + t) % p
        return out

    # -- structure ---------------------------------------------------------
    def homogeneous_component(self, d):
        return Poly(self.p, self.n, {e: v for e, v in self._c.items() if sum(e) == d})

    def homogeneous_part(self):
        """Top-degree homogeneous component (zero stays zero)."""
        if self.degree < 0:
            return self
        return self.homogeneous_component(self.degree)

    def is_homogeneous(self):
        return len({sum(e) for e in self._c}) <= 1

    def variables(self):
        return sorted({i for e in self._c for i, k in enumerate(e) if k})

    def max_exponents(self):
        m = [0] * self.n
        for e in self._c:
            for i, k in enumerate(e):
                if k > m[i]:
                    m[i] = k
        return m

    def constant_term(self):
        return self._c.get((0,) * self.n, 0)

    # -- composition -------------------------------------------------------
    def compose(self, images):
        """P(g_1, ..., g_n) for polynomials g_i sharing a ring."""
        if len(images) != self.n:
            raise ShapeMismatch("need one image per variable")
        if not images:
            raise ShapeMismatch("cannot compose a polynomial in zero variables")
        p, m = self.p, images[0].n
        cache = {}

        def pw(i, k):
            if k == 0:
                return Poly.constant(p, m, 1)
            key = (i, k)
            if key not in cache:
                cache[key] = images[i] if k == 1 else pw(i, k - 1) * images[i]
            return cache[key]

        acc = {}
        for e, c in self._terms:
            t = Poly.constant(p, m, c)
            for i, k in enumerate(e):
                if k:
                    t = t * pw(i, k)
            for e2, v in t._c.items():
                acc[e2] = acc.get(e2, 0) + v
        return Poly(p, m, acc)

    def restrict_affine(self, matrix, offset=None):
        """P o w with w(t) = matrix @ t + offset, matrix of shape (n, m)."""
        M = np.asarray(matrix, dtype=np.int64)
        if M.ndim != 2 or M.shape[0] != self.n:
            raise ShapeMismatch(f"affine map must have {self.n} rows")
        m = M.shape[1]
        b = [0] * self.n if offset is None else [int(v) for v in offset]
        if len(b) != self.n:
            raise ShapeMismatch("offset length mismatch")
        if self.n == 0:
            return Poly.constant(self.p, m, self.constant_term())
        images = [Poly.linear(self.p, M[i].tolist(), b[i]) for i in range(self.n)]
        return self.compose(images)

    def shift(self, t):
        """x -> P(x + t)."""
        t = tuple(t)
        if len(t) != self.n:
            raise ShapeMismatch("shift vector length mismatch")
        return self.restrict_affine(np.eye(self.n, dtype=np.int64), t)

    def discrete_derivative(self, t):
        """x -> P(x + t) - P(x)."""
        return self.shift(t) - self

    def substitute(self, assign):
        """Fix some variables to values; the ring is unchanged."""
        p = self.p
        acc = {}
        for e, c in self._terms:
            e2 = list(e)
            for i, v in assign.items():
                if e2[i]:
                    c = c * pow(int(v), e2[i], p) % p
                    e2[i] = 0
            if c:
                e2 = tuple(e2)
                acc[e2] = acc.get(e2, 0) + c
        return Poly(p, self.n, acc)

    def embed(self, n_new, positions):
        """Rename variable i to variable positions[i] in a ring of n_new variables."""
        acc = {}
        for e, c in self._terms:
            e2 = [0] * n_new
            for i, k in enumerate(e):
                if k:
                    e2[positions[i]] += k
            acc[tuple(e2)] = acc.get(tuple(e2), 0) + c
        return Poly(self.p, n_new, acc)

    # -- polarization ------------------------------------------------------
    def polarize(self):
        """Symmetric multilinear form (1/d!) D_{t_1}...D_{t_d} P on (F^n)^d.

        Computed by expanding the difference operators symbolically in the
        ring F[y, t_1, ..., t_d]; what survives d differences is independent
        of y and multilinear in the t blocks.
        """
        from .field import SpaceShape
        from .multiaffine import MultiLinearMap

        d, n, p = self.degree, self.n, self.p
        if d >= p:
            raise CharacteristicTooSmall(f"degree {d} needs p > {d}, got p = {p}")
        if d <= 0:
            raise ValueError("polarization needs a polynomial of positive degree")
        total = n * (d + 1)
        Q = self.embed(total, list(range(n)))
        for j in range(1, d + 1):
            images = []
            for i in range(n):
                g = Poly.variable(p, total, i) + Poly.variable(p, total, j * n + i)
                images.append(g)
            ident = [Poly.variable(p, total, i) for i in range(total)]
            shifted = Q.compose(images + ident[n:])
            Q = shifted - Q
        Q = Q.scale(pow(math.factorial(d), -1, p))
        if any(any(e[:n]) for e, _ in Q.terms):
            raise AssertionError("polarization left a dependence on the base point")
        shape = SpaceShape(p, (n,) * d)
        entries = {}
        for e, c in Q.terms:
            idx = []
            for j in range(1, d + 1):
                blk = e[j * n:(j + 1) * n]
                idx.append(next(i for i, k in enumerate(blk) if k))
            entries[tuple(idx)] = c
        return MultiLinearMap(shape, tuple(range(d)), entries)

    # -- dense evaluation over the whole space -----------------------------
    def grid(self):
        return GridEvaluator(self)

    # -- display -----------------------------------------------------------
    def __repr__(self):
        if not self._c:
            return f"Poly(0 over F_{self.p}^{self.n})"
        parts = []
        for e, c in self._terms:
            mono = "*".join(
                f"x{i + 1}" + (f"^{k}" if k > 1 else "") for i, k in enumerate(e) if k
            )
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            else:
                parts.append(f"{c}*{mono}")
        return f"Poly({' + '.join(parts)} over F_{self.p}^{self.n})"


def random_poly(p, n, d, rng, density=1.0, homogeneous=False):
    """Random polynomial of degree <= d (exactly d when possible).

    rng is a numpy Generator.  Each admissible monomial is kept with
    probability `density`; coefficients are uniform nonzero.
    """
    degs = [d] if homogeneous else range(d, -1, -1)
    coeffs = {}
    for e in degs:
        for m in monomials(n, e):
            if density >= 1.0 or rng.random() < density:
                coeffs[m] = int(rng.integers(1, p))
    if d >= 0 and not any(sum(m) == d for m in coeffs):
        mons = monomials(n, d)
        coeffs[mons[int(rng.integers(len(mons)))]] = int(rng.integers(1, p))
    return Poly(p, n, coeffs)


class GridEvaluator:
    """Evaluate a polynomial on blocks of the full grid F_p^n.

    A block fixes the first j coordinates (the prefix) and covers the
    p^(n-j) points with that prefix, in lexicographic order.  The values
    are produced by contracting a dense coefficient tensor with the power
    table x -> x^e along each remaining axis.
    """

    def __init__(self, poly):
        self.poly = poly
        self.p = p = poly.p
        self.n = poly.n
        self.dims = [k + 1 for k in poly.max_exponents()]
        if poly.terms:
            self.exps = np.array([e for e, _ in poly.terms], dtype=np.int64)
            self.coefs = np.array([c for _, c in poly.terms], dtype=np.int64)
        else:
            self.exps = np.zeros((0, self.n), dtype=np.int64)
            self.coefs = np.zeros(0, dtype=np.int64)
        self._tables = {}
        self._safe_matmul = max(self.dims, default=1) * (p - 1) ** 2 < 2**62

    def table(self, D):
        if D not in self._tables:
            p = self.p
            W = np.ones((p, D), dtype=np.int64)
            x = np.arange(p, dtype=np.int64)
            for e in range(1, D):
                W[:, e] = (W[:, e - 1] * x) % p
            self._tables[D] = W
        return self._tables[D]

    def block(self, prefix):
        p, n = self.p, self.n
        j = len(prefix)
        if self.coefs.size == 0:
            return np.zeros(p ** (n - j), dtype=np.int64)
        w = self.coefs.copy()
        for i, a in enumerate(prefix):
            col = self.exps[:, i]
            if a == 0:
                w = np.where(col > 0, 0, w)
            else:
                pw = np.array([pow(int(a), int(k), p) for k in range(int(col.max()) + 1)],
                              dtype=np.int64)
                w = (w * pw[col]) % p
        rest = self.dims[j:]
        if not rest:
            return np.array([int(w.sum() % p)], dtype=np.int64)
        flat = np.ravel_multi_index(tuple(self.exps[:, j:].T), rest)
        C = np.zeros(int(np.prod(rest)), dtype=np.int64)
        np.add.at(C, flat, w)
        T = (C % p).reshape(rest)
        for ax, D in enumerate(rest):
            W = self.table(D)
            Tm = np.moveaxis(T, ax, -1)
            if self._safe_matmul:
                out = (Tm @ W.T) % p
            else:
                out = np.zeros(Tm.shape[:-1] + (p,), dtype=np.int64)
                for e in range(D):
                    out = (out + (Tm[..., e, None] * W[:, e]) % p) % p
            T = np.moveaxis(out, -1, ax)
        return np.ascontiguousarray(T).reshape(-1)


def prefix_length(p, n, max_block=1 << 18):
    """Smallest j with p^(n-j) <= max_block (at least 0)."""
    j = 0
    while j < n and p ** (n - j) > max_block:
        j += 1
    return j


def prefixes(p, j):
    return itertools.product(range(p), repeat=j)
