"""Prime fields, additive characters and point spaces.

Points of a product space V_1 x ... x V_k are stored flat: the coordinates
of V_1 first, then V_2, and so on.  Exhaustive enumeration walks the flat
coordinate vectors in lexicographic order (first coordinate most
significant), so the point with flat index ``i`` is the base-p expansion
of ``i``.
"""
from __future__ import annotations

import cmath
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import LimitExceeded, NotPrime, ShapeMismatch

DEFAULT_LIMIT = 2**32
MAX_P = 2**31


def exhaustive_limit() -> int:
    """Largest domain that exhaustive mode will walk (POLYTOWER_LIMIT overrides)."""
    raw = os.environ.get("POLYTOWER_LIMIT")
    if raw:
        return int(raw)
    return DEFAULT_LIMIT


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p < 4:
        return True
    if p % 2 == 0:
        return False
    r = math.isqrt(p)
    f = 3
    while f <= r:
        if p % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class PrimeField:
    p: int

    def __post_init__(self):
        if not (2 <= self.p < MAX_P) or not is_prime(self.p):
            raise NotPrime(f"{self.p} is not a prime in [2, 2^31)")

    def add(self, a, b):
        return (a + b) % self.p

    def sub(self, a, b):
        return (a - b) % self.p

    def mul(self, a, b):
        return (a * b) % self.p

    def neg(self, a):
        return (-a) % self.p

    def inv(self, a):
        a %= self.p
        if a == 0:
            raise ZeroDivisionError("0 has no inverse")
        return pow(a, -1, self.p)

    def character(self, a, t=1):
        return character(self.p, a, t)


def check_prime(p: int) -> int:
    PrimeField(p)
    return p


def character(p: int, a: int, t: int = 1) -> complex:
    """chi_t(a) = exp(2 pi i t a / p)."""
    return cmath.exp(2j * math.pi * ((t * a) % p) / p)


def character_table(p: int, t: int = 1) -> np.ndarray:
    a = (np.arange(p, dtype=np.int64) * t) % p
    return np.exp(2j * np.pi * a / p)


@dataclass(frozen=True)
class SpaceShape:
    """A product of coordinate spaces F_p^{n_1} x ... x F_p^{n_k}."""

    p: int
    dims: tuple

    def __post_init__(self):
        check_prime(self.p)
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ShapeMismatch(f"bad dims {self.dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def k(self):
        return len(self.dims)

    @property
    def n(self):
        return sum(self.dims)

    @property
    def size(self):
        return self.p ** self.n

    def offsets(self):
        out, acc = [], 0
        for d in self.dims:
            out.append(acc)
            acc += d
        return out

    def block(self, i):
        """Flat coordinate indices belonging to factor i."""
        off = self.offsets()[i]
        return list(range(off, off + self.dims[i]))

    def split(self, x):
        """Flat point -> per-factor coordinate tuples."""
        x = tuple(x)
        if len(x) != self.n:
            raise ShapeMismatch(f"point of length {len(x)} for shape {self.dims}")
        return tuple(x[o:o + d] for o, d in zip(self.offsets(), self.dims))

    def join(self, parts):
        flat = []
        for part, d in zip(parts, self.dims):
            if len(part) != d:
                raise ShapeMismatch("factor length mismatch")
            flat.extend(int(v) % self.p for v in part)
        if len(parts) != self.k:
            raise ShapeMismatch("wrong number of factors")
        return tuple(flat)


def as_shape(p, dims) -> SpaceShape:
    if isinstance(dims, int):
        dims = (dims,)
    return SpaceShape(p, tuple(dims))


def check_limit(p: int, nvars: int, limit=None):
    limit = exhaustive_limit() if limit is None else limit
    total = p ** nvars
    if total > limit:
        raise LimitExceeded(f"{p}^{nvars} = {total} points exceeds limit {limit}")
    return total


def index_to_points(p: int, nvars: int, idx: np.ndarray) -> np.ndarray:
    """Flat indices -> (len, nvars) coordinate array in lexicographic order."""
    idx = np.asarray(idx, dtype=np.int64)
    out = np.empty((idx.shape[0], nvars), dtype=np.int64)
    rest = idx.copy()
    for j in range(nvars - 1, -1, -1):
        out[:, j] = rest % p
        rest //= p
    return out


def chunk_ranges(total: int, chunk: int):
    """Disjoint contiguous [start, stop) ranges covering range(total)."""
    return [(s, min(s + chunk, total)) for s in range(0, total, chunk)]


def point_chunks(shape: SpaceShape, chunk: int = 1 << 16, limit=None):
    """Yield (start, points) blocks covering the whole space in order."""
    total = check_limit(shape.p, shape.n, limit)
    for start, stop in chunk_ranges(total, chunk):
        yield start, index_to_points(shape.p, shape.n, np.arange(start, stop))


def enumerate_points(shape: SpaceShape, limit=None):
    """Every point of the space exactly once, lexicographically, as tuples."""
    for _, block in point_chunks(shape, limit=limit):
        for row in block.tolist():
            yield tuple(row)


# ---- counter-based sampling ------------------------------------------------

_MASK64 = (1 << 64) - 1


def _blocks_per_point(nvars):
    return max(1, -(-nvars // 4))


def random_points(shape: SpaceShape, seed: int, start: int, count: int) -> np.ndarray:
    """Points with indices start..start+count-1 for the given seed.

    Each index owns a fixed run of Philox counter blocks, so a point depends
    only on (seed, index) and batches agree with single draws.  Coordinates
    are 64-bit words reduced mod p (bias below p / 2^64).
    """
    nv = shape.n
    bpp = _blocks_per_point(nv)
    gen = np.random.Philox(key=int(seed) & _MASK64)
    if start:
        gen.advance(int(start) * bpp)
    raw = gen.random_raw(4 * bpp * count).reshape(count, 4 * bpp)[:, :nv]
    return (raw % np.uint64(shape.p)).astype(np.int64)


def random_point(shape: SpaceShape, seed: int, index: int):
    return tuple(int(v) for v in random_points(shape, seed, index, 1)[0])


def make_rng(seed: int) -> np.random.Generator:
    """Philox-backed generator keyed by the seed (stable across platforms)."""
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))
