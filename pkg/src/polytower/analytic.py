"""Exact enumeration over zero loci: histograms, bias and verifiers.

Everything here is driven by exact integer counts.  A scan walks F_p^N in
blocks (all points sharing a fixed prefix of leading coordinates), which
are independent and can be handed to worker threads; partial counts are
integer arrays and are summed in block order, so the result does not
depend on scheduling.
"""
from __future__ import annotations

import cmath
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import AcceptanceTooLow, LimitExceeded, ShapeMismatch
from .field import (SpaceShape, character_table, check_limit, exhaustive_limit,
                    index_to_points, random_points)
from .multiaffine import MultiAffineMap, MultiLinearMap
from .poly import GridEvaluator, Poly, prefix_length, prefixes
from .tower import Tower, to_poly

TOL = 1e-12
BLOCK = 1 << 17


# ---------------------------------------------------------------------------
# scanning engine

def _restrict_to(P, dv):
    pos = {v: i for i, v in enumerate(dv)}
    for e, _ in P.terms:
        if any(k and v not in pos for v, k in enumerate(e)):
            raise ShapeMismatch("map depends on variables outside the domain")
    return Poly(P.p, len(dv), {tuple(e[v] for v in dv): c for e, c in P.terms})


def ring(P=None, on=None):
    """Resolve (p, nvars, polynomial for P or None, constraint polys)."""
    if isinstance(on, Tower):
        dv = on.domain_vars()
        cons = on.domain_polys()
        p = on.p
        if P is not None:
            P = to_poly(P)
            if P.p != p or P.n != on.shape.n:
                raise ShapeMismatch("map and tower live on different spaces")
        poly = None if P is None else _restrict_to(P, dv)
        return p, len(dv), poly, cons
    if on is not None:
        raise TypeError("domain must be a Tower or None")
    poly = to_poly(P)
    return poly.p, poly.n, poly, []


def scan(p, nvars, polys, work, threads=1, limit=None):
    """Apply work(values_list, start_index) to every block; returns list of results.

    values_list holds, per polynomial, its int64 values on the block.
    """
    check_limit(p, nvars, limit)
    if p > BLOCK:
        total = p ** nvars
        ranges = [(s, min(s + BLOCK, total)) for s in range(0, total, BLOCK)]

        def job(r):
            X = index_to_points(p, nvars, np.arange(*r))
            return work([P.evaluate_many(X) for P in polys], r[0])

        jobs = ranges
    else:
        j = prefix_length(p, nvars, BLOCK)
        evals = [GridEvaluator(P) for P in polys]
        size = p ** (nvars - j)
        pres = list(prefixes(p, j))

        def job(pre):
            start = 0
            for a in pre:
                start = start * p + a
            return work([g.block(pre) for g in evals], start * size)

        jobs = pres
    if threads and threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(job, jobs))
    return [job(x) for x in jobs]


def _mask(vals, ncons):
    if ncons == 0:
        return None
    m = vals[0] == 0
    for v in vals[1:ncons]:
        m &= v == 0
    return m


# ---------------------------------------------------------------------------
# zero loci and histograms

@dataclass
class ZeroLocus:
    tower: object
    p: int
    nvars: int
    count: int

    @property
    def domain_size(self):
        return self.p ** self.nvars

    def mask(self, limit=None):
        cons = self.tower.domain_polys() if self.tower is not None else []
        parts = scan(self.p, self.nvars, cons,
                     lambda vals, s: _mask(vals, len(cons)) if cons else
                     np.ones(len(vals[0]) if vals else 1, dtype=bool), limit=limit)
        if not cons:
            return np.ones(self.domain_size, dtype=bool)
        return np.concatenate(parts)

    def points(self, limit=None):
        idx = np.nonzero(self.mask(limit))[0]
        return index_to_points(self.p, self.nvars, idx)


def zero_locus(T, threads=1, limit=None):
    p, nv, _, cons = ring(None, T)
    if not cons:
        check_limit(p, nv, limit)
        return ZeroLocus(T, p, nv, p ** nv)
    parts = scan(p, nv, cons, lambda vals, s: int(_mask(vals, len(cons)).sum()),
                 threads, limit)
    return ZeroLocus(T, p, nv, int(sum(parts)))


@dataclass
class LevelSetHistogram:
    p: int
    counts: np.ndarray

    @property
    def domain_size(self):
        return int(self.counts.sum())

    def tolist(self):
        return [int(v) for v in self.counts]

    def character_sum(self, t=1):
        nz = np.nonzero(self.counts)[0]
        if nz.size == 0:
            return 0j
        return complex(np.dot(self.counts[nz].astype(np.float64),
                              character_table(self.p, t)[nz]))


def level_histogram(P, on=None, threads=1, limit=None):
    """Exact counts N_a = #{x in X : P(x) = a}; X = whole space or Z(on)."""
    p, nv, poly, cons = ring(P, on)
    k = len(cons)

    def work(vals, start):
        m = _mask(vals, k)
        v = vals[k] if m is None else vals[k][m]
        return np.bincount(v, minlength=p).astype(np.int64)

    parts = scan(p, nv, cons + [poly], work, threads, limit)
    counts = np.zeros(p, dtype=np.int64)
    for c in parts:
        counts += c
    return LevelSetHistogram(p, counts)


@dataclass
class BiasReport:
    histogram: LevelSetHistogram
    bias: float
    real_part: float
    imag_part: float
    log_q_bias: float
    t: int = 1

    def to_json(self):
        return {
            "histogram": self.histogram.tolist(),
            "domain_size": self.histogram.domain_size,
            "bias": self.bias,
            "real_part": self.real_part,
            "imag_part": self.imag_part,
            "log_q_bias": "inf" if self.log_q_bias == math.inf else self.log_q_bias,
            "character_exponent": self.t,
        }


def bias_from_histogram(h, t=1):
    size = h.domain_size
    if size == 0:
        return BiasReport(h, 0.0, 0.0, 0.0, math.inf, t)
    nz = np.nonzero(h.counts)[0]
    if nz.size == 1:
        z = character_table(h.p, t)[nz[0]]
        re, im, b = float(z.real), float(z.imag), 1.0
    else:
        s = h.character_sum(t) / size
        re, im, b = s.real, s.imag, abs(s)
    lq = math.inf if b <= 0 else -math.log(b) / math.log(h.p)
    if b == 1.0:
        lq = 0.0
    return BiasReport(h, b, re, im, lq, t)


def bias(P, on=None, t=1, threads=1, limit=None):
    """|E_{x in X} chi_t(P(x))| from exact level-set counts."""
    return bias_from_histogram(level_histogram(P, on, threads, limit), t)


def expectation(P, on=None, t=1, threads=1, limit=None):
    """E_{x in X} chi_t(P(x)) as a complex number (0 on an empty domain)."""
    r = bias(P, on, t, threads, limit)
    return complex(r.real_part, r.imag_part)


# ---------------------------------------------------------------------------
# Monte Carlo

@dataclass
class MonteCarloEstimate:
    estimate: complex
    bias: float
    half_width: float
    samples: int
    accepted: int
    seed: int
    histogram: list = field(default_factory=list)

    def to_json(self):
        return {"bias": self.bias, "real_part": self.estimate.real,
                "imag_part": self.estimate.imag, "half_width": self.half_width,
                "samples": self.samples, "accepted": self.accepted, "seed": self.seed,
                "confidence": 0.99, "histogram": self.histogram}


def hoeffding_half_width(n, delta=0.01):
    """99% half-width for the modulus of a mean of unit complex numbers.

    Real and imaginary parts each lie in [-1, 1]; each gets delta/2.
    """
    if n == 0:
        return math.inf
    eps = math.sqrt(2 * math.log(4 / delta) / n)
    return math.sqrt(2) * eps


def monte_carlo_bias(P, T=None, samples=100000, seed=0, t=1, floor=1e-4, batch=1 << 16):
    if samples <= 0:
        raise ValueError("samples must be positive")
    if T is None:
        poly = to_poly(P)
        p, nv, cons = poly.p, poly.n, []
    else:
        p, nv, poly, cons = ring(P, T)
        m = T.dimension
        if float(p) ** (-m) < floor:
            raise AcceptanceTooLow(f"expected acceptance {p}^-{m} below floor {floor}")
    shape = SpaceShape(p, (nv,)) if nv else None
    counts = np.zeros(p, dtype=np.int64)
    done = 0
    while done < samples:
        cnt = min(batch, samples - done)
        if shape is None:
            X = np.zeros((cnt, 0), dtype=np.int64)
        else:
            X = random_points(shape, seed, done, cnt)
        ok = np.ones(cnt, dtype=bool)
        for Q in cons:
            ok &= Q.evaluate_many(X) == 0
        vals = poly.evaluate_many(X[ok]) if ok.any() else np.zeros(0, dtype=np.int64)
        counts += np.bincount(vals, minlength=p)
        done += cnt
    h = LevelSetHistogram(p, counts)
    rep = bias_from_histogram(h, t)
    acc = int(counts.sum())
    return MonteCarloEstimate(complex(rep.real_part, rep.imag_part), rep.bias,
                              hoeffding_half_width(acc), samples, acc, seed, h.tolist())


# ---------------------------------------------------------------------------
# uniformity and fibers

@dataclass
class UniformityReport:
    count: int
    m: int
    n: int
    defect: Fraction
    bound: object
    passed: bool

    def to_json(self):
        return {"count": self.count, "m": self.m, "n": self.n,
                "defect": str(self.defect), "defect_float": float(self.defect),
                "bound": float(self.bound), "pass": self.passed}


def q_power(p, s):
    """p^(-s) exactly when s is an integer."""
    if float(s).is_integer():
        return Fraction(1, p ** int(s)) if s >= 0 else Fraction(p ** int(-s))
    return p ** (-float(s))


def check_s_uniform(T, s, threads=1, limit=None):
    """| q^m |Z(T)| / q^n - 1 | as an exact rational, against q^(-s)."""
    Z = zero_locus(T, threads, limit)
    m, n = T.dimension, Z.nvars
    defect = abs(Fraction(T.p ** m * Z.count, T.p ** n) - 1)
    bound = q_power(T.p, s)
    return UniformityReport(Z.count, m, n, defect, bound, defect <= bound)


@dataclass
class FiberStatistics:
    p: int
    sizes: list
    deviation: object

    def passes(self, bound):
        return self.deviation < bound

    def to_json(self):
        dev = self.deviation
        return {"sizes": self.sizes, "deviation": "inf" if dev == math.inf else float(dev),
                "deviation_exact": "inf" if dev == math.inf else str(dev)}


def fiber_statistics(polys, threads=1, limit=None):
    polys = [to_poly(P) for P in polys]
    if not polys:
        raise ValueError("need at least one map")
    p, nv = polys[0].p, polys[0].n
    c = len(polys)
    if p ** c > 1 << 24:
        raise LimitExceeded("too many fibers to tabulate")

    def work(vals, start):
        key = np.zeros(len(vals[0]), dtype=np.int64)
        for v in vals:
            key = key * p + v
        return np.bincount(key, minlength=p ** c)

    sizes = np.zeros(p ** c, dtype=np.int64)
    for part in scan(p, nv, polys, work, threads, limit):
        sizes += part
    lo, hi = int(sizes.min()), int(sizes.max())
    dev = math.inf if lo == 0 else Fraction(hi, lo) - 1
    return FiberStatistics(p, [int(v) for v in sizes], dev)


# ---------------------------------------------------------------------------
# Fubini, rank-bias, affine-to-linear

def _g_values(g, X, p):
    if isinstance(g, (Poly, MultiAffineMap, MultiLinearMap)):
        return character_table(p)[to_poly(g).evaluate_many(X)]
    vals = np.asarray(g(X), dtype=np.complex128)
    if np.any(np.abs(vals) > 1 + 1e-9):
        raise ValueError("test function must satisfy |g| <= 1")
    return vals


def _full_points(p, nvars, limit=None):
    check_limit(p, nvars, limit)
    return index_to_points(p, nvars, np.arange(p ** nvars))


@dataclass
class FubiniReport:
    lhs: complex
    rhs: complex
    defect: float

    def to_json(self):
        return {"lhs": [self.lhs.real, self.lhs.imag], "rhs": [self.rhs.real, self.rhs.imag],
                "defect": self.defect}


def fubini_defect(T, I, g, limit=None):
    """| E_{Z(Q)} g - E_{y in Z(Q_I)} E_{z in Z(Q)(y)} g(y, z) | exactly enumerated.

    g is a Poly/multi-affine map (meaning chi(g)) or a vectorized function
    of the flat point array over the tower's domain variables.
    """
    if T.flavor == "polynomial":
        raise ValueError("fubini_defect needs a multi-affine tower")
    I = sorted(set(I) & set(T.domain))
    shape, p = T.shape, T.p
    dv = T.domain_vars()
    X = _full_points(p, len(dv), limit)
    cons = T.domain_polys()
    inZ = np.ones(len(X), dtype=bool)
    for Q in cons:
        inZ &= Q.evaluate_many(X) == 0
    full = np.zeros((len(X), shape.n), dtype=np.int64)
    full[:, dv] = X
    gv = _g_values(g, full, p)
    lhs = complex(gv[inZ].mean()) if inZ.any() else 0j
    # group points by their I-coordinates
    ivars = [v for t in I for v in shape.block(t)]
    col = [dv.index(v) for v in ivars]
    yidx = np.zeros(len(X), dtype=np.int64)
    for c in col:
        yidx = yidx * p + X[:, c]
    ny = p ** len(ivars)
    fib_count = np.bincount(yidx[inZ], minlength=ny)
    fib_re = np.bincount(yidx[inZ], weights=gv[inZ].real, minlength=ny)
    fib_im = np.bincount(yidx[inZ], weights=gv[inZ].imag, minlength=ny)
    # y ranges over Z(Q_I)
    QI = T.restrict_index(I)
    Y = index_to_points(p, len(ivars), np.arange(ny))
    inZI = np.ones(ny, dtype=bool)
    for Q in QI.domain_polys():
        inZI &= Q.evaluate_many(Y) == 0
    if not inZI.any():
        rhs = 0j
    else:
        with np.errstate(invalid="ignore", divide="ignore"):
            inner = np.where(fib_count > 0, (fib_re + 1j * fib_im) / np.maximum(fib_count, 1), 0)
        rhs = complex(inner[inZI].mean())
    return FubiniReport(lhs, rhs, abs(lhs - rhs))


@dataclass
class RankBiasReport:
    real_part: float
    imag_part: float
    r: int
    s: float
    passed: bool
    caveat: bool
    regularity: str

    def to_json(self):
        return {"real_part": self.real_part, "imag_part": self.imag_part, "r": self.r,
                "s": self.s, "pass": self.passed, "caveat": self.caveat,
                "regularity": self.regularity}


def rank_bias_gap(P, T, r, s, A=1.0, B=1.0, regularity=None, budget=None, limit=None):
    """Check Re E_{Z(T)} chi(P) >= q^-r - q^-s and |Im| <= q^-s exactly.

    The caveat flag is raised unless T is known to be (A,B,s)-regular.
    """
    from .tower import check_regularity

    z = expectation(P, T, limit=limit)
    q = T.p
    qs = q ** (-float(s))
    ok = z.real >= q ** (-float(r)) - qs - TOL and abs(z.imag) <= qs + TOL
    if regularity is None:
        regularity = "Proven" if T.dimension == 0 else check_regularity(
            T, A, B, s, budget).status
    return RankBiasReport(z.real, z.imag, r, s, bool(ok), regularity != "Proven", regularity)


def tilde_tower(T):
    """The tower of multilinear parts of a multi-affine tower."""
    from .tower import Layer

    if T.flavor == "polynomial":
        layers = [Layer(tuple(P.homogeneous_part() for P in l.maps), l.degree) for l in T.layers]
        return Tower("polynomial", T.shape, layers, T.domain)
    layers = [Layer(tuple(m.multilinear_part() for m in l.maps), l.degree) for l in T.layers]
    return Tower("multilinear", T.shape, layers, T.domain)


def affine_to_linear_gap(P, T, limit=None):
    """(|E_{Z(T)} chi(P)|, Re E_{Z(T~)} chi(P~)) for a full multi-affine P."""
    lhs = abs(expectation(P, T, limit=limit))
    Pt = P.multilinear_part() if isinstance(P, MultiAffineMap) else P
    rhs = expectation(Pt, tilde_tower(T), limit=limit).real
    return lhs, rhs


# ---------------------------------------------------------------------------
# Cauchy-Schwarz along derivatives

def _table(p, n, g, limit=None):
    X = _full_points(p, n, limit)
    return X, _g_values(g, X, p)


def cauchy_schwarz_gap(f, T, k, limit=None):
    """Both sides of |E_{Z(Q)} g|^(2^k) <= Re E_{t in Z(Q(k))} E_{x in Z(Q_t)} D_t g(x).

    g = chi(f) for a polynomial f; D_t g(x) = g(x + t) * conj(g(x)).
    Returns (lhs, rhs_main); the inequality allows an extra q^(-s) on the right.
    """
    from .tower import polarized_tower

    if T.flavor != "polynomial":
        raise ValueError("needs a polynomial tower")
    p, n = T.p, T.shape.n
    X, gv = _table(p, n, f, limit)
    inZ = np.ones(len(X), dtype=bool)
    for Q in T.polys():
        inZ &= Q.evaluate_many(X) == 0
    lhs = (abs(gv[inZ].mean()) if inZ.any() else 0.0) ** (2 ** k)
    Tk = polarized_tower(T, k)
    check_limit(p, n * k, limit)
    Tpts = index_to_points(p, n * k, np.arange(p ** (n * k)))
    tmask = np.ones(len(Tpts), dtype=bool)
    for Q in Tk.polys():
        tmask &= Q.evaluate_many(Tpts) == 0
    weights = (p ** np.arange(n - 1, -1, -1)).astype(np.int64)
    omegas = list(itertools.product((0, 1), repeat=k))
    total, cnt = 0.0 + 0.0j, 0
    for trow in Tpts[tmask]:
        ts = trow.reshape(k, n)
        prod = np.ones(len(X), dtype=np.complex128)
        ok = np.ones(len(X), dtype=bool)
        for w in omegas:
            shift = (np.array(w) @ ts) % p
            idx = ((X + shift) % p) @ weights
            ok &= inZ[idx]
            v = gv[idx]
            prod *= np.conj(v) if (k - sum(w)) % 2 else v
        cnt += 1
        total += prod[ok].mean() if ok.any() else 0.0
    rhs = (total / cnt).real if cnt else 0.0
    return float(lhs), float(rhs)


# ---------------------------------------------------------------------------
# cubes and vanishing

@dataclass(frozen=True)
class CubeSpec:
    base: tuple
    directions: tuple

    @property
    def m(self):
        return len(self.directions)

    def vertices(self, p):
        for w in itertools.product((0, 1), repeat=self.m):
            x = list(self.base)
            for wi, v in zip(w, self.directions):
                if wi:
                    x = [a + b for a, b in zip(x, v)]
            yield w, tuple(a % p for a in x)


def cube_sum(f, u, vs=None, p=None):
    """f_m(u | v_1..v_m) = sum over w in {0,1}^m of (-1)^|w| f(u + w.v), mod p.

    f is a Poly or a callable on point tuples (then p must be given).
    u may also be a CubeSpec.
    """
    if isinstance(u, CubeSpec):
        u, vs = u.base, u.directions
    p = f.p if p is None else p
    if any(len(v) != len(u) for v in vs):
        raise ShapeMismatch("cube directions must match the base point")
    u = tuple(u)
    total = 0
    for w, x in CubeSpec(tuple(u), tuple(map(tuple, vs))).vertices(p):
        val = f.evaluate(x) if isinstance(f, Poly) else f(x)
        total += (-1) ** sum(w) * val
    return total % p


@dataclass
class CubeReport:
    bad: int
    cubes: int
    fraction: Fraction
    exact: bool
    half_width: float = 0.0

    def to_json(self):
        return {"bad": self.bad, "cubes": self.cubes, "fraction": float(self.fraction),
                "fraction_exact": str(self.fraction), "exact": self.exact,
                "half_width": self.half_width}


def cube_vanishing_fraction(f, X, m, sample=None, seed=0, limit=None):
    """Fraction of m-cubes with all vertices in X on which f_m != 0.

    f: Poly on F_p^n.  X: None (whole space), a Tower, or a boolean mask
    over the lexicographically enumerated space.
    """
    p, n = f.p, f.n
    N = p ** n
    check_limit(p, n, limit)
    pts = index_to_points(p, n, np.arange(N))
    fv = f.evaluate_many(pts)
    if X is None:
        inX = np.ones(N, dtype=bool)
    elif isinstance(X, Tower):
        inX = ZeroLocus(X, p, n, 0).mask(limit)
    else:
        inX = np.asarray(X, dtype=bool)
    if not inX.any():
        return CubeReport(0, 0, Fraction(0), True)
    weights = (p ** np.arange(n - 1, -1, -1)).astype(np.int64)
    omegas = list(itertools.product((0, 1), repeat=m))
    total = N ** (m + 1)
    exact = sample is None
    if exact:
        lim = exhaustive_limit() if limit is None else limit
        if total > lim:
            raise LimitExceeded(f"{total} cubes exceed the exhaustive limit")
    bad = cubes = 0
    chunk = 1 << 16
    count = total if exact else int(sample)
    cshape = SpaceShape(p, (n * (m + 1),)) if not exact else None
    for start in range(0, count, chunk):
        stop = min(start + chunk, count)
        if exact:
            C = index_to_points(p, n * (m + 1), np.arange(start, stop))
        else:
            C = random_points(cshape, seed, start, stop - start)
        U = C[:, :n]
        V = [C[:, n * (i + 1): n * (i + 2)] for i in range(m)]
        allin = np.ones(len(C), dtype=bool)
        acc = np.zeros(len(C), dtype=np.int64)
        for w in omegas:
            pt = U.copy()
            for wi, v in zip(w, V):
                if wi:
                    pt = pt + v
            idx = (pt % p) @ weights
            allin &= inX[idx]
            sign = -1 if sum(w) % 2 else 1
            acc = (acc + sign * fv[idx]) % p
        cubes += int(allin.sum())
        bad += int((allin & (acc != 0)).sum())
    frac = Fraction(bad, cubes) if cubes else Fraction(0)
    hw = 0.0 if exact else (math.sqrt(math.log(2 / 0.01) / (2 * cubes)) if cubes else math.inf)
    return CubeReport(bad, cubes, frac, exact, hw)


def vanishing_fraction(P, T=None, threads=1, limit=None):
    """Exact fraction of Z(T) on which P does not vanish (0 on an empty domain)."""
    h = level_histogram(P, T, threads, limit)
    size = h.domain_size
    if size == 0:
        return Fraction(0)
    return Fraction(size - int(h.counts[0]), size)
