"""Rank engines.

Schmidt rank of polynomials, partition rank of multilinear maps, their
versions relative to a collection of lower maps, collection ranks over
projective combinations, and the degree-bounded membership solver.

The common strategy: only top parts matter (homogeneous top component of a
polynomial, multilinear part of a multi-affine map).  Lower *linear* maps
are removed exactly by restricting to their common kernel W.  Other lower
maps contribute generators g = Q~ * (monomial).  Then

    rank <= r   iff   there is a subspace K of W (codimension r, split
                      per factor in the multilinear case) with
                      F|_K in span(g|_K)

for cubic forms and trilinear maps, where every product has a linear
factor.  Quadratic forms and bilinear maps have closed forms.  Upper bounds
always come with an explicit presentation; lower bounds come from
exhausted searches, closed forms, or the analytic-rank inequality.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CharacteristicTooSmall, LimitExceeded, ShapeMismatch, SystemTooLarge
from .field import exhaustive_limit, index_to_points
from .linalg import (batched_rank, gaussian_binomial, inverse, nullspace, rank as mat_rank,
                     rref, rref_limited, solve, subspaces)
from .multiaffine import MultiAffineMap, MultiLinearMap
from .poly import Poly, monomials, monomials_upto

INF = math.inf
DEFAULT_BUDGET = 10 ** 7
BIAS_CAP = 1 << 17
MAX_UNKNOWNS = 20000
BATCH = 128


# ---------------------------------------------------------------------------
# results

@dataclass
class RankCertificate:
    """Presentation  F + sum R_i Q_i - sum A_j B_j  == 0 in the top part.

    kind: "schmidt", "partition" or "relative".  For polynomials the top part
    is the degree-`degree` component; for multilinear maps it is the
    component on `support`.  multipliers index into the reference list of
    lower maps.
    """
    kind: str
    degree: int
    support: tuple | None
    pairs: list
    multipliers: list
    claimed_rank: int

    @property
    def rank(self):
        return len(self.pairs)


@dataclass
class RankBound:
    lower: float
    upper: float
    status: str
    certificate: RankCertificate | None = None
    lower_bound_source: str = "trivial"
    linear_convention: bool = False
    combination: list | None = None
    candidates: int = 0
    notes: list = field(default_factory=list)

    @property
    def exact(self):
        return self.status == "Exact"

    @property
    def value(self):
        return self.lower if self.lower == self.upper else None

    def to_json(self):
        def num(v):
            return "inf" if v == INF else int(v)
        out = {"lower": num(self.lower), "upper": num(self.upper), "status": self.status,
               "lower_bound_source": self.lower_bound_source,
               "linear_convention": self.linear_convention,
               "candidates": self.candidates}
        if self.combination is not None:
            out["combination"] = [int(a) for a in self.combination]
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _status(lower, upper):
    if lower == upper:
        return "Exact"
    return "Bounded" if lower > 0 or upper < INF else "Unknown"


class Budget:
    def __init__(self, limit=DEFAULT_BUDGET):
        self.limit = limit
        self.used = 0

    @property
    def left(self):
        return self.limit - self.used

    def spend(self, k=1):
        self.used += k


def _budget(b):
    if isinstance(b, Budget):
        return b
    return Budget(DEFAULT_BUDGET if b is None else int(b))


# ---------------------------------------------------------------------------
# modular helpers

def is_square(a, p):
    a %= p
    return a == 0 or p == 2 or pow(a, (p - 1) // 2, p) == 1


def sqrt_mod(a, p):
    """A square root of a mod p, or None (Tonelli-Shanks)."""
    a %= p
    if a == 0 or p == 2:
        return a
    if pow(a, (p - 1) // 2, p) != 1:
        return None
    if p % 4 == 3:
        return pow(a, (p + 1) // 4, p)
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c, t, r = i, b * b % p, t * b * b % p, r * b % p
    return r


# ---------------------------------------------------------------------------
# tensors

def sym_tensor(F, d):
    """Symmetric tensor T with F(x) = T(x, ..., x) for a degree-d form (d < p)."""
    p, n = F.p, F.n
    if d >= p:
        raise CharacteristicTooSmall(f"degree {d} needs p > {d}")
    T = np.zeros((n,) * d, dtype=np.int64)
    inv = pow(math.factorial(d) % p, -1, p)
    for e, c in F.terms:
        if sum(e) != d:
            raise ValueError("sym_tensor expects a homogeneous form")
        idx = [v for v, k in enumerate(e) for _ in range(k)]
        w = c * math.prod(math.factorial(k) for k in e) * inv % p
        for perm in set(itertools.permutations(idx)):
            T[perm] = w
    return T


def ml_tensor(m):
    """Dense tensor of a multilinear map, axes in support order."""
    shape = m.shape
    T = np.zeros(tuple(shape.dims[t] for t in m.support), dtype=np.int64)
    for idx, c in m.entries.items():
        T[idx] = c
    return T


def _contract(T, mats, p, lead=0):
    """Apply mats[a] (in x out) to axis lead + a of T."""
    for a, M in enumerate(mats):
        ax = lead + a
        T = np.moveaxis(np.tensordot(T, M, axes=([ax], [0])), -1, ax) % p
    return T


_LETTERS = "abcdefhijklmnopqrstuvw"


def _batch_restrict(T, stacks, p):
    """T: (G, w_1..w_d); stacks[a]: (nb, w_a, k_a).  Returns (nb, G, k_1..k_d)."""
    d = T.ndim - 1
    ax = _LETTERS[:d]
    out_ax = list(ax)
    X = None
    for a in range(d):
        cur = "".join(out_ax)
        new = out_ax.copy()
        new[a] = "y"
        if X is None:
            X = np.einsum(f"g{cur},z{ax[a]}y->zg{''.join(new)}", T, stacks[a], optimize=False)
        else:
            X = np.einsum(f"zg{cur},z{ax[a]}y->zg{''.join(new)}", X, stacks[a], optimize=False)
        X %= p
        new[a] = ax[a].upper()
        out_ax = new
    return X


def _ceil_analytic_rank(T, p, cap=BIAS_CAP):
    """ceil(-log_p bias) of the multilinear map with tensor T, exactly.

    bias = E_{x_1..x_{k-2}} p^(-rank M(x)); returns None if the enumeration
    exceeds cap, math.inf when the bias is 0 (a nonzero linear map).
    """
    k = T.ndim
    if k == 0:
        return 0
    if not T.any():
        return 0
    if k == 1:
        return INF
    dims = T.shape
    lead = dims[:-2]
    nlead = sum(lead)
    if p ** nlead > cap:
        return None
    w1 = dims[-2]
    num = 0
    total = p ** nlead
    chunk = 1 << 12
    for s in range(0, total, chunk):
        idx = np.arange(s, min(s + chunk, total))
        X = index_to_points(p, nlead, idx) if nlead else np.zeros((len(idx), 0), dtype=np.int64)
        M = np.broadcast_to(T, (len(idx),) + dims)
        off = 0
        for w in lead:
            v = X[:, off:off + w]
            M = np.einsum("bi,bi...->b...", v, M) % p
            off += w
        ranks = batched_rank(M, p)
        num += int(sum(p ** (w1 - int(r)) for r in ranks))
    den = p ** (nlead + w1)
    j = 0
    while den > num * p ** j:
        j += 1
    return j


def bias_rank_lower_bound(m, limit=None):
    """Certified partition-rank lower bound ceil(-log_q bias(m))."""
    if isinstance(m, MultiAffineMap):
        m = m.multilinear_part()
    T = ml_tensor(m)
    lim = exhaustive_limit() if limit is None else limit
    v = _ceil_analytic_rank(T, m.p, cap=lim)
    if v is None:
        raise LimitExceeded("bias enumeration exceeds the exhaustive limit")
    return v


# ---------------------------------------------------------------------------
# lower linear maps: restriction to their common kernel

@dataclass
class _Linear:
    rows: np.ndarray       # RREF rows of the linear forms (l x n)
    transform: np.ndarray  # rows = transform @ forms  (l x m)
    owners: list           # reference index of each form
    free: list
    iota: np.ndarray       # n x w, columns span W

    @property
    def w(self):
        return len(self.free)


def _linear_part(forms, owners, n, p):
    m = len(forms)
    if m == 0:
        return _Linear(np.zeros((0, n), dtype=np.int64), np.zeros((0, 0), dtype=np.int64),
                       [], list(range(n)), np.eye(n, dtype=np.int64))
    L = np.array(forms, dtype=np.int64).reshape(m, n) % p
    aug = np.concatenate([L, np.eye(m, dtype=np.int64)], axis=1)
    R, piv = rref_limited(aug, p, n)
    l = len(piv)
    rows, transform = R[:l, :n], R[:l, n:]
    free = [c for c in range(n) if c not in piv]
    iota = np.zeros((n, len(free)), dtype=np.int64)
    for j, f in enumerate(free):
        iota[f, j] = 1
        for i, c in enumerate(piv):
            iota[c, j] = (-rows[i, f]) % p
    return _Linear(rows, transform, list(owners), free, iota)


def _lift(vec, lin, n):
    """Linear form on W (coordinates = free variables) as a form on F^n."""
    out = np.zeros(n, dtype=np.int64)
    out[lin.free] = vec
    return out


def _complete_basis(rows, p):
    """Invertible matrix whose first rows are the given independent rows."""
    rows = np.asarray(rows, dtype=np.int64)
    n = rows.shape[1]
    _, piv = rref(rows, p) if len(rows) else (None, [])
    extra = [c for c in range(n) if c not in piv]
    E = np.zeros((len(extra), n), dtype=np.int64)
    for i, c in enumerate(extra):
        E[i, c] = 1
    return np.concatenate([rows % p, E], axis=0)


def _decompose(H, rows, p):
    """Write H = sum_j l_j q_j where l_j are the given independent linear forms.

    H must vanish on the common kernel of the rows (as a polynomial of
    per-variable degree < p).  Returns the list of q_j.
    """
    n = H.n
    m = len(rows)
    if m == 0:
        if not H.is_zero():
            raise ValueError("polynomial does not vanish on the kernel")
        return []
    M = _complete_basis(np.asarray(rows), p)
    Minv = inverse(M, p)
    to_z = [Poly.linear(p, [int(v) for v in Minv[i]]) for i in range(n)]
    Hz = H.compose(to_z)
    buckets = [dict() for _ in range(m)]
    for e, c in Hz.terms:
        j = next((j for j in range(m) if e[j]), None)
        if j is None:
            raise ValueError("polynomial does not vanish on the kernel")
        q = list(e)
        q[j] -= 1
        buckets[j][tuple(q)] = c
    back = [Poly.linear(p, [int(v) for v in M[i]]) for i in range(n)]
    return [Poly(p, n, b).compose(back) if b else Poly.zero(p, n) for b in buckets]


# ---------------------------------------------------------------------------
# quadratic forms

def _diagonalize(S, p):
    """F(y) = y^T S y written as sum e_i (lam_i . y)^2 with independent lam_i."""
    S = np.asarray(S, dtype=np.int64) % p
    w = S.shape[0]
    out = []
    while True:
        u = None
        d = np.nonzero(np.diag(S))[0]
        if d.size:
            u = np.zeros(w, dtype=np.int64)
            u[d[0]] = 1
        else:
            nz = np.argwhere(S)
            if nz.size:
                i, j = nz[0]
                u = np.zeros(w, dtype=np.int64)
                u[i] = u[j] = 1
        if u is None:
            return out
        lam = S @ u % p
        val = int(u @ lam % p)
        e = pow(val, -1, p)
        out.append((lam, e))
        S = (S - e * np.outer(lam, lam)) % p


def quadratic_rank(S, p):
    """Exact Schmidt rank of the quadratic form with Gram matrix S (p odd).

    rank - (Witt index): ceil(rho/2) for odd rho; for even rho it is rho/2
    when (-1)^(rho/2) * disc is a square and rho/2 + 1 otherwise.
    """
    terms = _diagonalize(S, p)
    rho = len(terms)
    if rho % 2:
        return (rho + 1) // 2
    if rho == 0:
        return 0
    disc = 1
    for _, e in terms:
        disc = disc * pow(e, -1, p) % p
    disc = disc * pow(-1, rho // 2) % p
    return rho // 2 if is_square(disc, p) else rho // 2 + 1


def quadratic_pairs(S, p):
    """Minimal presentation sum (a_j . y)(b_j . y) of y^T S y (p odd)."""
    terms = _diagonalize(S, p)
    pairs = []
    while len(terms) >= 3:
        (l1, e1), (l2, e2), (l3, e3) = terms[:3]
        es = [e1, e2, e3]
        v = None
        inv1 = pow(e1, -1, p)
        for b in range(p):
            a = sqrt_mod(-(e2 * b * b + e3) * inv1, p)
            if a is not None:
                v = [a, b, 1]
                break
        lam = np.array([l1, l2, l3], dtype=np.int64)
        i = 2
        w = [0, 0, 0]
        w[i] = pow(es[i] * v[i] % p, -1, p)
        gw = sum(es[j] * w[j] * w[j] for j in range(3)) % p
        half = gw * pow(2, -1, p) % p
        w2 = [(w[j] - half * v[j]) % p for j in range(3)]
        bv = np.array([es[j] * v[j] % p for j in range(3)], dtype=np.int64)
        bw = np.array([es[j] * w2[j] % p for j in range(3)], dtype=np.int64)
        z = np.cross(bv, bw) % p
        gz = int(sum(es[j] * int(z[j]) ** 2 for j in range(3)) % p)
        pairs.append(((2 * bw) @ lam % p, bv @ lam % p))
        ez = np.array([es[j] * int(z[j]) % p for j in range(3)], dtype=np.int64)
        terms = [(ez @ lam % p, pow(gz, -1, p))] + terms[3:]
    if len(terms) == 2:
        (l1, e1), (l2, e2) = terms
        s = sqrt_mod(-e2 * pow(e1, -1, p), p)
        if s is not None:
            pairs.append((e1 * (l1 - s * l2) % p, (l1 + s * l2) % p))
        else:
            pairs.append((e1 * l1 % p, l1 % p))
            pairs.append((e2 * l2 % p, l2 % p))
    elif len(terms) == 1:
        l1, e1 = terms[0]
        pairs.append((e1 * l1 % p, l1 % p))
    return pairs


# ---------------------------------------------------------------------------
# problem setup

def _lower_maps(T):
    if T is None:
        return []
    if hasattr(T, "maps") and callable(T.maps):
        return list(T.maps())
    return list(T)


@dataclass
class _Problem:
    """A rank question in W-coordinates."""
    kind: str              # "schmidt" | "partition"
    p: int
    F: np.ndarray          # restricted target tensor
    gens: list             # restricted generator tensors
    gen_labels: list       # (reference index, multiplier for coefficient 1)
    same: list             # positions in gens of same-degree (constant multiplier) generators
    dims: list             # W-dimension per axis
    groups: list           # axis groups sharing one subspace
    penalty: float         # rank lost to generators, for the bias bound
    exact_search: bool
    closed_form: bool
    bias_divisor: int = 1


def _compositions(r, caps):
    if not caps:
        if r == 0:
            yield ()
        return
    for a in range(min(r, caps[0]) + 1):
        for rest in _compositions(r - a, caps[1:]):
            yield (a,) + rest


def _level_size(prob, r):
    caps = [prob.dims[g[0]] for g in prob.groups]
    return sum(math.prod(gaussian_binomial(caps[i], caps[i] - c, prob.p) for i, c in enumerate(cs))
               for cs in _compositions(r, caps))


def _members(prob, stacks):
    """Which candidates (one stack entry per axis) admit F|_K in span(g|_K)."""
    p = prob.p
    T = np.stack([prob.F] + prob.gens)
    X = _batch_restrict(T, stacks, p)
    nb, G = X.shape[0], X.shape[1]
    X = X.reshape(nb, G, -1).transpose(0, 2, 1)
    if G == 1:
        return ~X.reshape(nb, -1).any(axis=1)
    full = batched_rank(X, p)
    gens = batched_rank(X[:, :, 1:], p)
    return full == gens


def _lazy_product(factories, prefix=()):
    """Cartesian product that re-creates inner iterators instead of
    materializing them; the factors can be astronomically long."""
    if not factories:
        yield prefix
        return
    for x in factories[0]():
        yield from _lazy_product(factories[1:], prefix + (x,))


def _search(prob, lo, hi, budget):
    """Smallest level r in [lo, hi] with a presentation.

    Returns (r, bases) with one K-basis (k x w rows) per group, or
    (None, level) where `level` is the first level not fully searched.
    """
    p = prob.p
    caps = [prob.dims[g[0]] for g in prob.groups]
    for r in range(lo, hi + 1):
        for cs in _compositions(r, caps):
            gens = [functools.partial(subspaces, caps[i], caps[i] - c, p)
                    for i, c in enumerate(cs)]
            batch = []

            def flush(batch):
                stacks = [None] * len(prob.dims)
                for gi, g in enumerate(prob.groups):
                    st = np.stack([b[gi].T for b in batch]).astype(np.int64)
                    for a in g:
                        stacks[a] = st
                ok = _members(prob, stacks)
                hit = np.nonzero(ok)[0]
                return batch[int(hit[0])] if hit.size else None

            for cand in _lazy_product(gens):
                if budget.left <= 0:
                    if batch:
                        found = flush(batch)
                        if found is not None:
                            return r, found
                    return None, r
                budget.spend()
                batch.append(cand)
                if len(batch) == BATCH:
                    found = flush(batch)
                    if found is not None:
                        return r, found
                    batch = []
            if batch:
                found = flush(batch)
                if found is not None:
                    return r, found
    return None, hi + 1


def _solve_coeffs(prob, bases):
    """Coefficients c with F|_K + sum c_g g|_K = 0 on the chosen K."""
    p = prob.p
    mats = []
    for gi, g in enumerate(prob.groups):
        for a in g:
            while len(mats) <= a:
                mats.append(None)
            mats[a] = np.asarray(bases[gi]).T
    Fk = _contract(prob.F, mats, p).reshape(-1)
    if not prob.gens:
        return np.zeros(0, dtype=np.int64)
    Gk = np.stack([_contract(g, mats, p).reshape(-1) for g in prob.gens], axis=1)
    c, _ = solve(Gk, (-Fk) % p, p)
    if c is None:
        raise AssertionError("membership test and solver disagree")
    return c


def _bias_lower(prob, cap):
    if prob.kind == "schmidt":
        d = prob.F.ndim
        if d < 3:
            return None
    v = _ceil_analytic_rank(prob.F, prob.p, cap)
    if v is None or v == INF:
        return None
    return max(0, math.ceil(v / prob.bias_divisor) - prob.penalty)


# ---------------------------------------------------------------------------
# Schmidt rank

def _poly_setup(F, d, lower, budget):
    """Split lower maps into absorbing constants, linear forms and generators."""
    p, n = F.p, F.n
    absorbing = None
    lin_forms, lin_owner = [], []
    gen_polys, gen_labels, same = [], [], []
    penalty = 0
    for i, Q in enumerate(lower):
        Q = Q if isinstance(Q, Poly) else Q.to_poly()
        if Q.p != p or Q.n != n:
            raise ShapeMismatch("lower map lives in a different ring")
        e = Q.degree
        if e < 0 or e > d:
            continue
        Qt = Q.homogeneous_part()
        if e == 0:
            if absorbing is None:
                absorbing = (i, Q.constant_term())
            continue
        if e == 1:
            lin_forms.append([Qt.coeff(tuple(int(v == j) for v in range(n))) for j in range(n)])
            lin_owner.append(i)
            continue
        if e == d:
            same.append(len(gen_polys))
        else:
            penalty += 1
        for mono in monomials(n, d - e):
            gen_polys.append(Qt * Poly(p, n, {mono: 1}))
            gen_labels.append((i, Poly(p, n, {mono: 1})))
    return absorbing, lin_forms, lin_owner, gen_polys, gen_labels, same, penalty


def _finish_poly(F, d, lower, lin, gen_labels, coeffs, pairs, k_rows, kind):
    """Assemble and return a certificate from the pieces found in W-coordinates."""
    p, n = F.p, F.n
    mults = {}
    for (i, mono), c in zip(gen_labels, coeffs):
        if c:
            mults[i] = mults.get(i, Poly.zero(p, n)) + mono.scale(int(c))
    H = F
    for i, R in mults.items():
        Qt = _as_poly(lower[i]).homogeneous_part()
        H = H + R * Qt
    for A, B in pairs:
        H = H - A * B
    lifted = [_lift(v, lin, n) for v in k_rows]
    rows = [r for r in lin.rows] + lifted
    qs = _decompose(H, rows, p)
    l = len(lin.rows)
    for j in range(l):
        q = qs[j]
        if q.is_zero():
            continue
        for col, owner in enumerate(lin.owners):
            t = int(lin.transform[j, col])
            if t:
                mults[owner] = mults.get(owner, Poly.zero(p, n)) - q.scale(t)
    pairs = list(pairs)
    for vec, q in zip(lifted, qs[l:]):
        if not q.is_zero():
            pairs.append((Poly.linear(p, [int(v) for v in vec]), q))
    mlist = sorted((i, R) for i, R in mults.items() if not R.is_zero())
    return RankCertificate(kind, d, None, pairs, mlist, len(pairs))


def _as_poly(m):
    return m if isinstance(m, Poly) else m.to_poly()


TILDE_NOTE = "non-homogeneous input: ranks computed on top-degree components"


def _flag_tilde(rb, inputs):
    if any(m != m.homogeneous_part() if isinstance(m, Poly)
           else isinstance(m, MultiAffineMap)
           and any(J != m.support and not c.is_zero() for J, c in m.components.items())
           for m in inputs):
        rb.notes.append(TILDE_NOTE)
    return rb


def relative_rank(P, T=None, budget=None, target=None, bias_cap=BIAS_CAP):
    """Schmidt rank of P relative to the maps of T (none: plain Schmidt rank).

    Only the top homogeneous component of P matters.  With `target`, the
    search stops as soon as it can decide whether the rank exceeds target.
    """
    rb = _relative_rank(P, T, budget, target, bias_cap)
    return _flag_tilde(rb, [_as_poly(P)] + [_as_poly(m) for m in _lower_maps(T)])


def _relative_rank(P, T, budget, target, bias_cap):
    budget = _budget(budget)
    P = _as_poly(P)
    lower = [_as_poly(m) for m in _lower_maps(T)]
    kind = "relative" if lower else "schmidt"
    F = P.homogeneous_part()
    d = F.degree
    p, n = P.p, P.n
    start = budget.used
    if d < 0:
        cert = RankCertificate(kind, max(d, 0), None, [], [], 0)
        return RankBound(0, 0, "Exact", cert, "linear-algebra")
    absorbing, lin_forms, lin_owner, gen_polys, gen_labels, same, penalty = \
        _poly_setup(F, d, lower, budget)
    if absorbing is not None:
        i, c = absorbing
        R = F.scale(-pow(c, -1, p))
        cert = RankCertificate(kind, d, None, [], [(i, R)], 0)
        return RankBound(0, 0, "Exact", cert, "linear-algebra")
    lin = _linear_part(lin_forms, lin_owner, n, p)
    w = lin.w
    if d <= 1:
        restricted = F if d == 0 else Poly.linear(p, [int(v) for v in
                                                      (np.array([F.coeff(tuple(int(v == j) for v in range(n)))
                                                                 for j in range(n)]) @ lin.iota) % p])
        if restricted.is_zero():
            cert = _finish_poly(F, d, lower, lin, [], [], [], [], kind)
            return RankBound(0, 0, "Exact", cert, "linear-algebra", linear_convention=True)
        return RankBound(INF, INF, "Exact", None, "linear-algebra", linear_convention=True,
                         notes=["no product presentation exists for a form of degree <= 1"])
    if d >= p:
        raise CharacteristicTooSmall(f"degree {d} needs p > {d}")
    iota = lin.iota
    FW = _contract(sym_tensor(F, d), [iota] * d, p)
    GW = [_contract(sym_tensor(g, d), [iota] * d, p) for g in gen_polys]
    prob = _Problem("schmidt", p, FW, GW, gen_labels, same, [w] * d, [list(range(d))],
                    penalty, d == 3, d == 2, math.comb(d, d // 2))
    if d == 2:
        return _quadratic(prob, F, lower, lin, budget, kind, start)
    return _generic(prob, F, d, lower, lin, budget, target, bias_cap, kind, start,
                    trivial=w)


def schmidt_rank(P, budget=None, target=None):
    return relative_rank(P, None, budget, target)


def _quadratic(prob, F, lower, lin, budget, kind, start):
    p = prob.p
    same = prob.same
    best, best_c, complete = None, None, True
    m = len(same)
    for combo in itertools.product(range(p), repeat=m):
        if budget.left <= 0:
            complete = False
            break
        budget.spend()
        S = prob.F.copy()
        for c, gi in zip(combo, same):
            if c:
                S = (S + c * prob.gens[gi]) % p
        r = quadratic_rank(S, p)
        if best is None or r < best:
            best, best_c = r, combo
            if r == 0:
                break
    if best is None:
        best_c = (0,) * m
        S = prob.F
        best = quadratic_rank(S, p)
    coeffs = np.zeros(len(prob.gens), dtype=np.int64)
    S = prob.F.copy()
    for c, gi in zip(best_c, same):
        coeffs[gi] = c
        S = (S + c * prob.gens[gi]) % p
    n = F.n
    pairs = [(Poly.linear(p, [int(v) for v in _lift(a, lin, n)]),
              Poly.linear(p, [int(v) for v in _lift(b, lin, n)]))
             for a, b in quadratic_pairs(S, p)]
    cert = _finish_poly(F, 2, lower, lin, prob.gen_labels, coeffs, pairs, [], kind)
    if complete:
        return RankBound(best, best, "Exact", cert, "linear-algebra",
                         candidates=budget.used - start)
    lo = max(0, quadratic_rank(prob.F, p) - sum(math.ceil(prob.dims[0] / 2) + 1 for _ in same))
    lo = min(lo, best)
    return RankBound(lo, best, _status(lo, best), cert, "linear-algebra",
                     candidates=budget.used - start)


def _generic(prob, F, d, lower, lin, budget, target, bias_cap, kind, start, trivial):
    lo, source = 0, "trivial"
    b = _bias_lower(prob, bias_cap)
    if b is not None and b > lo:
        lo, source = b, "bias"
    ub = trivial
    hi = ub - 1 if target is None else min(ub - 1, math.floor(target))
    found, bases = None, None
    if lo <= hi:
        r, res = _search(prob, lo, hi, budget)
        if r is not None:
            found, bases = r, res
        elif prob.exact_search and res > lo:
            lo, source = res, "exhausted-search"
    if found is not None:
        upper = found
        if prob.exact_search and found >= lo:
            lo, source = found, ("exhausted-search" if found > 0 else "linear-algebra")
    else:
        upper = ub
        bases = _trivial_bases(prob)
        if lo >= ub:
            lo = ub
    cert = _cert_from_bases(prob, F, d, lower, lin, bases, kind)
    upper = min(upper, cert.rank)
    lo = min(lo, upper)
    return RankBound(lo, upper, _status(lo, upper), cert, source,
                     candidates=budget.used - start)


def _trivial_bases(prob):
    if prob.kind == "schmidt":
        return (np.zeros((0, prob.dims[0]), dtype=np.int64),)
    t = int(np.argmin(prob.dims))
    return tuple(np.zeros((0, w), dtype=np.int64) if i == t else np.eye(w, dtype=np.int64)
                 for i, w in enumerate(prob.dims))


def _cert_from_bases(prob, F, d, lower, lin, bases, kind):
    coeffs = _solve_coeffs(prob, bases)
    K = bases[0]
    w = prob.dims[0]
    U = nullspace(K, prob.p) if len(K) else np.eye(w, dtype=np.int64)
    return _finish_poly(F, d, lower, lin, prob.gen_labels, coeffs, [], list(U), kind)


# ---------------------------------------------------------------------------
# partition rank

def _ml_setup(P, S, lower, shape):
    p = shape.p
    absorbing = None
    lin_forms = {t: [] for t in S}
    lin_owner = {t: [] for t in S}
    gens, labels, same = [], [], []
    penalty = 0
    for i, Q in enumerate(lower):
        if Q.shape != shape:
            raise ShapeMismatch("lower map has a different shape")
        I = Q.support
        if not set(I) <= set(S):
            continue
        Qt = Q.multilinear_part() if isinstance(Q, MultiAffineMap) else Q
        if Qt.is_zero():
            continue
        if len(I) == 0:
            if absorbing is None:
                absorbing = (i, Qt.entries[()])
            continue
        if len(I) == 1:
            t = I[0]
            vec = [0] * shape.dims[t]
            for (j,), c in Qt.entries.items():
                vec[j] = c
            lin_forms[t].append(vec)
            lin_owner[t].append(i)
            continue
        rest = tuple(t for t in S if t not in I)
        if not rest:
            same.append(len(gens))
        else:
            penalty += 1
        Qp = Qt.to_poly()
        for idx in itertools.product(*[range(shape.dims[t]) for t in rest]):
            mono = MultiLinearMap(shape, rest, {idx: 1})
            g = MultiLinearMap.from_poly(shape, Qp * mono.to_poly(), S)
            gens.append(ml_tensor(g))
            labels.append((i, mono))
    return absorbing, lin_forms, lin_owner, gens, labels, same, penalty


def relative_partition_rank(P, Q=None, budget=None, target=None, bias_cap=BIAS_CAP):
    """Partition rank of a multilinear (or multi-affine: its multilinear part)
    map relative to lower maps whose supports lie inside the support of P."""
    rb = _relative_partition_rank(P, Q, budget, target, bias_cap)
    return _flag_tilde(rb, [P] + list(_lower_maps(Q)))


def _relative_partition_rank(P, Q, budget, target, bias_cap):
    budget = _budget(budget)
    if isinstance(P, MultiAffineMap):
        P = P.multilinear_part()
    shape, p = P.shape, P.p
    S = P.support
    k = len(S)
    lower = _lower_maps(Q)
    kind = "relative" if lower else "partition"
    start = budget.used
    if P.is_zero():
        return RankBound(0, 0, "Exact", RankCertificate(kind, k, S, [], [], 0), "linear-algebra")
    absorbing, lin_forms, lin_owner, gens, labels, same, penalty = _ml_setup(P, S, lower, shape)
    if absorbing is not None:
        i, c = absorbing
        R = P.scale(-pow(c, -1, p))
        return RankBound(0, 0, "Exact", RankCertificate(kind, k, S, [], [(i, R)], 0),
                         "linear-algebra")
    lins = {t: _linear_part(lin_forms[t], lin_owner[t], shape.dims[t], p) for t in S}
    iotas = [lins[t].iota for t in S]
    FW = _contract(ml_tensor(P), iotas, p)
    GW = [_contract(g, iotas, p) for g in gens]
    dims = [lins[t].w for t in S]
    ctx = (P, S, lower, lins, shape, kind)
    if k <= 1:
        if not FW.any():
            cert = _finish_ml(ctx, labels, np.zeros(len(gens), dtype=np.int64), [], {})
            return RankBound(0, 0, "Exact", cert, "linear-algebra", linear_convention=True)
        return RankBound(INF, INF, "Exact", None, "linear-algebra", linear_convention=True,
                         notes=["no partition presentation exists for a map on <= 1 factor"])
    prob = _Problem("partition", p, FW, GW, labels, same, dims, [[a] for a in range(k)],
                    penalty, k == 3, k == 2)
    if k == 2:
        return _bilinear(prob, ctx, budget, start)
    return _generic_ml(prob, ctx, budget, target, bias_cap, start)


def partition_rank(P, budget=None, target=None):
    return relative_partition_rank(P, None, budget, target)


def _finish_ml(ctx, labels, coeffs, pairs, k_rows):
    """Certificate for the multilinear category.

    pairs: list of (A, B) MultiLinearMaps already in x-coordinates.
    k_rows: factor position -> list of annihilator rows in W_t coordinates.
    """
    P, S, lower, lins, shape, kind = ctx
    p, n = shape.p, shape.n
    offs = shape.offsets()
    mults = {}
    for (i, mono), c in zip(labels, coeffs):
        if c:
            R = mono.scale(int(c))
            mults[i] = mults[i] + R if i in mults else R
    H = P.to_poly()
    for i, R in mults.items():
        Qt = lower[i].multilinear_part() if isinstance(lower[i], MultiAffineMap) else lower[i]
        H = H + R.to_poly() * Qt.to_poly()
    for A, B in pairs:
        H = H - A.to_poly() * B.to_poly()
    rows, meta = [], []
    for pos, t in enumerate(S):
        lin = lins[t]
        for j, r in enumerate(lin.rows):
            v = np.zeros(n, dtype=np.int64)
            v[offs[t]:offs[t] + shape.dims[t]] = r
            rows.append(v)
            meta.append(("lin", t, j))
    for pos, t in enumerate(S):
        lin = lins[t]
        for r in k_rows.get(pos, []):
            v = np.zeros(n, dtype=np.int64)
            v[offs[t]:offs[t] + shape.dims[t]] = _lift(r, lin, shape.dims[t])
            rows.append(v)
            meta.append(("k", t, v))
    qs = _decompose(H, rows, p)
    out_pairs = list(pairs)
    for (tag, t, extra), q in zip(meta, qs):
        if q.is_zero():
            continue
        rest = tuple(s for s in S if s != t)
        qm = MultiLinearMap.from_poly(shape, q, rest)
        if tag == "lin":
            lin = lins[t]
            for col, owner in enumerate(lin.owners):
                c = int(lin.transform[extra, col])
                if c:
                    R = qm.scale(-c)
                    mults[owner] = mults[owner] + R if owner in mults else R
        else:
            vec = extra[offs[t]:offs[t] + shape.dims[t]]
            A = MultiLinearMap(shape, (t,), {(j,): int(c) for j, c in enumerate(vec) if c})
            out_pairs.append((A, qm))
    mlist = sorted(((i, R) for i, R in mults.items() if not R.is_zero()), key=lambda x: x[0])
    return RankCertificate(kind, len(S), S, out_pairs, mlist, len(out_pairs))


def _bilinear(prob, ctx, budget, start):
    p = prob.p
    P, S, lower, lins, shape, kind = ctx
    same = prob.same
    best, best_c, complete = None, None, True
    for combo in itertools.product(range(p), repeat=len(same)):
        if budget.left <= 0:
            complete = False
            break
        budget.spend()
        M = prob.F.copy()
        for c, gi in zip(combo, same):
            if c:
                M = (M + c * prob.gens[gi]) % p
        r = mat_rank(M, p) if M.size else 0
        if best is None or r < best:
            best, best_c = r, combo
            if r == 0:
                break
    if best is None:
        best_c = (0,) * len(same)
    coeffs = np.zeros(len(prob.gens), dtype=np.int64)
    M = prob.F.copy()
    for c, gi in zip(best_c, same):
        coeffs[gi] = c
        M = (M + c * prob.gens[gi]) % p
    a, b = S
    pairs = []
    if M.size and M.any():
        R, piv = rref(M, p)
        rows = R[: len(piv)]
        cols = M[:, piv]
        for j in range(len(piv)):
            va = _lift(cols[:, j], lins[a], shape.dims[a])
            vb = _lift(rows[j], lins[b], shape.dims[b])
            A = MultiLinearMap(shape, (a,), {(i,): int(c) for i, c in enumerate(va) if c})
            B = MultiLinearMap(shape, (b,), {(i,): int(c) for i, c in enumerate(vb) if c})
            pairs.append((A, B))
    cert = _finish_ml(ctx, prob.gen_labels, coeffs, pairs, {})
    r = cert.rank
    if complete:
        return RankBound(r, r, "Exact", cert, "linear-algebra", candidates=budget.used - start)
    lo = max(0, (mat_rank(prob.F, p) if prob.F.size else 0) - len(same) * min(prob.dims))
    lo = min(lo, r)
    return RankBound(lo, r, _status(lo, r), cert, "linear-algebra", candidates=budget.used - start)


def _generic_ml(prob, ctx, budget, target, bias_cap, start):
    P, S, lower, lins, shape, kind = ctx
    lo, source = 0, "trivial"
    b = _bias_lower(prob, bias_cap)
    if b is not None and b > lo:
        lo, source = b, "bias"
    ub = min(prob.dims)
    hi = ub - 1 if target is None else min(ub - 1, math.floor(target))
    found, bases = None, None
    if lo <= hi:
        r, res = _search(prob, lo, hi, budget)
        if r is not None:
            found, bases = r, res
        elif prob.exact_search and res > lo:
            lo, source = res, "exhausted-search"
    if found is not None:
        upper = found
        if prob.exact_search and found >= lo:
            lo, source = found, ("exhausted-search" if found > 0 else "linear-algebra")
    else:
        upper = ub
        bases = _trivial_bases(prob)
        if lo >= ub:
            lo = ub
    coeffs = _solve_coeffs(prob, bases)
    k_rows = {}
    for pos, K in enumerate(bases):
        w = prob.dims[pos]
        U = nullspace(K, prob.p) if len(K) else np.eye(w, dtype=np.int64)
        k_rows[pos] = list(U)
    cert = _finish_ml(ctx, prob.gen_labels, coeffs, [], k_rows)
    upper = min(upper, cert.rank)
    lo = min(lo, upper)
    return RankBound(lo, upper, _status(lo, upper), cert, source, candidates=budget.used - start)


# ---------------------------------------------------------------------------
# collections

def projective_points(p, c):
    """Nonzero a in F_p^c with first nonzero coordinate 1, lexicographic."""
    for lead in range(c):
        for tail in itertools.product(range(p), repeat=c - lead - 1):
            yield (0,) * lead + (1,) + tail


def combine(maps, a):
    """a . maps, keeping the flavor of the inputs."""
    first = maps[0]
    if isinstance(first, Poly):
        out = Poly.zero(first.p, first.n)
        for c, m in zip(a, maps):
            if c:
                out = out + m.scale(c)
        return out
    tl = [m.multilinear_part() if isinstance(m, MultiAffineMap) else m for m in maps]
    out = MultiLinearMap(first.shape, tl[0].support)
    for c, m in zip(a, tl):
        if c:
            out = out + m.scale(c)
    return out


def combine_full(maps, a):
    """a . maps including lower-order parts (multi-affine stays multi-affine)."""
    first = maps[0]
    if isinstance(first, Poly):
        return combine(maps, a)
    if isinstance(first, MultiLinearMap):
        return combine(maps, a)
    out = None
    for c, m in zip(a, maps):
        if c:
            out = m.scale(c) if out is None else out + m.scale(c)
    return out


def map_rank(P, lower, budget=None, target=None, bias_cap=BIAS_CAP, degree=None):
    """Relative rank of one map, dispatching on its category."""
    if isinstance(P, Poly):
        if degree is not None and P.homogeneous_component(degree).is_zero():
            cert = RankCertificate("relative" if lower else "schmidt", degree, None, [], [], 0)
            return RankBound(0, 0, "Exact", cert, "linear-algebra")
        if degree is not None:
            P = P.homogeneous_component(degree)
        return relative_rank(P, lower, budget, target, bias_cap)
    return relative_partition_rank(P, lower, budget, target, bias_cap)


def _top_linear(m, n):
    """Coefficient vector of the degree-1 top part of a linear map."""
    if isinstance(m, MultiAffineMap):
        m = m.multilinear_part()
    P = m if isinstance(m, Poly) else m.to_poly()
    v = np.zeros(n, dtype=np.int64)
    for e, c in P.terms:
        if sum(e) == 1:
            v[e.index(1)] = c
    return v


def _linear_dependency(maps, below):
    """Fast path for a layer of linear maps.

    Returns (True, a) with a . maps in the span of the relevant lower linear
    maps, (True, None) when there is no such a, or (False, None) when the
    shortcut does not apply (a lower constant absorbs everything).
    """
    first = maps[0]
    if isinstance(first, Poly):
        if any(m.degree != 1 for m in maps):
            return False, None
        n = first.n
        rel = []
        for q in below:
            q = _as_poly(q)
            if q.degree == 0:
                return False, None
            if q.degree == 1:
                rel.append(q)
    else:
        sups = {m.support for m in maps}
        if len(sups) != 1 or len(next(iter(sups))) != 1:
            return False, None
        S = next(iter(sups))
        n = first.shape.n
        rel = []
        for q in below:
            if not set(q.support) <= set(S) or q.is_zero():
                continue
            if not q.support:
                return False, None
            rel.append(q)
    p = first.p
    rows = [_top_linear(m, n) for m in maps] + [_top_linear(q, n) for q in rel]
    K = nullspace(np.array(rows, dtype=np.int64).T, p)
    c = len(maps)
    for vec in K:
        a = [int(x) % p for x in vec[:c]]
        if any(a):
            lead = next(x for x in a if x)
            inv = pow(lead, p - 2, p)
            return True, [x * inv % p for x in a]
    return True, None


def collection_rank(maps, below=(), budget=None, flavor=None, shape=None, target=None,
                    bias_cap=BIAS_CAP):
    """min over projective combinations a of the relative rank of a . maps.

    With a target, stops at the first combination (in enumeration order)
    whose rank is certified <= target.
    """
    maps = list(maps)
    below = _lower_maps(below)
    budget = _budget(budget)
    if not maps:
        return RankBound(INF, INF, "Exact", None, "linear-algebra")
    p = maps[0].p
    degree = None
    if isinstance(maps[0], Poly):
        degree = max(m.degree for m in maps)
    start = budget.used
    applies, a = _linear_dependency(maps, below)
    if applies:
        if a is None:
            return RankBound(INF, INF, "Exact", None, "linear-algebra", True,
                             [0] * (len(maps) - 1) + [1])
        rb = map_rank(combine(maps, a), below, budget, target, bias_cap, degree)
        return RankBound(rb.lower, rb.upper, rb.status, rb.certificate,
                         rb.lower_bound_source, rb.linear_convention, a,
                         candidates=budget.used - start)
    lower_bound, best, linear = INF, None, False
    for a in projective_points(p, len(maps)):
        comb = combine(maps, a)
        rb = map_rank(comb, below, budget, target, bias_cap, degree)
        linear = linear or rb.linear_convention
        lower_bound = min(lower_bound, rb.lower)
        if best is None or rb.upper < best[0].upper:
            best = (rb, list(a))
        if target is not None and rb.upper <= target:
            break
        if lower_bound == 0 and best[0].upper == 0:
            break
    rb, a = best
    lo = min(lower_bound, rb.upper)
    status = _status(lo, rb.upper)
    src = rb.lower_bound_source
    return RankBound(lo, rb.upper, status, rb.certificate, src, linear, a,
                     candidates=budget.used - start)


# ---------------------------------------------------------------------------
# certificate checking

def _check_poly_cert(P, lower, cert):
    d = cert.degree
    F = _as_poly(P)
    if F.degree > d:
        return False, "map degree exceeds certificate degree"
    p, n = F.p, F.n
    D = F
    for A, B in cert.pairs:
        A, B = _as_poly(A), _as_poly(B)
        if A.is_zero() or B.is_zero():
            return False, "zero factor in a product"
        if not (A.is_homogeneous() and B.is_homogeneous()):
            return False, "product factors must be homogeneous"
        if not (1 <= A.degree < d and 1 <= B.degree < d):
            return False, "product factors must have degree between 1 and deg(P) - 1"
        if A.degree + B.degree != d:
            return False, "product degree differs from deg(P)"
        D = D - A * B
    for i, R in cert.multipliers:
        if not 0 <= i < len(lower):
            return False, f"multiplier index {i} out of range"
        Q = _as_poly(lower[i])
        R = _as_poly(R)
        if R.degree + Q.degree > d:
            return False, f"deg(R_{i}) + deg(Q_{i}) exceeds deg(P)"
        D = D + R * Q
    if D.degree > d or not D.homogeneous_component(d).is_zero():
        return False, "presentation does not reproduce the top-degree part"
    return True, "ok"


def _check_ml_cert(P, lower, cert):
    if isinstance(P, MultiAffineMap):
        P = P.multilinear_part()
    S = tuple(cert.support) if cert.support is not None else P.support
    if tuple(S) != P.support:
        return False, "certificate support differs from the map"
    D = P.to_poly()
    Sset = set(S)
    for A, B in cert.pairs:
        IA, IB = set(A.support), set(B.support)
        if not IA or not IB or IA & IB or IA | IB != Sset:
            return False, "product supports must split the index set into two nonempty parts"
        D = D - A.to_poly() * B.to_poly()
    for i, R in cert.multipliers:
        if not 0 <= i < len(lower):
            return False, f"multiplier index {i} out of range"
        Q = lower[i]
        Qt = Q.multilinear_part() if isinstance(Q, MultiAffineMap) else Q
        if not set(Q.support) <= Sset:
            return False, "tower map support not inside the index set"
        if set(R.support) != Sset - set(Q.support):
            return False, "multiplier must live on the complementary factors"
        D = D + R.to_poly() * Qt.to_poly()
    if not D.is_zero():
        return False, "presentation does not reproduce the map"
    return True, "ok"


def verify_certificate(P, T, cert):
    """(ok, reason).  Never raises on a malformed certificate."""
    lower = _lower_maps(T)
    try:
        if cert.claimed_rank != len(cert.pairs):
            return False, "claimed rank differs from the number of products"
        if isinstance(P, Poly):
            return _check_poly_cert(P, lower, cert)
        return _check_ml_cert(P, lower, cert)
    except Exception as exc:  # malformed pieces count as failure
        return False, f"malformed certificate: {exc}"


# ---------------------------------------------------------------------------
# degree-bounded membership

@dataclass
class MembershipSolution:
    multipliers: list
    residual: Poly
    feasible: bool = True


@dataclass
class Infeasible:
    functional: dict
    reason: str
    feasible: bool = False


def _membership(P, columns, max_unknowns):
    """Solve P = sum x_c col_c over F_p (columns are Polys)."""
    p, n = P.p, P.n
    if len(columns) > max_unknowns:
        raise SystemTooLarge(f"{len(columns)} unknowns exceed the cap {max_unknowns}")
    monos = {}
    for e, _ in P.terms:
        monos.setdefault(e, len(monos))
    for col in columns:
        for e, _ in col.terms:
            monos.setdefault(e, len(monos))
    A = np.zeros((len(monos), len(columns)), dtype=np.int64)
    for j, col in enumerate(columns):
        for e, c in col.terms:
            A[monos[e], j] = c
    b = np.zeros(len(monos), dtype=np.int64)
    for e, c in P.terms:
        b[monos[e]] = c
    if not columns:
        if P.is_zero():
            return np.zeros(0, dtype=np.int64), None, monos
        y = (b != 0).astype(np.int64)
        return None, y, monos
    x, y = solve(A, b, p)
    return x, y, monos


def nullstellensatz_solve(P, T, max_unknowns=MAX_UNKNOWNS):
    """Find R_i with P = sum R_i Q_i and deg R_i + deg Q_i <= deg P."""
    P = _as_poly(P)
    maps = [_as_poly(m) for m in _lower_maps(T)]
    p, n = P.p, P.n
    d = P.degree
    columns, owner = [], []
    for i, Q in enumerate(maps):
        e = Q.degree
        if e < 0 or e > d:
            continue
        for mono in monomials_upto(n, d - e):
            columns.append(Q * Poly(p, n, {mono: 1}))
            owner.append((i, mono))
    x, y, monos = _membership(P, columns, max_unknowns)
    if x is None:
        inv = {j: e for e, j in monos.items()}
        func = {inv[j]: int(v) for j, v in enumerate(y) if v}
        return Infeasible(func, "the degree-bounded linear system is inconsistent")
    mults = [Poly.zero(p, n) for _ in maps]
    for (i, mono), c in zip(owner, x):
        if c:
            mults[i] = mults[i] + Poly(p, n, {mono: int(c)})
    residual = P
    for R, Q in zip(mults, maps):
        residual = residual - R * Q
    return MembershipSolution(mults, residual)


def multilinear_nullstellensatz(P, Q, max_unknowns=MAX_UNKNOWNS):
    """P = sum R_i Q_i with R_i multilinear on the factors of P outside supp(Q_i)."""
    if isinstance(P, MultiAffineMap):
        P = P.multilinear_part()
    maps = _lower_maps(Q)
    shape = P.shape
    S = P.support
    columns, owner = [], []
    for i, m in enumerate(maps):
        if not set(m.support) <= set(S) or m.is_zero():
            continue
        rest = tuple(t for t in S if t not in m.support)
        mp = m.to_poly()
        for idx in itertools.product(*[range(shape.dims[t]) for t in rest]):
            mono = MultiLinearMap(shape, rest, {idx: 1})
            columns.append(mp * mono.to_poly())
            owner.append((i, mono))
    Pp = P.to_poly()
    x, y, monos = _membership(Pp, columns, max_unknowns)
    if x is None:
        inv = {j: e for e, j in monos.items()}
        func = {inv[j]: int(v) for j, v in enumerate(y) if v}
        return Infeasible(func, "the multilinear linear system is inconsistent")
    mults = [None] * len(maps)
    for (i, mono), c in zip(owner, x):
        if c:
            R = mono.scale(int(c))
            mults[i] = R if mults[i] is None else mults[i] + R
    for i, m in enumerate(maps):
        if mults[i] is None:
            mults[i] = MultiLinearMap(shape, tuple(t for t in S if t not in m.support)) \
                if set(m.support) <= set(S) else None
    residual = Pp
    for R, m in zip(mults, maps):
        if R is not None:
            residual = residual - R.to_poly() * m.to_poly()
    return MembershipSolution(mults, residual)


def verify_membership(P, T, sol):
    """Check a MembershipSolution: exact identity and degree side-conditions."""
    maps = _lower_maps(T)
    if isinstance(P, Poly):
        d = P.degree
        acc = Poly.zero(P.p, P.n)
        for R, Q in zip(sol.multipliers, maps):
            R, Q = _as_poly(R), _as_poly(Q)
            if not R.is_zero() and R.degree + Q.degree > d:
                return False
            acc = acc + R * Q
        return acc == P
    Pm = P.multilinear_part() if isinstance(P, MultiAffineMap) else P
    acc = Poly.zero(Pm.p, Pm.shape.n)
    for R, Q in zip(sol.multipliers, maps):
        if R is None:
            continue
        if set(R.support) & set(Q.support):
            return False
        acc = acc + R.to_poly() * Q.to_poly()
    return acc == Pm.to_poly()
