"""Brute-force reference computations used by the tests.

These deliberately avoid the library's own linear algebra and search code:
ranks come from explicit Gaussian elimination or breadth-first closure of
the set of rank-one objects under addition.
"""
import functools
import itertools

import numpy as np


def rank_mod(M, p):
    M = [[int(v) % p for v in r] for r in M]
    r = 0
    ncols = len(M[0]) if M else 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(M)) if M[i][c]), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = pow(M[r][c], -1, p)
        M[r] = [v * inv % p for v in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c]:
                f = M[i][c]
                M[i] = [(a - f * b) % p for a, b in zip(M[i], M[r])]
        r += 1
    return r


def _encode(vecs, p):
    w = p ** np.arange(vecs.shape[1] - 1, -1, -1, dtype=np.int64)
    return vecs @ w


def _closure(rank_one, p, nco):
    """Rank table over all p^nco coefficient vectors, by repeated sumsets."""
    size = p ** nco
    all_vecs = np.array(list(itertools.product(range(p), repeat=nco)), dtype=np.int64)
    ranks = np.full(size, -1, dtype=np.int64)
    ranks[0] = 0
    ones = np.unique(rank_one, axis=0)
    frontier = np.zeros((1, nco), dtype=np.int64)
    r = 0
    while (ranks < 0).any():
        r += 1
        hit = np.zeros(size, dtype=bool)
        for s in ones:
            hit[_encode((frontier + s) % p, p)] = True
        new = hit & (ranks < 0)
        if not new.any():
            break
        ranks[new] = r
        frontier = all_vecs[new]
    return ranks


def quadratic_monomials(n):
    return [(i, j) for i in range(n) for j in range(i, n)]


@functools.lru_cache(maxsize=None)
def quadratic_rank_table(p, n):
    """Schmidt rank of every homogeneous quadratic in n variables over F_p.

    Forms are indexed by their coefficient vectors on quadratic_monomials(n).
    """
    mons = quadratic_monomials(n)
    lin = list(itertools.product(range(p), repeat=n))
    prods = []
    for l in lin:
        if not any(l):
            continue
        for m in lin:
            if not any(m):
                continue
            prods.append([(l[i] * m[j] + (l[j] * m[i] if i != j else 0)) % p for i, j in mons])
    return _closure(np.array(prods, dtype=np.int64), p, len(mons))


def quadratic_index(P):
    mons = quadratic_monomials(P.n)
    coeff = dict(P.homogeneous_component(2).terms) if P.degree >= 2 else {}
    vec = []
    for i, j in mons:
        e = [0] * P.n
        e[i] += 1
        e[j] += 1
        vec.append(coeff.get(tuple(e), 0))
    idx = 0
    for v in vec:
        idx = idx * P.p + v
    return idx


@functools.lru_cache(maxsize=None)
def trilinear_rank_table(p, dims):
    """Partition rank of every trilinear map on F_p^a x F_p^b x F_p^c.

    Coefficients are ordered as itertools.product(range(a), range(b), range(c)).
    Rank one: a linear form on one factor times a bilinear form on the other two.
    """
    a, b, c = dims
    cells = list(itertools.product(range(a), range(b), range(c)))
    prods = []
    for t in range(3):
        others = [s for s in range(3) if s != t]
        for lf in itertools.product(range(p), repeat=dims[t]):
            if not any(lf):
                continue
            for bf in itertools.product(range(p), repeat=dims[others[0]] * dims[others[1]]):
                if not any(bf):
                    continue
                B = np.array(bf).reshape(dims[others[0]], dims[others[1]])
                row = []
                for cell in cells:
                    row.append(lf[cell[t]] * B[cell[others[0]], cell[others[1]]] % p)
                prods.append(row)
    return _closure(np.array(prods, dtype=np.int64), p, len(cells))


def brute_bias(values, p):
    """|mean of exp(2 pi i v / p)| from a list of field values."""
    w = np.exp(2j * np.pi * np.asarray(values) / p)
    return abs(w.mean()) if len(values) else 0.0
