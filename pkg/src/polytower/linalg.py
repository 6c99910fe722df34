"""Exact linear algebra over F_p on int64 numpy arrays.

Entries are kept in [0, p); every product is reduced immediately, which is
safe for p < 2^31.
"""
from __future__ import annotations

import itertools

import numpy as np


def _arr(M, p):
    return np.asarray(M, dtype=np.int64) % p


def rref(M, p):
    """Reduced row echelon form; returns (R, pivot_columns)."""
    A = np.asarray(M, dtype=np.int64)
    if A.ndim != 2:
        raise ValueError("rref expects a matrix")
    return rref_limited(A, p, A.shape[1])


def rank(M, p):
    M = np.asarray(M)
    if M.size == 0:
        return 0
    return len(rref(M, p)[1])


def row_basis(M, p):
    """Nonzero rows of the RREF (a canonical basis of the row space)."""
    M = np.asarray(M, dtype=np.int64)
    if M.size == 0:
        return np.zeros((0, M.shape[1] if M.ndim == 2 else 0), dtype=np.int64), []
    R, piv = rref(M, p)
    return R[: len(piv)], piv


def nullspace(M, p):
    """Basis (as rows) of {x : M x = 0}."""
    M = _arr(M, p)
    cols = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(cols, dtype=np.int64)
    R, piv = rref(M, p)
    free = [c for c in range(cols) if c not in piv]
    basis = np.zeros((len(free), cols), dtype=np.int64)
    for k, f in enumerate(free):
        basis[k, f] = 1
        for i, pc in enumerate(piv):
            basis[k, pc] = (-R[i, f]) % p
    return basis


def solve(A, b, p):
    """Solve A x = b.  Returns (x, None) or (None, y) with y A = 0 and y.b != 0.

    Free variables are set to 0, so the solution is canonical.
    """
    A = _arr(A, p)
    b = _arr(b, p).reshape(-1)
    rows, cols = A.shape
    aug = np.concatenate([A, b[:, None], np.eye(rows, dtype=np.int64)], axis=1)
    R, piv = rref_limited(aug, p, cols + 1)
    x = np.zeros(cols, dtype=np.int64)
    for i, c in enumerate(piv):
        if c == cols:
            # row i reads 0 = 1; the identity block records how it was formed
            y = R[i, cols + 1:]
            return None, y % p
        x[c] = R[i, cols]
    return x, None


def rref_limited(M, p, ncols):
    """RREF pivoting only within the first ncols columns (row ops act on all)."""
    A = _arr(M, p).copy()
    rows = A.shape[0]
    pivots = []
    r = 0
    for c in range(ncols):
        if r == rows:
            break
        nz = np.nonzero(A[r:, c])[0]
        if nz.size == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            A[[r, piv]] = A[[piv, r]]
        inv = pow(int(A[r, c]), -1, p)
        A[r] = (A[r] * inv) % p
        col = A[:, c].copy()
        col[r] = 0
        hit = np.nonzero(col)[0]
        if hit.size:
            A[hit] = (A[hit] - (col[hit, None] * A[r][None, :]) % p) % p
        pivots.append(c)
        r += 1
    return A, pivots


def inverse(M, p):
    M = _arr(M, p)
    n = M.shape[0]
    R, piv = rref(np.concatenate([M, np.eye(n, dtype=np.int64)], axis=1), p)
    if piv[:n] != list(range(n)) or len(piv) < n:
        raise ValueError("matrix is singular")
    return R[:, n:]


def in_span(basis_rref, pivots, v, p):
    """Reduce v against an RREF basis; True when the remainder vanishes."""
    return not reduce_vector(basis_rref, pivots, v, p).any()


def reduce_vector(basis_rref, pivots, v, p):
    v = _arr(v, p).copy()
    for row, c in zip(basis_rref, pivots):
        if v[c]:
            v = (v - v[c] * row) % p
    return v


def batched_rank(Ms, p):
    """Ranks of a stack of matrices Ms[b] (shape (B, r, c)), vectorized."""
    A = np.asarray(Ms, dtype=np.int64) % p
    B, rows, cols = A.shape
    A = A.copy()
    ranks = np.zeros(B, dtype=np.int64)
    inv_table = np.zeros(p, dtype=np.int64) if p < (1 << 22) else None
    if inv_table is not None:
        for a in range(1, p):
            inv_table[a] = pow(a, -1, p)
    ar = np.arange(B)
    for c in range(cols):
        # candidate pivot rows are those at index >= current rank
        rowidx = np.arange(rows)[None, :]
        colv = A[:, :, c]
        eligible = (colv != 0) & (rowidx >= ranks[:, None])
        has = eligible.any(axis=1)
        if not has.any():
            continue
        piv = np.argmax(eligible, axis=1)
        sel = ar[has]
        prow = piv[has]
        tgt = ranks[has]
        # swap pivot row into position `tgt`
        a_p = A[sel, prow].copy()
        a_t = A[sel, tgt].copy()
        A[sel, prow] = a_t
        A[sel, tgt] = a_p
        lead = A[sel, tgt, c]
        if inv_table is not None:
            inv = inv_table[lead]
        else:
            inv = np.array([pow(int(v), -1, p) for v in lead], dtype=np.int64)
        prow_vals = (A[sel, tgt] * inv[:, None]) % p
        A[sel, tgt] = prow_vals
        factors = A[sel, :, c].copy()
        factors[np.arange(sel.size), tgt] = 0
        A[sel] = (A[sel] - (factors[:, :, None] * prow_vals[:, None, :]) % p) % p
        ranks[has] += 1
    return ranks


def gaussian_binomial(n, k, q):
    """Number of k-dimensional subspaces of F_q^n."""
    if k < 0 or k > n:
        return 0
    num, den = 1, 1
    for i in range(k):
        num *= q ** (n - i) - 1
        den *= q ** (i + 1) - 1
    return num // den


def subspaces(n, k, p):
    """All k-dim subspaces of F_p^n as RREF k x n matrices, deterministic order."""
    if k == 0:
        yield np.zeros((0, n), dtype=np.int64)
        return
    for piv in itertools.combinations(range(n), k):
        slots = [(r, c) for r in range(k) for c in range(piv[r] + 1, n) if c not in piv]
        for fill in itertools.product(range(p), repeat=len(slots)):
            M = np.zeros((k, n), dtype=np.int64)
            for r, c in enumerate(piv):
                M[r, c] = 1
            for (r, c), v in zip(slots, fill):
                M[r, c] = v
            yield M
