"""Eigenvalue counting through Sylvester inertia.

For a shift ``sigma`` the number of pencil eigenvalues below ``sigma`` is the
number of negative eigenvalues of ``A = K - sigma M``. The interior node
chains of all edges form a block-tridiagonal block ``T``; with the Haynsworth
formula

    In(A) = In(T) + In(S),   S = A_VV - A_VT T^{-1} A_TV,

``In(T)`` comes from Sturm sequences of the chains and ``S`` is the small
dense vertex block. Only the corner entries of each chain's inverse enter
``S``; they are obtained from one pivoted tridiagonal solve.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import PrecisionError

TIE_RTOL = 1e-12
TIE_ATOL = 1e-14
DENSE_FALLBACK = 4000
TIE_FACTOR = 64
_TINY = np.finfo(float).tiny
_EPS = np.finfo(float).eps


class _Singular(Exception):
    pass


def shift_up(lam: float) -> float:
    return lam + TIE_RTOL * abs(lam) + TIE_ATOL


def shift_down(lam: float) -> float:
    return lam - TIE_RTOL * abs(lam) - TIE_ATOL


def count_below(op, lam: float, method: str = "schur") -> int:
    """Number of pencil eigenvalues ``<= lam`` (ties resolved toward inclusion)."""
    op._check_energy(lam)
    return _robust(op, shift_up(lam), method, up=True)


def count_strictly_below(op, lam: float, method: str = "schur") -> int:
    """Number of pencil eigenvalues ``< lam`` (ties resolved toward exclusion)."""
    op._check_energy(lam)
    return _robust(op, shift_down(lam), method, up=False)


def _robust(op, sigma: float, method: str, up: bool) -> int:
    """Schur count; unresolved vertex eigenvalues go to dense LDL^T when it is affordable.

    Above the dense cap they are resolved like ties, so the counting function
    stays monotone and is accurate to the reported resolution.
    """
    if method == "ldl":
        return _ldl_count(op, sigma, up)
    try:
        return _schur_count(op, sigma, up)
    except _Singular:
        pass
    if op.n_dofs <= DENSE_FALLBACK:
        return _ldl_count(op, sigma, up)
    try:
        return _schur_count(op, sigma, up, strict=False)
    except _Singular:
        raise PrecisionError(f"shift {sigma!r}: chain factorization breaks down") from None


def sturm_negatives(d: np.ndarray, o: np.ndarray, include_ties: bool = True) -> np.ndarray:
    """Negative pivot counts of LDL^T for a batch of symmetric tridiagonals.

    ``d`` has shape (..., n), ``o`` shape (..., n-1). Pivots smaller than
    ``pivmin`` are replaced by ``-pivmin`` (``+pivmin`` when ties are
    excluded), as in LAPACK's bisection codes.
    """
    n = d.shape[-1]
    o2 = o * o
    pivmin = _TINY * max(1.0, float(np.max(o2)) if o2.size else 1.0)
    fill = -pivmin if include_ties else pivmin
    piv = d[..., 0].copy()
    piv = np.where(np.abs(piv) < pivmin, fill, piv)
    neg = (piv < 0).astype(np.int64)
    for i in range(1, n):
        piv = d[..., i] - o2[..., i - 1] / piv
        piv = np.where(np.abs(piv) < pivmin, fill, piv)
        neg += piv < 0
    return neg


def _inertia(w: np.ndarray, tie_tol: float, safe_tol: float, include_ties: bool, strict: bool = True) -> int:
    """Negative count of a symmetric block from its eigenvalues.

    Eigenvalues within ``tie_tol`` (the backward error of the assembled
    matrix) are ties; those within ``safe_tol`` but larger than ``tie_tol``
    are unresolved and trigger a retry.
    """
    a = np.abs(w)
    if not strict:
        tie_tol = max(tie_tol, safe_tol)
    tie = a <= tie_tol
    if np.any(~tie & (a <= safe_tol)):
        raise _Singular
    if include_ties:
        return int(np.sum((w < 0) | tie))
    return int(np.sum((w < 0) & ~tie))


def _scale(op, sigma: float) -> float:
    ch = op.chains
    parts = [np.abs(ch.Kd), np.abs(np.diag(ch.KV)), np.abs(ch.K_left), np.abs(ch.K_right)]
    k = max((float(np.max(p)) for p in parts if p.size), default=1.0)
    mparts = [np.abs(ch.Md), np.abs(np.diag(ch.MV))]
    m = max((float(np.max(p)) for p in mparts if p.size), default=0.0)
    return max(k + abs(sigma) * m, 1e-300)


def _chain_blocks(op, sigma: float):
    ch = op.chains
    d = ch.Kd - sigma * ch.Md
    o = ch.Ko - sigma * ch.Mo
    cl = ch.K_left - sigma * ch.M_left
    cr = ch.K_right - sigma * ch.M_right
    S = ch.KV - sigma * ch.MV
    return [d, o, ch.m.copy(), ch.left.copy(), ch.right.copy(), cl, cr, S]


def _split_chains(blocks, rows):
    """Promote one interior node of each chain in ``rows`` to a vertex dof.

    The node sits near the golden section so that the two halves have no
    Dirichlet eigenvalue in common with the whole chain.
    """
    d, o, m, L, R, cl, cr, S = blocks
    E, mmax = d.shape
    k = len(rows)
    nv = S.shape[0]
    S2 = np.zeros((nv + k, nv + k))
    S2[:nv, :nv] = S
    d2 = np.vstack([d, np.ones((k, mmax))])
    o2 = np.vstack([o, np.zeros((k, o.shape[1]))])
    m2 = np.concatenate([m, np.zeros(k, dtype=m.dtype)])
    L2 = np.concatenate([L, np.zeros(k, dtype=L.dtype)])
    R2 = np.concatenate([R, np.zeros(k, dtype=R.dtype)])
    cl2 = np.concatenate([cl, np.zeros(k)])
    cr2 = np.concatenate([cr, np.zeros(k)])
    for i, r in enumerate(rows):
        mm = int(m[r])
        p = min(max(1, int(round(0.381966011250105 * mm))), mm - 2)
        v, b = nv + i, E + i
        S2[v, v] = d[r, p]
        nb = mm - p - 1
        d2[b, :nb] = d[r, p + 1 : mm]
        o2[b, : nb - 1] = o[r, p + 1 : mm - 1]
        m2[b], L2[b], R2[b], cl2[b], cr2[b] = nb, v, R[r], o[r, p], cr[r]
        d2[r, p:] = 1.0
        o2[r, p - 1 :] = 0.0
        m2[r], R2[r], cr2[r] = p, v, o[r, p - 1]
    return [d2, o2, m2, L2, R2, cl2, cr2, S2]


def _schur_core(blocks, include_ties: bool):
    """Negatives of the chain block, the Schur complement and per-chain solve noise."""
    d, o, m, L, R, cl, cr, S = blocks
    neg_T = int(np.sum(sturm_negatives(d, o, include_ties))) if d.size else 0
    S = S.copy()
    E, mmax = d.shape
    noise = np.zeros(E)
    if E == 0 or S.shape[0] == 0:
        return neg_T, S, noise
    mask = np.arange(mmax)[None, :] < m[:, None]
    o_full = np.zeros((E, mmax))
    o_full[:, : mmax - 1] = o
    diag = d[mask]
    off = o_full[mask][:-1]
    ends = np.cumsum(m)
    first, last = ends - m, ends - 1
    rhs = np.zeros((diag.size, 2))
    rhs[first, 0] = 1.0
    rhs[last, 1] = 1.0
    ab = np.zeros((3, diag.size))
    ab[0, 1:] = off
    ab[1] = diag
    ab[2, :-1] = off
    try:
        x = scipy.linalg.solve_banded((1, 1), ab, rhs, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        raise _Singular from None
    if not np.all(np.isfinite(x)):
        raise _Singular
    g11, g1n, gnn = x[first, 0], x[last, 0], x[last, 1]
    # first order: |delta(u^T T^{-1} v)| <= ||dT|| ||T^{-1} u|| ||T^{-1} v||
    n1 = np.sqrt(np.add.reduceat(x[:, 0] ** 2, first))
    nn = np.sqrt(np.add.reduceat(x[:, 1] ** 2, first))
    t_norm = np.max(np.abs(d) * mask, axis=1) + 2 * np.max(np.abs(o_full), axis=1)
    noise = t_norm * (np.abs(cl) * n1 + np.abs(cr) * nn) ** 2
    okl, okr = L >= 0, R >= 0
    np.add.at(S, (L[okl], L[okl]), -cl[okl] ** 2 * g11[okl])
    np.add.at(S, (R[okr], R[okr]), -cr[okr] ** 2 * gnn[okr])
    both = okl & okr
    cross = -cl[both] * cr[both] * g1n[both]
    np.add.at(S, (L[both], R[both]), cross)
    np.add.at(S, (R[both], L[both]), cross)
    return neg_T, S, noise


def _schur_count(op, sigma: float, include_ties: bool = True, strict: bool = True) -> int:
    blocks = _chain_blocks(op, sigma)
    if blocks[-1].shape[0] == 0:
        return _schur_core(blocks, include_ties)[0]
    tie_tol = TIE_FACTOR * _EPS * _scale(op, sigma)
    for attempt in range(2):
        neg_T, S, noise = _schur_core(blocks, include_ties)
        w = np.linalg.eigvalsh(S)
        # backward error of eigvalsh plus the forward error of the chain solves
        safe_tol = TIE_FACTOR * _EPS * (S.shape[0] * float(np.max(np.abs(w))) + float(noise.max(initial=0.0)))
        try:
            return neg_T + _inertia(w, tie_tol, safe_tol, include_ties, strict=True)
        except _Singular:
            rows = np.flatnonzero((TIE_FACTOR * _EPS * noise > tie_tol) & (blocks[2] >= 3))
            if attempt or rows.size == 0:
                break
            blocks = _split_chains(blocks, rows.tolist())
    if strict:
        raise _Singular
    return neg_T + _inertia(w, tie_tol, safe_tol, include_ties, strict=False)


def _ldl_count(op, sigma: float, include_ties: bool = True) -> int:
    A = (op.K - sigma * op.M).toarray()
    if A.shape[0] == 0:
        return 0
    _, D, _ = scipy.linalg.ldl(A, lower=True)
    w = scipy.linalg.eigvalsh_tridiagonal(np.diag(D).copy(), np.diag(D, -1).copy())
    tie_tol = TIE_FACTOR * _EPS * float(np.max(np.abs(A)))
    return _inertia(w, tie_tol, tie_tol, include_ties)


def locate_eigenvalue(op, k: int, lo: float | None = None, hi: float | None = None) -> float:
    """The k-th eigenvalue (1-based) as the jump point of ``count_below``, by bisection.

    The result is consistent with the counting rule itself:
    ``count_strictly_below(op, x) < k <= count_below(op, x)``.
    """
    if k < 1:
        raise ValueError("k is 1-based")
    lo = op.spectrum_lower_bound() if lo is None else lo
    hi = op.lambda_max if hi is None else hi
    if count_below(op, hi) < k:
        raise PrecisionError(f"fewer than {k} eigenvalues below lambda_max")
    while True:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            return hi
        if count_below(op, mid) >= k:
            hi = mid
        else:
            lo = mid
