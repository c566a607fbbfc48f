"""Dense two-phase revised simplex.

Solves min c@x subject to a@x <= b on inequality rows, a@x == b on equality
rows, and x >= 0.  Deterministic: the entering variable takes the most
negative reduced cost (smallest index on ties), switching to Bland's rule
after a run of degenerate pivots so cycling is impossible; the leaving
variable is the smallest basic index among the ratio-test ties.  The basis
inverse is updated by elementary row operations and refactorized
periodically; the result carries a primal-dual certificate (duality gap plus
feasibility residuals).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LpError", "LpSolution", "simplex_solve"]

_PIVOT_TOL = 1e-9
_RATIO_TIE = 1e-12
_REFACTOR_EVERY = 64
_STALL_LIMIT = 1000


class LpError(ArithmeticError):
    """Raised for infeasible, unbounded, or non-converged programs."""


@dataclass(frozen=True)
class LpSolution:
    """Primal-dual pair with certificate pieces.

    gap is c@x - b@y; primal_residual the worst constraint violation;
    dual_residual the worst dual-feasibility violation.  certificate is the
    max of the three, each normalized by 1 + |objective|.
    """

    x: np.ndarray
    y: np.ndarray
    objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    certificate: float
    iterations: int


def _refactor(a, basis, b):
    binv = np.linalg.inv(a[:, basis])
    xb = binv @ b
    xb[np.abs(xb) < 1e-13] = 0.0
    return binv, xb


def _iterate(a, b, cost, basis, forbid, maxiter):
    """Simplex loop from a feasible basis; returns iterations.

    Entering rule: most negative reduced cost, except after _STALL_LIMIT
    consecutive degenerate steps, when Bland's smallest-index rule takes
    over until a positive step resets the counter (anti-cycling).
    """
    m = a.shape[0]
    binv, xb = _refactor(a, basis, b)
    sincefac = 0
    stalled = 0
    for it in range(1, maxiter + 1):
        y = cost[basis] @ binv
        red = cost - y @ a
        red[basis] = 0.0
        red[forbid] = 0.0
        cand = np.flatnonzero(red < -_PIVOT_TOL)
        if cand.size == 0:
            return binv, xb, it
        if stalled >= _STALL_LIMIT:
            j = int(cand[0])
        else:
            j = int(cand[np.argmin(red[cand])])
        d = binv @ a[:, j]
        pos = d > _PIVOT_TOL
        if not np.any(pos):
            raise LpError("objective unbounded below")
        ratios = np.full(m, np.inf)
        ratios[pos] = xb[pos] / d[pos]
        rmin = float(ratios.min())
        ties = np.flatnonzero(ratios <= rmin + _RATIO_TIE)
        leave = int(ties[np.argmin(basis[ties])])
        basis[leave] = j
        piv = d[leave]
        binv[leave] /= piv
        other = np.arange(m) != leave
        binv[other] -= np.outer(d[other], binv[leave])
        step = max(rmin, 0.0)
        stalled = stalled + 1 if step <= _RATIO_TIE else 0
        xb = xb - d * step
        xb[leave] = step
        xb[np.abs(xb) < 1e-13] = 0.0
        sincefac += 1
        if sincefac >= _REFACTOR_EVERY:
            binv, xb = _refactor(a, basis, b)
            sincefac = 0
    raise LpError(f"simplex iteration cap {maxiter} reached")


def simplex_solve(c, a, b, is_eq=None, maxiter: int = 200000) -> LpSolution:
    """Minimize c@x with a@x <=/== b (per is_eq) and x >= 0."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    c = np.array(c, dtype=float)
    if a.ndim != 2 or a.shape != (len(b), len(c)):
        raise LpError("inconsistent LP dimensions")
    m, n = a.shape
    if m == 0 or n == 0:
        raise LpError("empty program")
    is_eq = (
        np.zeros(m, dtype=bool) if is_eq is None else np.asarray(is_eq, dtype=bool)
    )

    n_slack = int((~is_eq).sum())
    full = np.hstack([a, np.zeros((m, n_slack))])
    slack_col = -np.ones(m, dtype=int)
    si = 0
    for r in range(m):
        if not is_eq[r]:
            full[r, n + si] = 1.0
            slack_col[r] = n + si
            si += 1
    neg = b < 0
    full[neg] *= -1.0
    rhs = np.abs(b)

    basis = np.empty(m, dtype=int)
    art_rows = []
    # Crash start: positive singleton columns (slacks or structural unit
    # columns such as +-split pairs) give a feasible basis without
    # artificials for their rows.
    col_nnz = (full != 0.0).sum(axis=0)
    singleton = np.flatnonzero(col_nnz == 1)
    single_for_row = {}
    for j in singleton[::-1]:
        r = int(np.flatnonzero(full[:, j])[0])
        if full[r, j] > 0:
            single_for_row[r] = int(j)
    for r in range(m):
        if slack_col[r] >= 0 and full[r, slack_col[r]] > 0:
            basis[r] = slack_col[r]
        elif r in single_for_row:
            basis[r] = single_for_row[r]
        else:
            art_rows.append(r)
    n_art = len(art_rows)
    if n_art:
        art = np.zeros((m, n_art))
        for j, r in enumerate(art_rows):
            art[r, j] = 1.0
            basis[r] = n + n_slack + j
        full = np.hstack([full, art])
    ntot = full.shape[1]
    art_mask = np.zeros(ntot, dtype=bool)
    art_mask[n + n_slack :] = True

    iters = 0
    if n_art:
        cost1 = art_mask.astype(float)
        binv, xb, it1 = _iterate(full, rhs, cost1, basis, np.zeros(ntot, bool), maxiter)
        iters += it1
        scale = 1.0 + float(np.abs(rhs).max())
        if float(cost1[basis] @ xb) > 1e-7 * scale:
            raise LpError("infeasible program")

    cost2 = np.concatenate([c, np.zeros(ntot - n)])
    binv, xb, it2 = _iterate(full, rhs, cost2, basis, art_mask, maxiter - iters)
    iters += it2

    x_full = np.zeros(ntot)
    x_full[basis] = np.maximum(xb, 0.0)
    x = x_full[:n]
    y = cost2[basis] @ binv
    # Dual of the original orientation: y for negated rows flips sign.
    y_orig = y.copy()
    y_orig[neg] = -y_orig[neg]

    objective = float(c @ x)
    gap = objective - float(b @ y_orig)
    ax = a @ x
    prim = 0.0
    for r in range(m):
        if is_eq[r]:
            prim = max(prim, abs(ax[r] - b[r]))
        else:
            prim = max(prim, max(ax[r] - b[r], 0.0), -min(x.min(), 0.0))
    red_orig = c - y_orig @ a
    dual = max(0.0, float(-red_orig.min()) if n else 0.0)
    for r in range(m):
        if not is_eq[r] and y_orig[r] > 0.0:
            dual = max(dual, y_orig[r])
    denom = 1.0 + abs(objective)
    cert = max(abs(gap), prim, dual) / denom
    return LpSolution(
        x=x,
        y=y_orig,
        objective=objective,
        gap=float(gap),
        primal_residual=float(prim),
        dual_residual=float(dual),
        certificate=float(cert),
        iterations=iters,
    )
