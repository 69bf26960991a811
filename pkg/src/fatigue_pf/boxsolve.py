"""Bound-constrained quadratic subproblems.

Both the plastic and the damage subproblems reduce to

    find x with lo <= x <= hi,  G = A x - b  and
    G >= 0 where x = lo,  G <= 0 where x = hi,  G = 0 in between,

i.e. the optimality system of ``min 1/2 x'Ax - b'x`` over a box. The primal-dual
active-set method below solves it exactly (in finitely many steps for the
matrices met here) for dense or sparse ``A``.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.optimize as sopt
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError


def _solve(A, rhs):
    if sp.issparse(A):
        if A.shape[0] == 0:
            return np.zeros(0)
        return spla.spsolve(A.tocsc(), rhs)
    return np.linalg.solve(A, rhs)


def _bounded_fallback(A, b, lo, hi, x0, what):
    """Quasi-Newton solve with bounds, used when the active-set iteration
    cycles (possible when ``A`` is not an M-matrix); the result is polished by
    exact solves on the free set it identifies."""
    n = b.shape[0]
    bounds = sopt.Bounds(lo, hi)
    out = sopt.minimize(lambda y: (0.5 * y @ (A @ y) - b @ y, A @ y - b), x0, jac=True, method="L-BFGS-B",
                        bounds=bounds, options={"maxiter": 50 * n + 1000, "ftol": 0.0, "gtol": 1e-14})
    x = np.clip(out.x, lo, hi)
    best, best_res = x.copy(), kkt_residual(A, b, x, lo, hi)
    for _ in range(20):
        G = A @ x - b
        scale = 1e-10 * max(1.0, float(np.max(np.abs(b), initial=0.0)))
        act_lo = (x - lo <= scale) & (G >= 0.0)
        act_hi = (hi - x <= scale) & (G <= 0.0) & ~act_lo
        free = ~(act_lo | act_hi)
        x = np.where(act_lo, lo, np.where(act_hi, hi, x))
        if np.any(free):
            idx, fixed = np.flatnonzero(free), np.flatnonzero(~free)
            rhs = b[idx] - (A[idx][:, fixed] @ x[fixed] if fixed.size else 0.0)
            try:
                x[idx] = _solve(A[idx][:, idx], rhs)
            except (np.linalg.LinAlgError, RuntimeError):
                break
        x = np.clip(x, lo, hi)
        res = kkt_residual(A, b, x, lo, hi)
        if res < best_res:
            best, best_res = x.copy(), res
        if res <= 1e-12 * max(1.0, float(np.max(np.abs(b), initial=0.0))):
            break
    if not np.isfinite(best_res) or best_res > 1e-6 * max(1.0, float(np.max(np.abs(b), initial=0.0))):
        raise SolverError(f"{what}: active-set iteration cycled and the bounded fallback failed", residual=best_res)
    return best


def kkt_residual(A, b, x, lo, hi) -> float:
    """Largest violation of the box optimality conditions."""
    G = A @ x - b
    lo = np.broadcast_to(lo, x.shape)
    hi = np.broadcast_to(hi, x.shape)
    at_lo = x <= lo
    at_hi = x >= hi
    free = ~(at_lo | at_hi)
    viol = np.zeros_like(x)
    viol[free] = np.abs(G[free])
    viol[at_lo] = np.maximum(-G[at_lo], 0.0)
    viol[at_hi] = np.maximum(G[at_hi], 0.0)
    bound = np.maximum(lo - x, 0.0) + np.maximum(x - hi, 0.0)
    return float(np.max(viol + bound, initial=0.0))


def active_set(A, b, lo, hi=np.inf, x0=None, max_iter: int = 100, what: str = "box QP"):
    """Primal-dual active-set solve; returns ``(x, iterations)``."""
    n = b.shape[0]
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
    x = np.clip(lo if x0 is None else np.asarray(x0, dtype=float), lo, hi)
    diag = A.diagonal() if sp.issparse(A) else np.diag(A)
    c = 1.0 / max(float(np.max(np.abs(diag), initial=0.0)), 1e-300)
    A_csr = A.tocsr() if sp.issparse(A) else A
    seen = set()
    prev = None
    for it in range(1, max_iter + 1):
        G = A_csr @ x - b
        # c * G may overflow for an all-zero matrix; the signs stay right
        with np.errstate(over="ignore", invalid="ignore"):
            act_lo = x - lo - c * G < 0.0
            act_hi = (x - hi - c * G > 0.0) & ~act_lo
        key = (act_lo.tobytes(), act_hi.tobytes())
        if key == prev:
            return x, it - 1
        if key in seen:
            return _bounded_fallback(A_csr, b, lo, hi, x, what), it
        seen.add(key)
        prev = key
        free = ~(act_lo | act_hi)
        x = np.where(act_lo, lo, np.where(act_hi, hi, x))
        if np.any(free):
            idx = np.flatnonzero(free)
            fixed = np.flatnonzero(~free)
            rhs = b[idx] - (A_csr[idx][:, fixed] @ x[fixed] if fixed.size else 0.0)
            A_ff = A_csr[idx][:, idx]
            try:
                x[idx] = _solve(A_ff, rhs)
            except (np.linalg.LinAlgError, RuntimeError) as exc:
                raise SolverError(f"{what}: singular reduced system") from exc
    res = kkt_residual(A_csr, b, x, lo, hi)
    raise SolverError(f"{what}: active-set iteration did not settle after {max_iter} iterations", residual=res)


def nonneg_qp_dense(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``min 1/2 x'Ax - b'x`` subject to ``x >= 0`` for small dense ``A``.

    Tries the active-set method first; on cycling falls back to NNLS on the
    Cholesky factor (exact for symmetric positive-definite ``A``).
    """
    try:
        x, _ = active_set(A, b, 0.0, np.inf, max_iter=4 * len(b) + 20, what="surface coupling")
        return x
    except SolverError:
        L = sla.cholesky(0.5 * (A + A.T), lower=True)
        rhs = sla.solve_triangular(L, b, lower=True)
        x, _ = sopt.nnls(L.T, rhs, maxiter=50 * len(b))
        return x
