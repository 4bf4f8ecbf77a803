"""Lowest eigenvalues of real symmetric operators.

``lowest_eigenvalues`` runs a thick-restart Lanczos iteration with full
(two-pass) reorthogonalization from a deterministic start vector. A
single Krylov space sees only one copy of an exactly degenerate
eigenvalue, and symmetric start vectors are blind to eigenvectors of the
opposite parity, so every converged set is re-checked by a deflated run
from a fixed-seed start vector orthogonal to the accepted vectors.
``dense_spectrum`` is the brute-force oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SpectrumResult",
    "IterationError",
    "SizeError",
    "lowest_eigenvalues",
    "dense_spectrum",
    "extreme_eigenvalue",
    "CLUSTER_TOL",
    "DENSE_MAX",
]

DENSE_MAX = 2000
DENSE_ORACLE_MAX = 4000
CLUSTER_TOL = 1e-8
RECHECK_SEED = 20240917


class IterationError(RuntimeError):
    """Krylov iteration did not converge; carries the partial result."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class SizeError(ValueError):
    pass


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray]
    residuals: np.ndarray
    iterations: int
    method: str
    converged: bool = True

    def __len__(self):
        return len(self.eigenvalues)


def _as_operator(A):
    if sp.issparse(A):
        A = A.tocsr()
        return A, A.shape[0]
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"operator must be square, got shape {A.shape}")
    return A, A.shape[0]


def _to_dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A)


def dense_spectrum(A, vectors: bool = False) -> SpectrumResult:
    """All eigenvalues of a symmetric matrix via LAPACK."""
    A, n = _as_operator(A)
    if n > DENSE_ORACLE_MAX:
        raise SizeError(f"dense_spectrum limited to N <= {DENSE_ORACLE_MAX}, got {n}")
    M = _to_dense(A)
    if vectors:
        w, V = np.linalg.eigh(M)
        res = np.linalg.norm(M @ V - V * w, axis=0)
        return SpectrumResult(w, V, res, 0, "dense")
    w = np.linalg.eigvalsh(M)
    return SpectrumResult(w, None, np.zeros_like(w), 0, "dense")


def _orthogonalize(w, basis, locked):
    # two passes of classical Gram-Schmidt (Kahan/DGKS "twice is enough")
    for _ in range(2):
        if locked is not None:
            w -= locked @ (locked.T @ w)
        if basis is not None and basis.shape[1]:
            w -= basis @ (basis.T @ w)
    return w


def _fresh_vector(n, rng, basis, locked):
    for _ in range(10):
        v = _orthogonalize(rng.standard_normal(n), basis, locked)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            return v / nv
    return None


def _thick_restart(
    matvec: Callable[[np.ndarray], np.ndarray],
    n: int,
    k: int,
    v0: np.ndarray,
    tol: float,
    max_matvec: int,
    ncv: int,
    largest: bool = False,
    locked: Optional[np.ndarray] = None,
    anorm: float = 0.0,
    shift: float = 0.0,
):
    """k extreme Ritz pairs of the operator restricted to the complement of ``locked``.

    With ``locked`` the iteration runs on P A P + shift·(I − P), P the
    projector onto the complement of the locked columns.

    Returns (theta, X, residual_estimates, matvecs, converged, anorm).
    """
    n_free = n - (0 if locked is None else locked.shape[1])
    k = min(k, n_free)
    m = min(max(ncv, 2 * k + 1), n_free)
    rng = np.random.default_rng(RECHECK_SEED + 1)
    V = np.zeros((n, m + 1))
    H = np.zeros((m + 1, m + 1))
    v = _orthogonalize(np.array(v0, dtype=float), None, locked)
    nv = np.linalg.norm(v)
    if nv < 1e-8:
        v = _fresh_vector(n, rng, None, locked)
    else:
        v = v / nv
    V[:, 0] = v
    p = 0
    matvecs = 0
    while True:
        beta = 0.0
        for j in range(p, m):
            if locked is None:
                w = matvec(V[:, j])
            else:
                # shifted deflation: locked directions move to eigenvalue `shift`,
                # above the wanted end, so rounding leaks cannot surface as spurious
                # small Ritz values the way they would with a plain projection
                c = locked.T @ V[:, j]
                w = matvec(V[:, j] - locked @ c)
                w = w - locked @ (locked.T @ w) + shift * (locked @ c)
            matvecs += 1
            h = V[:, : j + 1].T @ w
            w = w - V[:, : j + 1] @ h
            h2 = V[:, : j + 1].T @ w
            w = w - V[:, : j + 1] @ h2
            h = h + h2
            H[: j + 1, j] = h
            H[j, : j + 1] = h
            beta = np.linalg.norm(w)
            anorm = max(anorm, abs(h[j]), beta)
            if beta <= 1e-14 * max(anorm, 1.0):
                # invariant subspace: continue with a fresh orthogonal direction
                beta = 0.0
                if j + 1 < m + 1:
                    fresh = _fresh_vector(n, rng, V[:, : j + 1], locked)
                    if fresh is None:
                        m = j + 1
                        break
                    V[:, j + 1] = fresh
            else:
                V[:, j + 1] = w / beta
            H[j + 1, j] = H[j, j + 1] = beta
        Hm = 0.5 * (H[:m, :m] + H[:m, :m].T)
        theta, S = np.linalg.eigh(Hm)
        anorm = max(anorm, float(np.max(np.abs(theta))))
        order = np.argsort(-theta if largest else theta, kind="stable")
        want = order[:k]
        resid = np.abs(beta * S[m - 1, want])
        done = bool(np.all(resid <= tol * max(anorm, 1e-300))) or m >= n_free
        if done or matvecs >= max_matvec:
            X = V[:, :m] @ S[:, want]
            sel = np.argsort(theta[want], kind="stable")
            return theta[want][sel], X[:, sel], resid[sel], matvecs, done, anorm
        # thick restart: keep the wanted end of the Ritz spectrum plus the residual direction
        keep = order[: min(m - 1, k + max((m - k) // 2, 1))]
        p = len(keep)
        Vnew = np.zeros_like(V)
        Vnew[:, :p] = V[:, :m] @ S[:, keep]
        Vnew[:, p] = V[:, m]
        Hnew = np.zeros_like(H)
        Hnew[np.arange(p), np.arange(p)] = theta[keep]
        coupling = beta * S[m - 1, keep]
        Hnew[p, :p] = coupling
        Hnew[:p, p] = coupling
        V, H = Vnew, Hnew


def _true_residuals(A, w, X):
    AX = A @ X
    return np.linalg.norm(AX - X * w, axis=0)


def lowest_eigenvalues(
    A,
    k: int,
    tol: float = 1e-10,
    *,
    vectors: bool = False,
    dense_max: int = DENSE_MAX,
    ncv: Optional[int] = None,
    max_steps: Optional[int] = None,
) -> SpectrumResult:
    """k smallest eigenvalues of a real symmetric operator.

    Parameters
    ----------
    A : sparse matrix or ndarray
        Symmetric operator of order N.
    k : int
        Number of eigenvalues, 1 <= k <= N.
    tol : float
        Residual tolerance relative to ||A||: every returned pair satisfies
        ||A v - λ v|| <= tol·||A||.
    dense_max : int
        Orders up to this size are diagonalized densely.
    ncv : int, optional
        Krylov basis size between restarts (default max(2k + 20, 40)).
    max_steps : int, optional
        Budget of matrix-vector products per Lanczos run (default 10·N).

    Raises
    ------
    IterationError
        Budget exhausted; ``exc.partial`` holds the unconverged estimates.
    """
    A, n = _as_operator(A)
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= N={n}, got {k}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if n <= dense_max:
        M = _to_dense(A)
        w, V = np.linalg.eigh(M)
        w, V = w[:k], V[:, :k]
        res = np.linalg.norm(M @ V - V * w, axis=0)
        return SpectrumResult(w, V if vectors else None, res, 0, "dense")

    ncv = ncv or max(2 * k + 20, 40)
    budget = max_steps or 10 * n
    matvec = (lambda x: A @ x)
    v0 = np.ones(n) / np.sqrt(n)
    theta, X, _, used, ok, anorm = _thick_restart(matvec, n, k, v0, tol, budget, ncv)
    if not ok:
        partial = SpectrumResult(theta, X if vectors else None, _true_residuals(A, theta, X), used, "lanczos", False)
        raise IterationError(f"Lanczos did not converge within {budget} matrix-vector products", partial)

    # deflated re-check for copies the first Krylov space could not see
    rng = np.random.default_rng(RECHECK_SEED)
    for _ in range(k + 1):
        if X.shape[1] >= n:
            break
        start = rng.standard_normal(n)
        theta2, X2, _, used2, ok2, anorm = _thick_restart(
            matvec, n, k, start, tol, budget, ncv, locked=X, anorm=anorm, shift=2.0 * anorm + 1.0
        )
        used += used2
        if not ok2:
            partial = SpectrumResult(theta, X if vectors else None, _true_residuals(A, theta, X), used, "lanczos", False)
            raise IterationError("deflated Lanczos re-check did not converge", partial)
        cutoff = theta[-1] - CLUSTER_TOL * (1 + abs(theta[-1]))
        if theta2.size == 0 or theta2[0] >= cutoff:
            break
        w_all = np.concatenate([theta, theta2])
        X_all = np.concatenate([X, X2], axis=1)
        sel = np.argsort(w_all, kind="stable")[:k]
        theta, X = w_all[sel], X_all[:, sel]
        # re-orthonormalize the merged set (Rayleigh-Ritz on its span)
        Q, _ = np.linalg.qr(X)
        Hq = Q.T @ (A @ Q)
        theta, S = np.linalg.eigh(0.5 * (Hq + Hq.T))
        X = Q @ S

    res = _true_residuals(A, theta, X)
    return SpectrumResult(theta, X if vectors else None, res, used, "lanczos", True)


def extreme_eigenvalue(A, largest: bool, tol: float = 1e-8, max_steps: Optional[int] = None) -> float:
    """Smallest or largest eigenvalue of a symmetric operator via Lanczos."""
    A, n = _as_operator(A)
    budget = max_steps or 10 * n
    v0 = np.ones(n) / np.sqrt(n)
    theta, X, _, used, ok, _ = _thick_restart(lambda x: A @ x, n, 1, v0, tol, budget, 30, largest=largest)
    if not ok:
        raise IterationError(f"norm iteration did not converge (last estimate {theta[0]!r})", theta[0])
    return float(theta[0])
