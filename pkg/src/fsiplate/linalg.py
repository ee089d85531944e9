"""Sparse direct solves and a small generalized singular value estimator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgumentError, NoConvergenceError, SingularSystemError


@dataclass(frozen=True)
class LinearSolveReport:
    residual: float          # ||A x - b|| / ||b|| (0 when b = 0 and x = 0)
    reused: bool             # factorization had already served a solve
    nnz_matrix: int
    nnz_factor: int

    @property
    def fill_ratio(self):
        return self.nnz_factor / max(self.nnz_matrix, 1)


class Factorization:
    """LU factorization of a square sparse matrix (SuperLU, partial pivoting)."""

    def __init__(self, A, lu):
        self.A = A
        self._lu = lu
        self.solves = 0

    @property
    def shape(self):
        return self.A.shape

    @property
    def nnz_factor(self):
        return int(self._lu.L.nnz + self._lu.U.nnz)

    def __call__(self, b):
        return self._lu.solve(np.asarray(b, dtype=float))


def factorize(A):
    """Factorize ``A``; raises :class:`SingularSystemError` with the offending pivot."""
    A = sp.csc_matrix(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"matrix must be square, got {A.shape}")
    try:
        lu = spla.splu(A, permc_spec="COLAMD", diag_pivot_thresh=1.0)
    except RuntimeError as exc:
        raise SingularSystemError(f"sparse LU failed: {exc}", pivot=_first_zero_pivot(A)) from exc
    d = np.abs(lu.U.diagonal())
    scale = max(float(abs(A).max()), 1e-300) if A.nnz else 1.0
    bad = np.flatnonzero(d <= 1e-14 * scale)
    if bad.size:
        raise SingularSystemError(f"zero pivot at position {int(bad[0])}", pivot=int(bad[0]))
    return Factorization(A.tocsr(), lu)


def _first_zero_pivot(A):
    if A.shape[0] > 4000:
        return None
    _, _, U = sla.lu(A.toarray())
    d = np.abs(np.diag(U))
    bad = np.flatnonzero(d <= 1e-14 * max(d.max(initial=0.0), 1e-300))
    return int(bad[0]) if bad.size else None


def solve(F, b):
    """Solve with a stored factorization; returns ``(x, LinearSolveReport)``."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != F.shape[0]:
        raise InvalidArgumentError(f"right-hand side has length {b.shape[0]}, expected {F.shape[0]}")
    x = F(b)
    nb = np.linalg.norm(b)
    r = np.linalg.norm(F.A @ x - b)
    report = LinearSolveReport(
        residual=float(r / nb) if nb > 0 else float(r),
        reused=F.solves > 0,
        nnz_matrix=int(F.A.nnz),
        nnz_factor=F.nnz_factor,
    )
    F.solves += 1
    return x, report


def _dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def smallest_generalized_singular_value(B, Mx, My, deflate=None, tol=1e-12, maxiter=5000, return_vector=False):
    """Smallest sigma with ``B Mx^-1 B^T y = sigma^2 My y`` (inf-sup constant of ``B``).

    ``B`` maps the primal space (norm ``Mx``) to the dual of the multiplier space
    (norm ``My``). Vectors listed in ``deflate`` (columns) are removed from the
    search, e.g. the constant pressure for a bare divergence block. The smallest
    eigenvalue is found by inverse iteration with My-orthogonal deflation.
    """
    Bd = _dense(B)
    My = _dense(My)
    ny, nx = Bd.shape
    if Mx.shape != (nx, nx) or My.shape != (ny, ny):
        raise InvalidArgumentError("norm matrices do not match the coupling block")
    if sp.issparse(Mx):
        lu = spla.splu(sp.csc_matrix(Mx))
        X = lu.solve(np.ascontiguousarray(Bd.T))
    else:
        X = sla.cho_solve(sla.cho_factor(np.asarray(Mx, dtype=float)), Bd.T)
    S = Bd @ X
    S = 0.5 * (S + S.T)

    Z = None
    if deflate is not None:
        Z = np.asarray(deflate, dtype=float).reshape(ny, -1)
        # My-orthonormal basis of the deflated directions
        G = Z.T @ My @ Z
        Z = Z @ np.linalg.inv(np.linalg.cholesky(G)).T
        shift = max(np.trace(S) / ny, 1.0)
        MZ = My @ Z
        S = S + shift * MZ @ MZ.T

    def project(y):
        return y if Z is None else y - Z @ (Z.T @ (My @ y))

    fac = sla.lu_factor(S)
    rng = np.random.default_rng(0)
    y = project(rng.standard_normal(ny))
    y /= np.sqrt(y @ My @ y)
    lam_old = np.inf
    for it in range(1, maxiter + 1):
        y = project(sla.lu_solve(fac, My @ y))
        y /= np.sqrt(y @ My @ y)
        lam = float(y @ S @ y)
        if abs(lam - lam_old) <= tol * abs(lam):
            sigma = np.sqrt(max(lam, 0.0))
            return (sigma, y) if return_vector else sigma
        lam_old = lam
    raise NoConvergenceError("inverse iteration did not converge", residual=abs(lam - lam_old), iterations=maxiter)
