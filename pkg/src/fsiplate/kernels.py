"""Element-level kernels.

Each public kernel dispatches to an ``@njit`` loop (``_*_nb``) or a vectorised
numpy expression (``_*_np``) depending on :data:`fsiplate._accel.USE_NUMBA`.
Both paths take the same arguments and must agree to rounding.
"""
import numpy as np

from . import _accel
from ._accel import njit


def affine_maps(vertices, cells):
    """Per-cell inverse Jacobian, signed determinant and origin of the affine map."""
    p = vertices[cells]
    J = np.transpose(p[:, 1:] - p[:, :1], (0, 2, 1))
    return np.linalg.inv(J), np.linalg.det(J), p[:, 0].copy()


def reference_stiffness_tensor(grads, weights):
    # R[d, e, i, j] = sum_q w_q dphi_i/dX_d dphi_j/dX_e
    return np.einsum("q,qid,qje->deij", weights, grads, grads)


def reference_divergence_tensor(test_vals, trial_grads, weights):
    # D[i, j, d] = sum_q w_q psi_i dphi_j/dX_d
    return np.einsum("q,qi,qjd->ijd", weights, test_vals, trial_grads)


# -- stiffness -----------------------------------------------------------------

def _stiffness_np(invJ, absdet, R):
    A = np.einsum("cdk,cek->cde", invJ, invJ)
    return absdet[:, None, None] * np.einsum("cde,deij->cij", A, R)


@njit
def _stiffness_nb(invJ, absdet, R):
    nc = invJ.shape[0]
    d = invJ.shape[1]
    n = R.shape[2]
    out = np.zeros((nc, n, n))
    A = np.empty((d, d))
    for c in range(nc):
        for a in range(d):
            for b in range(d):
                s = 0.0
                for k in range(d):
                    s += invJ[c, a, k] * invJ[c, b, k]
                A[a, b] = s
        for i in range(n):
            for j in range(i, n):
                s = 0.0
                for a in range(d):
                    for b in range(d):
                        s += A[a, b] * R[a, b, i, j]
                s *= absdet[c]
                out[c, i, j] = s
                out[c, j, i] = s
    return out


def local_stiffness(invJ, absdet, R):
    if _accel.USE_NUMBA:
        return _stiffness_nb(np.ascontiguousarray(invJ), np.ascontiguousarray(absdet), np.ascontiguousarray(R))
    return _stiffness_np(invJ, absdet, R)


# -- divergence ----------------------------------------------------------------

def _divergence_np(invJ, absdet, D):
    # B[c, i, comp, j] = |det| sum_d invJ[d, comp] D[i, j, d]
    return absdet[:, None, None, None] * np.einsum("cdk,ijd->cikj", invJ, D)


@njit
def _divergence_nb(invJ, absdet, D):
    nc = invJ.shape[0]
    d = invJ.shape[1]
    ni, nj = D.shape[0], D.shape[1]
    out = np.zeros((nc, ni, d, nj))
    for c in range(nc):
        for i in range(ni):
            for k in range(d):
                for j in range(nj):
                    s = 0.0
                    for a in range(d):
                        s += invJ[c, a, k] * D[i, j, a]
                    out[c, i, k, j] = absdet[c] * s
    return out


def local_divergence(invJ, absdet, D):
    if _accel.USE_NUMBA:
        return _divergence_nb(np.ascontiguousarray(invJ), np.ascontiguousarray(absdet), np.ascontiguousarray(D))
    return _divergence_np(invJ, absdet, D)


# -- gradients of a discrete field at quadrature points ------------------------

def _field_gradients_np(invJ, local_coeffs, ref_grads):
    # local_coeffs (C, ncomp, nloc); ref_grads (Q, nloc, d) -> (C, Q, ncomp, d)
    gref = np.einsum("cmi,qid->cqmd", local_coeffs, ref_grads)
    return np.einsum("cqmd,cdk->cqmk", gref, invJ)


@njit
def _field_gradients_nb(invJ, local_coeffs, ref_grads):
    nc, ncomp, nloc = local_coeffs.shape
    nq, _, d = ref_grads.shape
    out = np.zeros((nc, nq, ncomp, d))
    gref = np.empty(d)
    for c in range(nc):
        for q in range(nq):
            for m in range(ncomp):
                for a in range(d):
                    s = 0.0
                    for i in range(nloc):
                        s += local_coeffs[c, m, i] * ref_grads[q, i, a]
                    gref[a] = s
                for k in range(d):
                    s = 0.0
                    for a in range(d):
                        s += gref[a] * invJ[c, a, k]
                    out[c, q, m, k] = s
    return out


def field_gradients(invJ, local_coeffs, ref_grads):
    if _accel.USE_NUMBA:
        return _field_gradients_nb(
            np.ascontiguousarray(invJ), np.ascontiguousarray(local_coeffs), np.ascontiguousarray(ref_grads)
        )
    return _field_gradients_np(invJ, local_coeffs, ref_grads)


def scatter_triplets(row_map, col_map, local):
    """COO triplets for local blocks ``local[c, i, j]`` placed at (row_map[c, i], col_map[c, j])."""
    nc, ni = row_map.shape
    nj = col_map.shape[1]
    rows = np.broadcast_to(row_map[:, :, None], (nc, ni, nj)).ravel()
    cols = np.broadcast_to(col_map[:, None, :], (nc, ni, nj)).ravel()
    return rows, cols, np.asarray(local).ravel()
