"""Small dense linear-algebra helpers shared by the solvers.

Complex Hermitian problems are solved through the real symmetric matrix
``[[A, -B], [B, A]]`` of ``H = A + iB``; each eigenvalue of ``H`` appears
twice there and the pairs are folded back into complex eigenvectors.
Purely real problems skip the embedding.
"""

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import NumericalFailure

_IMAG_ZERO = 0.0


def is_real(H):
    if scipy.sparse.issparse(H):
        return (not np.iscomplexobj(H.data)) or not np.any(H.data.imag != _IMAG_ZERO)
    return (not np.iscomplexobj(H)) or not np.any(np.asarray(H).imag != _IMAG_ZERO)


def embed_real(H):
    """Real symmetric embedding of a dense Hermitian matrix (size 2n)."""
    A = np.real(H)
    B = np.imag(H)
    return np.block([[A, -B], [B, A]])


def _cluster_bounds(w, scale):
    tol = 1e-8 * max(1.0, scale)
    bounds = [0]
    for i in range(1, len(w)):
        if w[i] - w[i - 1] > tol:
            bounds.append(i)
    bounds.append(len(w))
    return bounds


def fold_embedded(w, U, n):
    """Fold eigenpairs of the embedded matrix back to the complex problem.

    ``U`` has shape (2n, m) with the real parts in the first ``n`` rows
    (block layout) and imaginary parts in the last ``n`` rows.
    """
    if len(w) == 0:
        return w, np.zeros((n, 0), dtype=complex)
    Z = U[:n] + 1j * U[n:]
    scale = float(np.max(np.abs(w)))
    out_w, out_v = [], []
    bounds = _cluster_bounds(w, scale)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        size = hi - lo
        if size % 2:
            raise NumericalFailure(
                f"embedded eigenvalue cluster of odd size {size} near {w[lo]:.6g}")
        m = size // 2
        left, _, _ = np.linalg.svd(Z[:, lo:hi], full_matrices=False)
        for c in range(m):
            out_w.append(float(np.mean(w[lo:hi])))
            out_v.append(left[:, c])
    return np.array(out_w), np.array(out_v).T


def eigh_hermitian(H, window=None):
    """Eigenpairs of a dense Hermitian matrix, optionally restricted to a window.

    ``window`` is a pair (lo, hi); eigenvalues in (lo, hi] are returned.
    """
    H = np.asarray(H)
    n = H.shape[0]
    kw = {}
    if window is not None:
        kw = {"subset_by_value": (float(window[0]), float(window[1]))}
    try:
        if is_real(H):
            w, U = scipy.linalg.eigh(np.real(H), **kw)
            return w, U.astype(complex)
        w, U = scipy.linalg.eigh(embed_real(H), **kw)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"eigensolver failed: {exc}") from exc
    return fold_embedded(w, U, n)


def bandwidth(M):
    M = scipy.sparse.coo_matrix(M)
    if M.nnz == 0:
        return 0
    return int(np.max(np.abs(M.row - M.col)))


def _upper_band(M, b):
    M = scipy.sparse.coo_matrix(M)
    n = M.shape[0]
    ab = np.zeros((b + 1, n))
    keep = M.col >= M.row
    r, c, v = M.row[keep], M.col[keep], M.data[keep]
    ab[b + r - c, c] = v
    return ab


def _interleave(M):
    """Real symmetric embedding with Re/Im parts of each unknown adjacent."""
    A = M.real.tocoo()
    B = M.imag.tocoo()
    rows = np.concatenate([2 * A.row, 2 * A.row + 1, 2 * B.row, 2 * B.row + 1])
    cols = np.concatenate([2 * A.col, 2 * A.col + 1, 2 * B.col + 1, 2 * B.col])
    vals = np.concatenate([A.data, A.data, -B.data, B.data])
    n = M.shape[0]
    return scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(2 * n, 2 * n)).tocsr()


def banded_window_eigvals(M, window):
    """Eigenvalues in (lo, hi] of a sparse Hermitian matrix with a narrow band.

    Complex input goes through the interleaved real embedding, whose
    eigenvalues come in exact pairs; one of each pair is kept.
    """
    M = scipy.sparse.csr_matrix(M)
    lo, hi = float(window[0]), float(window[1])
    if is_real(M):
        R = M.real
        pad = 0.0
    else:
        R = _interleave(M)
        pad = 1e-9 * max(1.0, abs(lo), abs(hi))
    b = bandwidth(R)
    ab = _upper_band(R, b)
    try:
        w = scipy.linalg.eig_banded(ab, lower=False, select="v", eigvals_only=True,
                                    select_range=(lo - pad, hi + pad))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"banded eigensolver failed: {exc}") from exc
    w = np.sort(w)
    if pad:
        if len(w) % 2:
            raise NumericalFailure("embedded spectrum did not split into pairs")
        first, second = w[0::2], w[1::2]
        tol = 1e-8 * max(1.0, float(np.max(np.abs(w), initial=0.0)))
        if np.any(second - first > tol):
            raise NumericalFailure("embedded eigenvalues are not paired")
        w = 0.5 * (first + second)
        w = w[(w > lo) & (w <= hi)]
    return w


def _general_band(M, kl):
    M = scipy.sparse.coo_matrix(M)
    n = M.shape[0]
    ab = np.zeros((2 * kl + 1, n), dtype=M.dtype)
    ab[kl + M.row - M.col, M.col] = M.data
    return ab


def window_vectors(M, w, iterations=2, seed=0):
    """Eigenvectors for eigenvalues ``w`` of a sparse Hermitian band matrix.

    Shifted inverse iteration with banded LU from random starts (one per
    eigenvalue, so degenerate clusters are spanned), followed by a
    Rayleigh-Ritz step on the collected subspace. Returns (w, U).
    """
    M = scipy.sparse.csr_matrix(M)
    n = M.shape[0]
    m = len(w)
    if m == 0:
        return np.zeros(0), np.zeros((n, 0), dtype=complex)
    real = is_real(M)
    dtype = float if real else complex
    kl = bandwidth(M)
    ab = _general_band(M.real if real else M, kl)
    rng = np.random.default_rng(seed)
    scale = max(1.0, float(np.max(np.abs(ab))))
    bounds = _cluster_bounds(np.asarray(w), 1e2 * max(1.0, float(np.max(np.abs(w)))))
    blocks = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        mu = float(np.mean(w[lo:hi])) + 1e-11 * scale
        shifted = ab.copy()
        shifted[kl] -= mu
        X = rng.standard_normal((n, hi - lo))
        if not real:
            X = X + 1j * rng.standard_normal((n, hi - lo))
        for _ in range(iterations):
            X = scipy.linalg.solve_banded((kl, kl), shifted, X, check_finite=False)
            X, _ = np.linalg.qr(X)
        blocks.append(X)
    V, _ = np.linalg.qr(np.hstack(blocks).astype(dtype))
    T = V.conj().T @ (M @ V)
    T = 0.5 * (T + T.conj().T)
    theta, Y = eigh_hermitian(T)
    U = V @ Y
    return theta, U


def independent_rank(vectors, rtol=1e-10):
    """Rank of a set of vectors by pivoted Gaussian elimination.

    A pivot counts when it exceeds ``rtol`` times the largest entry.
    """
    A = np.array(vectors, dtype=float)
    if A.size == 0:
        return 0
    A = A.copy()
    scale = np.max(np.abs(A))
    if scale == 0:
        return 0
    rank = 0
    rows, cols = A.shape
    for c in range(cols):
        if rank == rows:
            break
        piv = rank + int(np.argmax(np.abs(A[rank:, c])))
        if abs(A[piv, c]) <= rtol * scale:
            continue
        A[[rank, piv]] = A[[piv, rank]]
        A[rank + 1:] -= np.outer(A[rank + 1:, c] / A[rank, c], A[rank])
        rank += 1
    return rank
