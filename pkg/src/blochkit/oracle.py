"""Truncated plane-wave Galerkin solver used as ground truth.

The basis is every lattice vector g with ``|g + t| <= cutoff``. The vector
``t`` need not be reduced to a fundamental domain: passing the quasimomentum
``x = gamma + t`` itself puts ``x`` at the basis index of ``g = 0``, which is
how most callers use it.

Eigenvalues near ``|x|^2`` are large while the quantities being checked are
tiny, so the problem is solved in a shifted frame ``H - sigma`` and every
eigenvalue is stored both absolutely and relative to ``sigma``.
"""

from dataclasses import dataclass
from itertools import permutations

import numpy as np
import scipy.sparse

from .errors import (IndexOutOfRange, NoCandidate, NumericalFailure, TooLarge,
                     UntrustedWindow)
from .lattice import enumerate_ball
from .linalg import banded_window_eigvals, eigh_hermitian, window_vectors

BASIS_CAP = 20000
DENSE_LIMIT = 600


@dataclass(frozen=True)
class GalerkinProblem:
    t: np.ndarray
    basis: np.ndarray
    cutoff: float
    diag: np.ndarray
    offdiag: scipy.sparse.csr_matrix
    support_radius: float
    sup_bound: float
    gamma_basis: np.ndarray

    @property
    def size(self):
        return len(self.basis)

    @property
    def matrix(self):
        return (scipy.sparse.diags(self.diag) + self.offdiag).tocsr()

    def shifted(self, sigma):
        return (scipy.sparse.diags(self.diag - sigma) + self.offdiag).tocsr()

    @property
    def trusted_max(self):
        """Largest eigenvalue the truncation does not visibly pollute."""
        r = self.cutoff - self.support_radius
        return (r * r if r > 0 else 0.0) - self.sup_bound

    def index_of(self, g):
        return _lookup(self.basis, np.atleast_2d(np.asarray(g, dtype=int)))[0]


def _encode(pts, lo, span):
    key = np.zeros(len(pts), dtype=np.int64)
    for i in range(pts.shape[1]):
        key = key * span[i] + (pts[:, i] - lo[i])
    return key


def _lookup(basis, pts):
    """Row indices of ``pts`` in ``basis`` (any order), -1 where absent."""
    lo = basis.min(axis=0)
    span = basis.max(axis=0) - lo + 1
    inside = np.all((pts >= lo) & (pts < lo + span), axis=1)
    keys = _encode(basis, lo, span)
    order = np.argsort(keys, kind="stable")
    skeys = keys[order]
    out = np.full(len(pts), -1, dtype=np.int64)
    if not np.any(inside):
        return out
    pk = _encode(pts[inside], lo, span)
    pos = np.minimum(np.searchsorted(skeys, pk), len(skeys) - 1)
    hit = skeys[pos] == pk
    idx = np.flatnonzero(inside)
    out[idx[hit]] = order[pos[hit]]
    return out


def _narrow_order(basis, keys):
    """Lexicographic ordering over the axis priority that gives the narrowest band."""
    d = basis.shape[1]
    if len(keys) == 0 or len(basis) == 0:
        return basis
    best = None
    for perm in permutations(range(d)):
        cols = tuple(basis[:, i] for i in reversed(perm))
        cand = basis[np.lexsort(cols)]
        width = 0
        for g in keys:
            src = _lookup(cand, cand - g)
            hit = np.flatnonzero(src >= 0)
            if len(hit):
                width = max(width, int(np.max(np.abs(hit - src[hit]))))
        if best is None or width < best[0]:
            best = (width, cand)
    return best[1]


def assemble(t, q, cutoff, basis=None, cap=BASIS_CAP):
    """Galerkin matrix ``|g+t|^2 delta + q_{g-g'}`` on the ball of radius ``cutoff``.

    An explicit ``basis`` (integer coordinates) overrides the ball, which
    keeps the basis fixed across nearby ``t``. The ball is ordered to keep
    the matrix band narrow.
    """
    t = np.asarray(t, dtype=float)
    gam = q.gamma
    if basis is None:
        basis = enumerate_ball(gam, cutoff, exclude_zero=False, center=-t, closed=True)
        basis = _narrow_order(basis, q.keys)
    else:
        basis = np.asarray(basis, dtype=int)
    n = len(basis)
    if n > cap:
        raise TooLarge(f"basis of {n} vectors exceeds the cap {cap}")
    if n == 0:
        raise TooLarge("empty basis; cutoff too small")
    cart = basis @ gam.basis + t
    diag = np.einsum("ij,ij->i", cart, cart)
    rows, cols, vals = [], [], []
    for g, c in q.coeffs.items():
        # H[a, b] = q_g whenever basis[a] - basis[b] = g
        src = _lookup(basis, basis - np.asarray(g))
        a = np.flatnonzero(src >= 0)
        rows.append(a)
        cols.append(src[a])
        vals.append(np.full(len(a), c))
    if rows:
        off = scipy.sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n)).tocsr()
    else:
        off = scipy.sparse.csr_matrix((n, n), dtype=complex)
    if q.is_real_coefficients:
        off = off.real.tocsr()
    return GalerkinProblem(t, basis, float(cutoff), diag, off,
                           q.support_radius, q.sup_bound, gam.basis)


def default_cutoff(energy_hi, q):
    """Smallest cutoff whose trusted region covers ``energy_hi``, plus a margin
    of one support radius and 1.5 for the truncation tail."""
    r = np.sqrt(max(energy_hi, 0.0) + q.sup_bound)
    return r + 2.0 * q.support_radius + 1.5


@dataclass(frozen=True)
class OracleSpectrum:
    """Eigenpairs in a window. ``rel`` holds ``eigenvalues - shift`` to full precision."""

    eigenvalues: np.ndarray
    rel: np.ndarray
    shift: float
    vectors: np.ndarray
    basis: np.ndarray
    t: np.ndarray
    gamma_basis: np.ndarray
    window: tuple
    trusted_max: float

    def __len__(self):
        return len(self.eigenvalues)

    def coefficients(self, N):
        """Coefficient map g -> b(N, g) of eigenvector N."""
        return {tuple(int(c) for c in g): complex(b) for g, b in zip(self.basis, self.vectors[:, N])}

    def index_of(self, g):
        i = int(_lookup(self.basis, np.atleast_2d(np.asarray(g, dtype=int)))[0])
        if i < 0:
            raise IndexOutOfRange(f"{tuple(g)} is not in the oracle basis")
        return i

    def gradient(self, N):
        """Sum over g of 2 (g + t) |b(N, g)|^2, the derivative of Lambda_N in t."""
        w = np.abs(self.vectors[:, N]) ** 2
        cart = self.basis @ self.gamma_basis + self.t
        return 2.0 * (w @ cart)

    def weight(self, N, g):
        return float(abs(self.vectors[self.index_of(g), N]) ** 2)


def eigen(problem, window, shift=None, vectors=True, check=True):
    """All eigenpairs with eigenvalue in ``window``.

    Raises UntrustedWindow when the window reaches past the region the
    truncation is reliable in.
    """
    lo, hi = float(window[0]), float(window[1])
    if hi > problem.trusted_max:
        raise UntrustedWindow(
            f"window top {hi:.6g} exceeds the trusted maximum {problem.trusted_max:.6g}")
    sigma = 0.5 * (lo + hi) if shift is None else float(shift)
    Hs = problem.shifted(sigma)
    n = problem.size
    if n <= DENSE_LIMIT:
        w, U = eigh_hermitian(Hs.toarray(), window=(lo - sigma, hi - sigma))
    else:
        w = banded_window_eigvals(Hs, (lo - sigma, hi - sigma))
        if not vectors:
            w = np.sort(w)
            return OracleSpectrum(w + sigma, w, sigma, np.zeros((n, 0)), problem.basis,
                                  problem.t, problem.gamma_basis, (lo, hi), problem.trusted_max)
        w, U = window_vectors(Hs, w)
    if len(w) and vectors:
        HU = Hs @ U
        num = np.real(np.einsum("ij,ij->j", U.conj(), HU))
        den = np.real(np.einsum("ij,ij->j", U.conj(), U))
        w = num / den
        U = U / np.sqrt(den)
        order = np.argsort(w, kind="stable")
        w, U = w[order], U[:, order]
        if check:
            res = np.linalg.norm(Hs @ U - U * w, axis=0)
            bad = res > 1e-8 * (1.0 + np.abs(w + sigma))
            if np.any(bad):
                raise NumericalFailure(f"eigen residual {res.max():.3g} too large")
    return OracleSpectrum(w + sigma, w, sigma, U if vectors else np.zeros((n, 0)),
                          problem.basis, problem.t, problem.gamma_basis, (lo, hi),
                          problem.trusted_max)


def solve(t, q, window, cutoff=None, shift=None, basis=None, vectors=True):
    """assemble + eigen with a default cutoff."""
    if cutoff is None:
        cutoff = default_cutoff(window[1], q)
    return eigen(assemble(t, q, cutoff, basis=basis), window, shift=shift, vectors=vectors)


@dataclass(frozen=True)
class Match:
    N: int
    value: float
    error: float
    gap_to_next: float
    ambiguous: bool = False
    candidates: tuple = ()


def match(approx, spectrum, tol, relative=False):
    """Nearest eigenvalue to ``approx`` within ``tol``.

    ``relative=True`` means ``approx`` is given relative to ``spectrum.shift``.
    ``error`` is eigenvalue minus approx; ``gap_to_next`` is the distance
    from ``approx`` to the second-nearest eigenvalue.
    """
    a = approx if relative else approx - spectrum.shift
    if len(spectrum) == 0:
        raise NoCandidate(f"no eigenvalue within {tol:g} of {approx:.12g}")
    dist = spectrum.rel - a
    order = np.argsort(np.abs(dist), kind="stable")
    N = int(order[0])
    if abs(dist[N]) > tol:
        raise NoCandidate(f"no eigenvalue within {tol:g} of {approx:.12g}")
    gap = float(abs(dist[order[1]])) if len(order) > 1 else np.inf
    within = tuple(int(i) for i in order if abs(dist[i]) <= tol)
    return Match(N, float(spectrum.eigenvalues[N]), float(dist[N]), gap,
                 ambiguous=len(within) > 1, candidates=within)


def b_coefficient(spectrum, N, g):
    return complex(spectrum.vectors[spectrum.index_of(g), N])
