"""Finite resonance matrices on the sites ``x + b + a`` and their spectra."""

from dataclasses import dataclass

import numpy as np

from .errors import InconsistentSites, NeedDirections, NotLatticePoint, TooLarge
from .lattice import enumerate_ball
from .linalg import eigh_hermitian, independent_rank


def _combinations_in_ball(D, radius):
    """Integer vectors n with |n @ D| < radius (D has independent rows)."""
    k = D.shape[0]
    if radius <= 0:
        return np.zeros((0, k), dtype=int)
    smin = np.linalg.svd(D, compute_uv=False).min()
    N = int(np.ceil(radius / smin))
    axes = [np.arange(-N, N + 1)] * k
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
    return grid[np.linalg.norm(grid @ D, axis=1) < radius]


def build_sites(x, directions, params, gamma, b_vectors=None, cap=None):
    """Integer offsets h = b + a of the block sites, nearest to x first.

    ``b`` runs over integer combinations of ``directions`` shorter than
    the b-radius of ``params`` and ``a`` over the lattice vectors shorter
    than the a-radius. An explicit ``b_vectors`` list replaces the
    b-enumeration. Returns an (n, d) int array whose row 0 is the zero
    offset, i.e. the site x itself.
    """
    dirs = np.array(directions, dtype=int).reshape(-1, gamma.dim)
    if len(dirs) == 0:
        raise NeedDirections("a resonance block needs at least one direction")
    Dc = gamma.cart(dirs)
    if independent_rank(Dc) < len(dirs):
        raise NeedDirections("resonance directions must be linearly independent")
    k = len(dirs)
    if b_vectors is None:
        bs = _combinations_in_ball(Dc, params.r_block_b(k)) @ dirs
    else:
        bs = np.array(b_vectors, dtype=int).reshape(-1, gamma.dim)
    a_pts = enumerate_ball(gamma, params.r_block_a, exclude_zero=False)
    if len(a_pts) == 0:
        a_pts = np.zeros((1, gamma.dim), dtype=int)
    if len(bs) == 0:
        bs = np.zeros((1, gamma.dim), dtype=int)
    h = (bs[:, None, :] + a_pts[None, :, :]).reshape(-1, gamma.dim)
    h = np.unique(np.vstack([np.zeros((1, gamma.dim), dtype=int), h]), axis=0)
    norms = np.round(np.linalg.norm(gamma.cart(h), axis=1), 12)
    keys = tuple(h[:, i] for i in range(gamma.dim - 1, -1, -1)) + (norms,)
    h = h[np.lexsort(keys)]
    cap = params.site_cap if cap is None else cap
    if len(h) > cap:
        raise TooLarge(f"{len(h)} block sites exceed the cap {cap}")
    return h


def assemble_C(sites, q, shift=0.0):
    """Matrix ``c_ii = |h_i + t|^2 - shift``, ``c_ij = q_{h_i - h_j}`` on Cartesian sites."""
    sites = np.asarray(sites, dtype=float)
    gamma = q.gamma
    n = len(sites)
    try:
        coords = np.array([gamma.integer_coords(s - sites[0]) for s in sites], dtype=int)
    except NotLatticePoint as exc:
        raise InconsistentSites(f"site differences must lie in the lattice: {exc}") from exc
    diff = coords[:, None, :] - coords[None, :, :]
    C = np.zeros((n, n), dtype=complex)
    for g, c in q.coeffs.items():
        C[np.all(diff == np.array(g), axis=2)] = c
    C[np.diag_indices(n)] = np.einsum("ij,ij->i", sites, sites) - shift
    return C


@dataclass(frozen=True)
class ResonanceBlock:
    """Block at x; ``rel`` are the eigenvalues minus |x|^2."""

    x: np.ndarray
    directions: tuple
    offsets: np.ndarray
    sites: np.ndarray
    matrix: np.ndarray
    eigenvalues: np.ndarray
    rel: np.ndarray
    vectors: np.ndarray
    self_index: int = 0

    @property
    def size(self):
        return len(self.offsets)

    def to_dict(self):
        return {"x": self.x.tolist(), "directions": [list(d) for d in self.directions],
                "sites": self.sites.tolist(), "eigenvalues": self.eigenvalues.tolist(),
                "self_index": self.self_index}


def res_eigenvalues(matrix):
    """Ascending eigenvalues and eigenvectors of a Hermitian block."""
    return eigh_hermitian(matrix)


def resonance_block(x, directions, q, params, b_vectors=None, offsets=None):
    x = np.asarray(x, dtype=float)
    gamma = q.gamma
    if offsets is None:
        offsets = build_sites(x, directions, params, gamma, b_vectors=b_vectors)
    sites = gamma.cart(offsets) + x
    e0 = float(x @ x)
    C = assemble_C(sites, q, shift=e0)
    w, U = res_eigenvalues(C)
    C_abs = C.copy()
    C_abs[np.diag_indices(len(C))] += e0
    return ResonanceBlock(x, tuple(tuple(int(c) for c in d) for d in directions), offsets,
                          sites, C_abs, w + e0, w, U, 0)


def r_lipschitz_probe(directions, params, x, xp, q, b_vectors=None):
    """Compare r_i = lambda_i - |.|^2 at x and x' over one fixed set of offsets.

    Returns (lhs, rhs, pass) with lhs = max_i |r_i(x) - r_i(x')| and
    rhs = 2 rho^{alpha_d / 2} |x - x'|.
    """
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    offs = build_sites(x, directions, params, q.gamma, b_vectors=b_vectors)
    offs_p = build_sites(xp, directions, params, q.gamma, b_vectors=b_vectors)
    if offs.shape != offs_p.shape or not np.array_equal(offs, offs_p):
        raise InconsistentSites("the two points do not share block offsets")
    r1 = resonance_block(x, directions, q, params, offsets=offs).rel
    r2 = resonance_block(xp, directions, q, params, offsets=offs).rel
    lhs = float(np.max(np.abs(r1 - r2))) if len(r1) else 0.0
    rhs = 2.0 * params.rho ** (0.5 * params.alpha_k(params.d)) * float(np.linalg.norm(x - xp))
    return lhs, rhs, bool(lhs <= rhs)


def weyl_bound(offsets, gamma, x, xp):
    """Exact bound 2 max|h| |x - x'| on the shift of any r_i between x and x'."""
    hmax = float(np.max(np.linalg.norm(gamma.cart(offsets), axis=1)))
    return 2.0 * hmax * float(np.linalg.norm(np.asarray(x) - np.asarray(xp)))
