"""Direct and dual lattices, ball enumeration and the decompositions along a
primitive dual direction.

Lattice points are handled as integer coordinate tuples in the generator
basis; Cartesian images are computed on demand.
"""

from dataclasses import dataclass, field
from itertools import product
from math import gcd

import numpy as np

from .errors import InvalidLattice, NotLatticePoint, NotPrimitive

TWO_PI = 2.0 * np.pi
LATTICE_TOL = 1e-8


@dataclass(frozen=True)
class Lattice:
    """The period lattice: rows of ``basis`` are the generators."""

    basis: np.ndarray

    def __post_init__(self):
        B = np.array(self.basis, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] < 2:
            raise InvalidLattice(f"basis must be a d x d array with d >= 2, got {B.shape}")
        det = np.linalg.det(B)
        if not np.isfinite(det) or abs(det) < 1e-12 * max(1.0, np.abs(B).max()) ** B.shape[0]:
            raise InvalidLattice(f"singular lattice basis rows {B.tolist()}")
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def cell_volume(self):
        return float(abs(np.linalg.det(self.basis)))

    def cart(self, coords):
        return np.asarray(coords, dtype=float) @ self.basis

    def coords(self, x):
        return np.asarray(x, dtype=float) @ np.linalg.inv(self.basis)


@dataclass(frozen=True)
class DualLattice(Lattice):
    """The dual lattice; ``(gamma_i, omega_j) = 2 pi delta_ij`` for the canonical basis."""

    def integer_coords(self, x, tol=LATTICE_TOL):
        c = self.coords(x)
        r = np.rint(c)
        if np.max(np.abs(c - r), initial=0.0) > tol:
            raise NotLatticePoint(f"{np.asarray(x).tolist()} is not a lattice point")
        return tuple(int(v) for v in r)

    def norm(self, coords):
        return float(np.linalg.norm(self.cart(coords)))


def square_lattice(d=2):
    """Omega = 2 pi Z^d, so that Gamma = Z^d."""
    return Lattice(TWO_PI * np.eye(d))


def dual(lat):
    """Canonical dual: rows g_i with (g_i, w_j) = 2 pi delta_ij."""
    if isinstance(lat, DualLattice):
        return Lattice(TWO_PI * np.linalg.inv(lat.basis).T)
    return DualLattice(TWO_PI * np.linalg.inv(lat.basis).T)


def is_in_dual(lat, gamma_vec, tol=1e-9):
    """Check (gamma, omega_j) in 2 pi Z for every generator of ``lat``."""
    ip = lat.basis @ np.asarray(gamma_vec, dtype=float) / TWO_PI
    return bool(np.all(np.abs(ip - np.rint(ip)) < tol))


def _box_bounds(lat, radius, center):
    inv = np.linalg.inv(lat.basis)
    c = np.asarray(center, dtype=float) @ inv
    spread = radius * np.linalg.norm(inv, axis=0)
    lo = np.floor(c - spread).astype(int)
    hi = np.ceil(c + spread).astype(int)
    return lo, hi


def enumerate_ball(lat, radius, exclude_zero=True, center=None, closed=False):
    """Integer coordinates of lattice points inside a ball.

    Returns the points with ``|g - center| < radius`` (``<=`` when
    ``closed``) in lexicographic order of their integer coordinates. The
    zero vector is dropped when ``exclude_zero``. Returns an (m, d) int array.
    """
    d = lat.dim
    if center is None:
        center = np.zeros(d)
    if radius <= 0:
        return np.zeros((0, d), dtype=int)
    lo, hi = _box_bounds(lat, radius, center)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    dist = np.linalg.norm(grid @ lat.basis - np.asarray(center, dtype=float), axis=1)
    keep = dist <= radius * (1 + 1e-14) if closed else dist < radius * (1 - 1e-14)
    pts = grid[keep]
    if exclude_zero:
        pts = pts[np.any(pts != 0, axis=1)]
    return pts


def enumerate_shell(lat, t, r_lo, r_hi):
    """Integer coordinates of gamma with r_lo <= |gamma + t| <= r_hi."""
    t = np.asarray(t, dtype=float)
    pts = enumerate_ball(lat, r_hi, exclude_zero=False, center=-t, closed=True)
    if len(pts) == 0:
        return pts
    r = np.linalg.norm(pts @ lat.basis + t, axis=1)
    return pts[r >= r_lo]


# ---------------------------------------------------------------- integer algebra

def _column_reduce(n):
    """Unimodular W with ``n @ W = (g, 0, ..., 0)``, g = gcd(n) >= 0."""
    n = [int(v) for v in n]
    d = len(n)
    W = np.eye(d, dtype=object)
    v = list(n)
    while sum(1 for a in v if a != 0) > 1 or (v[0] == 0 and any(v)):
        nz = [i for i in range(d) if v[i] != 0]
        p = min(nz, key=lambda i: abs(v[i]))
        for i in nz:
            if i == p:
                continue
            f = v[i] // v[p]
            v[i] -= f * v[p]
            W[:, i] -= f * W[:, p]
        if p != 0 and sum(1 for a in v if a != 0) == 1:
            v[0], v[p] = v[p], v[0]
            W[:, [0, p]] = W[:, [p, 0]]
    if v[0] < 0:
        v[0] = -v[0]
        W[:, 0] = -W[:, 0]
    return W, v[0]


def is_primitive(n):
    g = 0
    for v in n:
        g = gcd(g, int(v))
    return g == 1


def unimodular_completion(n):
    """Return (W, Winv): integer unimodular matrices, ``n @ W = e_1`` and the
    first row of ``Winv`` equal to ``n``."""
    if not is_primitive(n):
        raise NotPrimitive(f"{tuple(int(v) for v in n)} is not primitive")
    W, g = _column_reduce(n)
    Winv = np.array(np.round(np.linalg.inv(W.astype(float))), dtype=object)
    assert g == 1
    return W, Winv


@dataclass(frozen=True)
class DeltaFrame:
    """Machinery attached to a primitive dual vector delta.

    ``gamma_delta`` rows generate the projection of Gamma onto the
    hyperplane orthogonal to delta; ``omega_delta`` rows generate the
    sublattice of Omega orthogonal to delta.
    """

    delta: np.ndarray
    delta_coords: tuple
    delta_star: np.ndarray
    gamma_delta: np.ndarray
    omega_delta: np.ndarray
    complement_coords: tuple
    v_shift: np.ndarray
    f_delta_diameter: float
    gamma: DualLattice = field(repr=False)

    @property
    def delta_norm2(self):
        return float(self.delta @ self.delta)

    def project(self, x):
        x = np.asarray(x, dtype=float)
        return x - (x @ self.delta) / self.delta_norm2 * self.delta

    def gd_coords(self, y):
        """Real coordinates of a vector of the delta-hyperplane in the gamma_delta basis."""
        G = self.gamma_delta
        sol, *_ = np.linalg.lstsq(G.T, np.asarray(y, dtype=float), rcond=None)
        return sol


def delta_frame(gamma, delta):
    """Build the frame of a primitive dual vector (integer coords or Cartesian)."""
    if not isinstance(gamma, DualLattice):
        raise InvalidLattice("delta_frame expects the dual lattice")
    arr = np.asarray(delta)
    if np.issubdtype(arr.dtype, np.integer):
        n = tuple(int(v) for v in arr)
    else:
        n = gamma.integer_coords(arr)
    if not any(n):
        raise NotPrimitive("delta must be nonzero")
    W, Winv = unimodular_completion(n)
    d = gamma.dim
    dvec = gamma.cart(n)
    omega = dual(gamma)
    m = np.array([int(v) for v in W[:, 0]])
    delta_star = m @ omega.basis
    comp = np.array(Winv[1:], dtype=float)
    comp_cart = comp @ gamma.basis
    dn2 = float(dvec @ dvec)
    gd = comp_cart - np.outer(comp_cart @ dvec / dn2, dvec)
    od = np.array(W[:, 1:].T, dtype=float) @ omega.basis
    # v-shift of each gamma_delta generator: (g_perp, delta*)/(2 pi) = -(g, delta)/|delta|^2
    v_shift = -(comp_cart @ dvec) / dn2
    verts = [np.asarray(s, dtype=float) @ gd for s in product((0, 1), repeat=d - 1)]
    diam = max(np.linalg.norm(a - b) for a in verts for b in verts)
    for arr_ in (dvec, delta_star, gd, od):
        arr_.setflags(write=False)
    return DeltaFrame(dvec, n, delta_star, gd, od,
                      tuple(tuple(int(v) for v in row) for row in Winv[1:]),
                      v_shift, float(diam), gamma)


@dataclass(frozen=True)
class GammaDeltaDecomposition:
    beta: np.ndarray
    tau: np.ndarray
    j: int
    v: float
    beta_coords: tuple = ()

    def reassemble(self, frame):
        return self.beta + self.tau + (self.j + self.v) * frame.delta


def decompose_t(t, frame):
    """``t = a + tau + s delta`` with a in Gamma_delta, tau in the basis cell of Gamma_delta."""
    t = np.asarray(t, dtype=float)
    s = float(t @ frame.delta) / frame.delta_norm2
    perp = t - s * frame.delta
    c = frame.gd_coords(perp)
    fl = np.floor(c + 1e-13)
    a = fl @ frame.gamma_delta
    tau = (c - fl) @ frame.gamma_delta
    return a, tau, s


def _frac(z, tol=1e-12):
    j = np.floor(z + tol)
    v = z - j
    if v < 0:
        v = 0.0
    return int(j), float(v)


def gamma_delta_decompose(x, frame, t):
    """``x = beta + tau + (j + v) delta`` for x = gamma + t."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    g = frame.gamma.integer_coords(x - t)
    gvec = frame.gamma.cart(g)
    a, tau, s = decompose_t(t, frame)
    b = frame.project(gvec)
    beta = a + b
    z = float(x @ frame.delta) / frame.delta_norm2
    j, v = _frac(z)
    bc = np.rint(frame.gd_coords(beta)).astype(int)
    return GammaDeltaDecomposition(beta=beta, tau=tau, j=j, v=v,
                                   beta_coords=tuple(int(c) for c in bc))


def v_of_beta(beta, frame, t):
    """Twist parameter ``frac(s - (beta - a, delta*)/2pi)`` of the line through beta."""
    a, _, s = decompose_t(t, frame)
    z = s - float((np.asarray(beta) - a) @ frame.delta_star) / TWO_PI
    return _frac(z)[1]


def lattice_decompose(gamma_vec, frame):
    """``gamma = b + (n - (b, delta*)/2pi) delta`` with b in Gamma_delta, n integer.

    Returns (b, n_real); n_real is an integer up to rounding.
    """
    gvec = np.asarray(gamma_vec, dtype=float)
    b = frame.project(gvec)
    n = float(gvec @ frame.delta) / frame.delta_norm2 + float(b @ frame.delta_star) / TWO_PI
    return b, n
