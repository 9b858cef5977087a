"""Finite Fourier potentials q(x) = sum_g q_g exp(i(g, x)) on the dual lattice."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidPotential
from .lattice import DualLattice

HERMITIAN_TOL = 1e-12


def _key(g):
    return tuple(int(v) for v in g)


def _neg(g):
    return tuple(-v for v in g)


@dataclass(frozen=True)
class FourierPotential:
    """Sparse coefficient map keyed by integer coordinates in the dual basis.

    The stored numbers are the expansion coefficients that couple plane
    waves, ``q(x) = sum q_g e^{i(g,x)}``. Use :meth:`from_inner_products`
    for inner products over a cell of volume other than one.
    """

    gamma: DualLattice
    coeffs: dict
    smoothness: int = 0
    _vectors: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        clean = {}
        for g, c in self.coeffs.items():
            k = _key(g)
            if len(k) != self.gamma.dim:
                raise InvalidPotential(f"coefficient key {k} has wrong dimension")
            c = complex(c)
            if c != 0:
                clean[k] = c
        if _key([0] * self.gamma.dim) in clean:
            raise InvalidPotential("q_0 must vanish (zero-mean potential)")
        for k, c in clean.items():
            partner = clean.get(_neg(k))
            if partner is None or abs(partner - c.conjugate()) > HERMITIAN_TOL * max(1.0, abs(c)):
                raise InvalidPotential(
                    f"coefficients at {k} and {_neg(k)} are not complex conjugates")
        object.__setattr__(self, "coeffs", dict(sorted(clean.items())))
        keys = np.array(list(self.coeffs), dtype=int).reshape(-1, self.gamma.dim)
        object.__setattr__(self, "_vectors", keys)

    # -- construction helpers
    @classmethod
    def hermitian(cls, gamma, entries, smoothness=0, on_conflict="raise"):
        """Build from a partial map, completing the conjugate partners.

        ``on_conflict='raise'`` rejects pairs given inconsistently; returns
        the potential and the list of keys that were auto-completed.
        """
        out = {}
        added = []
        for g, c in entries.items():
            k = _key(g)
            c = complex(c)
            if k in out and abs(out[k] - c) > HERMITIAN_TOL * max(1.0, abs(c)):
                raise InvalidPotential(f"duplicate inconsistent coefficient at {k}")
            out[k] = c
        for k, c in list(out.items()):
            nk = _neg(k)
            if nk not in out:
                out[nk] = c.conjugate()
                added.append(nk)
            elif abs(out[nk] - c.conjugate()) > HERMITIAN_TOL * max(1.0, abs(c)):
                if on_conflict == "raise":
                    raise InvalidPotential(
                        f"coefficients at {k} and {nk} are not complex conjugates")
        return cls(gamma, out, smoothness), added

    @classmethod
    def from_inner_products(cls, gamma, products, cell_volume, smoothness=0):
        return cls(gamma, {k: complex(v) / cell_volume for k, v in products.items()},
                   smoothness)

    @classmethod
    def zero(cls, gamma):
        return cls(gamma, {}, 0)

    # -- queries
    def __getitem__(self, g):
        return self.coeffs.get(_key(g), 0.0)

    def get(self, g, default=0.0):
        return self.coeffs.get(_key(g), default)

    def __len__(self):
        return len(self.coeffs)

    @property
    def is_zero(self):
        return len(self.coeffs) == 0

    @property
    def keys(self):
        return self._vectors

    @property
    def values(self):
        return np.array(list(self.coeffs.values()), dtype=complex)

    @property
    def sup_bound(self):
        """M = sum of |q_g|, an upper bound for sup |q(x)|."""
        return float(np.sum(np.abs(self.values))) if self.coeffs else 0.0

    @property
    def support_radius(self):
        if not self.coeffs:
            return 0.0
        return float(np.max(np.linalg.norm(self.gamma.cart(self._vectors), axis=1)))

    @property
    def is_real_coefficients(self):
        return all(c.imag == 0 for c in self.coeffs.values())

    def scaled(self, eps):
        return FourierPotential(self.gamma, {k: eps * c for k, c in self.coeffs.items()},
                                self.smoothness)

    def evaluate(self, x):
        """q at points x (shape (..., d)); complex array (imaginary part ~ 0)."""
        x = np.asarray(x, dtype=float)
        if not self.coeffs:
            return np.zeros(x.shape[:-1], dtype=complex)
        G = self.gamma.cart(self._vectors)
        phase = np.exp(1j * (x @ G.T))
        return phase @ self.values


def truncate(q, radius):
    """Keep coefficients with 0 < |g| < radius."""
    keep = {k: c for k, c in q.coeffs.items() if q.gamma.norm(k) < radius}
    return FourierPotential(q.gamma, keep, q.smoothness)


def tail_bound(q, radius):
    """Sum of |q_g| over the stored coefficients with |g| >= radius."""
    return float(sum(abs(c) for k, c in q.coeffs.items() if q.gamma.norm(k) >= radius))


@dataclass(frozen=True)
class DirectionalPotential:
    """Coefficients of q on the integer multiples of delta: Q(z) = sum_n q_{n delta} e^{inz}."""

    delta: np.ndarray
    line_coeffs: dict

    @property
    def support(self):
        return max((abs(n) for n in self.line_coeffs), default=0)

    @property
    def sup_bound(self):
        return float(sum(abs(c) for c in self.line_coeffs.values()))

    def evaluate(self, zeta):
        zeta = np.asarray(zeta, dtype=float)
        out = np.zeros(zeta.shape, dtype=complex)
        for n, c in self.line_coeffs.items():
            out += c * np.exp(1j * n * zeta)
        return out


def directional(q, frame):
    """Restriction of q to the line Z delta."""
    dc = np.array(frame.delta_coords, dtype=int)
    line = {}
    for k, c in q.coeffs.items():
        kv = np.array(k)
        # k = n * dc for an integer n
        idx = np.flatnonzero(dc)
        n = kv[idx[0]] // dc[idx[0]]
        if kv[idx[0]] % dc[idx[0]] == 0 and np.array_equal(kv, n * dc):
            line[int(n)] = c
    return DirectionalPotential(frame.delta, dict(sorted(line.items())))


def off_line(q, frame):
    """The part q - q^delta (coefficients not on the delta line)."""
    line = directional(q, frame)
    dc = np.array(frame.delta_coords, dtype=int)
    on = {tuple(int(v) for v in n * dc) for n in line.line_coeffs}
    return FourierPotential(q.gamma, {k: c for k, c in q.coeffs.items() if k not in on},
                            q.smoothness)
