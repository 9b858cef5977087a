"""Exponent hierarchy and the resonance classification of quasimomenta.

The thresholds ``rho**alpha_k`` of the asymptotic theory are O(1) at any
feasible rho, so every radius and threshold can be overridden to run
experiments at desk scale; the defaults reproduce the theory's values.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache
from math import floor

import numpy as np

from .errors import OutOfShell
from .lattice import enumerate_ball, is_primitive
from .linalg import independent_rank

MODES = ("paper", "resonance-sec6")


def _ifloor(x):
    return int(floor(x + 1e-12))


def default_kappa(d, mode):
    if mode == "paper":
        return 3 ** d + d + 2
    return 4 * 3 ** d * (d + 1)


def default_smoothness(d, mode):
    if mode == "paper":
        kappa = default_kappa(d, mode)
        return int(np.ceil((3 * d - 1) / 2 * kappa + d * 3 ** d / 4 + d + 6))
    return 6 * 3 ** d * (d + 1) ** 2 + d


@dataclass(frozen=True)
class AsymptoticParams:
    """Constants of the perturbation theory at one energy scale rho."""

    rho: float
    d: int = 2
    s: float = None
    mode: str = "paper"
    kappa: float = None
    c4: float = 1.0
    thresholds: dict = field(default_factory=dict)
    eps1_override: float = None
    series_radius: float = None
    direction_radius: float = None
    block_a_radius: float = None
    block_b_radius: float = None
    site_cap: int = 2000
    known_order: int = None
    known_order_res: int = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.kappa is None:
            object.__setattr__(self, "kappa", default_kappa(self.d, self.mode))
        if self.s is None:
            object.__setattr__(self, "s", default_smoothness(self.d, self.mode))
        thr = {int(k): float(v) for k, v in dict(self.thresholds).items()}
        object.__setattr__(self, "thresholds", thr)
        vals = [self.threshold(k) for k in range(1, self.d + 1)]
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise ValueError(f"thresholds must be non-decreasing in k, got {vals}")

    # -- exponents
    @property
    def alpha(self):
        return 1.0 / self.kappa

    def alpha_k(self, k):
        return 3 ** k * self.alpha

    @property
    def alphas(self):
        return tuple(self.alpha_k(k) for k in range(1, self.d + 2))

    @property
    def p(self):
        return self.s - self.d

    @property
    def p1(self):
        return _ifloor(self.p / 3) + 1

    @property
    def k1(self):
        return _ifloor(self.d / (3 * self.alpha)) + 2

    @property
    def k2(self):
        return _ifloor(self.d / (9 * self.alpha)) + 2

    @property
    def eps1(self):
        if self.eps1_override is not None:
            return self.eps1_override
        return self.rho ** (-self.d - 2 * self.alpha)

    @property
    def k_known(self):
        """Series order used for non-resonance known parts (k1 unless overridden)."""
        return self.known_order if self.known_order is not None else self.k1

    @property
    def k_known_res(self):
        """Order of the single-resonance known part (k2 unless overridden)."""
        return self.known_order_res if self.known_order_res is not None else self.k2

    @property
    def max_series_order(self):
        return _ifloor(self.p / 3)

    # -- thresholds and radii
    def threshold(self, k):
        if k in self.thresholds:
            return self.thresholds[k]
        return self.c4 * self.rho ** self.alpha_k(k)

    @property
    def r_series(self):
        return self.series_radius if self.series_radius is not None else self.rho ** self.alpha

    @property
    def r_directions(self):
        if self.direction_radius is not None:
            return self.direction_radius
        return self.p * self.rho ** self.alpha

    @property
    def r_block_a(self):
        if self.block_a_radius is not None:
            return self.block_a_radius
        return self.p1 * self.rho ** self.alpha

    def r_block_b(self, k):
        if self.block_b_radius is not None:
            return self.block_b_radius
        return 0.5 * self.rho ** (self.alpha_k(k + 1) / 2)

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return {
            "rho": self.rho, "d": self.d, "s": self.s, "mode": self.mode,
            "kappa": self.kappa, "alpha": self.alpha, "alphas": list(self.alphas),
            "p": self.p, "p1": self.p1, "k1": self.k1, "k2": self.k2,
            "eps1": self.eps1, "c4": self.c4,
            "thresholds": [self.threshold(k) for k in range(1, self.d + 1)],
            "series_radius": self.r_series, "direction_radius": self.r_directions,
            "block_a_radius": self.r_block_a,
        }


def check_param_inequalities(params):
    """Evaluate the consistency inequalities between the exponents.

    Returns a list of dicts with keys name, lhs, rhs, holds, slack.
    """
    P = params
    a, d, kap = P.alpha, P.d, P.kappa
    rows = []

    def lt(name, lhs, rhs):
        rows.append({"name": name, "lhs": lhs, "rhs": rhs,
                     "holds": bool(lhs < rhs), "slack": rhs - lhs})

    def le(name, lhs, rhs):
        rows.append({"name": name, "lhs": lhs, "rhs": rhs,
                     "holds": bool(lhs <= rhs + 1e-12), "slack": rhs - lhs})

    lt("alpha_1 + d*alpha < 1 - alpha", P.alpha_k(1) + d * a, 1 - a)
    lt("d*alpha < alpha_d / 2", d * a, P.alpha_k(d) / 2)
    for k in range(1, d + 1):
        lt(f"alpha_{k} + {k - 1}*alpha < 1", P.alpha_k(k) + (k - 1) * a, 1.0)
        lt(f"2*(alpha_{k} + {k - 1}*alpha) < alpha_{k + 1}",
           2 * (P.alpha_k(k) + (k - 1) * a), P.alpha_k(k + 1))
    le("k1 <= (p - kappa*(d-1)/2)/3", float(P.k1), (P.p - kap * (d - 1) / 2) / 3)
    lt("d + 2*alpha < 3*k1*alpha", d + 2 * a, 3 * P.k1 * a)
    if P.mode == "resonance-sec6":
        lt("k2 < (p - kappa*(d-1)/2)/9", float(P.k2), (P.p - kap * (d - 1) / 2) / 9)
        lt("d + 2*alpha < k2*alpha_2", d + 2 * a, P.k2 * P.alpha_k(2))
        val = 4 * (d + 1) * P.alpha_k(d)
        rows.append({"name": "4(d+1)*alpha_d == 1", "lhs": val, "rhs": 1.0,
                     "holds": bool(abs(val - 1.0) < 1e-12), "slack": 1.0 - val})
    return rows


# ---------------------------------------------------------------- classification

def in_V(x, b, threshold, rho):
    """Membership in the resonance slab of b intersected with the shell.

    Returns (flag, margin) with margin = | |x|^2 - |x+b|^2 | - threshold.
    """
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = abs(float(x @ x - (x + b) @ (x + b)))
    r = float(np.linalg.norm(x))
    inside = 0.5 * rho < r < 1.5 * rho
    return bool(diff <= threshold and inside), diff - threshold


def in_shell(x, rho):
    r = float(np.linalg.norm(x))
    return 0.5 * rho < r < 1.5 * rho


@dataclass(frozen=True)
class DomainLabel:
    kind: str
    k: int
    directions: tuple
    single_resonance: bool
    margins: tuple = ()

    def to_dict(self):
        return {"kind": self.kind, "k": self.k,
                "directions": [list(v) for v in self.directions],
                "single_resonance": self.single_resonance,
                "margins": list(self.margins)}

    @property
    def primitive_direction(self):
        if self.k != 1:
            return None
        v = np.array(self.directions[0])
        g = int(np.gcd.reduce(np.abs(v)))
        return tuple(int(c) for c in v // g)


@lru_cache(maxsize=64)
def _directions_cached(basis_bytes, d, radius):
    from .lattice import DualLattice
    lat = DualLattice(np.frombuffer(basis_bytes).reshape(d, d).copy())
    pts = enumerate_ball(lat, radius, exclude_zero=True)
    cart = pts @ lat.basis
    norms = np.linalg.norm(cart, axis=1)
    order = np.lexsort(tuple(pts[:, i] for i in range(d - 1, -1, -1)) + (np.round(norms, 12),))
    return pts[order], cart[order]


def search_directions(gamma, radius):
    """Gamma(radius) sorted by length, lexicographic tie-break."""
    return _directions_cached(gamma.basis.tobytes(), gamma.dim, float(radius))


def classify(x, params, gamma):
    """Largest k with x in V_{g_1} n ... n V_{g_k} at threshold k for independent g_i."""
    x = np.asarray(x, dtype=float)
    rho = params.rho
    if not in_shell(x, rho):
        raise OutOfShell(f"|x| = {np.linalg.norm(x):.6g} outside ({rho / 2}, {1.5 * rho})")
    pts, cart = search_directions(gamma, params.r_directions)
    if len(pts) == 0:
        return DomainLabel("NonResonance", 0, (), False)
    diff = np.abs(2.0 * cart @ x + np.einsum("ij,ij->i", cart, cart))
    d = params.d
    for k in range(d, 0, -1):
        thr = params.threshold(k)
        idx = np.flatnonzero(diff <= thr)
        if len(idx) < k:
            continue
        if independent_rank(cart[idx]) < k:
            continue
        chosen = []
        for i in idx:
            trial = chosen + [i]
            if independent_rank(cart[trial]) == len(trial):
                chosen = trial
            if len(chosen) == k:
                break
        single = False
        if k == 1:
            thr2 = params.threshold(2) if d >= 2 else np.inf
            idx2 = np.flatnonzero(diff <= thr2)
            single = independent_rank(cart[idx2]) < 2
        dirs = tuple(tuple(int(c) for c in pts[i]) for i in chosen)
        margins = tuple(float(diff[i] - thr) for i in chosen)
        return DomainLabel("Resonance", k, dirs, single, margins)
    return DomainLabel("NonResonance", 0, (), False,
                       (float(np.min(diff) - params.threshold(1)),))


def is_nonresonant(x, params, gamma):
    return classify(x, params, gamma).k == 0


def primitive_part(v):
    v = np.array(v, dtype=int)
    g = int(np.gcd.reduce(np.abs(v)))
    return tuple(int(c) for c in v // g), g


__all__ = ["AsymptoticParams", "DomainLabel", "check_param_inequalities", "classify",
           "in_V", "in_shell", "is_primitive", "primitive_part", "search_directions"]
