"""Eigenvalue and Bloch-function series away from the diffraction planes.

Every k-fold sum over tuples of lattice vectors is evaluated as a walk on
the finite graph of offsets reachable from 0 by at most k steps inside the
truncated support. With ``H[a, b] = q_{h_a - h_b}`` and
``G = diag(1 / (a - |x + h|^2))`` (zero at the origin, which removes
tuples with a vanishing partial sum),

    S_k = e_0^T (V G)^k w,       w[h] = q_h,

where ``V`` carries the truncated couplings and ``w`` the closing
coefficient. The brute-force tuple sum in the test suite is the oracle for
this identity.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NoCandidate, NumericalFailure, OrderTooHigh, SmallDenominator
from .oracle import match as oracle_match
from .potential import truncate

DENOM_FLOOR = 1e-8
IMAG_TOL = 1e-8


@dataclass(frozen=True)
class OffsetGraph:
    """Offsets reachable from 0 (row 0) with the coupling matrix on them."""

    sites: np.ndarray      # (n, d) integer coordinates
    V: np.ndarray          # truncated couplings, V[a, b] = q_{h_a - h_b}
    closing: np.ndarray    # closing[b] = q_{h_b} from the full potential
    depth: np.ndarray      # fewest steps from 0
    tail: np.ndarray       # fewest steps to a site with closing != 0


def _items_key(q):
    return tuple((k, complex(c)) for k, c in q.coeffs.items())


@lru_cache(maxsize=256)
def _graph_cached(step_items, full_items, d, order):
    steps = [np.array(k, dtype=int) for k, _ in step_items]
    index = {(0,) * d: 0}
    sites = [(0,) * d]
    depth = [0]
    frontier = [(0,) * d]
    for level in range(1, order + 1):
        new = []
        for s in frontier:
            for g in steps:
                h = tuple(int(v) for v in np.array(s) - g)
                if h not in index:
                    index[h] = len(sites)
                    sites.append(h)
                    depth.append(level)
                    new.append(h)
        frontier = new
    n = len(sites)
    V = np.zeros((n, n), dtype=complex)
    for i, h in enumerate(sites):
        for (g, c) in step_items:
            j = index.get(tuple(a - b for a, b in zip(h, g)))
            if j is not None:
                V[i, j] = c
    full = dict(full_items)
    closing = np.array([full.get(h, 0.0) for h in sites], dtype=complex)
    closing[0] = 0.0
    # breadth-first distance to the closing support along reversed steps
    tail = np.full(n, np.iinfo(np.int64).max // 4, dtype=np.int64)
    tail[closing != 0] = 0
    adj = V != 0
    for _ in range(order):
        nxt = tail.copy()
        for i in range(n):
            nb = np.flatnonzero(adj[i])
            if len(nb):
                nxt[i] = min(nxt[i], int(tail[nb].min()) + 1)
        if np.array_equal(nxt, tail):
            break
        tail = nxt
    arr = np.array(sites, dtype=int).reshape(n, d)
    for a in (arr, V, closing):
        a.setflags(write=False)
    return OffsetGraph(arr, V, closing, np.array(depth), tail)


def offset_graph(q, radius, order):
    """Offsets reachable in ``order`` steps of the support of q inside the series ball."""
    qt = truncate(q, radius)
    return _graph_cached(_items_key(qt), _items_key(q), q.gamma.dim, int(order))


def _propagator(a, x, graph, gamma, rho, order):
    cart = graph.sites @ gamma.basis + x
    energies = np.einsum("ij,ij->i", cart, cart)
    den = a - energies
    den[0] = np.inf
    live = (graph.depth + graph.tail <= order)
    live[0] = False
    floor = DENOM_FLOOR * max(rho, 1.0)
    bad = np.flatnonzero(live & (np.abs(den) < floor))
    if len(bad):
        i = int(bad[0])
        raise SmallDenominator(
            f"|a - |x+h|^2| = {abs(den[i]):.3g} below the floor {floor:.3g} at offset "
            f"{tuple(int(v) for v in graph.sites[i])}", where=tuple(int(v) for v in graph.sites[i]))
    G = 1.0 / den
    G[0] = 0.0
    return G


def _realify(z, what):
    if abs(z.imag) > IMAG_TOL:
        raise NumericalFailure(f"{what} has imaginary part {z.imag:.3g}")
    return float(z.real)


def s_terms(a, x, q, params, kmax, gamma=None):
    """[S_1(a, x), ..., S_kmax(a, x)] as reals."""
    gamma = q.gamma if gamma is None else gamma
    x = np.asarray(x, dtype=float)
    if kmax <= 0:
        return []
    if q.is_zero:
        return [0.0] * kmax
    graph = offset_graph(q, params.r_series, kmax)
    G = _propagator(float(a), x, graph, gamma, params.rho, kmax)
    w = graph.closing.copy()
    out = []
    for k in range(1, kmax + 1):
        w = G * w
        val = graph.V[0] @ w
        out.append(_realify(val, f"S_{k}"))
        w = graph.V @ w
    return out


def S_k_term(a, x, q, params, k):
    """The k-fold sum S_k(a, x)."""
    return s_terms(a, x, q, params, k)[k - 1]


@dataclass(frozen=True)
class PerturbationSeries:
    x: np.ndarray
    order: int
    F_values: tuple        # F_1 .. F_{k-1}
    S_terms: tuple         # S_terms[s-1] = (S_1, ..., S_s) evaluated at |x|^2 + F_{s-1}
    lambda_pred: float
    offset: float          # lambda_pred - |x|^2, kept separately for precision

    @property
    def F(self):
        return (0.0,) + tuple(self.F_values)

    def to_dict(self):
        return {"x": list(map(float, self.x)), "order": self.order,
                "F": list(self.F_values), "lambda_pred": self.lambda_pred,
                "offset": self.offset}


def _check_order(k, params):
    if k < 1:
        raise OrderTooHigh(f"order must be at least 1, got {k}")
    if k > params.max_series_order:
        raise OrderTooHigh(f"order {k} exceeds floor(p/3) = {params.max_series_order}")


def F_series(x, q, params, k):
    """F_1 .. F_{k-1} by F_s = sum_{m <= s} S_m(|x|^2 + F_{s-1}, x)."""
    _check_order(k, params)
    x = np.asarray(x, dtype=float)
    e0 = float(x @ x)
    Fs = [0.0]
    table = []
    for s in range(1, k):
        terms = s_terms(e0 + Fs[-1], x, q, params, s)
        table.append(tuple(terms))
        Fs.append(float(np.sum(terms)))
    return PerturbationSeries(x, k, tuple(Fs[1:]), tuple(table), e0 + Fs[-1], Fs[-1])


def grad_F1(x, q, params):
    """Analytic gradient of F_1(x) = sum |q_g|^2 / (|x|^2 - |x+g|^2)."""
    x = np.asarray(x, dtype=float)
    qt = truncate(q, params.r_series)
    out = np.zeros_like(x)
    for k, c in qt.coeffs.items():
        g = q.gamma.cart(k)
        den = -(2.0 * x @ g + g @ g)
        out += abs(c) ** 2 * 2.0 * g / den ** 2
    return out


@dataclass(frozen=True)
class BlochSeries:
    x: np.ndarray
    order: int
    coefficients: dict     # offset h -> amplitude of e^{i(x + h, .)}
    norm_factor: float
    tilde_norm: float

    def to_dict(self):
        return {"x": list(map(float, self.x)), "order": self.order,
                "norm_factor": self.norm_factor,
                "coefficients": [{"gamma": list(k), "re": v.real, "im": v.imag}
                                 for k, v in self.coefficients.items()]}


def bloch_series(x, q, params, k):
    """Plane-wave coefficients of the order-k Bloch function approximation.

    The unnormalized vector is ``e_0 + sum_{m=1}^{k-1} (G V)^m e_0`` with G
    at ``a = |x|^2 + F_{k-2}``; it is scaled by ``(1 + |F~|^2)^{-1/2}``.
    """
    _check_order(k, params)
    x = np.asarray(x, dtype=float)
    zero = (0,) * q.gamma.dim
    if k == 1 or q.is_zero:
        return BlochSeries(x, k, {zero: 1.0 + 0j}, 1.0, 0.0)
    ser = F_series(x, q, params, k - 1) if k > 2 else None
    a = float(x @ x) + (ser.offset if ser is not None else 0.0)
    graph = offset_graph(q, params.r_series, k - 1)
    G = _propagator(a, x, graph, q.gamma, params.rho, k - 1)
    n = len(graph.sites)
    v = np.zeros(n, dtype=complex)
    v[0] = 1.0
    total = np.zeros(n, dtype=complex)
    for _ in range(k - 1):
        v = G * (graph.V @ v)
        total += v
    tn = float(np.linalg.norm(total))
    nf = 1.0 / np.sqrt(1.0 + tn ** 2)
    coeffs = {zero: complex(nf)}
    for h, c in zip(graph.sites[1:], total[1:]):
        if c != 0:
            coeffs[tuple(int(u) for u in h)] = complex(nf * c)
    return BlochSeries(x, k, coeffs, nf, tn)


@dataclass(frozen=True)
class PredictionMatch:
    N: int
    lambda_oracle: float
    lambda_pred: float
    error: float
    gap_to_next: float
    ambiguous: bool


def predict_and_match(x, q, params, k, oracle_spectrum, tol=None):
    """Nearest oracle eigenvalue to |x|^2 + F_{k-1}(x); error = oracle - prediction."""
    ser = F_series(x, q, params, k)
    if len(oracle_spectrum) == 0:
        raise NoCandidate("oracle window is empty")
    tol = np.inf if tol is None else tol
    e0 = float(np.asarray(x) @ np.asarray(x))
    rel = (e0 - oracle_spectrum.shift) + ser.offset
    m = oracle_match(rel, oracle_spectrum, tol, relative=True)
    return PredictionMatch(m.N, m.value, ser.lambda_pred, m.error, m.gap_to_next, m.ambiguous)
