"""The twisted one-dimensional operator along a primitive direction delta and
the single-resonance series built on its eigenfunctions.

For a direction ``delta`` the restriction ``Q(z) = sum_n q_{n delta} e^{inz}``
gives the operator ``-|delta|^2 y'' + Q y`` with ``y(z + 2 pi) = e^{2 pi i v} y(z)``.
It is discretised on ``e^{i(m + v) z}``, ``|m| <= M``. Each quasimomentum
``x`` splits as ``x = P x + z delta`` with P the projection onto the
hyperplane orthogonal to delta; ``z = j + v`` with j an integer and v in
[0, 1). Neighbouring lines are labelled by integer coordinates ``n`` in the
basis of the projected lattice; moving by ``n`` changes v by
``-(n . v_shift)`` modulo 1.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import (BasisTooSmall, IndexOutOfRange, LabelingAmbiguity, OutsideW,
                     SmallDenominator, UseDirectionalPath)
from .linalg import eigh_hermitian
from .potential import directional, off_line

DOMINANCE_MIN = 0.4
DENOM_FLOOR = 1e-8


@dataclass(frozen=True)
class HillSpectrum:
    """Eigenpairs of the twisted operator, labelled by j in [-M, M].

    ``phi[m + M, j + M]`` is the coefficient of ``e^{i(m+v)z}`` in the
    j-th eigenfunction.
    """

    delta: np.ndarray
    v: float
    M: int
    mus: np.ndarray
    phi: np.ndarray
    dominance: np.ndarray
    fallback: bool = False

    @property
    def reliable(self):
        """Labels |j| <= M/2 are unaffected by the basis edge."""
        return self.M // 2

    def mu(self, j):
        if abs(j) > self.M:
            raise IndexOutOfRange(f"j = {j} outside the labelled range [-{self.M}, {self.M}]")
        return float(self.mus[j + self.M])

    def coeff(self, j, m):
        if abs(m) > self.M:
            return 0.0
        return self.phi[m + self.M, j + self.M]

    def to_dict(self):
        return {"delta": self.delta.tolist(), "v": self.v, "M": self.M,
                "j": list(range(-self.M, self.M + 1)), "mu": self.mus.tolist()}


def _hill_matrix(line_coeffs, dn2, v, M):
    ms = np.arange(-M, M + 1)
    T = np.diag(((ms + v) ** 2 * dn2).astype(complex))
    for n, c in line_coeffs.items():
        if abs(n) <= 2 * M:
            idx = np.arange(max(0, n), min(2 * M + 1, 2 * M + 1 + n))
            T[idx, idx - n] = c
    return T


def _refine_tails(T, w, U):
    """Recompute the decaying tails of eigenvectors to full relative precision.

    Far from the diagonal index of an eigenvalue the rows of ``T - mu`` are
    strictly diagonally dominant; there the eigenvector solves a banded
    system driven by its core entries. The dense solver only resolves those
    entries to about 1e-16 absolute, which hides their decay.
    """
    n = len(w)
    diag = np.real(np.diag(T))
    off = T - np.diag(np.diag(T))
    row_sum = np.abs(off).sum(axis=1)
    band = max(int(np.max(np.abs(np.subtract.outer(*np.nonzero(off))), initial=0)), 1)
    U = U.copy()
    idx = np.arange(n)
    for c in range(n):
        safe = np.abs(diag - w[c]) > 2.0 * row_sum
        if safe.all() or not safe.any():
            continue
        core = np.flatnonzero(~safe)
        tail = (idx < core.min()) | (idx > core.max())
        if not tail.any():
            continue
        ti, ki = np.flatnonzero(tail), np.flatnonzero(~tail)
        A = T[np.ix_(ti, ti)] - w[c] * np.eye(len(ti))
        rhs = -T[np.ix_(ti, ki)] @ U[ki, c]
        ab = np.zeros((2 * band + 1, len(ti)), dtype=A.dtype)
        for k in range(-band, band + 1):
            dk = np.diagonal(A, k)
            if k >= 0:
                ab[band - k, k:] = dk
            else:
                ab[band - k, :k] = dk
        U[ti, c] = scipy.linalg.solve_banded((band, band), ab, rhs)
        U[:, c] /= np.linalg.norm(U[:, c])
    return U


def _label(w, U, v, M):
    n = 2 * M + 1
    weights = np.abs(U) ** 2
    dom_idx = np.argmax(weights, axis=0)
    fallback = len(np.unique(dom_idx)) < n
    if not fallback:
        order = np.argsort(dom_idx)
    else:
        ms = np.arange(-M, M + 1)
        free = (ms + v) ** 2
        ranks = np.lexsort((ms, free))       # free order of the labels
        order = np.empty(n, dtype=int)
        order[ranks] = np.arange(n)          # label ranks[i] gets the i-th eigenvalue
    mus = w[order]
    phi = U[:, order]
    dominance = weights[np.arange(n), order]
    return mus, phi, dominance, fallback


@lru_cache(maxsize=512)
def _solve_cached(line_items, delta_bytes, d, v, M):
    delta = np.frombuffer(delta_bytes).reshape(d)
    dn2 = float(delta @ delta)
    T = _hill_matrix(dict(line_items), dn2, v, M)
    w, U = eigh_hermitian(T)
    U = _refine_tails(T, w, U)
    mus, phi, dom, fb = _label(w, U, v, M)
    half = M // 2
    inner = dom[M - half:M + half + 1]
    if np.min(inner) < DOMINANCE_MIN:
        j = int(np.argmin(inner)) - half
        raise LabelingAmbiguity(
            f"eigenvector labelled j = {j} has dominance {np.min(inner):.3f} < {DOMINANCE_MIN}")
    for a in (mus, phi, dom):
        a.setflags(write=False)
    return HillSpectrum(delta.copy(), v, M, mus, phi, dom, fb)


def solve_hill(Q, v, M):
    """Galerkin eigenpairs of the twisted operator for the directional potential Q."""
    v = float(v)
    if not 0.0 <= v < 1.0:
        raise ValueError(f"v must lie in [0, 1), got {v}")
    if M < 8 + Q.support:
        raise BasisTooSmall(f"M = {M} is below 8 + support = {8 + Q.support}")
    items = tuple(sorted((int(n), complex(c)) for n, c in Q.line_coeffs.items()))
    delta = np.ascontiguousarray(Q.delta, dtype=float)
    return _solve_cached(items, delta.tobytes(), len(delta), v, int(M))


def decay_profile(hill, j, r):
    """Indices m and magnitudes ``|(phi_j, e^{i(m+v)z})|`` over the range where
    the power-law bound applies: ``|m| > 2|j|``, ``|m delta| >= 2r``, and m
    inside the reliable part of the basis."""
    dn = float(np.linalg.norm(hill.delta))
    ms = np.array([m for m in range(-hill.reliable, hill.reliable + 1)
                   if abs(m) > 2 * abs(j) and abs(m) * dn >= 2 * r])
    mags = np.array([abs(hill.coeff(j, int(m))) for m in ms])
    keep = mags > 1e-300
    return ms[keep], mags[keep]


def decay_slope(hill, j, r):
    """Least-squares slope of log|coefficient| against log|m delta|."""
    ms, mags = decay_profile(hill, j, r)
    if len(ms) < 3:
        raise BasisTooSmall("fewer than three coefficients in the decay range; increase M")
    dn = float(np.linalg.norm(hill.delta))
    return float(np.polyfit(np.log(np.abs(ms) * dn), np.log(mags), 1)[0])


def lambda_j_beta(beta, tau, hill, j):
    """|beta + tau|^2 + mu_j(v)."""
    y = np.asarray(beta, dtype=float) + np.asarray(tau, dtype=float)
    return float(y @ y) + hill.mu(j)


def gap_check_W(hill, rho, window=None):
    """All gaps between distinct labels within the window exceed 2 / ln rho.

    Returns (flag, min_gap). The default window is the reliable range.
    """
    J = hill.reliable if window is None else int(window)
    vals = np.sort(hill.mus[hill.M - J:hill.M + J + 1])
    gaps = np.diff(vals)
    min_gap = float(gaps.min()) if len(gaps) else np.inf
    return bool(min_gap > 2.0 / np.log(rho)), min_gap


# ------------------------------------------------------------- coupling coefficients

def _frac(z):
    f = z - np.floor(z)
    if f >= 1.0 - 1e-13:
        f = 0.0
    return float(f)


def _v_after(v, s):
    """v(beta + beta_1) from v(beta) and s = (beta_1, delta*) / 2 pi."""
    return _frac(v - s)


def shift_index(v_b, n1, s, v_b1):
    """Integer n with m' = m + n when multiplying line beta by e^{i(gamma_1, x)}."""
    z = v_b + n1 - s - v_b1
    n = int(np.rint(z))
    if abs(z - n) > 1e-8:
        raise ValueError(f"non-integer line shift {z}")
    return n


def a_coeff(n1, s, j, j1, hill_b, hill_b1):
    """Overlap sum_m phi_j(m) conj(phi_{j+j1}(m + n)) for the shift n of (n1, s).

    ``s = (beta_1, delta*) / 2 pi``; the spectra are at v(beta) and v(beta + beta_1).
    """
    n = shift_index(hill_b.v, n1, s, hill_b1.v)
    M = hill_b.M
    if abs(n) > M or hill_b1.M != M:
        raise BasisTooSmall(f"shift {n} does not fit the Hill basis of half-size {M}")
    jj = j + j1
    if abs(j) > M or abs(jj) > M:
        raise IndexOutOfRange("label outside the Hill basis")
    src = hill_b.phi[:, j + M]
    dst = hill_b1.phi[:, jj + M]
    if n >= 0:
        return complex(np.sum(src[:2 * M + 1 - n] * np.conj(dst[n:])))
    return complex(np.sum(src[-n:] * np.conj(dst[:2 * M + 1 + n])))


@dataclass(frozen=True)
class OffLineStep:
    """One off-line potential mode: gamma_1 = sum n_i c_i + n1 delta."""

    gamma: tuple
    coeff: complex
    n_beta: tuple
    n1: int
    s: float
    beta_cart: np.ndarray = field(repr=False)


def off_line_steps(q, frame, radius):
    """Decompose the off-line modes with |gamma_1| < radius into (n_beta, n1)."""
    from .lattice import unimodular_completion
    W, _ = unimodular_completion(frame.delta_coords)
    Wf = np.array(W, dtype=float)
    out = []
    qo = off_line(q, frame)
    for k, c in qo.coeffs.items():
        if q.gamma.norm(k) >= radius:
            continue
        coef = np.rint(np.array(k, dtype=float) @ Wf).astype(int)
        n1 = int(coef[0])
        nb = tuple(int(v) for v in coef[1:])
        s = float(np.dot(nb, frame.v_shift))
        bc = np.asarray(nb, dtype=float) @ frame.gamma_delta
        out.append(OffLineStep(k, c, nb, n1, s, bc))
    return out


def A_coeff(jp, beta1, j1, q, frame, hill_bp, hill_bpp, radius=np.inf):
    """Total coupling sum_{n1} q_{gamma_1} a(...) from (j', beta') to (j'+j1, beta'+beta1).

    ``beta1`` is given by integer coordinates in the projected-lattice basis.
    """
    nb = tuple(int(v) for v in np.atleast_1d(beta1))
    if not any(nb):
        raise UseDirectionalPath("beta_1 = 0 is the directional potential, handled by the Hill operator")
    total = 0j
    for st in off_line_steps(q, frame, radius):
        if st.n_beta == nb:
            total += st.coeff * a_coeff(st.n1, st.s, jp, j1, hill_bp, hill_bpp)
    return total


# ------------------------------------------------------------- single-resonance series

def default_hill_size(z, Q):
    """Half-size M keeping the label |j| ~ |z| inside the reliable range."""
    return int(max(8 + Q.support, 2 * (abs(z) + 4 * Q.support + 4)))


def split_point(x, frame):
    """(P x, j, v) with x = P x + (j + v) delta."""
    x = np.asarray(x, dtype=float)
    z = float(x @ frame.delta) / frame.delta_norm2
    j = int(np.floor(z))
    v = z - j
    if v >= 1.0 - 1e-13:
        j, v = j + 1, 0.0
    return frame.project(x), j, float(v)


def ladder(params, frame, k):
    """Radii bounding the j-jump at each of k steps."""
    dn = float(np.sqrt(frame.delta_norm2))
    if params.mode == "paper":
        r1 = params.rho ** params.alpha_k(1) / (2 * dn) + 2 * dn
        return [r1 * 10 ** i for i in range(k)]
    d = params.d
    n1 = int(np.floor((params.p - params.kappa * (3 * d - 1) / 2 - d * 3 ** d / 4 - 3) / 9))
    h1 = 10.0 ** (n1 - params.p) * params.rho ** (params.alpha_k(2) / 2)
    return [h1 * 10 ** i for i in range(k)]


@dataclass
class _StateSpace:
    lines: list            # integer coords of each line relative to x's line
    vs: list
    hills: list
    energies: np.ndarray   # unperturbed lambda per state
    labels: list           # (line index, j)
    index: dict
    V: np.ndarray          # coupling matrix between states
    jumps: np.ndarray      # |j_a - j_b|


def _state_space(x, frame, q, params, depth, M=None, J=None):
    Px, j0, v0 = split_point(x, frame)
    Q = directional(q, frame)
    if M is None:
        M = default_hill_size(j0 + v0, Q)
    steps = off_line_steps(q, frame, params.r_series)
    dim = frame.gamma_delta.shape[0]
    origin = (0,) * dim
    lines = [origin]
    seen = {origin: 0}
    frontier = [origin]
    for _ in range(depth):
        nxt = []
        for ln in frontier:
            for st in steps:
                new = tuple(a + b for a, b in zip(ln, st.n_beta))
                if new not in seen:
                    seen[new] = len(lines)
                    lines.append(new)
                    nxt.append(new)
        frontier = nxt
    vs, hills = [], []
    for ln in lines:
        s = float(np.dot(ln, frame.v_shift))
        v = _v_after(v0, s)
        vs.append(v)
        hills.append(solve_hill(Q, v, M))
    J = M if J is None else J
    labels, energies = [], []
    for li, ln in enumerate(lines):
        bc = Px + np.asarray(ln, dtype=float) @ frame.gamma_delta
        e_perp = float(bc @ bc)
        for j in range(-J, J + 1):
            labels.append((li, j))
            energies.append(e_perp + hills[li].mu(j))
    index = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    V = np.zeros((n, n), dtype=complex)
    width = 2 * J + 1
    for li, ln in enumerate(lines):
        for st in steps:
            tgt = tuple(a + b for a, b in zip(ln, st.n_beta))
            lj = seen.get(tgt)
            if lj is None:
                continue
            hb, hb1 = hills[li], hills[lj]
            n_sh = shift_index(hb.v, st.n1, st.s, hb1.v)
            if abs(n_sh) > M:
                raise BasisTooSmall(f"line shift {n_sh} exceeds the Hill half-size {M}")
            # blocks: rows (lj, j''), columns (li, j'); value q * sum_m phi_j'(m) conj(phi_j''(m+n))
            S = np.zeros((2 * M + 1, 2 * M + 1), dtype=complex)
            rows = np.arange(2 * M + 1)
            ok = (rows + n_sh >= 0) & (rows + n_sh < 2 * M + 1)
            S[rows[ok] + n_sh, rows[ok]] = 1.0
            cols = slice(M - J, M + J + 1)
            blk = st.coeff * (hb1.phi[:, cols].conj().T @ S @ hb.phi[:, cols])
            V[lj * width:(lj + 1) * width, li * width:(li + 1) * width] += blk
    jl = np.array([lab[1] for lab in labels])
    jumps = np.abs(jl[:, None] - jl[None, :])
    return _StateSpace(lines, vs, hills, np.array(energies), labels, index, V, jumps), (Px, j0, v0, M)


@dataclass(frozen=True)
class SingleResCorrection:
    j: int
    beta: np.ndarray
    v: float
    tau: np.ndarray
    lamb: float
    E_values: tuple
    lambda_pred: float
    offset: float
    h_ladder: tuple
    min_gap: float
    in_W: bool

    def to_dict(self):
        return {"j": self.j, "v": self.v, "lambda": self.lamb, "E": list(self.E_values),
                "lambda_pred": self.lambda_pred, "h_ladder": list(self.h_ladder),
                "min_gap": self.min_gap, "in_W": self.in_W}


def _propagator(a, space, self_idx, rho):
    den = a - space.energies
    floor = DENOM_FLOOR * max(rho, 1.0)
    den[self_idx] = np.inf
    if np.any(np.abs(den) < floor):
        i = int(np.argmin(np.abs(den)))
        raise SmallDenominator(f"|a - lambda| = {abs(den[i]):.3g} below floor at state "
                               f"{space.labels[i]}", where=space.labels[i])
    G = 1.0 / den
    G[self_idx] = 0.0
    return G


def _masks(space, rungs, dn):
    return [space.jumps * dn < 9.0 * r for r in rungs]


def _sprime(a, space, self_idx, rho, kmax, masks):
    G = _propagator(a, space, self_idx, rho)
    w = space.V[:, self_idx].copy() * masks[0][:, self_idx]
    out = []
    for k in range(1, kmax + 1):
        w = G * w
        Vk = space.V * masks[min(k, len(masks) - 1)]
        out.append(complex(Vk[self_idx] @ w))
        w = Vk @ w
    return out


def _setup(x, frame, q, params, k, M=None, require_W=True):
    depth = max(2 * (k - 1), 2)
    space, (Px, j0, v0, Mh) = _state_space(x, frame, q, params, depth, M=M)
    hill0 = space.hills[0]
    flag, min_gap = gap_check_W(hill0, params.rho)
    if require_W and not flag:
        raise OutsideW(f"v = {v0:.6g}: min Hill gap {min_gap:.3g} <= 2/ln(rho) = "
                       f"{2 / np.log(params.rho):.3g}")
    if abs(j0) > hill0.reliable:
        raise BasisTooSmall(f"label j = {j0} outside the reliable Hill range; increase M")
    self_idx = space.index[(0, j0)]
    rungs = ladder(params, frame, 2 * max(k, 1))
    masks = _masks(space, rungs, float(np.sqrt(frame.delta_norm2)))
    return space, Px, j0, v0, self_idx, rungs, masks, flag, min_gap


def E_corrections(x, frame, q, params, k, M=None, require_W=True):
    """E_1 .. E_{k-1} with E_s = A'_s(lambda + E_{s-1}), A'_s = sum_{m <= 2s} S'_m."""
    x = np.asarray(x, dtype=float)
    space, Px, j0, v0, si, rungs, masks, flag, gap = _setup(x, frame, q, params, k, M, require_W)
    lam_rel = float(space.energies[si])
    Es = [0.0]
    for s in range(1, k):
        terms = _sprime(lam_rel + Es[-1], space, si, params.rho, 2 * s, masks)
        tot = sum(terms)
        if abs(tot.imag) > 1e-8:
            from .errors import NumericalFailure
            raise NumericalFailure(f"E_{s} has imaginary part {tot.imag:.3g}")
        Es.append(float(tot.real))
    beta, tau = Px, np.zeros_like(Px)
    return SingleResCorrection(j0, beta, v0, tau, lam_rel, tuple(Es[1:]), lam_rel + Es[-1],
                               Es[-1], tuple(rungs), gap, flag)


@dataclass(frozen=True)
class ResBlochMap:
    coefficients: dict     # (line coords, j') -> amplitude of Phi_{j', beta'}
    norm_factor: float
    tilde_norm: float
    j: int
    v: float
    lines: list
    hills: list
    frame: object = field(repr=False)

    def plane_waves(self):
        """Expand into plane-wave amplitudes keyed by lattice offsets from x."""
        out = {}
        comp = np.array(self.frame.complement_coords, dtype=int).reshape(-1, len(self.frame.delta_coords))
        dcoord = np.array(self.frame.delta_coords, dtype=int)
        for (ln, jp), amp in self.coefficients.items():
            li = self.lines.index(ln)
            hill = self.hills[li]
            s = float(np.dot(ln, self.frame.v_shift))
            ell = int(np.rint(hill.v - self.v + s))
            base = np.asarray(ln, dtype=int) @ comp if len(ln) else np.zeros_like(dcoord)
            for m in range(-hill.M, hill.M + 1):
                c = amp * hill.coeff(jp, m)
                if c == 0:
                    continue
                key = tuple(int(u) for u in base + (m - self.j + ell) * dcoord)
                out[key] = out.get(key, 0) + c
        return out


def res_bloch(x, frame, q, params, k, M=None, require_W=True):
    """Coefficients of Phi_{j', beta'} in the order-k resonance Bloch approximation."""
    x = np.asarray(x, dtype=float)
    space, Px, j0, v0, si, rungs, masks, flag, gap = _setup(x, frame, q, params, k + 1, M,
                                                            require_W)
    ser = E_corrections(x, frame, q, params, k, M=M, require_W=require_W) if k > 1 else None
    a = float(space.energies[si]) + (ser.offset if ser is not None else 0.0)
    G = _propagator(a, space, si, params.rho)
    vec = np.zeros(len(space.labels), dtype=complex)
    vec[si] = 1.0
    total = np.zeros_like(vec)
    for m in range(1, 2 * k + 1):
        Vm = space.V * masks[min(m - 1, len(masks) - 1)]
        vec = G * (Vm @ vec)
        total += vec
    tn = float(np.linalg.norm(total))
    nf = 1.0 / np.sqrt(1.0 + tn ** 2)
    coeffs = {}
    for i, c in enumerate(total):
        if i == si:
            continue
        if c != 0:
            li, jp = space.labels[i]
            coeffs[(space.lines[li], jp)] = complex(nf * c)
    coeffs = {(space.lines[0], j0): complex(nf), **coeffs}
    return ResBlochMap(coeffs, nf, tn, j0, v0, space.lines, space.hills, frame)
