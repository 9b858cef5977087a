"""Pointwise membership certificates for the simple sets and Monte-Carlo
estimates of region measures.

A certificate compares the known part at x with the known parts of every
competitor ``x + h`` whose free energy ``|x + h|^2`` lies within a third
of the first resonance threshold. All margins must reach ``2 eps1``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .errors import BlochError, NoCandidate, OutOfShell, WrongVariant
from .geometry import classify
from .hill import (E_corrections, default_hill_size, gap_check_W, solve_hill,
                   split_point)
from .lattice import delta_frame, enumerate_shell
from .nonres import F_series
from .oracle import _lookup
from .potential import directional
from .resblock import resonance_block


@dataclass(frozen=True)
class Competitor:
    gamma: tuple
    kind: str            # "nonres" or "res"
    values: tuple        # known parts relative to |x|^2
    margin: float
    error: str = ""


@dataclass(frozen=True)
class SimpleSetCertificate:
    x: np.ndarray
    variant: str
    known_part: float
    known_rel: float     # known_part - |x|^2
    competitors: tuple
    verdict: str
    reason: str
    eps1: float
    extra: dict = field(default_factory=dict)

    @property
    def accepted(self):
        return self.verdict == "Accepted"

    def to_dict(self):
        return {"x": self.x.tolist(), "variant": self.variant, "known_part": self.known_part,
                "verdict": self.verdict, "reason": self.reason, "eps1": self.eps1,
                "competitors": [{"gamma": list(c.gamma), "kind": c.kind,
                                 "values": list(c.values), "margin": c.margin,
                                 "error": c.error} for c in self.competitors],
                **{k: v for k, v in self.extra.items() if not isinstance(v, np.ndarray)}}


def trimmed_shell(x, params):
    r = float(np.linalg.norm(x))
    w = params.rho ** (params.alpha_k(1) - 1)
    return 0.5 * params.rho + w < r < 1.5 * params.rho - w


def _check_shell(x, params):
    if not trimmed_shell(x, params):
        raise OutOfShell(f"|x| = {np.linalg.norm(x):.6g} outside the trimmed shell")


def competitor_offsets(x, known_rel, params, gamma):
    """Offsets h != 0 with | |x|^2 + known_rel - |x + h|^2 | < thr_1 / 3."""
    x = np.asarray(x, dtype=float)
    e = float(x @ x) + known_rel
    w = params.threshold(1) / 3.0
    lo = np.sqrt(max(e - w, 0.0))
    hi = np.sqrt(e + w)
    pts = enumerate_shell(gamma, x, lo, hi)
    if len(pts) == 0:
        return pts
    cart = pts @ gamma.basis + x
    en = np.einsum("ij,ij->i", cart, cart)
    keep = (np.abs(e - en) < w) & np.any(pts != 0, axis=1)
    return pts[keep]


def _known_parts_at(y, e0_x, q, params, gamma):
    """Known parts of the competitor at y, relative to |x|^2."""
    lab = classify(y, params, gamma)
    if lab.k == 0:
        ser = F_series(y, q, params, params.k_known)
        return "nonres", ((float(y @ y) - e0_x) + ser.offset,), lab
    blk = resonance_block(y, lab.directions, q, params)
    return "res", tuple((float(y @ y) - e0_x) + blk.rel), lab


def known_parts(x, q, params, known_rel=None):
    """Known parts of all competitors of x, as Competitor entries (margins vs known_rel)."""
    x = np.asarray(x, dtype=float)
    gamma = q.gamma
    e0 = float(x @ x)
    if known_rel is None:
        known_rel = F_series(x, q, params, params.k_known).offset
    out = []
    for h in competitor_offsets(x, known_rel, params, gamma):
        y = x + gamma.cart(h)
        key = tuple(int(c) for c in h)
        try:
            kind, vals, _ = _known_parts_at(y, e0, q, params, gamma)
        except BlochError as exc:
            out.append(Competitor(key, "error", (), -np.inf, f"{type(exc).__name__}: {exc}"))
            continue
        margin = float(np.min(np.abs(np.array(vals) - known_rel))) - 2 * params.eps1
        out.append(Competitor(key, kind, vals, margin))
    return out


def _verdict(comps, extra_ok=True, reason_fail=""):
    if not extra_ok:
        return "Rejected", reason_fail
    for c in comps:
        if c.kind == "error":
            return "Rejected", f"competitor {c.gamma} failed: {c.error}"
    bad = [c for c in comps if c.margin < 0]
    if bad:
        worst = min(bad, key=lambda c: c.margin)
        return "Rejected", f"competitor {worst.gamma} within 2 eps1 (margin {worst.margin:.3g})"
    return "Accepted", ""


def in_B(x, q, params):
    """Certificate for the non-resonance simple set."""
    x = np.asarray(x, dtype=float)
    _check_shell(x, params)
    gamma = q.gamma
    lab = classify(x, params, gamma)
    if lab.k != 0:
        raise WrongVariant(f"x is resonant (k = {lab.k}); use the B_delta certificate")
    ser = F_series(x, q, params, params.k_known)
    comps = known_parts(x, q, params, known_rel=ser.offset)
    verdict, reason = _verdict(comps)
    return SimpleSetCertificate(x, "B", ser.lambda_pred, ser.offset, tuple(comps), verdict,
                                reason, params.eps1)


def _same_line(h, frame):
    hv = np.asarray(frame.gamma.cart(h))
    return np.linalg.norm(frame.project(hv)) < 1e-9


def single_resonance_check(x, delta, params, gamma):
    lab = classify(x, params, gamma)
    if lab.k != 1 or not lab.single_resonance:
        return False, lab
    pd = np.array(lab.primitive_direction)
    dd = np.array(delta)
    return bool(np.array_equal(pd, dd) or np.array_equal(pd, -dd)), lab


def in_B_delta(x, frame, q, params, M=None):
    """Certificate for the single-resonance simple set along frame.delta."""
    x = np.asarray(x, dtype=float)
    _check_shell(x, params)
    gamma = q.gamma
    ok, lab = single_resonance_check(x, frame.delta_coords, params, gamma)
    if not ok:
        raise WrongVariant(f"x is not single-resonant along {frame.delta_coords} "
                           f"(label k = {lab.k}, directions {lab.directions})")
    Px, j, v = split_point(x, frame)
    Q = directional(q, frame)
    Mh = default_hill_size(j + v, Q) if M is None else M
    hill0 = solve_hill(Q, v, Mh)
    inW, min_gap = gap_check_W(hill0, params.rho)
    e0 = float(x @ x)
    extra = {"j": j, "v": v, "min_gap": min_gap, "in_W": inW}
    if not inW:
        return SimpleSetCertificate(x, "B_delta", np.nan, np.nan, (), "Rejected", "OutsideW",
                                    params.eps1, extra)
    corr = E_corrections(x, frame, q, params, params.k_known_res, M=Mh)
    known_rel = corr.lambda_pred - e0
    comps = []
    for h in competitor_offsets(x, known_rel, params, gamma):
        key = tuple(int(c) for c in h)
        y = x + gamma.cart(h)
        try:
            kind, vals, _ = _known_parts_at(y, e0, q, params, gamma)
        except BlochError as exc:
            comps.append(Competitor(key, "error", (), -np.inf, f"{type(exc).__name__}: {exc}"))
            continue
        if kind == "res" and _same_line(h, frame):
            continue  # same delta-line: its states are the Hill labels of x itself
        margin = float(np.min(np.abs(np.array(vals) - known_rel))) - 2 * params.eps1
        comps.append(Competitor(key, kind, vals, margin))
    verdict, reason = _verdict(comps)
    extra["E"] = list(corr.E_values)
    return SimpleSetCertificate(x, "B_delta", corr.lambda_pred, known_rel, tuple(comps),
                                verdict, reason, params.eps1, extra)


def phi_plane_waves(x, frame, q, M=None):
    """Plane-wave offsets and amplitudes of the Hill state of x's own label."""
    Px, j, v = split_point(x, frame)
    Q = directional(q, frame)
    Mh = default_hill_size(j + v, Q) if M is None else M
    hill = solve_hill(Q, v, Mh)
    dc = np.array(frame.delta_coords, dtype=int)
    offs = np.array([(m - j) * dc for m in range(-Mh, Mh + 1)])
    amps = hill.phi[:, j + Mh]
    return offs, amps


def verify_simplicity(cert, spectrum, frame=None, q=None):
    """Check an accepted certificate against oracle eigenpairs.

    ``spectrum`` must come from an oracle solved with ``t = cert.x``.
    """
    e0 = float(cert.x @ cert.x)
    target = (e0 - spectrum.shift) + cert.known_rel
    dist = spectrum.rel - target
    inside = np.flatnonzero(np.abs(dist) <= cert.eps1)
    if len(spectrum) == 0 or len(inside) == 0:
        raise NoCandidate(f"no oracle eigenvalue within eps1 of {cert.known_part:.12g}")
    order = np.argsort(np.abs(dist))
    N = int(order[0])
    gap = float(abs(dist[order[1]])) if len(order) > 1 else np.inf
    if cert.variant == "B":
        dom = spectrum.weight(N, (0,) * len(cert.x))
    else:
        offs, amps = phi_plane_waves(cert.x, frame, q)
        idx = _lookup(spectrum.basis, offs)
        have = idx >= 0  # Hill modes outside the oracle ball carry negligible weight
        dom = float(abs(np.vdot(amps[have], spectrum.vectors[idx[have], N])) ** 2)
    unique = len(inside) == 1
    return {"N": N, "lambda": float(spectrum.eigenvalues[N]), "error": float(dist[N]),
            "gap_to_next": gap, "n_within_eps1": int(len(inside)), "unique": unique,
            "dominance": dom, "pass": bool(unique and dom > 0.5)}


# ------------------------------------------------------------- measure estimation

def _sample_shell(rng, rho, d):
    lo, hi = (0.5 * rho) ** d, (1.5 * rho) ** d
    r = (rng.uniform(lo, hi)) ** (1.0 / d)
    u = rng.standard_normal(d)
    return r * u / np.linalg.norm(u)


def sample_point(region, params, seed, i, frame=None, max_tries=100000):
    """i-th sample of the region's ambient set (shell, or V_delta slab by rejection)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
    d = params.d
    if region in ("U", "B"):
        return _sample_shell(rng, params.rho, d)
    thr = params.threshold(1)
    dv = frame.delta
    for _ in range(max_tries):
        x = _sample_shell(rng, params.rho, d)
        if abs(2 * x @ dv + dv @ dv) <= thr:
            return x
    raise RuntimeError("rejection sampling of V_delta failed")


def member(region, x, q, params, frame=None):
    gamma = q.gamma
    try:
        if region == "U":
            return classify(x, params, gamma).k == 0
        if region == "V_delta":
            v = frame.delta
            return bool(abs(2 * x @ v + v @ v) <= params.threshold(1))
        if region == "B":
            if not trimmed_shell(x, params):
                return False
            return in_B(x, q, params).accepted
        if region == "B_delta":
            if not trimmed_shell(x, params):
                return False
            return in_B_delta(x, frame, q, params).accepted
    except WrongVariant:
        return False
    except BlochError:
        return False
    raise ValueError(f"unknown region {region!r}")


def wilson_interval(k, n, level=0.95):
    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def measure_fraction(region, params, q, n_samples, seed, delta=None):
    """Fraction of samples in ``region`` with a 95% Wilson interval.

    U and B are sampled uniformly in the shell; V_delta (shell) and B_delta
    (within the V_delta slab) use the frame of ``delta``.
    """
    if n_samples < 100:
        raise ValueError("measure_fraction needs at least 100 samples")
    frame = delta_frame(q.gamma, np.asarray(delta, dtype=int)) if delta is not None else None
    if region in ("V_delta", "B_delta") and frame is None:
        raise ValueError(f"region {region} needs delta")
    ambient = "U" if region == "V_delta" else region
    hits = 0
    for i in range(n_samples):
        x = sample_point(ambient, params, seed, i, frame)
        hits += bool(member(region, x, q, params, frame))
    lo, hi = wilson_interval(hits, n_samples)
    return hits / n_samples, (lo, hi)
