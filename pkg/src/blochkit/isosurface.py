"""The eigenvalue function on the simple set, its gradient, and tracing of the
isoenergetic surface ``{y : Lambda(y) = rho^2}`` along coordinate axes."""

from dataclasses import dataclass, field
import warnings

import numpy as np

from .errors import Ambiguous, BlochError, LostSimplicity, NoCandidate, NoSignChange
from .nonres import F_series, grad_F1, s_terms
from .oracle import assemble, default_cutoff, eigen
from .simpleset import in_B


@dataclass(frozen=True)
class OracleConfig:
    """Oracle settings: cutoff (None means automatic) and window half-width."""
    cutoff: float = None
    half_window: float = 0.25


@dataclass(frozen=True)
class LambdaValue:
    value: float
    N: int
    dominance: float
    known_part: float
    spectrum: object = field(repr=False, default=None)

    def __iter__(self):
        return iter((self.value, self.N, self.dominance))


def _known(x, q, params, force):
    if not force:
        cert = in_B(x, q, params)
        if not cert.accepted:
            raise NoCandidate(f"x is not certified simple: {cert.reason}")
        return cert.known_rel, params.eps1
    warnings.warn("lambda_of_x forced on an uncertified point", stacklevel=3)
    return F_series(x, q, params, params.k_known).offset, params.eps1


def fixed_basis(x, q, energy_hi, cutoff=None):
    """Integer basis of the oracle ball around x, reusable for nearby points."""
    c = default_cutoff(energy_hi, q) if cutoff is None else cutoff
    return assemble(x, q, c).basis, c


def _spectrum(x, q, centre, half, cutoff, basis, vectors):
    if cutoff is None:
        cutoff = default_cutoff(centre + half, q)
    prob = assemble(x, q, cutoff, basis=basis)
    return eigen(prob, (centre - half, centre + half), shift=centre, vectors=vectors)


def lambda_of_x(x, q, params, oracle_cfg=None, force=False, basis=None, vectors=True):
    """Oracle eigenvalue Lambda(x) paired with the known part F(x).

    Returns a LambdaValue that unpacks to ``(Lambda, N, dominance)``.
    Dominance is ``|b(N, 0)|^2`` (NaN when ``vectors=False``).
    """
    x = np.asarray(x, dtype=float)
    cfg = oracle_cfg or OracleConfig()
    known_rel, eps1 = _known(x, q, params, force)
    e0 = float(x @ x)
    centre = e0 + known_rel
    spec = _spectrum(x, q, centre, max(cfg.half_window, 4 * eps1), cfg.cutoff, basis, vectors)
    dist = spec.rel - (e0 - spec.shift + known_rel)
    inside = np.flatnonzero(np.abs(dist) <= eps1)
    if len(inside) == 0:
        raise NoCandidate(f"no oracle eigenvalue within eps1 = {eps1:.3g} of F(x)")
    if len(inside) > 1:
        raise Ambiguous(f"{len(inside)} oracle eigenvalues within eps1 of F(x)")
    N = int(inside[0])
    dom = np.nan
    if vectors:
        dom = float(abs(spec.vectors[spec.index_of((0,) * len(x)), N]) ** 2)
        if dom <= 0.5:
            raise Ambiguous(f"dominant weight {dom:.3g} <= 1/2")
    return LambdaValue(float(spec.eigenvalues[N]), N, dom, centre, spec)


def grad_lambda(x, q, params, oracle_cfg=None, force=False):
    """Gradient of Lambda at x from the oracle eigenvector: sum 2 (g + x) |b(N, g)|^2."""
    lv = lambda_of_x(x, q, params, oracle_cfg, force=force)
    return lv.spectrum.gradient(lv.N)


# ------------------------------------------------------------------ tracing

@dataclass(frozen=True)
class IsoSurfacePoint:
    y: np.ndarray
    gamma: tuple
    direction: int
    value: float
    residual: float
    bisection_steps: int
    widths: tuple = ()

    def to_dict(self):
        return {"y": self.y.tolist(), "gamma": list(self.gamma), "direction": self.direction,
                "lambda": self.value, "residual": self.residual,
                "bisection_steps": self.bisection_steps}


class _Tracker:
    """Follows one eigenvalue along a segment with a frozen basis.

    At each evaluation the eigenvalue within eps1 of the series value F(y)
    is taken; two candidates mean simplicity was lost.
    """

    def __init__(self, a, q, params, cfg, rho2):
        self.q, self.params, self.cfg = q, params, cfg
        self.basis, self.cutoff = fixed_basis(a, q, rho2 + 2.0, cfg.cutoff)
        self.evals = 0

    def __call__(self, y):
        self.evals += 1
        ser = F_series(y, self.q, self.params, self.params.k_known)
        e0 = float(y @ y)
        centre = e0 + ser.offset
        eps1 = self.params.eps1
        spec = _spectrum(y, self.q, centre, max(self.cfg.half_window, 4 * eps1), self.cutoff,
                         self.basis, vectors=False)
        inside = np.flatnonzero(np.abs(spec.rel) <= eps1)
        if len(inside) == 0:
            raise LostSimplicity("tracked eigenvalue left the eps1 window")
        if len(inside) > 1:
            raise LostSimplicity(f"{len(inside)} eigenvalues within eps1 during bisection")
        return float(spec.eigenvalues[inside[0]])


def trace_point(a, i, eps, rho2, q, params, oracle_cfg=None, tol=None, max_steps=60):
    """Bisect ``Lambda(a + s e_i) = rho2`` for ``s`` in ``[-eps/2, eps/2]``.

    The interval width halves at every step. Stops when the residual is
    below ``tol`` (default ``1e-8 rho2``) or after ``max_steps``.
    """
    a = np.asarray(a, dtype=float)
    cfg = oracle_cfg or OracleConfig()
    tol = 1e-8 * rho2 if tol is None else tol
    lam = _Tracker(a, q, params, cfg, rho2)
    e = np.zeros_like(a)
    e[i] = 1.0
    lo, hi = -0.5 * eps, 0.5 * eps
    f_lo = lam(a + lo * e) - rho2
    f_hi = lam(a + hi * e) - rho2
    if f_lo * f_hi > 0:
        raise NoSignChange(f"Lambda - rho^2 has one sign on the segment ({f_lo:.3g}, {f_hi:.3g})")
    widths = [hi - lo]
    steps = 0
    best = (lo, f_lo) if abs(f_lo) < abs(f_hi) else (hi, f_hi)
    while abs(best[1]) >= tol and steps < max_steps:
        mid = 0.5 * (lo + hi)
        f_mid = lam(a + mid * e) - rho2
        steps += 1
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        widths.append(hi - lo)
        if abs(f_mid) < abs(best[1]):
            best = (mid, f_mid)
    y = a + best[0] * e
    gamma = tuple(int(v) for v in np.floor(q.gamma.coords(y)))
    return IsoSurfacePoint(y, gamma, int(i), float(rho2 + best[1]), float(abs(best[1])),
                           steps, tuple(widths))


def seed_radius(u, rho, q, params):
    """One Newton step from r = rho on ``r^2 + F_1(r u) = rho^2``."""
    u = np.asarray(u, dtype=float)
    x = rho * u
    f1 = s_terms(float(x @ x), x, q, params, 1)[0]
    # residual of the equation at r = rho is F_1 itself
    dg = 2.0 * rho + float(u @ grad_F1(x, q, params))
    return rho - f1 / dg


@dataclass
class SurfaceSample:
    points: list
    records: list
    n_dirs: int

    @property
    def fraction(self):
        return len(self.points) / self.n_dirs if self.n_dirs else 0.0

    @property
    def spectrum_witness(self):
        """At least one traced point: rho^2 is a numerical spectral value."""
        return len(self.points) > 0

    def to_dict(self):
        return {"n_dirs": self.n_dirs, "found": len(self.points), "fraction": self.fraction,
                "witness": self.spectrum_witness,
                "points": [p.to_dict() for p in self.points], "records": self.records}


def _unit(rng, d):
    u = rng.standard_normal(d)
    return u / np.linalg.norm(u)


def surface_sample(rho, q, params, n_dirs, seed, eps=1e-3, retries=4, jitter=0.1,
                   oracle_cfg=None, tol=None):
    """Trace up to one surface point for each of ``n_dirs`` random directions."""
    rho2 = rho * rho
    d = q.gamma.dim
    points, records = [], []
    for k in range(n_dirs):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        u0 = _unit(rng, d)
        rec = {"index": k, "direction": u0.tolist(), "status": "failed", "attempts": 0}
        for attempt in range(retries + 1):
            u = u0 if attempt == 0 else _unit_jitter(rng, u0, jitter)
            rec["attempts"] = attempt + 1
            try:
                a = seed_radius(u, rho, q, params) * u
                if not in_B(a, q, params).accepted:
                    rec["status"] = "not certified"
                    continue
                i = int(np.argmax(np.abs(u)))
                pt = trace_point(a, i, eps, rho2, q, params, oracle_cfg, tol=tol)
            except BlochError as exc:
                rec["status"] = f"{type(exc).__name__}: {exc}"
                continue
            rec.update({"status": "ok", "y": pt.y.tolist(), "lambda": pt.value,
                        "residual": pt.residual, "steps": pt.bisection_steps})
            points.append(pt)
            break
        records.append(rec)
    return SurfaceSample(points, records, n_dirs)


def _unit_jitter(rng, u, scale):
    v = u + scale * rng.standard_normal(len(u))
    return v / np.linalg.norm(v)


def lattice_translates(points, gamma, tol=1e-9):
    """Pairs (i, j) of points that differ by a lattice vector."""
    P = np.array([np.asarray(p, dtype=float) for p in points])
    out = []
    for i in range(len(P)):
        diff = P[i + 1:] - P[i]
        c = diff @ np.linalg.inv(gamma.basis)
        hit = np.all(np.abs(c - np.round(c)) < tol, axis=1)
        out.extend((i, i + 1 + int(j)) for j in np.flatnonzero(hit))
    return out
