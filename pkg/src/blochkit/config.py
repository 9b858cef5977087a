"""Experiment configuration: parsing with line-aware diagnostics, defaults,
serialization, and the objects (lattice, potential, params) it describes.

Accepted text is YAML (JSON is read by the same parser). Example::

    lattice: [[6.283185307179586, 0], [0, 6.283185307179586]]   # Gamma = Z^2
    potential:
      - {gamma: [1, 0], value: 0.05}
      - {gamma: [0, 1], value: [0.0, 0.02]}   # [re, im]
    rho: 15
    radii: {series: 1.5, directions: 1.5, block_a: 2.0}
    seed: 7
"""

from dataclasses import dataclass, field, replace
import hashlib
import json
import logging

import numpy as np
import yaml

from ._validation import positive
from .errors import ConfigError, InvalidLattice, InvalidPotential
from .geometry import MODES, AsymptoticParams
from .lattice import TWO_PI, Lattice, dual
from .potential import FourierPotential

log = logging.getLogger(__name__)

TOP_KEYS = {"lattice", "potential", "smoothness", "rho", "mode", "c4", "kappa", "thresholds",
            "eps1", "radii", "known_order", "known_order_res", "site_cap", "oracle", "seed",
            "output", "points", "delta"}
RADII_KEYS = {"series", "directions", "block_a", "block_b"}
ORACLE_KEYS = {"cutoff", "half_window"}
OUTPUT_KEYS = {"path", "format"}


@dataclass(frozen=True)
class ExperimentConfig:
    lattice: tuple
    potential: tuple            # ((gamma tuple, (re, im)), ...) after conjugate completion
    rho: float
    smoothness: float = None
    mode: str = "paper"
    c4: float = 1.0
    kappa: float = None
    thresholds: tuple = ()      # ((k, value), ...)
    eps1: float = None
    radii: tuple = ()           # ((name, value), ...)
    known_order: int = None
    known_order_res: int = None
    site_cap: int = 2000
    oracle_cutoff: float = None
    oracle_half_window: float = 0.25
    seed: int = 0
    output_path: str = None
    output_format: str = "json"
    points: tuple = ()
    delta: tuple = None
    notes: tuple = field(default=(), compare=False)

    # -- derived objects
    @property
    def period_lattice(self):
        return Lattice(np.array(self.lattice, dtype=float))

    @property
    def gamma(self):
        return dual(self.period_lattice)

    def build_potential(self):
        entries = {g: complex(re, im) for g, (re, im) in self.potential}
        s = 0 if self.smoothness is None else self.smoothness
        return FourierPotential(self.gamma, entries, s)

    def params(self, rho=None):
        r = dict(self.radii)
        return AsymptoticParams(
            rho=self.rho if rho is None else rho, d=len(self.lattice), s=self.smoothness,
            mode=self.mode, kappa=self.kappa, c4=self.c4, thresholds=dict(self.thresholds),
            eps1_override=self.eps1, series_radius=r.get("series"),
            direction_radius=r.get("directions"), block_a_radius=r.get("block_a"),
            block_b_radius=r.get("block_b"), site_cap=self.site_cap,
            known_order=self.known_order, known_order_res=self.known_order_res)

    def with_(self, **changes):
        return replace(self, **changes)

    # -- serialization
    def to_dict(self):
        out = {
            "lattice": [list(r) for r in self.lattice],
            "potential": [{"gamma": list(g), "value": [re, im]} for g, (re, im) in self.potential],
            "rho": self.rho, "smoothness": self.smoothness, "mode": self.mode, "c4": self.c4,
            "kappa": self.kappa, "thresholds": {int(k): v for k, v in self.thresholds},
            "eps1": self.eps1, "radii": dict(self.radii), "known_order": self.known_order,
            "known_order_res": self.known_order_res, "site_cap": self.site_cap,
            "oracle": {"cutoff": self.oracle_cutoff, "half_window": self.oracle_half_window},
            "seed": self.seed,
            "output": {"path": self.output_path, "format": self.output_format},
            "points": [list(p) for p in self.points],
            "delta": None if self.delta is None else list(self.delta),
        }
        return out

    def canonical_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def serialize(cfg, fmt="yaml"):
    if fmt == "json":
        return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=None)


# ------------------------------------------------------------------ parsing

def _marks(node, path=()):
    """Map from key paths to 1-based line numbers in the composed YAML tree."""
    out = {path: node.start_mark.line + 1}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            out.update(_marks(v, path + (str(k.value),)))
            out[path + (str(k.value),)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            out.update(_marks(v, path + (i,)))
    return out


class _Ctx:
    def __init__(self, marks):
        self.marks = marks

    def fail(self, path, msg, exc=ConfigError):
        p = tuple(path)
        while p and p not in self.marks:
            p = p[:-1]
        line = self.marks.get(p)
        where = ".".join(str(c) for c in path) or "<root>"
        prefix = f"line {line}: " if line else ""
        raise exc(f"{prefix}{where}: {msg}")


def _num(ctx, path, v, allow_none=True):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        ctx.fail(path, f"expected a number, got {v!r}")
    return float(v)


def _int(ctx, path, v, allow_none=True):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        ctx.fail(path, f"expected an integer, got {v!r}")
    return int(v)


def _check_keys(ctx, path, data, allowed):
    if not isinstance(data, dict):
        ctx.fail(path, f"expected a mapping, got {type(data).__name__}")
    for k in data:
        if k not in allowed:
            ctx.fail(tuple(path) + (str(k),), f"unknown key (allowed: {sorted(allowed)})")


def _parse_lattice(ctx, raw):
    if isinstance(raw, dict):
        _check_keys(ctx, ("lattice",), raw, {"basis"})
        raw = raw.get("basis")
    if not isinstance(raw, list) or not raw or not all(isinstance(r, list) for r in raw):
        ctx.fail(("lattice",), "expected a list of basis rows")
    d = len(raw)
    rows = []
    for i, r in enumerate(raw):
        if len(r) != d:
            ctx.fail(("lattice", i), f"row has {len(r)} entries, expected {d}")
        rows.append(tuple(_num(ctx, ("lattice", i, j), v, False) for j, v in enumerate(r)))
    try:
        Lattice(np.array(rows))
    except InvalidLattice as exc:
        ctx.fail(("lattice",), str(exc), InvalidLattice)
    return tuple(rows)


def _parse_value(ctx, path, v):
    if isinstance(v, list):
        if len(v) != 2:
            ctx.fail(path, "complex values are written [re, im]")
        return complex(_num(ctx, path + (0,), v[0], False), _num(ctx, path + (1,), v[1], False))
    if isinstance(v, dict):
        _check_keys(ctx, path, v, {"re", "im"})
        return complex(_num(ctx, path, v.get("re", 0.0), False),
                       _num(ctx, path, v.get("im", 0.0), False))
    return complex(_num(ctx, path, v, False))


def _parse_potential(ctx, raw, d, gamma, notes):
    entries = {}
    if raw is None:
        raw = []
    if not isinstance(raw, list):
        ctx.fail(("potential",), "expected a list of {gamma, value} entries")
    for i, item in enumerate(raw):
        path = ("potential", i)
        _check_keys(ctx, path, item, {"gamma", "value"})
        g = item.get("gamma")
        if not isinstance(g, list) or len(g) != d:
            ctx.fail(path + ("gamma",), f"expected {d} integer coordinates")
        if not all(isinstance(c, int) and not isinstance(c, bool) for c in g):
            ctx.fail(path + ("gamma",), f"dual-lattice coordinates must be integers, got {g}")
        key = tuple(g)
        if not any(key):
            ctx.fail(path + ("gamma",), "q_0 must be omitted (zero mean)")
        if key in entries:
            ctx.fail(path + ("gamma",), f"duplicate entry for {key}")
        entries[key] = _parse_value(ctx, path + ("value",), item.get("value"))
    try:
        pot, added = FourierPotential.hermitian(gamma, entries)
    except InvalidPotential as exc:
        ctx.fail(("potential",), str(exc), InvalidPotential)
    for k in added:
        msg = f"potential: completed q{k} as the conjugate of q{tuple(-c for c in k)}"
        log.info(msg)
        notes.append(msg)
    out = []
    for k in sorted(pot.coeffs):
        c = pot.coeffs[k]
        out.append((tuple(int(v) for v in k), (float(c.real), float(c.imag))))
    return tuple(out)


def parse_config(text):
    """Parse and validate configuration text; errors carry line positions."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    if node is None or data is None:
        raise ConfigError("empty configuration")
    ctx = _Ctx(_marks(node))
    _check_keys(ctx, (), data, TOP_KEYS)
    for req in ("lattice", "rho"):
        if req not in data:
            ctx.fail((), f"missing required key {req!r}")
    notes = []
    lattice = _parse_lattice(ctx, data["lattice"])
    d = len(lattice)
    gamma = dual(Lattice(np.array(lattice)))
    potential = _parse_potential(ctx, data.get("potential"), d, gamma, notes)
    rho = _num(ctx, ("rho",), data["rho"], False)
    if rho <= 0:
        ctx.fail(("rho",), "must be positive")
    mode = data.get("mode", "paper")
    if mode not in MODES:
        ctx.fail(("mode",), f"must be one of {list(MODES)}")
    thr = data.get("thresholds") or {}
    if not isinstance(thr, dict):
        ctx.fail(("thresholds",), "expected a mapping k -> value")
    thresholds = []
    for k, v in thr.items():
        if not str(k).isdigit():
            ctx.fail(("thresholds", str(k)), "threshold keys are integers k")
        kk = int(k)
        if not 1 <= kk <= d:
            ctx.fail(("thresholds", str(k)), f"k must lie in 1..{d}")
        thresholds.append((kk, _num(ctx, ("thresholds", str(k)), v, False)))
    radii_raw = data.get("radii") or {}
    _check_keys(ctx, ("radii",), radii_raw, RADII_KEYS)
    radii = tuple(sorted((k, _num(ctx, ("radii", k), v)) for k, v in radii_raw.items()
                         if v is not None))
    orc = data.get("oracle") or {}
    _check_keys(ctx, ("oracle",), orc, ORACLE_KEYS)
    out = data.get("output") or {}
    _check_keys(ctx, ("output",), out, OUTPUT_KEYS)
    fmt = out.get("format", "json")
    if fmt not in ("json", "csv"):
        ctx.fail(("output", "format"), "must be json or csv")
    pts = data.get("points") or []
    if not isinstance(pts, list):
        ctx.fail(("points",), "expected a list of points")
    points = []
    for i, p in enumerate(pts):
        if not isinstance(p, list) or len(p) != d:
            ctx.fail(("points", i), f"expected {d} coordinates")
        points.append(tuple(_num(ctx, ("points", i, j), v, False) for j, v in enumerate(p)))
    delta = data.get("delta")
    if delta is not None:
        if not isinstance(delta, list) or len(delta) != d or not all(
                isinstance(c, int) and not isinstance(c, bool) for c in delta):
            ctx.fail(("delta",), f"expected {d} integer dual coordinates")
        delta = tuple(delta)
    cfg = ExperimentConfig(
        lattice=lattice, potential=potential, rho=rho,
        smoothness=_num(ctx, ("smoothness",), data.get("smoothness")), mode=mode,
        c4=_num(ctx, ("c4",), data.get("c4", 1.0), False),
        kappa=_num(ctx, ("kappa",), data.get("kappa")),
        thresholds=tuple(sorted(thresholds)), eps1=_num(ctx, ("eps1",), data.get("eps1")),
        radii=radii, known_order=_int(ctx, ("known_order",), data.get("known_order")),
        known_order_res=_int(ctx, ("known_order_res",), data.get("known_order_res")),
        site_cap=_int(ctx, ("site_cap",), data.get("site_cap", 2000), False),
        oracle_cutoff=_num(ctx, ("oracle", "cutoff"), orc.get("cutoff")),
        oracle_half_window=positive(orc.get("half_window", 0.25), "oracle.half_window"),
        seed=_int(ctx, ("seed",), data.get("seed", 0), False),
        output_path=out.get("path"), output_format=fmt, points=tuple(points), delta=delta,
        notes=tuple(notes))
    try:
        cfg.params()
    except ValueError as exc:
        ctx.fail((), str(exc))
    return cfg


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def minimal_config(rho=15.0, entries=None, **kw):
    """Config with period lattice 2 pi Z^2 (so Gamma = Z^2); ``entries`` maps dual
    coords to values."""
    lines = {"lattice": [[TWO_PI, 0.0], [0.0, TWO_PI]], "rho": rho,
             "potential": [{"gamma": list(g), "value": [complex(v).real, complex(v).imag]}
                           for g, v in (entries or {}).items()]}
    lines.update(kw)
    return parse_config(yaml.safe_dump(lines))


__all__ = ["ExperimentConfig", "parse_config", "load_config", "serialize", "minimal_config"]
