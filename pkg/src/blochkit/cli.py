"""Command-line interface.

Every command writes one artifact (JSON document or CSV table) that carries
a manifest: the command, its arguments, the seed, the full configuration and
its SHA-256, and library versions. Exit status is 0 on success, 2 on domain
errors and 3 on numerical failures.
"""

import argparse
import csv
import io
import json
import logging
import sys

import numpy as np

from .config import load_config, minimal_config
from .errors import BlochError, ConfigError
from .manifest import build_manifest, manifest_header

log = logging.getLogger("blochkit")

DEFAULT_ENTRIES = {(1, 0): 0.05, (1, 1): 0.05}
DEFAULT_RADII = {"series": 1.5, "directions": 1.5, "block_a": 2.0}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def _vec(text, cast=float):
    try:
        return [cast(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse vector {text!r}") from exc


def _points(args, cfg):
    pts = [np.array(_vec(p)) for p in (args.point or [])]
    if not pts:
        pts = [np.array(p) for p in cfg.points]
    if not pts:
        raise ConfigError("no points: pass --point or list points in the config")
    d = len(cfg.lattice)
    for p in pts:
        if len(p) != d:
            raise ConfigError(f"point {p.tolist()} must have {d} coordinates")
    return pts


def _delta(args, cfg):
    raw = getattr(args, "delta", None)
    if raw is not None:
        return np.array(_vec(raw, int), dtype=int)
    if cfg.delta is not None:
        return np.array(cfg.delta, dtype=int)
    raise ConfigError("this command needs --delta or a delta entry in the config")


def _oracle_match(x, approx, q, cfg):
    """Nearest oracle eigenvalue to ``approx``, or the reason there is none."""
    from .oracle import match, solve
    h = cfg.oracle_half_window
    try:
        sp = solve(x, q, (approx - h, approx + h), cutoff=cfg.oracle_cutoff, shift=approx)
        m = match(0.0, sp, h, relative=True)
    except BlochError as exc:
        return {"status": f"{type(exc).__name__}: {exc}"}
    return {"status": "ok", "N": m.N, "lambda": m.value, "error": m.error,
            "gap_to_next": m.gap_to_next, "ambiguous": m.ambiguous}


# ------------------------------------------------------------------ commands

def cmd_classify(args, cfg, q, params):
    from .geometry import classify
    rows = []
    for x in _points(args, cfg):
        lab = classify(x, params, q.gamma)
        rows.append({"x": x.tolist(), **lab.to_dict()})
    return {"labels": rows}, rows


def cmd_series(args, cfg, q, params):
    from .nonres import F_series, bloch_series
    k = args.order or params.k_known
    rows = []
    for x in _points(args, cfg):
        ser = F_series(x, q, params, k)
        row = ser.to_dict()
        row["match"] = _oracle_match(x, ser.lambda_pred, q, cfg)
        if args.bloch:
            row["bloch"] = bloch_series(x, q, params, k).to_dict()
        rows.append(row)
    table = [{"x": r["x"], "order": r["order"], "lambda_pred": r["lambda_pred"],
              "offset": r["offset"], "oracle_error": r["match"].get("error")} for r in rows]
    return {"series": rows}, table


def cmd_resblock(args, cfg, q, params):
    from .geometry import classify
    from .resblock import resonance_block
    out = []
    for x in _points(args, cfg):
        if args.directions:
            dirs = [tuple(_vec(d, int)) for d in args.directions]
        else:
            dirs = classify(x, params, q.gamma).directions
        blk = resonance_block(x, dirs, q, params)
        out.append(blk.to_dict())
    rows = [{"x": b["x"], "n_sites": len(b["sites"]), "eigenvalues": b["eigenvalues"]}
            for b in out]
    return {"blocks": out}, rows


def cmd_hill(args, cfg, q, params):
    from .hill import gap_check_W, solve_hill
    from .lattice import delta_frame
    from .potential import directional
    frame = delta_frame(q.gamma, _delta(args, cfg))
    Q = directional(q, frame)
    hs = solve_hill(Q, args.v, args.M)
    inW, gap = gap_check_W(hs, params.rho)
    res = {**hs.to_dict(), "in_W": inW, "min_gap": gap}
    rows = [{"j": j, "mu": m} for j, m in zip(res["j"], res["mu"])]
    return res, rows


def cmd_singleres(args, cfg, q, params):
    from .hill import E_corrections
    from .lattice import delta_frame
    frame = delta_frame(q.gamma, _delta(args, cfg))
    k = args.order or params.k_known_res
    rows = []
    for x in _points(args, cfg):
        c = E_corrections(x, frame, q, params, k, require_W=not args.allow_outside_w)
        rows.append({"x": x.tolist(), **c.to_dict(),
                     "match": _oracle_match(x, c.lambda_pred, q, cfg)})
    return {"corrections": rows}, rows


def cmd_oracle(args, cfg, q, params):
    from .oracle import solve
    rows, out = [], []
    for x in _points(args, cfg):
        e0 = float(x @ x)
        h = args.half_window if args.half_window is not None else cfg.oracle_half_window
        win = tuple(_vec(args.window)) if args.window else (e0 - h, e0 + h)
        if len(win) != 2 or win[0] >= win[1]:
            raise ConfigError(f"--window needs lo,hi with lo < hi, got {args.window!r}")
        cut = args.cutoff if args.cutoff is not None else cfg.oracle_cutoff
        sp = solve(x, q, win, cutoff=cut, shift=0.5 * (win[0] + win[1]))
        out.append({"x": x.tolist(), "window": list(sp.window), "eigenvalues": sp.eigenvalues,
                    "basis_size": len(sp.basis)})
        rows.extend({"x": x.tolist(), "N": i, "lambda": float(v)}
                    for i, v in enumerate(sp.eigenvalues))
    return {"spectra": out}, rows


def cmd_simpleset(args, cfg, q, params):
    from .lattice import delta_frame
    from .oracle import solve
    from .simpleset import in_B, in_B_delta, verify_simplicity
    rows, out = [], []
    frame = delta_frame(q.gamma, _delta(args, cfg)) if args.variant == "Bdelta" else None
    for x in _points(args, cfg):
        cert = in_B(x, q, params) if frame is None else in_B_delta(x, frame, q, params)
        d = cert.to_dict()
        if args.verify and cert.accepted:
            e = float(x @ x) + cert.known_rel
            sp = solve(x, q, (e - 0.25, e + 0.25), cutoff=cfg.oracle_cutoff, shift=e)
            d["verification"] = verify_simplicity(cert, sp, frame=frame, q=q)
        out.append(d)
        rows.append({"x": x.tolist(), "verdict": cert.verdict, "reason": cert.reason,
                     "known_part": cert.known_part})
    return {"certificates": out}, rows


def cmd_measure(args, cfg, q, params):
    from .simpleset import measure_fraction
    delta = _delta(args, cfg) if args.region in ("V_delta", "B_delta") else None
    frac, (lo, hi) = measure_fraction(args.region, params, q, args.n, args.seed, delta=delta)
    res = {"region": args.region, "n": args.n, "fraction": frac, "ci": [lo, hi],
           "rho": params.rho}
    return res, [res]


def cmd_surface(args, cfg, q, params):
    from .isosurface import surface_sample
    s = surface_sample(params.rho, q, params, args.n, args.seed, eps=args.eps)
    rows = []
    for r in s.records:
        rows.append({"index": r["index"], "direction": r["direction"], "y": r.get("y"),
                     "lambda": r.get("lambda"),
                     "residual": r.get("residual"), "status": r["status"]})
    summary = {"n_dirs": s.n_dirs, "found": len(s.points), "fraction": s.fraction,
               "witness": s.spectrum_witness, "rho2": params.rho ** 2, "rows": rows}
    return summary, rows


def cmd_compare(args, cfg, q, params):
    from .geometry import classify
    from .nonres import F_series
    from .oracle import solve
    from .simpleset import sample_point
    k = args.order
    if args.point or cfg.points:
        pts = _points(args, cfg)
    else:
        pts, i = [], 0
        while len(pts) < args.n:
            x = sample_point("U", params, args.seed, i)
            i += 1
            if classify(x, params, q.gamma).k == 0:
                pts.append(x)
    rows = []
    for x in pts:
        ser = F_series(x, q, params, k)
        e0 = float(x @ x)
        sp = solve(x, q, (e0 - 0.25, e0 + 0.25), cutoff=cfg.oracle_cutoff, shift=e0)
        j = int(np.argmin(np.abs(sp.rel - ser.offset)))
        err = float(sp.rel[j] - ser.offset)
        rows.append({"x": x.tolist(), "lambda_pred": ser.lambda_pred,
                     "lambda_oracle": float(sp.eigenvalues[j]), "error": err})
    return {"order": k, "rows": rows,
            "median_abs_error": float(np.median([abs(r["error"]) for r in rows]))}, rows


def cmd_selfcheck(args, cfg, q, params):
    from .geometry import check_param_inequalities
    rep = check_param_inequalities(params)
    return {"params": params.to_dict(), "inequalities": rep,
            "all_hold": all(r["holds"] for r in rep)}, rep


COMMANDS = {"classify": cmd_classify, "series": cmd_series, "resblock": cmd_resblock,
            "hill": cmd_hill, "singleres": cmd_singleres, "oracle": cmd_oracle,
            "simpleset": cmd_simpleset, "measure": cmd_measure, "surface": cmd_surface,
            "compare": cmd_compare, "selfcheck": cmd_selfcheck}


def _common(suppress):
    # subcommands repeat the global options; SUPPRESS keeps them from
    # resetting values given before the subcommand name
    kw = {"argument_default": argparse.SUPPRESS} if suppress else {}
    common = argparse.ArgumentParser(add_help=False, **kw)
    common.add_argument("--config", help="YAML or JSON experiment configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), help="artifact format")
    common.add_argument("--threads", type=int, help="BLAS thread limit")
    common.add_argument("--rho", type=float, help="energy scale (overrides the config)")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser():
    p = argparse.ArgumentParser(prog="blochkit", description=__doc__.splitlines()[0],
                                parents=[_common(False)])
    p.set_defaults(threads=1)
    sub = p.add_subparsers(dest="command", required=True)
    common = _common(True)

    def add(name, help_):
        return sub.add_parser(name, help=help_, parents=[common])

    def with_points(sp, *aliases):
        sp.add_argument("--point", *aliases, action="append", dest="point",
                        help="comma-separated coordinates")
        return sp

    with_points(add("classify", "domain label of points"))
    sp = with_points(add("series", "eigenvalue series F_{k-1}"))
    sp.add_argument("--order", type=int)
    sp.add_argument("--bloch", action="store_true", help="also emit Bloch coefficients")
    sp = with_points(add("resblock", "resonance block spectrum"))
    sp.add_argument("--directions", "--dirs", action="append", help="direction as integer dual coords")
    sp = add("hill", "Hill operator spectrum for a direction")
    sp.add_argument("--delta")
    sp.add_argument("--v", type=float, required=True)
    sp.add_argument("--M", "-M", type=int, default=24)
    sp = with_points(add("singleres", "single-resonance corrections"))
    sp.add_argument("--delta")
    sp.add_argument("--order", type=int)
    sp.add_argument("--allow-outside-w", action="store_true")
    sp = with_points(add("oracle", "Galerkin eigenvalues near |x|^2"), "--t")
    sp.add_argument("--half-window", type=float)
    sp.add_argument("--window", help="explicit energy window lo,hi")
    sp.add_argument("--cutoff", type=float, help="basis radius (default: automatic)")
    sp = with_points(add("simpleset", "simple-set certificate"))
    sp.add_argument("--variant", choices=("B", "Bdelta"), default="B")
    sp.add_argument("--delta")
    sp.add_argument("--verify", action="store_true", help="check against the oracle")
    sp = add("measure", "Monte-Carlo region fraction")
    sp.add_argument("--region", choices=("U", "V_delta", "B", "B_delta"), required=True)
    sp.add_argument("-n", type=int, default=1000)
    sp.add_argument("--delta")
    sp = add("surface", "trace isoenergetic surface points")
    sp.add_argument("-n", type=int, default=20)
    sp.add_argument("--eps", type=float, default=1e-3)
    sp = with_points(add("compare", "series prediction vs oracle"))
    sp.add_argument("--order", type=int, default=3)
    sp.add_argument("-n", type=int, default=10)
    add("selfcheck", "parameter inequality report")
    return p


def _load(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = minimal_config(15.0, DEFAULT_ENTRIES, radii=DEFAULT_RADII)
    if args.rho is not None:
        cfg = cfg.with_(rho=float(args.rho))
    if args.seed is not None:
        cfg = cfg.with_(seed=int(args.seed))
    for note in cfg.notes:
        log.info(note)
    return cfg


def _cell(v):
    if isinstance(v, (list, dict)):
        return json.dumps(v, separators=(",", ":"))
    return "" if v is None else v


def render(result, rows, manifest, fmt):
    if fmt == "json":
        return json.dumps({"manifest": manifest, "result": _jsonable(result)}, indent=2,
                          sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(manifest_header(manifest) + "\n")
    rows = _jsonable(rows if rows is not None else [result])
    if rows:
        fields = list(rows[0].keys())
        for r in rows[1:]:
            fields += [k for k in r if k not in fields]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(r.get(k)) for k in fields})
    return buf.getvalue()


def run(argv=None):
    """Parse arguments, dispatch and write the artifact. Returns the exit status."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from threadpoolctl import threadpool_limits
    try:
        with threadpool_limits(limits=max(1, args.threads)):
            return _execute(args)
    except BlochError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return exc.exit_code
    except ValueError as exc:
        sys.stderr.write(f"ValueError: {exc}\n")
        return 2


def _execute(args):
    cfg = _load(args)
    args.seed = cfg.seed
    q = cfg.build_potential()
    params = cfg.params()
    result, rows = COMMANDS[args.command](args, cfg, q, params)
    fmt = args.format or cfg.output_format
    recorded = {k: v for k, v in sorted(vars(args).items())
                if k not in ("out", "format", "verbose", "config", "threads")}
    manifest = build_manifest(cfg, args.command, _jsonable(recorded), cfg.seed)
    text = render(result, rows, manifest, fmt)
    out = args.out or cfg.output_path
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
