"""Reproducibility plumbing: seeded random streams and artifact manifests."""

import json
import platform

import numpy as np
import scipy

from . import __version__


def rng_for(seed, *counter):
    """Independent generator for one work item, split from the master seed by counter."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(counter)))


def versions():
    return {"blochkit": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def build_manifest(cfg, command, args, seed):
    """Everything needed to regenerate an artifact; deliberately free of timestamps."""
    return {"command": command, "args": args, "seed": int(seed),
            "config_sha256": cfg.digest(), "config": cfg.to_dict(), "versions": versions()}


def manifest_header(manifest):
    """One-line CSV comment carrying the manifest."""
    return "# manifest " + json.dumps(manifest, sort_keys=True, separators=(",", ":"))


def read_manifest_header(line):
    if not line.startswith("# manifest "):
        raise ValueError("not a manifest header line")
    return json.loads(line[len("# manifest "):])
