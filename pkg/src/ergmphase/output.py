"""CSV/JSON writers with a reproducibility header."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

from . import __version__


def package_version() -> str:
    return __version__


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def metadata(config: dict) -> dict:
    return {
        "package": "ergmphase",
        "version": package_version(),
        "config_hash": config_hash(config),
        "seed": config.get("seed"),
        "config": config,
    }


def _fmt(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return x


def write_csv(path, columns, rows, config: dict):
    """Write ``rows`` under ``#``-prefixed metadata lines and a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = metadata(config)
    with path.open("w", newline="") as f:
        f.write(f"# {meta['package']} {meta['version']}\n")
        f.write(f"# config_hash: {meta['config_hash']}\n")
        f.write(f"# seed: {meta['seed']}\n")
        f.write(f"# config: {json.dumps(config, sort_keys=True, default=str)}\n")
        w = csv.writer(f)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(float(x)) if hasattr(x, "dtype") else _fmt(x) for x in row])
    return path


def read_csv(path) -> tuple[dict, list[dict]]:
    """Inverse of :func:`write_csv`; values are returned as strings."""
    meta = {}
    lines = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            body = line[2:]
            if body.startswith("config: "):
                meta["config"] = json.loads(body[len("config: ") :])
            elif ": " in body:
                k, v = body.split(": ", 1)
                meta[k] = v
            else:
                meta["package"] = body
        else:
            lines.append(line)
    return meta, list(csv.DictReader(lines))


def write_json(path, payload: dict, config: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"meta": metadata(config), **payload}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(x):
    if hasattr(x, "tolist"):
        return x.tolist()
    return str(x)
