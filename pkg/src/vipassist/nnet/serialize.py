"""JSON weight files: full float64 round trip, strict validation on load."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import NetworkSpec, Parameters, shape_table

FORMAT_VERSION = 1


class WeightLoadError(Exception):
    """Raised when a weight file is malformed, truncated, or inconsistent."""


def save(spec: NetworkSpec, params: Parameters, path) -> None:
    doc = {
        "version": FORMAT_VERSION,
        "arch": spec.arch,
        "dims": {
            "input_dim": spec.input_dim,
            "hidden_dims": list(spec.hidden_dims),
            "output_dim": spec.output_dim,
            "output_activation": spec.output_activation,
        },
        "shapes": [{"name": n, "rows": r, "cols": c} for n, r, c in params.table],
        # repr floats survive the round trip bit for bit
        "data": [float(v) for v in params.data],
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load(path):
    """Read a weight file back into (NetworkSpec, Parameters)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise WeightLoadError(f"unreadable weight file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise WeightLoadError(f"weight file {path} is not a JSON object")
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise WeightLoadError(f"unsupported weight format version {version!r}")
    try:
        dims = doc["dims"]
        spec = NetworkSpec(
            arch=doc["arch"],
            input_dim=int(dims["input_dim"]),
            hidden_dims=tuple(int(h) for h in dims["hidden_dims"]),
            output_dim=int(dims["output_dim"]),
            output_activation=dims["output_activation"],
        )
        shapes = tuple((s["name"], int(s["rows"]), int(s["cols"])) for s in doc["shapes"])
        data = np.asarray(doc["data"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise WeightLoadError(f"malformed weight file {path}: {exc}") from exc
    if shapes != shape_table(spec):
        raise WeightLoadError(f"shape table in {path} does not match its declared network")
    try:
        params = Parameters(data, shapes)
    except ValueError as exc:
        raise WeightLoadError(f"truncated weight data in {path}: {exc}") from exc
    if not np.all(np.isfinite(params.data)):
        raise WeightLoadError(f"non-finite weight value in {path}")
    return spec, params
