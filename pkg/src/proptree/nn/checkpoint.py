"""Model checkpoints: a zip holding a JSON manifest plus one .npy per parameter.

Arrays are stored via numpy's own .npy writer (version 1.0 headers), so a
round trip is bit exact.  ``format_version`` guards against loading files
written by an incompatible release.
"""

from __future__ import annotations

import io
import json
import zipfile
from typing import Any

import numpy as np

FORMAT_VERSION = 1


def save_checkpoint(path: str, manifest: dict[str, Any], params: dict[str, np.ndarray]) -> None:
    """Write ``manifest`` and named arrays to a zip at ``path``."""
    doc = dict(manifest)
    doc["format_version"] = FORMAT_VERSION
    doc["param_names"] = sorted(params)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.json", json.dumps(doc, indent=2, sort_keys=True))
        for name in sorted(params):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(params[name], dtype=np.float64))
            zf.writestr(f"params/{name}.npy", buf.getvalue())


def load_checkpoint(path: str) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    """Read a checkpoint zip; returns (manifest, params)."""
    with zipfile.ZipFile(path, "r") as zf:
        manifest = json.loads(zf.read("manifest.json"))
        version = manifest.get("format_version")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format_version {version!r}, expected {FORMAT_VERSION}")
        params = {}
        for name in manifest["param_names"]:
            with zf.open(f"params/{name}.npy") as fh:
                params[name] = np.lib.format.read_array(fh)
    return manifest, params
