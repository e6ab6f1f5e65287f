"""Solution files: a JSON header plus base64 payloads for ``a`` and ``b``.

Arrays are little-endian float64 in row-major (radius-major) order, shape
``(n_r, n_theta)``.  ``phi`` is never stored; readers recompute it.
"""

from __future__ import annotations

import base64
import binascii
import json
from pathlib import Path

import numpy as np

from .grid import GridSpec

FORMAT = "hsystem-solution"
VERSION = 1


class SolutionFileError(ValueError):
    """Malformed, truncated or inconsistent solution file."""


def _encode(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8")
    return {"dtype": "<f8", "shape": list(data.shape),
            "data": base64.b64encode(data.tobytes()).decode("ascii")}


def _decode(obj, shape) -> np.ndarray:
    try:
        if obj["dtype"] != "<f8" or list(obj["shape"]) != list(shape):
            raise SolutionFileError(f"array header {obj.get('dtype')}, {obj.get('shape')} "
                                    f"does not match grid shape {tuple(shape)}")
        raw = base64.b64decode(obj["data"], validate=True)
    except (KeyError, TypeError, binascii.Error) as exc:
        raise SolutionFileError(f"bad array payload: {exc}") from exc
    n = int(np.prod(shape))
    if len(raw) != 8 * n:
        raise SolutionFileError(f"payload has {len(raw)} bytes, expected {8 * n}")
    arr = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(float)
    if not np.all(np.isfinite(arr)):
        raise SolutionFileError("payload contains non-finite values")
    return arr


def solution_document(spec: GridSpec, m: int, a: np.ndarray, b: np.ndarray,
                      lam: float | None = None, energy: float | None = None) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "grid": {"r0": spec.r0, "n_r": spec.n_r, "n_theta": spec.n_theta},
        "m": int(m),
        "lambda": lam,
        "energy": energy,
        "arrays": {"a": _encode(a), "b": _encode(b)},
    }


def save_solution(path, spec: GridSpec, m: int, a, b, lam=None, energy=None) -> Path:
    path = Path(path)
    doc = solution_document(spec, m, a, b, lam, energy)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    return path


def save_solution_of(path, sol) -> Path:
    """Write a ``minimizer.Solution``."""
    g = sol.grid
    return save_solution(path, g.spec, sol.m, sol.pair.a.values, sol.pair.b.values,
                         float(sol.eval.lam), float(sol.eval.value))


def load_solution(path):
    """Return ``(spec, m, a, b)``; raises ``SolutionFileError`` on any defect."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SolutionFileError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise SolutionFileError(f"{path}: not an {FORMAT} file")
    if doc.get("version") != VERSION:
        raise SolutionFileError(f"{path}: unsupported version {doc.get('version')}")
    try:
        gd = doc["grid"]
        spec = GridSpec(float(gd["r0"]), int(gd["n_r"]), int(gd["n_theta"]))
        m = int(doc["m"])
        arrays = doc["arrays"]
        shape = (spec.n_r, spec.n_theta)
        a = _decode(arrays["a"], shape)
        b = _decode(arrays["b"], shape)
    except (KeyError, TypeError) as exc:
        raise SolutionFileError(f"{path}: missing field {exc}") from exc
    except SolutionFileError:
        raise
    except ValueError as exc:
        raise SolutionFileError(f"{path}: {exc}") from exc
    return spec, m, a, b
