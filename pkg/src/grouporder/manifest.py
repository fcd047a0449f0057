"""Run manifests and byte-stable JSON output."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


def _format_float(v: float) -> str:
    if not math.isfinite(v):
        return "null"
    if v == 0.0:
        return "0.0"
    s = format(v, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj, indent, level, out):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_format_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = sorted(((str(k), v) for k, v in obj.items()), key=lambda kv: kv[0])
        for n, (k, v) in enumerate(items):
            out.append(pad + json.dumps(k, ensure_ascii=False))
            out.append(": ")
            _encode(v, indent, level + 1, out)
            out.append(",\n" if n < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray, set, frozenset)):
        seq = sorted(obj) if isinstance(obj, (set, frozenset)) else list(obj)
        if not seq:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list, tuple, np.ndarray, set, frozenset)) for v in seq):
            out.append("[")
            for n, v in enumerate(seq):
                _encode(v, indent, level, out)
                if n < len(seq) - 1:
                    out.append(", ")
            out.append("]")
            return
        out.append("[\n")
        for n, v in enumerate(seq):
            out.append(pad)
            _encode(v, indent, level + 1, out)
            out.append(",\n" if n < len(seq) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON with sorted keys, 17-significant-digit floats and null for NaN/inf."""
    out: list[str] = []
    _encode(obj, indent, 0, out)
    return "".join(out) + "\n"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    seed: int | None = None
    version: str = __version__
    inputs: dict = field(default_factory=dict)  # file name -> sha256

    def add_input(self, path) -> None:
        self.inputs[Path(path).name] = file_digest(path)

    def to_dict(self) -> dict:
        return {"subcommand": self.subcommand, "config": self.config, "seed": self.seed,
                "version": self.version, "input_sha256": dict(self.inputs)}
