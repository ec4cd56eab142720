"""Shared plumbing: seed derivation, reproducible formatting, hashed file I/O.

All randomness in the package flows from a single master seed through
``derive_seed`` (a splitmix64 step), so any run is reproducible from the seed
recorded in its manifest.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One splitmix64 output for the given 64-bit state."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master: int, *indices: int) -> int:
    """Derive a child seed from a master seed and a path of indices.

    Each index advances the splitmix64 state by (index + 1) steps of the
    golden-ratio increment before mixing, so (master, 0) != (master, 1) and
    derivation is associative-free but fully documented: callers must use
    stable index paths.
    """
    state = master & _MASK64
    for idx in indices:
        state = (state + (idx + 1) * _GOLDEN) & _MASK64
        state = splitmix64(state)
    return state


def fmt9(x: float) -> str:
    """Format a float with 9 significant digits (fixed across platforms)."""
    if x != x:
        return "nan"
    if x == float("inf"):
        return "inf"
    if x == float("-inf"):
        return "-inf"
    return f"{x:.9g}"


def _round9(obj):
    if isinstance(obj, float):
        return float(fmt9(obj))
    if isinstance(obj, dict):
        return {k: _round9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round9(v) for v in obj]
    return obj


def dump_json(obj, path: str | Path) -> None:
    """Write JSON with 9-significant-digit floats, LF endings, sorted keys."""
    text = json.dumps(_round9(obj), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8", newline="\n")


def load_json(path: str | Path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def dump_csv(path: str | Path, header: list[str], rows) -> None:
    """Write a CSV with LF endings and 9-significant-digit floats."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt9(v) if isinstance(v, float) else v for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def load_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
