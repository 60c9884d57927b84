"""Grid and law files, delimited report output, and the BPC conversion.

Grid files are CSV with the mandatory header ``n,d,loss`` (LF or CRLF line
endings). Law files are a JSON document carrying a format version, the family
tag, the parameter map and a provenance block. Floats are written with
``repr`` so every value survives a save/load cycle bit-for-bit.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ._version import __version__
from .core import DEFAULT_LAMBDA, ChinchillaParams, FarseerParams, LossGrid, LossPoint
from .errors import GridError, ParseError

GRID_HEADER = ("n", "d", "loss")
LAW_FORMAT = "farseer-law"
LAW_VERSION = 1
_FAMILIES = {"farseer": FarseerParams, "chinchilla": ChinchillaParams}


# --------------------------------------------------------------------------
# Grid files


def parse_grid(text: str, lam: float = DEFAULT_LAMBDA, source: str = "<string>") -> LossGrid:
    """Parse grid CSV text; errors carry ``source:line:column``."""
    reader = csv.reader(_io.StringIO(text, newline=""))
    header = None
    points = []
    first_line: dict[tuple[float, float], int] = {}
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        cells = [cell.strip() for cell in row]
        if header is None:
            if tuple(c.lower() for c in cells) != GRID_HEADER:
                raise ParseError(f"{source}:{line}: expected header 'n,d,loss', got {','.join(cells)!r}")
            header = cells
            continue
        if len(cells) != 3:
            raise ParseError(f"{source}:{line}: expected 3 columns, got {len(cells)}")
        values = []
        for col, (name, cell) in enumerate(zip(GRID_HEADER, cells), start=1):
            try:
                values.append(float(cell))
            except ValueError:
                raise ParseError(f"{source}:{line}:{col}: {name} is not a number: {cell!r}") from None
        try:
            point = LossPoint(*values)
        except GridError as exc:
            raise GridError(f"{source}:{line}: {exc}") from None
        key = (point.n, point.d)
        if key in first_line:
            raise GridError(
                f"{source}:{line}: duplicate (n, d) = ({point.n!r}, {point.d!r}), "
                f"first seen on line {first_line[key]}"
            )
        first_line[key] = line
        points.append(point)
    if header is None:
        raise ParseError(f"{source}: empty file, expected header 'n,d,loss'")
    return LossGrid(points, lam)


def load_grid(path, lam: float = DEFAULT_LAMBDA) -> LossGrid:
    path = Path(path)
    return parse_grid(path.read_text(encoding="utf-8"), lam, str(path))


def format_grid(grid: LossGrid) -> str:
    lines = [",".join(GRID_HEADER)]
    lines += [f"{p.n!r},{p.d!r},{p.loss!r}" for p in grid]
    return "\n".join(lines) + "\n"


def save_grid(grid: LossGrid, path) -> None:
    Path(path).write_text(format_grid(grid), encoding="utf-8")


def grid_digest(grid: LossGrid) -> str:
    """SHA-256 of the canonical CSV form of ``grid``."""
    return hashlib.sha256(format_grid(grid).encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# Law files


@dataclass
class LawFile:
    law: FarseerParams | ChinchillaParams
    method: str = "unknown"
    grid_digest: str | None = None
    config: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    tool_version: str = __version__

    @property
    def family(self) -> str:
        return "farseer" if isinstance(self.law, FarseerParams) else "chinchilla"

    def to_dict(self) -> dict:
        return {
            "format": LAW_FORMAT,
            "version": LAW_VERSION,
            "family": self.family,
            "params": self.law.as_dict(),
            "provenance": {
                "method": self.method,
                "grid_sha256": self.grid_digest,
                "config": self.config,
                "tool_version": self.tool_version,
                "warnings": list(self.warnings),
            },
        }

    @classmethod
    def from_dict(cls, doc: dict, source: str = "<law>") -> LawFile:
        if not isinstance(doc, dict) or doc.get("format") != LAW_FORMAT:
            raise ParseError(f"{source}: not a law file (format tag {doc.get('format') if isinstance(doc, dict) else None!r})")
        if doc.get("version") != LAW_VERSION:
            raise ParseError(f"{source}: unsupported law file version {doc.get('version')!r}")
        family = doc.get("family")
        if family not in _FAMILIES:
            raise ParseError(f"{source}: unknown family {family!r}")
        kind = _FAMILIES[family]
        params = doc.get("params")
        if not isinstance(params, dict) or set(params) != set(kind.NAMES):
            raise ParseError(
                f"{source}: family {family!r} needs exactly {len(kind.NAMES)} parameters "
                f"{kind.NAMES}, got {sorted(params) if isinstance(params, dict) else params!r}"
            )
        try:
            law = kind(**{k: float(params[k]) for k in kind.NAMES})
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{source}: bad parameter value: {exc}") from None
        prov = doc.get("provenance") or {}
        return cls(
            law=law,
            method=prov.get("method", "unknown"),
            grid_digest=prov.get("grid_sha256"),
            config=prov.get("config") or {},
            warnings=list(prov.get("warnings") or []),
            tool_version=prov.get("tool_version", "unknown"),
        )


def save_law(law_file: LawFile, path) -> None:
    Path(path).write_text(json.dumps(law_file.to_dict(), indent=2, default=_jsonable) + "\n", encoding="utf-8")


def load_law(path) -> LawFile:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return LawFile.from_dict(doc, str(path))


# --------------------------------------------------------------------------
# Reports


def _jsonable(obj):
    """Fallback encoder for numpy scalars/arrays and tuples."""
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, default=_jsonable) + "\n", encoding="utf-8")


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def format_table(columns: Sequence[str], rows: Iterable[Sequence], comments: dict | None = None) -> str:
    """CSV text with optional leading ``# key: value`` comment lines."""
    out = _io.StringIO()
    for key, value in (comments or {}).items():
        out.write(f"# {key}: {_cell(value)}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return out.getvalue()


# --------------------------------------------------------------------------
# Units


def bpc_from_loss(loss: float, tokens: float, chars: float, base: float = math.e) -> float:
    """Bits per character from a per-token cross-entropy ``loss``.

    ``loss`` is measured with logarithm base ``base`` (nats by default); it is
    converted to bits and scaled by the token-to-character ratio.
    """
    if not (tokens > 0 and chars > 0):
        raise ValueError("tokens and chars must be positive")
    if not math.isfinite(loss):
        raise ValueError("loss must be finite")
    if not (base > 0 and base != 1):
        raise ValueError("log base must be positive and not 1")
    return loss * math.log(base) / math.log(2.0) * tokens / chars
