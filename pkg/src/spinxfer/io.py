"""Angle tables, run configuration documents and report serialisation."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .chain import ChainSpec
from .er_unitary import ORDERINGS, PAIRS, PARAM_KEYS, PhiVector
from .evolution import DEFAULT_TIME
from .operations import OperationSpec
from .optimizer import SearchConfig


class FormatError(ValueError):
    pass


# --- angle tables -----------------------------------------------------------------

def read_phi_table(path) -> PhiVector:
    """Read ``kind,n,m,phi_radians`` rows (optional header) into a PhiVector."""
    path = Path(path)
    angles = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
                continue
            if lineno == 1 and row[0].strip().lower() == "kind":
                continue
            if len(row) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 fields kind,n,m,phi_radians, got {len(row)}")
            try:
                kind, n, m = (int(c) for c in row[:3])
                value = float(row[3])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            if kind not in (1, 2) or (n, m) not in PAIRS:
                raise FormatError(f"{path}:{lineno}: ({kind},{n},{m}) is not a valid angle key")
            if not math.isfinite(value):
                raise FormatError(f"{path}:{lineno}: angle must be finite")
            if (kind, n, m) in angles:
                raise FormatError(f"{path}:{lineno}: duplicate angle key ({kind},{n},{m})")
            angles[(kind, n, m)] = value
    if len(angles) != len(PARAM_KEYS):
        missing = [k for k in PARAM_KEYS if k not in angles]
        raise FormatError(f"{path}: expected {len(PARAM_KEYS)} angles, got {len(angles)}; missing {missing[:5]}")
    return PhiVector.from_mapping(angles)


def write_phi_table(phi: PhiVector, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "n", "m", "phi_radians"])
        for (kind, n, m), v in phi.items():
            w.writerow([kind, n, m, repr(float(v))])


def data_path(*parts) -> Path:
    return Path(str(resources.files("spinxfer").joinpath("data", *parts)))


def load_published_values() -> dict:
    return json.loads(data_path("published_values.json").read_text(encoding="utf-8"))


# --- run configuration --------------------------------------------------------------

@dataclass
class RunConfig:
    chain: ChainSpec = field(default_factory=ChainSpec)
    time: float = DEFAULT_TIME
    operation: OperationSpec = field(default_factory=lambda: OperationSpec("restore"))
    search: SearchConfig = field(default_factory=SearchConfig)
    ordering: str = "canonical"
    io: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        chain = asdict(self.chain)
        chain["time"] = self.time
        return {
            "chain": chain,
            "operation": self.operation.to_dict(),
            "search": {k: v for k, v in asdict(self.search).items() if k not in ("ordering", "verbose")},
            "ordering": self.ordering,
            "io": dict(self.io),
        }

    def digest(self) -> str:
        doc = self.to_dict()
        doc.pop("io")
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_CHAIN_KEYS = {"n_sites": int, "delta_1": float, "delta_2": float, "delta_bulk": float, "symmetric": bool, "time": float}
_SEARCH_TYPES = {"restarts": int, "seed": int, "residual_tol": float, "max_iterations": int,
                 "objective_floor": float, "workers": int, "jacobian": str,
                 "ascend_top": int, "ascend_iterations": int}


def _typed(section: str, key: str, value, typ):
    where = f"{section}.{key}"
    if typ is bool:
        if not isinstance(value, bool):
            raise FormatError(f"{where}: expected true/false, got {value!r}")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise FormatError(f"{where}: expected an integer, got {value!r}")
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise FormatError(f"{where}: expected a finite number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise FormatError(f"{where}: expected a string, got {value!r}")
    return value


def _section(doc: dict, name: str, allowed: dict) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise FormatError(f"{name}: expected an object")
    unknown = set(sec) - set(allowed)
    if unknown:
        raise FormatError(f"{name}: unknown keys {sorted(unknown)}")
    return {k: _typed(name, k, v, allowed[k]) for k, v in sec.items()}


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise FormatError("configuration must be a JSON object")
    unknown = set(doc) - {"chain", "operation", "search", "ordering", "io"}
    if unknown:
        raise FormatError(f"unknown top-level keys {sorted(unknown)}")
    chain = _section(doc, "chain", _CHAIN_KEYS)
    time = chain.pop("time", DEFAULT_TIME)
    if not time > 0:
        raise FormatError(f"chain.time must be positive, got {time}")
    try:
        chain_spec = ChainSpec(**chain)
    except ValueError as exc:
        raise FormatError(f"chain: {exc}") from None

    op = doc.get("operation", {"name": "restore"})
    if not isinstance(op, dict) or "name" not in op:
        raise FormatError("operation: expected an object with a 'name'")
    unknown = set(op) - {"name", "A", "ratios"}
    if unknown:
        raise FormatError(f"operation: unknown keys {sorted(unknown)}")
    ratios = op.get("ratios")
    if ratios is not None:
        try:
            ratios = [complex(*r) if isinstance(r, (list, tuple)) else complex(r) for r in ratios]
        except TypeError:
            raise FormatError("operation.ratios: entries must be numbers or [re, im] pairs") from None
    try:
        operation = OperationSpec(op["name"], A=op.get("A"), ratios=ratios)
    except (ValueError, TypeError) as exc:
        raise FormatError(f"operation: {exc}") from None

    ordering = doc.get("ordering", "canonical")
    if ordering not in ORDERINGS:
        raise FormatError(f"ordering: must be one of {ORDERINGS}, got {ordering!r}")
    search = _section(doc, "search", _SEARCH_TYPES)
    try:
        search_cfg = SearchConfig(**search, ordering=ordering)
    except ValueError as exc:
        raise FormatError(f"search: {exc}") from None
    io = doc.get("io", {})
    if not isinstance(io, dict):
        raise FormatError("io: expected an object")
    return RunConfig(chain_spec, time, operation, search_cfg, ordering, io)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_config(doc)


# --- report encoding ----------------------------------------------------------------

def polar(z: complex, digits: int = 6) -> dict:
    z = complex(z)
    return {
        "abs": round(abs(z), digits),
        "phase": round(float(np.angle(z)), digits),
        "re": round(z.real, 12),
        "im": round(z.imag, 12),
    }


def encode_matrix(m) -> list:
    """4x4 complex matrix as rows of [re, im] pairs."""
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def decode_matrix(rows) -> np.ndarray:
    try:
        arr = np.array([[complex(re, im) for re, im in row] for row in rows])
    except (TypeError, ValueError):
        raise FormatError("matrix must be rows of [re, im] pairs") from None
    if arr.shape != (4, 4):
        raise FormatError(f"expected a 4x4 matrix, got shape {arr.shape}")
    return arr


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, complex):
        return polar(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def make_report(kind: str, config: RunConfig, body: dict) -> dict:
    return {
        "report": kind,
        "provenance": {
            "version": __version__,
            "config_digest": config.digest(),
            "seed": config.search.seed,
            "ordering": config.ordering,
        },
        **_clean(body),
    }


def dump_report(report: dict, path=None) -> str:
    text = json.dumps(report, indent=2, sort_keys=False)
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text + "\n", encoding="utf-8")
    return text
