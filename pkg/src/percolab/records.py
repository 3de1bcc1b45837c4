"""Result records and their JSON / CSV serialisation."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

from . import __version__

CSV_COLUMNS = ("quantity", "d", "L", "region", "p", "param1", "param2",
               "mean", "stderr", "n", "seed", "mode")


def version_string() -> str:
    return f"percolab-v{__version__}"


@dataclass
class Estimate:
    """A scalar estimate.  ``mode == "exact"`` implies ``stderr == 0``."""

    mean: float
    stderr: float = 0.0
    n: int = 0
    seed: int | None = None
    mode: str = "mc"
    diagnostics: dict = field(default_factory=dict)
    quantity: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("exact", "mc"):
            raise ValueError(f"mode must be 'exact' or 'mc', got {self.mode!r}")
        if self.stderr < 0:
            raise ValueError("stderr must be >= 0")
        if self.mode == "exact" and self.stderr != 0:
            raise ValueError("exact estimates carry zero stderr")
        if self.mode == "mc" and self.n < 1:
            raise ValueError("Monte Carlo estimates need n >= 1")

    def ci(self, z: float = 1.96) -> tuple[float, float]:
        return self.mean - z * self.stderr, self.mean + z * self.stderr

    def to_record(self) -> dict:
        rec = {
            "quantity": self.quantity,
            "params": _jsonable(self.params),
            "mean": self.mean,
            "stderr": self.stderr,
            "n": self.n,
            "seed": self.seed,
            "mode": self.mode,
            "diagnostics": _jsonable(self.diagnostics),
            "version": version_string(),
        }
        return rec

    def csv_row(self) -> dict:
        return csv_row(self.to_record())


def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return float(obj)
    if hasattr(obj, "to_json"):
        return obj.to_json()
    if hasattr(obj, "item"):  # numpy scalars
        return _jsonable(obj.item())
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    if hasattr(obj, "__dataclass_fields__"):
        return _jsonable(asdict(obj))
    return str(obj)


def dumps(record: dict) -> str:
    """Canonical one-line JSON (sorted keys) for byte-stable output."""
    return json.dumps(_jsonable(record), sort_keys=True, separators=(",", ":"))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, dict):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    return str(v)


def csv_row(record: dict) -> dict:
    params = dict(record.get("params") or {})
    row = {"quantity": record.get("quantity", "")}
    row["d"] = _fmt(params.pop("d", ""))
    row["L"] = _fmt(params.pop("L", ""))
    row["region"] = _fmt(params.pop("region", ""))
    row["p"] = _fmt(params.pop("p", ""))
    extra = [f"{k}={_fmt(v)}" for k, v in sorted(params.items())]
    row["param1"] = extra[0] if extra else ""
    row["param2"] = ";".join(extra[1:]) if len(extra) > 1 else ""
    for key in ("mean", "stderr", "n", "seed", "mode"):
        row[key] = _fmt(record.get(key))
    return row


def write_csv(records, fh) -> None:
    writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(csv_row(rec))


def csv_text(records) -> str:
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()
