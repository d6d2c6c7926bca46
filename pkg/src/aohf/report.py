"""Machine-readable run reports.

JSON is written by a small serializer so every float carries 17 significant
digits, which makes reports both lossless and byte-stable.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

from .scf import IterationRecord, ScfSolution

__all__ = ["RunReport", "dumps", "trace_csv"]

TRACE_COLUMNS = ("iter", "energy", "grad_max", "step", "idem_residual")


def _float(v: float) -> str:
    if math.isnan(v) or math.isinf(v):
        return "null"
    text = f"{v:.17g}"
    if not any(c in text for c in ".en"):
        text += ".0"
    return text


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """json.dumps with 17-significant-digit floats and stable key order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in obj):
            return "[" + ", ".join(dumps(x) for x in obj) + "]"
        items = [pad + dumps(x, indent, _level + 1) for x in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "tolist"):
        return dumps(obj.tolist(), indent, _level)
    if hasattr(obj, "item"):
        return dumps(obj.item(), indent, _level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


@dataclass
class RunReport:
    system_label: str
    solver: str
    converged: bool
    energy: float
    gradient_norm: float
    iteration_count: int
    orbital_energies: list[float]
    trace: list[dict] = field(default_factory=list)
    message: str = ""
    wall_time: float | None = None

    @classmethod
    def from_solution(cls, solution: ScfSolution, label: str,
                      wall_time: float | None = None) -> "RunReport":
        return cls(
            system_label=label,
            solver=solution.solver,
            converged=bool(solution.converged),
            energy=float(solution.energy),
            gradient_norm=float(solution.gradient_norm),
            iteration_count=int(solution.iterations),
            orbital_energies=[float(x) for x in solution.orbital_energies],
            trace=[_record_dict(r) for r in solution.trace],
            message=solution.message,
            wall_time=wall_time,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["wall_time"] is None:
            del d["wall_time"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def to_json(self) -> str:
        return dumps(self.to_dict())


def _record_dict(r: IterationRecord) -> dict:
    return {
        "iter": r.iteration,
        "energy": r.energy,
        "grad_max": r.grad_max,
        "step": r.step,
        "idem_residual": r.idem_residual,
    }


def trace_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for row in report.trace:
        w.writerow([row["iter"]] + [_float(float(row[c])) for c in TRACE_COLUMNS[1:]])
    return buf.getvalue()
