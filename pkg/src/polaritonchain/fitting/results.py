"""Trace and fit-result records and their file formats."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Trace:
    """Measured or synthetic data: abscissa ``x``, ordinate ``y`` (real or complex)."""

    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray | None = None
    x_name: str = "x"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y)
        y = y.astype(complex) if np.iscomplexobj(y) else y.astype(float)
        if x.ndim != 1 or y.shape != x.shape:
            raise ValueError("x and y must be 1-D arrays of equal length")
        if np.any(np.diff(x) <= 0):
            raise ValueError("abscissa must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != x.shape or np.any(w < 0):
                raise ValueError("weights must be non-negative and match x")
            object.__setattr__(self, "weights", w)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.y)


def read_trace_csv(path: str | Path) -> Trace:
    """Read a trace CSV.

    The first header column names the abscissa with its unit (``omega_MHz``,
    ``B_mT``, ``T_mK``, ``t_s``). Ordinates are either ``re,im`` columns or a
    single value column; an optional ``weight`` column may follow.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty trace file")
    header = [h.strip() for h in rows[0]]
    data = np.array([[float(v) for v in row] for row in rows[1:] if row], dtype=float)
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValueError(f"{path}: rows do not match header {header}")
    cols = {name: data[:, n] for n, name in enumerate(header)}
    x = data[:, 0]
    weights = cols.get("weight")
    if "re" in cols and "im" in cols:
        y = cols["re"] + 1j * cols["im"]
    else:
        value_cols = [n for n in header[1:] if n != "weight"]
        if len(value_cols) != 1:
            raise ValueError(f"{path}: expected 're,im' or exactly one value column")
        y = cols[value_cols[0]]
    return Trace(x, y, weights, header[0])


def write_trace_csv(trace: Trace, path: str | Path, y_name: str = "value") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = [trace.x_name] + (["re", "im"] if trace.is_complex else [y_name])
        if trace.weights is not None:
            head.append("weight")
        w.writerow(head)
        for n, x in enumerate(trace.x):
            y = trace.y[n]
            row = [f"{x:.17g}"] + ([f"{y.real:.17g}", f"{y.imag:.17g}"] if trace.is_complex else [f"{y:.17g}"])
            if trace.weights is not None:
                row.append(f"{trace.weights[n]:.17g}")
            w.writerow(row)


def _num(v: float):
    # JSON has no inf/nan literals
    if np.isnan(v):
        return "nan"
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


@dataclass
class FitResult:
    model: str
    params: dict[str, tuple[float, float]]  # name -> (value, stderr)
    residual: float  # Euclidean norm of the weighted residual vector
    converged: bool
    iterations: int
    flags: list[str] = field(default_factory=list)

    def value(self, name: str) -> float:
        return self.params[name][0]

    def stderr(self, name: str) -> float:
        return self.params[name][1]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": {k: {"value": _num(v), "stderr": _num(s)} for k, (v, s) in self.params.items()},
            "residual": _num(self.residual),
            "converged": self.converged,
            "iterations": self.iterations,
            "flags": list(self.flags),
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    @classmethod
    def from_dict(cls, doc: dict) -> "FitResult":
        params = {k: (float(v["value"]), float(v["stderr"])) for k, v in doc["params"].items()}
        return cls(doc.get("model", ""), params, float(doc["residual"]), bool(doc["converged"]),
                   int(doc["iterations"]), list(doc.get("flags", [])))
