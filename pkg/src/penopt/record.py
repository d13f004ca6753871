"""Trajectory records produced by solver runs and their CSV serialization.

The CSV data contract is fixed: header ``k,grad_evals,objective,violation,rho``
followed by one row per recorded iterate, floats printed with 17 significant
digits so trajectories replay bit-for-bit.  Run metadata lives in a sidecar
JSON file so the data rows stay byte-deterministic.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_HEADER = "k,grad_evals,objective,violation,rho"


@dataclass
class RunRecord:
    """Per-checkpoint trajectory of one solver run."""

    k: np.ndarray
    grad_evals: np.ndarray
    objective: np.ndarray
    violation: np.ndarray
    rho: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=int)
        self.grad_evals = np.asarray(self.grad_evals, dtype=int)
        self.objective = np.asarray(self.objective, dtype=float)
        self.violation = np.asarray(self.violation, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        n = len(self.k)
        for name in ("grad_evals", "objective", "violation", "rho"):
            if len(getattr(self, name)) != n:
                raise ValueError("record columns must have equal length")

    def __len__(self) -> int:
        return len(self.k)

    @property
    def final_violation(self) -> float:
        return float(self.violation[-1])

    @property
    def final_objective(self) -> float:
        return float(self.objective[-1])

    def data_rows(self) -> list[str]:
        rows = []
        for i in range(len(self)):
            rows.append(
                f"{self.k[i]},{self.grad_evals[i]},"
                f"{self.objective[i]:.17g},{self.violation[i]:.17g},{self.rho[i]:.17g}"
            )
        return rows

    def data_hash(self) -> str:
        """SHA-256 over header and data rows; metadata is excluded."""
        payload = "\n".join([CSV_HEADER, *self.data_rows()]).encode()
        return hashlib.sha256(payload).hexdigest()

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join([CSV_HEADER, *self.data_rows()]) + "\n")
        if self.meta:
            sidecar = path.with_suffix(".meta.json")
            sidecar.write_text(json.dumps(self.meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path) -> "RunRecord":
        path = Path(path)
        lines = path.read_text().strip().splitlines()
        if not lines or lines[0] != CSV_HEADER:
            raise ValueError(f"{path} is not a trajectory CSV (bad header)")
        cols = [line.split(",") for line in lines[1:]]
        meta = {}
        sidecar = path.with_suffix(".meta.json")
        if sidecar.exists():
            meta = json.loads(sidecar.read_text())
        return cls(
            k=[int(r[0]) for r in cols],
            grad_evals=[int(r[1]) for r in cols],
            objective=[float(r[2]) for r in cols],
            violation=[float(r[3]) for r in cols],
            rho=[float(r[4]) for r in cols],
            meta=meta,
        )


def median_record(records: list[RunRecord], meta: dict | None = None) -> RunRecord:
    """Columnwise median across runs sharing the same checkpoints."""
    if not records:
        raise ValueError("need at least one record")
    base = records[0].k
    for rec in records[1:]:
        if not np.array_equal(rec.k, base):
            raise ValueError("records must share identical checkpoints")
    return RunRecord(
        k=base.copy(),
        grad_evals=np.median([r.grad_evals for r in records], axis=0).astype(int),
        objective=np.median([r.objective for r in records], axis=0),
        violation=np.median([r.violation for r in records], axis=0),
        rho=np.median([r.rho for r in records], axis=0),
        meta=meta or {},
    )


def checkpoints(K: int, record_every) -> list[int]:
    """Iterate indices to record: always 1 and K, plus the requested interior.

    ``record_every`` is a positive stride, or ``"geometric"`` for doubling
    checkpoints (keeps long runs' CSVs small).
    """
    if K < 1:
        raise ValueError("horizon must be >= 1")
    if record_every == "geometric":
        ks = {1, K}
        j = 1
        while j <= K:
            ks.add(j)
            j *= 2
        return sorted(ks)
    stride = int(record_every)
    if stride < 1:
        raise ValueError("record_every must be a positive integer or 'geometric'")
    ks = set(range(1, K + 1, stride))
    ks.update({1, K})
    return sorted(ks)
