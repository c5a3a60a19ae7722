"""Recorded trajectory datasets and their on-disk format."""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InconsistentDataset
from .lti import Signal


@dataclass
class TrajectoryDataset:
    """Recorded ``(u, d, y)`` samples; ``d`` is ``None`` for lumped records."""

    u: Signal
    y: Signal
    d: Signal | None = None
    noisy: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.u = self.u if isinstance(self.u, Signal) else Signal(self.u)
        self.y = self.y if isinstance(self.y, Signal) else Signal(self.y)
        if self.d is not None and not isinstance(self.d, Signal):
            self.d = Signal(self.d, self.u.period)
        lens = {len(self.u), len(self.y)} | ({len(self.d)} if self.d is not None else set())
        if len(lens) != 1:
            raise InconsistentDataset(f"signal lengths differ: {sorted(lens)}")

    @property
    def period(self):
        return self.u.period

    def __len__(self):
        return len(self.u)

    @property
    def lumped(self):
        return self.d is None

    def to_csv(self, path):
        """Write the lumped single-channel format ``t,delta_v,delta_f`` plus JSON sidecar."""
        if not self.lumped or self.u.width != 1 or self.y.width != 1:
            raise ValueError("CSV format holds lumped single-channel records only")
        path = Path(path)
        t = np.arange(len(self)) * self.period
        rows = np.column_stack([t, self.u.samples[:, 0], self.y.samples[:, 0]])
        _atomic_write(path, _csv_text(["t", "delta_v", "delta_f"], rows))
        meta = dict(self.metadata)
        meta.update(period=self.period, noisy=self.noisy, rows=len(self))
        _atomic_write(sidecar_path(path), json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["t", "delta_v", "delta_f"]:
                raise InconsistentDataset(f"{path}: expected header t,delta_v,delta_f, got {header}")
            data = np.array([[float(v) for v in row] for row in reader if row])
        meta = {}
        side = sidecar_path(path)
        if side.exists():
            meta = json.loads(side.read_text())
        if data.shape[0] > 1:
            period = float(np.round(data[1, 0] - data[0, 0], 12))
        else:
            period = float(meta.get("period", 0.1))
        period = float(meta.get("period", period))
        return cls(Signal(data[:, 1], period), Signal(data[:, 2], period), None,
                   noisy=bool(meta.get("noisy", True)), metadata=meta)


def sidecar_path(path):
    path = Path(path)
    return path.with_suffix(".json")


def _csv_text(header, rows):
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(repr(float(v)) for v in r))
    return "\n".join(lines) + "\n"


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
