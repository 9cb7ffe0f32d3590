"""Per-batch run metrics and their CSV serialisation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

HEADER = ("batch", "accuracy_pct", "pulses", "energy_j", "cum_energy_j")


@dataclass
class MetricRow:
    batch: int
    accuracy_pct: float
    pulses: int
    energy_j: float
    cum_energy_j: float
    d_value: float = float("nan")
    g_loss: float = float("nan")


@dataclass
class RunMetrics:
    rows: list[MetricRow] = field(default_factory=list)

    def append(self, batch, accuracy_pct, pulses, energy_j, **extra) -> MetricRow:
        if energy_j < 0:
            raise ValueError("batch energy must be non-negative")
        cum = (self.rows[-1].cum_energy_j if self.rows else 0.0) + energy_j
        row = MetricRow(batch, float(accuracy_pct), int(pulses), float(energy_j), cum, **extra)
        self.rows.append(row)
        return row

    def __len__(self):
        return len(self.rows)

    @property
    def total_energy_j(self) -> float:
        return self.rows[-1].cum_energy_j if self.rows else 0.0

    @property
    def total_pulses(self) -> int:
        return sum(r.pulses for r in self.rows)

    @property
    def final_accuracy(self) -> float:
        return self.rows[-1].accuracy_pct if self.rows else float("nan")


def write_metrics(metrics: RunMetrics, path) -> Path:
    """Write the fixed five-column CSV; floats use repr so they round-trip exactly."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for r in metrics.rows:
            w.writerow([r.batch, repr(r.accuracy_pct), r.pulses, repr(r.energy_j), repr(r.cum_energy_j)])
    return path


def read_metrics(path) -> RunMetrics:
    m = RunMetrics()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != HEADER:
            raise ValueError(f"unexpected metrics header {header}")
        for b, acc, pulses, e, cum in reader:
            m.rows.append(MetricRow(int(b), float(acc), int(pulses), float(e), float(cum)))
    return m
