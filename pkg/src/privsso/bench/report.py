#!/usr/bin/env python3
"""
Benchmark report types and exporters
"""

import csv
import json
import logging
import statistics
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

logger = logging.getLogger(__name__)


@dataclass
class Stats:
    """Milliseconds; an empty sample gives an all-zero record"""

    n: int = 0
    mean: float = 0.0
    stdev: float = 0.0
    min: float = 0.0
    max: float = 0.0
    p50: float = 0.0
    p95: float = 0.0

    @classmethod
    def from_samples(cls, samples: Sequence[float]) -> "Stats":
        samples = list(samples)
        if not samples:
            return cls()
        ordered = sorted(samples)
        p95 = ordered[-1] if len(ordered) < 2 else statistics.quantiles(ordered, n=20, method="inclusive")[-1]
        return cls(
            n=len(samples),
            mean=statistics.fmean(samples),
            stdev=statistics.stdev(samples) if len(samples) > 1 else 0.0,
            min=ordered[0],
            max=ordered[-1],
            p50=statistics.median(ordered),
            p95=p95,
        )


@dataclass
class LinearFit:
    slope: float
    intercept: float
    r2: float


def linear_fit(xs: Sequence[float], ys: Sequence[float]) -> Optional[LinearFit]:
    """Least-squares line through the points; None when it is undefined"""
    if len(xs) < 2 or len(set(xs)) < 2:
        return None
    slope, intercept = statistics.linear_regression(xs, ys)
    try:
        r = statistics.correlation(xs, ys)
    except statistics.StatisticsError:
        # constant ys: the fit is exact
        r = 1.0
    return LinearFit(slope, intercept, r * r)


@dataclass
class BenchReport:
    seed: int
    config: Dict[str, Any] = field(default_factory=dict)
    phases: Dict[str, Stats] = field(default_factory=dict)
    latency_ms: Dict[str, float] = field(default_factory=dict)
    payloads: Dict[str, int] = field(default_factory=dict)
    sweep: List[Dict[str, float]] = field(default_factory=list)
    sweep_fit: Dict[str, Optional[LinearFit]] = field(default_factory=dict)
    hidden_sweep: List[Dict[str, float]] = field(default_factory=list)
    throughput: List[Dict[str, Any]] = field(default_factory=list)
    created_at: str = field(default_factory=lambda: datetime.now().isoformat(timespec="seconds"))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def save_json(self, path: str) -> str:
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
        logger.info("💾 report written to %s", out)
        return str(out)


def write_csv(rows: Sequence[Dict[str, Any]], path: str) -> str:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    columns: List[str] = []
    for row in rows:
        columns.extend(k for k in row if k not in columns)
    with open(out, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)
    logger.info("💾 %d rows written to %s", len(rows), out)
    return str(out)
