"""
Benchmark harness: phase CPU times, attribute sweeps, payload sizes and
service throughput
"""

from .phases import ProtocolFixture, attribute_sweep, hidden_sweep, payload_sizes, phases_report, sweep_report
from .report import BenchReport, LinearFit, Stats, linear_fit, write_csv
from .throughput import HttpLoad, ThroughputResult, local_throughput

__all__ = [
    "BenchReport", "HttpLoad", "LinearFit", "ProtocolFixture", "Stats", "ThroughputResult",
    "attribute_sweep", "hidden_sweep", "linear_fit", "local_throughput", "payload_sizes",
    "phases_report", "sweep_report", "write_csv",
]
