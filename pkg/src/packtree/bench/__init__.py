"""Benchmark harness: input generators, timing loops, CSV and figures."""

from .data import ClusterDataSpec, MicroSpec, gen_clusterdata, gen_micro_keys
from .harness import (BenchReport, CorrectnessError, emit_csv, run_db_battery,
                      run_micro)

__all__ = [
    "BenchReport",
    "ClusterDataSpec",
    "CorrectnessError",
    "MicroSpec",
    "emit_csv",
    "gen_clusterdata",
    "gen_micro_keys",
    "run_db_battery",
    "run_micro",
]
