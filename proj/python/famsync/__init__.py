"""Failure-atomic msync for a userspace persistent region."""

from ._famsync import (
    ConfigError,
    ContractError,
    CorruptionError,
    EnumerationBoundError,
    FamsyncError,
    Heap,
    IoError,
    KvStore,
    LogFullError,
    Media,
    OutOfMemoryError,
    RangeError,
    RealFileMedia,
    Region,
    SimulatedMedia,
    SweepSummary,
    bench,
    crashtest,
    fuzz,
    recover,
    region_capacity,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "CorruptionError",
    "EnumerationBoundError",
    "FamsyncError",
    "Heap",
    "IoError",
    "KvStore",
    "LogFullError",
    "Media",
    "OutOfMemoryError",
    "RangeError",
    "RealFileMedia",
    "Region",
    "SimulatedMedia",
    "SweepSummary",
    "bench",
    "crashtest",
    "fuzz",
    "recover",
    "region_capacity",
]
