"""Platform-independent operation counters.

Tallies are plain integers (multiply-accumulate counts for fixed-point
stages, floating-point multiply-add counts for the eigensolver stages,
and bit-shift counts), broken down per pipeline stage.  Increments are
serialized by a lock so concurrent per-band workers produce totals that
are independent of scheduling; integer addition commutes, so the final
counts are bit-identical to a sequential run.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

__all__ = ["StageCounts", "OpCounters", "FlopCounter"]


@dataclass
class StageCounts:
    fixed_macs: int = 0
    flops: int = 0
    shifts: int = 0


@dataclass
class OpCounters:
    """Per-stage tallies of fixed-point MACs, FLOPs, and bit shifts."""

    stages: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add(self, stage: str, fixed_macs: int = 0, flops: int = 0, shifts: int = 0):
        with self._lock:
            s = self.stages.setdefault(stage, StageCounts())
            s.fixed_macs += int(fixed_macs)
            s.flops += int(flops)
            s.shifts += int(shifts)

    def stage(self, name: str) -> StageCounts:
        return self.stages.get(name, StageCounts())

    @property
    def fixed_macs(self) -> int:
        return sum(s.fixed_macs for s in self.stages.values())

    @property
    def flops(self) -> int:
        return sum(s.flops for s in self.stages.values())

    @property
    def shifts(self) -> int:
        return sum(s.shifts for s in self.stages.values())


class FlopCounter:
    """Cheap multiply-add tally used inside the dense linear algebra."""

    __slots__ = ("flops",)

    def __init__(self):
        self.flops = 0

    def add(self, n: int):
        self.flops += int(n)
