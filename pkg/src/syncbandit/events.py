"""Schedule and observation records exchanged by the simulator and estimator."""

from __future__ import annotations

from dataclasses import dataclass, field

SYNC = "sync"
PROBE = "probe"
MODES = (SYNC, PROBE)


@dataclass
class ArmSchedule:
    """Timed plays ``[(time, mode), ...]`` of a single arm, in time order."""

    entries: list = field(default_factory=list)

    def append(self, time, mode):
        if mode not in MODES:
            raise ValueError(f"unknown play mode {mode!r}")
        if self.entries and time <= self.entries[-1][0]:
            raise ValueError("schedule times must be strictly increasing")
        self.entries.append((float(time), mode))

    def extend(self, other):
        for t, mode in other:
            self.append(t, mode)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def times(self):
        return [t for t, _ in self.entries]

    @property
    def sync_times(self):
        return [t for t, m in self.entries if m == SYNC]

    def probe_count(self):
        return sum(1 for _, m in self.entries if m == PROBE)


@dataclass(frozen=True)
class CostObservation:
    arm: int
    time: float
    tau: float
    mode: str
    cost: float
