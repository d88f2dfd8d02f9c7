"""
Run metrics: the per-tick trace and the summary derived from it.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

from models.robot import SafetyOutcome


@dataclass(frozen=True)
class LatencyStats:
    """Sense-to-command latency over commands caused by fresh entries, seconds."""

    count: int = 0
    p50: Optional[float] = None
    p95: Optional[float] = None
    max: Optional[float] = None


@dataclass(frozen=True)
class RunCounts:
    """
    Attributes:
        attempts: Sensor ticks; equals published + dropped + rate_limited + suppressed
        transport_errors: Dropped samples lost to a transport failure or blackout
        stale_faults: Polls that produced FAULT_STOP
    """

    attempts: int = 0
    published: int = 0
    dropped: int = 0
    rate_limited: int = 0
    suppressed: int = 0
    transport_errors: int = 0
    polls: int = 0
    stale_faults: int = 0
    decode_errors: int = 0


@dataclass(frozen=True)
class RunSummary:
    rows: int
    duration: float
    counts: RunCounts
    latency: LatencyStats
    safety: SafetyOutcome
    transitions: List[Dict[str, Any]] = field(default_factory=list)
    samples_per_sensor: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["safety"]["collision"] = self.safety.collision
        return payload


@dataclass
class RunMetrics:
    """
    Attributes:
        metadata: Run parameters written to the first line of run.csv
        rows: Formatted CSV data rows
        summary: Figures derived from the rows
    """

    metadata: Dict[str, Any]
    rows: List[List[str]]
    summary: RunSummary

    @property
    def latency(self) -> LatencyStats:
        return self.summary.latency

    @property
    def safety(self) -> SafetyOutcome:
        return self.summary.safety

    @property
    def counts(self) -> RunCounts:
        return self.summary.counts
