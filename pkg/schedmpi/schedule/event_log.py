"""Debug event log: `rank,seq,event,round,op` records plus the verifiers that read them."""
from __future__ import annotations

import logging
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Tuple

logger = logging.getLogger(__name__)

EVENT_KINDS = {"start", "complete", "round_launch", "composite_complete", "epilogue_start", "test", "wait"}


@dataclass(frozen=True)
class EventRecord:
    rank: int
    seq: int
    event: str
    round: int
    op: str

    def to_line(self) -> str:
        return f"{self.rank},{self.seq},{self.event},{self.round},{self.op}"

    @classmethod
    def from_line(cls, line: str) -> "EventRecord":
        rank, seq, event, round_index, op = line.strip().split(",", 4)
        return cls(int(rank), int(seq), event, int(round_index), op)

    @property
    def schedule_label(self) -> Optional[str]:
        """`s7` for `s7` and `s7.r12`; None for requests outside any schedule."""
        head = self.op.split(".", 1)[0]
        return head if head.startswith("s") else None


class EventLog:
    def __init__(self, path: Optional[str] = None) -> None:
        self.path = path
        self._records: List[EventRecord] = []
        self._seq: Dict[int, int] = defaultdict(int)
        self._lock = threading.Lock()
        self._handle = open(path, "a", buffering=1, encoding="utf-8") if path else None

    def record(self, rank: int, event: str, round_index: int = -1, op: str = "-") -> None:
        if event not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {event!r}")
        with self._lock:
            seq = self._seq[rank]
            self._seq[rank] = seq + 1
            entry = EventRecord(rank, seq, event, round_index, op)
            self._records.append(entry)
            if self._handle is not None:
                self._handle.write(entry.to_line() + "\n")

    @property
    def records(self) -> List[EventRecord]:
        with self._lock:
            return list(self._records)

    def close(self) -> None:
        with self._lock:
            if self._handle is not None:
                self._handle.close()
                self._handle = None


def read_event_log(path: str) -> List[EventRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [EventRecord.from_line(line) for line in lines if line.strip()]


def _by_rank(records: Iterable[EventRecord]) -> Dict[int, List[EventRecord]]:
    grouped: Dict[int, List[EventRecord]] = defaultdict(list)
    for entry in records:
        grouped[entry.rank].append(entry)
    for entries in grouped.values():
        entries.sort(key=lambda entry: entry.seq)
    return grouped


def verify_round_ordering(records: Iterable[EventRecord]) -> List[str]:
    """Every start in a launched round must follow all completions of the previous round."""
    violations: List[str] = []
    for rank, entries in _by_rank(records).items():
        launched: Dict[str, int] = {}
        pending: Dict[str, Set[str]] = defaultdict(set)
        for entry in entries:
            label = entry.schedule_label
            if label is None:
                continue
            if entry.event == "round_launch":
                if pending[label]:
                    violations.append(
                        f"rank {rank} seq {entry.seq}: {label} launched round {entry.round} "
                        f"with {sorted(pending[label])} still running"
                    )
                launched[label] = entry.round
            elif entry.event == "start" and "." in entry.op:
                if launched.get(label) != entry.round:
                    violations.append(
                        f"rank {rank} seq {entry.seq}: {entry.op} started in round {entry.round} "
                        f"but {label} is at round {launched.get(label)}"
                    )
                pending[label].add(entry.op)
            elif entry.event == "complete" and "." in entry.op:
                pending[label].discard(entry.op)
    return violations


def count_round_launches(records: Iterable[EventRecord]) -> Counter:
    """Counter keyed by (rank, schedule label, round index)."""
    counts: Counter = Counter()
    for entry in records:
        if entry.event == "round_launch":
            counts[(entry.rank, entry.op, entry.round)] += 1
    return counts


def count_events(records: Iterable[EventRecord], event: str, rank: Optional[int] = None) -> int:
    return sum(1 for entry in records if entry.event == event and (rank is None or entry.rank == rank))


def events_between(
    records: Iterable[EventRecord], rank: int, first: Tuple[str, str], last: Tuple[str, str]
) -> List[EventRecord]:
    """Records of `rank` strictly between the first (event, op) match and the next (event, op) match."""
    inside = False
    found: List[EventRecord] = []
    for entry in _by_rank(records).get(rank, []):
        if not inside and (entry.event, entry.op) == first:
            inside = True
            continue
        if inside and (entry.event, entry.op) == last:
            break
        if inside:
            found.append(entry)
    return found
