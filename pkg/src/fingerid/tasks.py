"""Comparison-task building, queueing, accounting, and result aggregation.

One task carries the whole query list plus a slice of the record list
(``pack_size`` records, default 1), so the number of tasks tracks the
number of database records and is independent of how many queries a batch
holds.  The queue is FIFO with timeout-requeue and first-result-wins
semantics: whatever happens with stragglers and duplicates, each
(record, query) pair contributes exactly one score.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .core import MinutiaeTemplate


class TaskError(Exception):
    pass


class UnknownTaskError(TaskError):
    """Result for a task this queue never dispatched."""


class IncompleteBatchError(TaskError):
    def __init__(self, missing: int):
        super().__init__(f"batch not finished: {missing} record(s) unscored")
        self.missing = missing


@dataclass(frozen=True)
class QueryBatch:
    batch_id: str
    queries: tuple  # of (query_id, MinutiaeTemplate)

    def __post_init__(self):
        if not self.queries:
            raise ValueError("a batch needs at least one query")
        ids = [qid for qid, _ in self.queries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate queryIds in batch")

    @property
    def query_ids(self) -> list:
        return [qid for qid, _ in self.queries]


@dataclass(frozen=True)
class ComparisonTask:
    task_id: str
    batch_id: str
    queries: tuple  # shared with the batch
    records: tuple  # of (record_id, payload); payload = PGM bytes or MinutiaeTemplate

    def record_ids(self) -> list:
        return [rid for rid, _ in self.records]


@dataclass(frozen=True)
class SimilarityResult:
    task_id: str
    scores: tuple  # of (record_id, query_id, similarity)
    worker_id: str
    elapsed_ms: float = 0.0
    errors: tuple = ()  # of (record_id, reason) for records scored 0.0 by failure

    def __post_init__(self):
        for _, _, s in self.scores:
            if not 0.0 <= s <= 1.0:
                raise ValueError(f"similarity out of range: {s}")


@dataclass(frozen=True)
class MatchAnswer:
    query_id: str
    best_record_id: Optional[str]
    best_similarity: float
    person: Optional[dict] = None


def build_tasks(
    record_ids: Sequence[str],
    batch: QueryBatch,
    pack_size: int = 1,
    payload_for: Optional[Callable[[str], object]] = None,
) -> list:
    """Partition the record list, in order, into tasks of ≤ pack_size records.

    ``payload_for`` maps a recordId to the bytes/template shipped to the
    worker; omit it when only the task structure matters.
    """
    if pack_size < 1:
        raise ValueError(f"pack_size must be >= 1, got {pack_size}")
    tasks = []
    for start in range(0, len(record_ids), pack_size):
        chunk = record_ids[start : start + pack_size]
        records = tuple(
            (rid, payload_for(rid) if payload_for is not None else None) for rid in chunk
        )
        tasks.append(
            ComparisonTask(
                task_id=f"{batch.batch_id}-t{len(tasks) + 1:06d}",
                batch_id=batch.batch_id,
                queries=batch.queries,
                records=records,
            )
        )
    return tasks


@dataclass
class _InFlight:
    task: ComparisonTask
    worker_id: str
    dispatched_at: float


class TaskQueue:
    """FIFO dispatch queue with in-flight accounting.

    The clock is injectable so expiry is testable without sleeping.
    """

    def __init__(self, clock: Callable[[], float] = time.monotonic):
        self._clock = clock
        self._lock = threading.Lock()
        self._pending = deque()
        self._in_flight: dict[str, _InFlight] = {}
        self._done: dict[str, SimilarityResult] = {}
        self._known: dict[str, ComparisonTask] = {}
        self._ever_dispatched: set[str] = set()
        self.requeue_log: list = []  # (task_id, prior worker_id) for diagnostics

    def enqueue(self, tasks: Sequence[ComparisonTask]) -> None:
        with self._lock:
            for t in tasks:
                if t.task_id in self._known:
                    raise TaskError(f"duplicate taskId enqueued: {t.task_id}")
                self._known[t.task_id] = t
                self._pending.append(t)

    def next_task(self, worker_id: str) -> Optional[ComparisonTask]:
        with self._lock:
            while self._pending:
                task = self._pending.popleft()
                if task.task_id in self._done:
                    continue  # completed while waiting for re-dispatch
                self._in_flight[task.task_id] = _InFlight(task, worker_id, self._clock())
                self._ever_dispatched.add(task.task_id)
                return task
            return None

    def complete(self, result: SimilarityResult) -> bool:
        """Record a result; returns False when a duplicate was discarded."""
        with self._lock:
            tid = result.task_id
            if tid in self._done:
                return False
            if tid not in self._ever_dispatched:
                raise UnknownTaskError(f"result for undisp. task: {tid}")
            self._done[tid] = result
            self._in_flight.pop(tid, None)
            return True

    def requeue_expired(self, timeout: float) -> list:
        """Return expired in-flight tasks to the head of the queue."""
        now = self._clock()
        with self._lock:
            expired = [
                entry
                for entry in self._in_flight.values()
                if now - entry.dispatched_at > timeout
            ]
            return self._requeue(expired)

    def requeue_for_worker(self, worker_id: str) -> list:
        """Reclaim every task in flight against a (presumed dead) worker."""
        with self._lock:
            stuck = [e for e in self._in_flight.values() if e.worker_id == worker_id]
            return self._requeue(stuck)

    def _requeue(self, entries: list) -> list:
        entries.sort(key=lambda e: e.dispatched_at)
        for entry in reversed(entries):
            self._pending.appendleft(entry.task)
        requeued = []
        for entry in entries:
            del self._in_flight[entry.task.task_id]
            self.requeue_log.append((entry.task.task_id, entry.worker_id))
            requeued.append(entry.task.task_id)
        return requeued

    def progress(self) -> dict:
        with self._lock:
            queued = sum(1 for t in self._pending if t.task_id not in self._done)
            return {
                "total": len(self._known),
                "queued": queued,
                "inFlight": len(self._in_flight),
                "done": len(self._done),
            }

    def remaining(self) -> int:
        with self._lock:
            return len(self._known) - len(self._done)

    def results(self) -> list:
        with self._lock:
            return [self._done[tid] for tid in sorted(self._done)]


def aggregate(
    batch: QueryBatch,
    results: Sequence[SimilarityResult],
    record_ids: Sequence[str],
    person_lookup: Optional[Callable[[str], dict]] = None,
    min_similarity: float = 0.0,
) -> list:
    """Per query, the best-scoring record across all results.

    Ties go to the lexicographically smallest recordId.  Answers come back
    sorted by queryId.  ``person_lookup`` fills in the matched person's
    details; a best score below ``min_similarity`` yields a no-match answer
    (bestRecordId None) that still reports the top similarity seen.
    """
    table: dict = {}  # (record_id, query_id) -> similarity, first result wins
    for result in results:
        for rid, qid, sim in result.scores:
            table.setdefault((rid, qid), sim)

    expected = [(rid, qid) for rid in record_ids for qid in batch.query_ids]
    missing_records = {rid for rid, qid in expected if (rid, qid) not in table}
    if missing_records:
        raise IncompleteBatchError(len(missing_records))

    answers = []
    for qid in sorted(batch.query_ids):
        if not record_ids:
            answers.append(MatchAnswer(qid, None, 0.0))
            continue
        best_rid = None
        best_sim = -1.0
        for rid in sorted(set(record_ids)):
            sim = table[(rid, qid)]
            if sim > best_sim:
                best_rid, best_sim = rid, sim
        if best_sim < min_similarity:
            answers.append(MatchAnswer(qid, None, best_sim))
        else:
            person = person_lookup(best_rid) if person_lookup is not None else None
            answers.append(MatchAnswer(qid, best_rid, best_sim, person))
    return answers
