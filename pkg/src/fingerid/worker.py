"""Worker daemon: pulls comparison tasks from the master and scores them.

The worker is stateless — every result is a pure function of the task
payload.  While computing it pumps heartbeat frames from a side thread;
the pump is stopped and joined before the result frame is written, so
frames never interleave and every read on this side follows exactly one
frame that warrants a response.
"""

from __future__ import annotations

import socket
import threading
import time
from typing import Optional

from .core import MinutiaeTemplate, extract_minutiae, match_templates, read_pgm
from .protocol import (
    FrameStream,
    ProtocolError,
    heartbeat_frame,
    register_frame,
    result_frame,
    task_from_frame,
)
from .tasks import ComparisonTask, SimilarityResult


class RegistrationRejected(Exception):
    """Master refused the register frame (e.g. duplicate workerId)."""


def execute_task(
    task: ComparisonTask,
    worker_id: str,
    simulate_ms: Optional[float] = None,
    sleep=time.sleep,
) -> SimilarityResult:
    """Score every (record × query) pair in the task.

    A record that cannot be decoded or extracted scores 0.0 against all
    queries and is named in the result's error notes; one bad record must
    not sink a batch.  With ``simulate_ms`` set, matching is replaced by a
    fixed sleep per record (benchmark mode).
    """
    start = time.perf_counter()
    scores = []
    errors = []
    if simulate_ms is not None:
        for rid, _ in task.records:
            sleep(simulate_ms / 1000.0)
            for qid, _ in task.queries:
                scores.append((rid, qid, 0.0))
    else:
        for rid, payload in task.records:
            try:
                if isinstance(payload, MinutiaeTemplate):
                    template = payload
                else:
                    template = extract_minutiae(read_pgm(payload))
            except Exception as exc:  # any per-record failure degrades to 0.0
                errors.append((rid, f"{type(exc).__name__}: {exc}"))
                for qid, _ in task.queries:
                    scores.append((rid, qid, 0.0))
                continue
            for qid, query_template in task.queries:
                scores.append((rid, qid, match_templates(query_template, template)))
    elapsed_ms = (time.perf_counter() - start) * 1000.0
    return SimilarityResult(task.task_id, tuple(scores), worker_id, elapsed_ms, tuple(errors))


class _HeartbeatPump:
    """Sends heartbeat frames every interval until stopped."""

    def __init__(self, stream: FrameStream, interval: float):
        self._stream = stream
        self._interval = interval
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)

    def _run(self):
        while not self._stop.wait(self._interval):
            try:
                self._stream.send(heartbeat_frame())
            except OSError:
                return

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc_info):
        self._stop.set()
        self._thread.join()
        return False


def _parse_address(address) -> tuple:
    if isinstance(address, str):
        host, _, port = address.rpartition(":")
        return host or "127.0.0.1", int(port)
    return address


def run_worker(
    master_address,
    worker_id: str,
    heartbeat_secs: float = 2.0,
    simulate_ms: Optional[float] = None,
    poll_secs: float = 0.1,
    initial_backoff: float = 1.0,
    max_backoff: float = 30.0,
    reconnect: bool = True,
    stop_event: Optional[threading.Event] = None,
) -> None:
    """Connect, register, and serve tasks until stopped.

    Lost connections are retried with exponential backoff (doubling from
    ``initial_backoff`` up to ``max_backoff``); a rejected registration is
    fatal.  When idle the worker polls by sending a heartbeat every
    ``poll_secs`` and waiting for the master's task/no_task reply.
    """
    address = _parse_address(master_address)
    stop = stop_event if stop_event is not None else threading.Event()
    backoff = initial_backoff
    while not stop.is_set():
        try:
            sock = socket.create_connection(address, timeout=10.0)
        except OSError:
            if not reconnect:
                raise
            if stop.wait(backoff):
                return
            backoff = min(backoff * 2.0, max_backoff)
            continue
        sock.settimeout(None)
        stream = FrameStream(sock)
        try:
            stream.send(register_frame(worker_id))
            frame = stream.recv()
            if frame is not None and frame.get("type") == "error":
                raise RegistrationRejected(frame.get("reason", "registration rejected"))
            backoff = initial_backoff
            while not stop.is_set():
                if frame is None:
                    raise ConnectionError("master closed the connection")
                kind = frame.get("type")
                if kind == "task":
                    task = task_from_frame(frame)
                    with _HeartbeatPump(stream, heartbeat_secs):
                        result = execute_task(task, worker_id, simulate_ms=simulate_ms)
                    stream.send(result_frame(result))
                    frame = stream.recv()
                elif kind == "no_task":
                    if stop.wait(poll_secs):
                        return
                    stream.send(heartbeat_frame())
                    frame = stream.recv()
                elif kind == "error":
                    raise ProtocolError(f"master reported: {frame.get('reason')}")
                else:
                    raise ProtocolError(f"unexpected frame from master: {kind!r}")
        except (OSError, ConnectionError, ProtocolError):
            if not reconnect:
                raise
            if stop.wait(backoff):
                return
            backoff = min(backoff * 2.0, max_backoff)
        finally:
            stream.close()
