"""Newline-delimited JSON wire protocol between master and workers.

One JSON object per line; each side writes whole frames under a lock so a
heartbeat thread and a task thread can share the socket safely.  Frame
shapes:

    {"type": "register", "workerId": ...}
    {"type": "task", "taskId": ..., "queries": [...], "records": [...]}
    {"type": "no_task"}
    {"type": "result", "taskId": ..., "scores": [...], "elapsedMs": ...}
    {"type": "heartbeat"}
    {"type": "error", "reason": ...}

Task records carry either ``imageB64`` (raw PGM bytes) or ``template``;
result scores are ``{recordId, queryId, similarity}`` objects.  A result
may add an ``errors`` list naming records that could not be processed.
"""

from __future__ import annotations

import base64
import json
import socket
import threading
from typing import Optional

from .core import template_from_dict, template_to_dict
from .tasks import ComparisonTask, SimilarityResult

MAX_FRAME_BYTES = 64 * 1024 * 1024  # far above any realistic task frame


class ProtocolError(Exception):
    pass


class FrameStream:
    """Blocking frame reader/writer over a connected socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        try:
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        except OSError:
            pass  # not a TCP socket (tests use socketpairs)
        self._reader = sock.makefile("rb")
        self._write_lock = threading.Lock()

    def send(self, frame: dict) -> None:
        data = json.dumps(frame, separators=(",", ":")).encode() + b"\n"
        with self._write_lock:
            self._sock.sendall(data)

    def recv(self) -> Optional[dict]:
        """Next frame, or None on a clean EOF."""
        line = self._reader.readline(MAX_FRAME_BYTES)
        if not line:
            return None
        if not line.endswith(b"\n"):
            raise ProtocolError("frame exceeds maximum size or truncated stream")
        try:
            frame = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"frame is not valid JSON: {exc}") from exc
        if not isinstance(frame, dict) or not isinstance(frame.get("type"), str):
            raise ProtocolError("frame must be an object with a string 'type'")
        return frame

    def close(self) -> None:
        try:
            self._reader.close()
        except OSError:
            pass
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


# -- frame constructors ------------------------------------------------------


def register_frame(worker_id: str) -> dict:
    return {"type": "register", "workerId": worker_id}


def no_task_frame() -> dict:
    return {"type": "no_task"}


def heartbeat_frame() -> dict:
    return {"type": "heartbeat"}


def error_frame(reason: str) -> dict:
    return {"type": "error", "reason": reason}


def task_frame(task: ComparisonTask) -> dict:
    records = []
    for rid, payload in task.records:
        if isinstance(payload, (bytes, bytearray)):
            records.append({"recordId": rid, "imageB64": base64.b64encode(bytes(payload)).decode()})
        elif payload is not None:
            records.append({"recordId": rid, "template": template_to_dict(payload)})
        else:
            raise ProtocolError(f"task {task.task_id}: record {rid} has no payload")
    return {
        "type": "task",
        "taskId": task.task_id,
        "queries": [
            {"queryId": qid, "template": template_to_dict(t)} for qid, t in task.queries
        ],
        "records": records,
    }


def result_frame(result: SimilarityResult) -> dict:
    frame = {
        "type": "result",
        "taskId": result.task_id,
        "scores": [
            {"recordId": rid, "queryId": qid, "similarity": sim}
            for rid, qid, sim in result.scores
        ],
        "elapsedMs": result.elapsed_ms,
    }
    if result.errors:
        frame["errors"] = [{"recordId": rid, "reason": reason} for rid, reason in result.errors]
    return frame


# -- frame parsers -----------------------------------------------------------


def _require(frame: dict, key: str):
    if key not in frame:
        raise ProtocolError(f"{frame.get('type')} frame missing '{key}'")
    return frame[key]


def task_from_frame(frame: dict) -> ComparisonTask:
    queries = tuple(
        (q["queryId"], template_from_dict(q["template"])) for q in _require(frame, "queries")
    )
    records = []
    for entry in _require(frame, "records"):
        rid = entry["recordId"]
        if "imageB64" in entry:
            records.append((rid, base64.b64decode(entry["imageB64"])))
        elif "template" in entry:
            records.append((rid, template_from_dict(entry["template"])))
        else:
            raise ProtocolError(f"record {rid} carries neither imageB64 nor template")
    return ComparisonTask(
        task_id=_require(frame, "taskId"),
        batch_id="",  # not on the wire; workers never need it
        queries=queries,
        records=tuple(records),
    )


def result_from_frame(frame: dict, worker_id: str) -> SimilarityResult:
    scores = tuple(
        (s["recordId"], s["queryId"], float(s["similarity"]))
        for s in _require(frame, "scores")
    )
    errors = tuple((e["recordId"], e["reason"]) for e in frame.get("errors", ()))
    return SimilarityResult(
        task_id=_require(frame, "taskId"),
        scores=scores,
        worker_id=worker_id,
        elapsed_ms=float(frame.get("elapsedMs", 0.0)),
        errors=errors,
    )
