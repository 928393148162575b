"""Master node: client-facing HTTP API plus worker coordination over TCP.

Three thread groups share the in-memory state: the HTTP server (enroll,
submit, status), one thread per worker connection speaking the frame
protocol, and a sweeper that expires silent workers and requeues stale
tasks.  Jobs live only in memory; the record store is the durable part.

Worker protocol is lockstep: the master replies to ``register`` and
``result`` frames — and to ``heartbeat`` frames from an idle worker —
with exactly one ``task`` or ``no_task`` frame.  Heartbeats from a busy
worker only refresh its liveness timestamp.
"""

from __future__ import annotations

import json
import os
import signal
import socket
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

import uvicorn
from fastapi import FastAPI, File, Form, UploadFile
from fastapi.staticfiles import StaticFiles
from fastapi.responses import JSONResponse

from .core import extract_minutiae, read_pgm, PgmError
from .protocol import (
    FrameStream,
    ProtocolError,
    error_frame,
    no_task_frame,
    result_from_frame,
    task_frame,
)
from .store import RecordStore, StoreError
from .tasks import (
    QueryBatch,
    TaskQueue,
    UnknownTaskError,
    aggregate,
    build_tasks,
)

EVENT_LOG_TAIL = 50


@dataclass
class MasterConfig:
    store_path: str
    listen_client: tuple = ("127.0.0.1", 0)
    listen_workers: tuple = ("127.0.0.1", 0)
    pack_size: int = 1
    heartbeat_secs: float = 2.0
    task_timeout_secs: float = 60.0
    min_similarity: float = 0.0
    cache_templates: bool = False
    ready_file: Optional[str] = None
    ui_path: Optional[str] = None  # serve these static files under /ui

    @staticmethod
    def _addr(value) -> tuple:
        if isinstance(value, str):
            host, _, port = value.rpartition(":")
            return host or "127.0.0.1", int(port)
        return tuple(value)

    @classmethod
    def from_file(cls, path) -> "MasterConfig":
        raw = json.loads(Path(path).read_text())
        cfg = cls(store_path=raw["store_path"])
        if "listen_client" in raw:
            cfg.listen_client = cls._addr(raw["listen_client"])
        if "listen_workers" in raw:
            cfg.listen_workers = cls._addr(raw["listen_workers"])
        for key in ("pack_size", "heartbeat_secs", "task_timeout_secs", "min_similarity", "cache_templates", "ready_file", "ui_path"):
            if key in raw:
                setattr(cfg, key, raw[key])
        return cfg


class WorkerHandle:
    def __init__(self, worker_id: str, address: str, stream: FrameStream):
        self.worker_id = worker_id
        self.address = address
        self.stream = stream
        self.connected = True
        self.last_heartbeat = time.monotonic()
        self.last_heartbeat_wall = datetime.now(timezone.utc)
        self.tasks_completed = 0
        self.assigned_task_id: Optional[str] = None

    def touch(self) -> None:
        self.last_heartbeat = time.monotonic()
        self.last_heartbeat_wall = datetime.now(timezone.utc)

    def state(self, heartbeat_secs: float) -> str:
        if not self.connected:
            return "Lost"
        if time.monotonic() - self.last_heartbeat > 3 * heartbeat_secs:
            return "Lost"
        return "Busy" if self.assigned_task_id is not None else "Idle"

    def info(self, heartbeat_secs: float) -> dict:
        return {
            "workerId": self.worker_id,
            "address": self.address,
            "lastHeartbeat": self.last_heartbeat_wall.isoformat(),
            "state": self.state(heartbeat_secs),
            "tasksCompleted": self.tasks_completed,
        }


class QueryJob:
    def __init__(self, batch: QueryBatch, record_ids: list, queue: TaskQueue):
        self.batch = batch
        self.record_ids = record_ids
        self.queue = queue
        self.submitted_at = datetime.now(timezone.utc)
        self.t0 = time.monotonic()
        self.total_running_time: Optional[float] = None
        self.answers: Optional[list] = None
        self._event_log: list = []
        self._lock = threading.Lock()

    def log(self, message: str) -> None:
        stamp = datetime.now(timezone.utc).isoformat(timespec="milliseconds")
        with self._lock:
            self._event_log.append(f"{stamp} {message}")

    def event_log(self, tail: Optional[int] = None) -> list:
        with self._lock:
            events = list(self._event_log)
        return events if tail is None else events[-tail:]

    def snapshot(self) -> dict:
        with self._lock:
            answers = self.answers
            total_running_time = self.total_running_time
        return {
            "batchId": self.batch.batch_id,
            "submittedAt": self.submitted_at.isoformat(),
            "progress": self.queue.progress(),
            "answers": None
            if answers is None
            else [
                {
                    "queryId": a.query_id,
                    "bestRecordId": a.best_record_id,
                    "bestSimilarity": a.best_similarity,
                    "person": a.person,
                }
                for a in answers
            ],
            "eventLog": self.event_log(tail=EVENT_LOG_TAIL),
            "totalRunningTime": total_running_time,
        }


class ApiError(Exception):
    def __init__(self, status: int, error: str, detail):
        super().__init__(error)
        self.status = status
        self.error = error
        self.detail = detail


class Master:
    def __init__(self, config: MasterConfig):
        self.config = config
        self.store = RecordStore(config.store_path, cache_templates=config.cache_templates)
        self.jobs: "OrderedDict[str, QueryJob]" = OrderedDict()
        self._jobs_lock = threading.Lock()
        self._task_index: dict = {}  # task_id -> batch_id
        self._workers: dict = {}
        self._workers_lock = threading.Lock()
        self._batch_counter = 0
        self._shutdown = threading.Event()
        self._threads: list = []
        self._worker_listener: Optional[socket.socket] = None
        self._uvicorn: Optional[uvicorn.Server] = None
        self.client_port: Optional[int] = None
        self.worker_port: Optional[int] = None

    # -- client operations ----------------------------------------------

    def enroll(self, name: str, metadata: dict, image_bytes: bytes, photo: Optional[bytes]) -> str:
        try:
            return self.store.enroll(name, metadata, image_bytes, photo)
        except StoreError as exc:
            raise ApiError(400, "enrollment rejected", str(exc)) from exc

    def submit_query(self, named_images: list) -> str:
        """Extract templates for each (filename, bytes) pair and start a job."""
        if not named_images:
            raise ApiError(400, "empty query", "at least one image is required")
        diagnostics = []
        templates = []
        for index, (filename, data) in enumerate(named_images):
            try:
                templates.append(extract_minutiae(read_pgm(data)))
            except (PgmError, ValueError) as exc:
                diagnostics.append({"index": index, "filename": filename, "reason": str(exc)})
        if diagnostics:
            raise ApiError(400, "undecodable image", diagnostics)

        with self._jobs_lock:
            self._batch_counter += 1
            batch_id = f"b{self._batch_counter:06d}"
        batch = QueryBatch(
            batch_id,
            tuple((f"q{i + 1:06d}", t) for i, t in enumerate(templates)),
        )
        record_ids = [rid for rid, _ in self.store.list_records()]
        if self.config.cache_templates:
            payload_for = self.store.template_for
        else:
            payload_for = self.store.fingerprint_bytes
        tasks = build_tasks(record_ids, batch, self.config.pack_size, payload_for)
        job = QueryJob(batch, record_ids, TaskQueue())
        job.queue.enqueue(tasks)
        with self._jobs_lock:
            self.jobs[batch_id] = job
            for t in tasks:
                self._task_index[t.task_id] = batch_id
        job.log(f"batch created, {len(tasks)} tasks")
        if not tasks:
            self._finalize(job)
        return batch_id

    def job_status(self, batch_id: str) -> dict:
        with self._jobs_lock:
            job = self.jobs.get(batch_id)
        if job is None:
            raise ApiError(404, "not found", f"unknown batchId: {batch_id}")
        return job.snapshot()

    def status(self) -> dict:
        with self._workers_lock:
            active = sum(
                1 for w in self._workers.values() if w.state(self.config.heartbeat_secs) != "Lost"
            )
        with self._jobs_lock:
            active_jobs = sum(1 for j in self.jobs.values() if j.answers is None)
        return {"records": len(self.store), "workers": active, "activeJobs": active_jobs}

    def worker_infos(self) -> list:
        with self._workers_lock:
            handles = list(self._workers.values())
        return [w.info(self.config.heartbeat_secs) for w in handles]

    # -- job plumbing ----------------------------------------------------

    def _person_lookup(self, record_id: str) -> dict:
        rec = self.store.get_record(record_id)
        return {"name": rec.name, "metadata": rec.metadata, "photoPath": rec.photo_path}

    def _finalize(self, job: QueryJob) -> None:
        with job._lock:
            if job.answers is not None:
                return
            answers = aggregate(
                job.batch,
                job.queue.results(),
                job.record_ids,
                person_lookup=self._person_lookup,
                min_similarity=self.config.min_similarity,
            )
            job.answers = answers
            job.total_running_time = time.monotonic() - job.t0
        job.log(f"all tasks done, total running time {job.total_running_time:.3f}s")

    def _next_assignment(self, worker_id: str):
        with self._jobs_lock:
            jobs = list(self.jobs.values())
        for job in jobs:
            task = job.queue.next_task(worker_id)
            if task is not None:
                return job, task
        return None

    def _job_for_task(self, task_id: str) -> Optional[QueryJob]:
        with self._jobs_lock:
            batch_id = self._task_index.get(task_id)
            return self.jobs.get(batch_id) if batch_id is not None else None

    # -- worker protocol -------------------------------------------------

    def _offer(self, worker: WorkerHandle) -> None:
        assignment = self._next_assignment(worker.worker_id)
        if assignment is None:
            worker.assigned_task_id = None
            worker.stream.send(no_task_frame())
            return
        job, task = assignment
        worker.assigned_task_id = task.task_id
        job.log(f"task {task.task_id} dispatched to {worker.worker_id}")
        worker.stream.send(task_frame(task))

    def _accept_result(self, worker: WorkerHandle, frame: dict) -> None:
        result = result_from_frame(frame, worker.worker_id)
        job = self._job_for_task(result.task_id)
        if job is None:
            raise ProtocolError(f"result for unknown task: {result.task_id}")
        fresh = job.queue.complete(result)  # may raise UnknownTaskError
        if fresh:
            worker.tasks_completed += 1
            done = job.queue.progress()["done"]
            total = job.queue.progress()["total"]
            job.log(f"task {result.task_id} completed by {worker.worker_id} ({done}/{total})")
            for rid, reason in result.errors:
                job.log(f"record {rid} failed on {worker.worker_id}: {reason}")
            if job.queue.remaining() == 0:
                self._finalize(job)

    def _reclaim(self, worker: WorkerHandle) -> None:
        worker.connected = False
        worker.assigned_task_id = None
        with self._jobs_lock:
            jobs = list(self.jobs.values())
        for job in jobs:
            for task_id in job.queue.requeue_for_worker(worker.worker_id):
                job.log(f"worker {worker.worker_id} lost, task {task_id} requeued")

    def _handle_worker(self, conn: socket.socket, addr) -> None:
        stream = FrameStream(conn)
        worker: Optional[WorkerHandle] = None
        try:
            frame = stream.recv()
            if frame is None:
                return
            if frame.get("type") != "register":
                stream.send(error_frame("first frame must be register"))
                return
            worker_id = frame.get("workerId")
            if not isinstance(worker_id, str) or not worker_id:
                stream.send(error_frame("register frame needs a non-empty workerId"))
                return
            with self._workers_lock:
                existing = self._workers.get(worker_id)
                if existing is not None and existing.connected:
                    stream.send(error_frame(f"duplicate workerId: {worker_id}"))
                    return
                worker = WorkerHandle(worker_id, f"{addr[0]}:{addr[1]}", stream)
                if existing is not None:
                    worker.tasks_completed = existing.tasks_completed
                self._workers[worker_id] = worker
            self._offer(worker)
            while not self._shutdown.is_set():
                frame = stream.recv()
                if frame is None:
                    return
                worker.touch()
                kind = frame.get("type")
                if kind == "heartbeat":
                    if worker.assigned_task_id is None:
                        self._offer(worker)
                elif kind == "result":
                    self._accept_result(worker, frame)
                    worker.assigned_task_id = None
                    self._offer(worker)
                else:
                    raise ProtocolError(f"unexpected frame type {kind!r} after register")
        except (ProtocolError, UnknownTaskError) as exc:
            try:
                stream.send(error_frame(str(exc)))
            except OSError:
                pass
        except OSError:
            pass
        finally:
            if worker is not None:
                self._reclaim(worker)
            stream.close()

    def _accept_loop(self) -> None:
        # A timeout lets the loop notice shutdown; closing a listening
        # socket does not reliably wake a blocked accept().
        self._worker_listener.settimeout(0.2)
        while not self._shutdown.is_set():
            try:
                conn, addr = self._worker_listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return  # listener closed during shutdown
            conn.settimeout(None)
            thread = threading.Thread(target=self._handle_worker, args=(conn, addr), daemon=True)
            thread.start()
            self._threads.append(thread)

    # -- sweeper ---------------------------------------------------------

    def _sweep_once(self) -> None:
        with self._workers_lock:
            handles = list(self._workers.values())
        for w in handles:
            if w.connected and time.monotonic() - w.last_heartbeat > 3 * self.config.heartbeat_secs:
                w.connected = False
                w.stream.close()  # unblocks its handler thread, which reclaims
        with self._jobs_lock:
            jobs = list(self.jobs.values())
        for job in jobs:
            for task_id in job.queue.requeue_expired(self.config.task_timeout_secs):
                job.log(f"task {task_id} timed out, requeued")

    def _sweep_loop(self) -> None:
        period = min(0.5, self.config.heartbeat_secs / 4)
        while not self._shutdown.wait(period):
            self._sweep_once()

    # -- lifecycle -------------------------------------------------------

    def start(self) -> None:
        self._worker_listener = socket.create_server(self.config.listen_workers)
        self.worker_port = self._worker_listener.getsockname()[1]
        accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        accept_thread.start()
        self._threads.append(accept_thread)

        client_sock = socket.create_server(self.config.listen_client)
        self.client_port = client_sock.getsockname()[1]
        app = build_app(self)
        uv_config = uvicorn.Config(app, log_level="warning", access_log=False, lifespan="off")
        self._uvicorn = uvicorn.Server(uv_config)
        http_thread = threading.Thread(
            target=self._uvicorn.run, kwargs={"sockets": [client_sock]}, daemon=True
        )
        http_thread.start()
        self._threads.append(http_thread)
        deadline = time.monotonic() + 10.0
        while not self._uvicorn.started:
            if time.monotonic() > deadline:
                raise RuntimeError("HTTP server failed to start")
            time.sleep(0.01)

        sweep_thread = threading.Thread(target=self._sweep_loop, daemon=True)
        sweep_thread.start()
        self._threads.append(sweep_thread)

        if self.config.ready_file:
            payload = {
                "clientPort": self.client_port,
                "workerPort": self.worker_port,
                "pid": os.getpid(),
            }
            # write-then-rename so watchers never read a half-written file
            target = Path(self.config.ready_file)
            scratch = target.with_name(target.name + ".tmp")
            scratch.write_text(json.dumps(payload))
            os.replace(scratch, target)

    def stop(self) -> None:
        if self._shutdown.is_set():
            return
        self._shutdown.set()
        if self._worker_listener is not None:
            self._worker_listener.close()
        with self._workers_lock:
            handles = list(self._workers.values())
        for w in handles:
            w.stream.close()
        if self._uvicorn is not None:
            self._uvicorn.should_exit = True
        for t in self._threads:
            t.join(timeout=5.0)

    def serve_forever(self) -> None:
        def _terminate(signum, frame):
            self._shutdown.set()

        signal.signal(signal.SIGTERM, _terminate)
        signal.signal(signal.SIGINT, _terminate)
        try:
            while not self._shutdown.is_set():
                time.sleep(0.2)
        finally:
            self.stop()


def build_app(master: Master) -> FastAPI:
    app = FastAPI(title="fingerprint identification master", docs_url=None, redoc_url=None)

    @app.exception_handler(ApiError)
    def _api_error(request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"error": exc.error, "detail": exc.detail})

    @app.post("/records")
    def create_record(
        image: UploadFile = File(...),
        name: str = Form(""),
        metadata: str = Form("{}"),
        photo: Optional[UploadFile] = File(None),
    ):
        try:
            meta = json.loads(metadata)
        except json.JSONDecodeError as exc:
            raise ApiError(400, "bad metadata", f"metadata must be a JSON object: {exc}")
        if not isinstance(meta, dict):
            raise ApiError(400, "bad metadata", "metadata must be a JSON object")
        image_bytes = image.file.read()
        photo_bytes = photo.file.read() if photo is not None else None
        record_id = master.enroll(name, meta, image_bytes, photo_bytes)
        return {"recordId": record_id}

    @app.post("/queries")
    def submit_queries(images: List[UploadFile] = File(...)):
        named = [(f.filename or f"image{i}", f.file.read()) for i, f in enumerate(images)]
        return {"batchId": master.submit_query(named)}

    @app.get("/queries/{batch_id}")
    def query_status(batch_id: str):
        return master.job_status(batch_id)

    @app.get("/status")
    def status():
        return master.status()

    @app.get("/workers")
    def workers():
        return master.worker_infos()

    if master.config.ui_path:
        # the operator console: plain static files, same origin as the API
        app.mount("/ui", StaticFiles(directory=master.config.ui_path, html=True))

    return app


def run_master(config: MasterConfig) -> Master:
    master = Master(config)
    master.start()
    return master
