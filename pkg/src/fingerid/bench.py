"""Scaling benchmarks: run time vs worker count and vs task count.

Each measurement point boots a real master process plus N worker
processes in simulate mode (fixed sleep per record instead of matching),
submits one query batch, and reads the master's reported total running
time (submit to last result).  The harness's own submit-to-done wall
clock is kept alongside as a consistency check.  Results go to CSV with
a stable schema; the task sweep also gets a least-squares line fit.
"""

from __future__ import annotations

import json
import statistics
import subprocess
import sys
import tempfile
import time
from contextlib import ExitStack, contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests

from .core import GrayImage, write_pgm
from .store import RecordStore

DEFAULT_WORKER_COUNTS = (1, 2, 4, 8)
DEFAULT_TASK_COUNTS = (20, 60, 100, 140)
READY_TIMEOUT_SECS = 20.0
POLL_SECS = 0.005


@dataclass(frozen=True)
class BenchPoint:
    x: int
    run_seconds: float
    repetitions: int
    stddev: float
    harness_seconds: float


@dataclass(frozen=True)
class BenchResult:
    experiment: str  # "WorkersSweep" or "TasksSweep"
    points: tuple
    config: dict

    def __post_init__(self):
        xs = [p.x for p in self.points]
        if xs != sorted(xs):
            raise ValueError("points must be sorted by x")
        if any(p.run_seconds <= 0 for p in self.points):
            raise ValueError("run_seconds must be positive")

    @property
    def x_label(self) -> str:
        return "workers" if self.experiment == "WorkersSweep" else "tasks"

    def to_csv(self) -> str:
        lines = [f"{self.x_label},run_seconds,stddev"]
        for p in self.points:
            lines.append(f"{p.x},{p.run_seconds:.3f},{p.stddev:.3f}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "points": [
                {
                    "x": p.x,
                    "runSeconds": p.run_seconds,
                    "repetitions": p.repetitions,
                    "stddev": p.stddev,
                    "harnessSeconds": p.harness_seconds,
                }
                for p in self.points
            ],
            "config": self.config,
        }


def linear_fit(xs, ys):
    """Least-squares line; returns (slope, intercept, r_squared)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    predicted = slope * xs + intercept
    ss_res = float(((ys - predicted) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r_squared


def _tiny_pgm() -> bytes:
    return write_pgm(GrayImage(np.full((32, 32), 128, dtype=np.uint8)))


def _populate_store(path: Path, count: int) -> None:
    store = RecordStore(path)
    image = _tiny_pgm()
    for i in range(count):
        store.enroll(f"bench-{i + 1}", {}, image)


@contextmanager
def _master_process(store_path: Path, scratch: Path):
    ready_path = scratch / "ready.json"
    cmd = [
        sys.executable,
        "-m",
        "fingerid",
        "serve-master",
        "--store",
        str(store_path),
        "--listen-client",
        "127.0.0.1:0",
        "--listen-workers",
        "127.0.0.1:0",
        "--ready-file",
        str(ready_path),
    ]
    proc = subprocess.Popen(cmd, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    try:
        deadline = time.monotonic() + READY_TIMEOUT_SECS
        ports = None
        while ports is None:
            if proc.poll() is not None:
                raise RuntimeError(f"master exited early with code {proc.returncode}")
            if time.monotonic() > deadline:
                raise RuntimeError("master did not become ready in time")
            try:
                ports = json.loads(ready_path.read_text())
            except (OSError, json.JSONDecodeError):
                time.sleep(0.02)
        yield ports["clientPort"], ports["workerPort"]
    finally:
        proc.terminate()
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()


def _worker_process(worker_port: int, worker_id: str, simulate_ms: int) -> subprocess.Popen:
    cmd = [
        sys.executable,
        "-m",
        "fingerid",
        "worker",
        "--master",
        f"127.0.0.1:{worker_port}",
        "--id",
        worker_id,
        "--simulate",
        str(simulate_ms),
        "--heartbeat-secs",
        "0.5",
    ]
    return subprocess.Popen(cmd, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)


def run_once(tasks: int, workers: int, simulate_ms: int):
    """One measurement: returns (master_total_seconds, harness_wall_seconds)."""
    with ExitStack() as stack:
        scratch = Path(stack.enter_context(tempfile.TemporaryDirectory(prefix="fingerid-bench-")))
        store_path = scratch / "store"
        _populate_store(store_path, tasks)
        client_port, worker_port = stack.enter_context(_master_process(store_path, scratch))
        base = f"http://127.0.0.1:{client_port}"

        procs = [_worker_process(worker_port, f"bench-w{i + 1}", simulate_ms) for i in range(workers)]
        stack.callback(lambda: [_stop(p) for p in procs])

        deadline = time.monotonic() + READY_TIMEOUT_SECS
        while True:
            roster = requests.get(f"{base}/workers", timeout=5).json()
            if len(roster) >= workers:
                break
            if time.monotonic() > deadline:
                raise RuntimeError(f"only {len(roster)}/{workers} workers registered")
            time.sleep(0.02)

        t0 = time.perf_counter()
        response = requests.post(
            f"{base}/queries", files=[("images", ("probe.pgm", _tiny_pgm()))], timeout=10
        )
        response.raise_for_status()
        batch_id = response.json()["batchId"]
        while True:
            snapshot = requests.get(f"{base}/queries/{batch_id}", timeout=5).json()
            if snapshot["answers"] is not None:
                wall = time.perf_counter() - t0
                return snapshot["totalRunningTime"], wall
            time.sleep(POLL_SECS)


def _stop(proc: subprocess.Popen) -> None:
    proc.terminate()
    try:
        proc.wait(timeout=5)
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.wait()


def _sweep(experiment, xs, tasks_for, workers_for, simulate_ms, reps, runner):
    runner = runner or run_once
    points, failed = [], []
    for x in sorted(xs):
        try:
            samples = [runner(tasks_for(x), workers_for(x), simulate_ms) for _ in range(reps)]
        except Exception as exc:  # spawn/measure failure: drop the point, keep sweeping
            failed.append({"x": x, "reason": str(exc)})
            continue
        totals = sorted(s[0] for s in samples)
        walls = sorted(s[1] for s in samples)
        points.append(
            BenchPoint(
                x=x,
                run_seconds=totals[len(totals) // 2],
                repetitions=reps,
                stddev=statistics.pstdev(totals) if len(totals) > 1 else 0.0,
                harness_seconds=walls[len(walls) // 2],
            )
        )
    config = {"simulateMs": simulate_ms, "repetitions": reps}
    if failed:
        config["failedPoints"] = failed
    return BenchResult(experiment, tuple(points), config)


def bench_workers(
    tasks: int = 140,
    workers=DEFAULT_WORKER_COUNTS,
    simulate_ms: int = 50,
    reps: int = 3,
    runner=None,
) -> BenchResult:
    result = _sweep(
        "WorkersSweep", workers, lambda x: tasks, lambda x: x, simulate_ms, reps, runner
    )
    result.config["tasks"] = tasks
    return result


def bench_tasks(
    workers: int = 8,
    tasks=DEFAULT_TASK_COUNTS,
    simulate_ms: int = 50,
    reps: int = 3,
    runner=None,
) -> BenchResult:
    xs = [x for x in tasks if x > 0]  # an empty batch completes instantly: nothing to time
    result = _sweep("TasksSweep", xs, lambda x: x, lambda x: workers, simulate_ms, reps, runner)
    result.config["workers"] = workers
    slope, intercept, r_squared = linear_fit(
        [p.x for p in result.points], [p.run_seconds for p in result.points]
    )
    result.config["fit"] = {"slope": slope, "intercept": intercept, "rSquared": r_squared}
    return result


def speedup(result: BenchResult, baseline_x: int, target_x: int) -> float:
    by_x = {p.x: p.run_seconds for p in result.points}
    return by_x[baseline_x] / by_x[target_x]
