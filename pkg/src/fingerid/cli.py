"""Command-line front end.

Client commands (enroll, query, status) talk to a running master over
HTTP; serve-master and worker start the long-running processes; synth
and bench are local utilities.  The master address comes from --master,
falling back to the FINGERID_MASTER environment variable.

Exit codes: 0 success, 1 usage or request rejected, 2 network failure,
3 not found.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import requests

MASTER_ENV = "FINGERID_MASTER"
DEFAULT_MASTER = "127.0.0.1:8000"

EXIT_USAGE = 1
EXIT_NETWORK = 2
EXIT_NOT_FOUND = 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _base_url(args) -> str:
    address = args.master or os.environ.get(MASTER_ENV) or DEFAULT_MASTER
    if "://" not in address:
        address = "http://" + address
    return address.rstrip("/")


def _request(method: str, url: str, **kwargs):
    try:
        response = requests.request(method, url, timeout=kwargs.pop("timeout", 30), **kwargs)
    except requests.RequestException as exc:
        raise CliError(EXIT_NETWORK, f"cannot reach master at {url}: {exc}") from exc
    if response.status_code == 404:
        detail = _error_detail(response)
        raise CliError(EXIT_NOT_FOUND, detail or "not found")
    if response.status_code >= 400:
        detail = _error_detail(response)
        raise CliError(EXIT_USAGE, detail or f"request failed with {response.status_code}")
    return response.json()


def _error_detail(response) -> str:
    try:
        body = response.json()
        return f"{body.get('error', '')}: {body.get('detail', '')}".strip(": ")
    except ValueError:
        return response.text.strip()


def _emit(args, payload: dict, text: str) -> None:
    print(json.dumps(payload, indent=2) if args.json else text)


# ---------------------------------------------------------------- commands


def cmd_enroll(args) -> int:
    image_path = Path(args.image)
    if not image_path.is_file():
        raise CliError(EXIT_NOT_FOUND, f"no such file: {image_path}")
    files = {"image": (image_path.name, image_path.read_bytes())}
    if args.photo:
        photo_path = Path(args.photo)
        if not photo_path.is_file():
            raise CliError(EXIT_NOT_FOUND, f"no such file: {photo_path}")
        files["photo"] = (photo_path.name, photo_path.read_bytes())
    data = {"name": args.name, "metadata": args.metadata}
    body = _request("POST", f"{_base_url(args)}/records", files=files, data=data)
    _emit(args, body, f"enrolled {body['recordId']}")
    return 0


def cmd_query(args) -> int:
    files = []
    for name in args.images:
        path = Path(name)
        if not path.is_file():
            raise CliError(EXIT_NOT_FOUND, f"no such file: {path}")
        files.append(("images", (path.name, path.read_bytes())))
    base = _base_url(args)
    body = _request("POST", f"{base}/queries", files=files)
    batch_id = body["batchId"]
    if not args.wait:
        _emit(args, body, f"submitted {batch_id}")
        return 0
    import time as _time

    while True:
        snapshot = _request("GET", f"{base}/queries/{batch_id}")
        if snapshot["answers"] is not None:
            break
        _time.sleep(args.poll_interval)
    if args.json:
        print(json.dumps(snapshot, indent=2))
        return 0
    print(f"batch {batch_id} done in {snapshot['totalRunningTime']:.3f}s")
    print(f"{'query':<12} {'name':<20} {'recordId':<10} similarity")
    for answer in snapshot["answers"]:
        person = answer.get("person") or {}
        name = person.get("name") or "-"
        record = answer.get("bestRecordId") or "no match"
        print(f"{answer['queryId']:<12} {name:<20} {record:<10} {answer['bestSimilarity']:.4f}")
    return 0


def cmd_status(args) -> int:
    body = _request("GET", f"{_base_url(args)}/status")
    text = (
        f"{body['records']} records, {body['workers']} workers, "
        f"{body['activeJobs']} active jobs"
    )
    _emit(args, body, text)
    return 0


def cmd_serve_master(args) -> int:
    from .master import MasterConfig, run_master

    if args.config:
        config = MasterConfig.from_file(args.config)
    else:
        config = MasterConfig(store_path=Path("store"))
    overrides = {
        "store_path": Path(args.store) if args.store else None,
        "listen_client": _parse_listen(args.listen_client),
        "listen_workers": _parse_listen(args.listen_workers),
        "pack_size": args.pack_size,
        "heartbeat_secs": args.heartbeat_secs,
        "task_timeout_secs": args.task_timeout_secs,
        "min_similarity": args.min_similarity,
        "ready_file": Path(args.ready_file) if args.ready_file else None,
        "ui_path": args.ui,
    }
    if args.cache_templates:
        overrides["cache_templates"] = True
    import dataclasses

    config = dataclasses.replace(
        config, **{k: v for k, v in overrides.items() if v is not None}
    )
    run_master(config).serve_forever()
    return 0


def _parse_listen(value):
    if value is None:
        return None
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise CliError(EXIT_USAGE, f"bad listen address {value!r}, expected HOST:PORT")
    return (host, int(port))


def cmd_worker(args) -> int:
    from .worker import RegistrationRejected, run_worker

    try:
        run_worker(
            args.master,
            worker_id=args.id,
            heartbeat_secs=args.heartbeat_secs,
            simulate_ms=args.simulate,
        )
    except RegistrationRejected as exc:
        raise CliError(EXIT_USAGE, f"registration rejected: {exc}") from exc
    except (OSError, ConnectionError) as exc:
        raise CliError(EXIT_NETWORK, str(exc)) from exc
    return 0


def cmd_synth(args) -> int:
    from .synth import SynthSpec, synth_generate

    spec = SynthSpec(
        count=args.count,
        minutiae_min=args.min_minutiae,
        minutiae_max=args.max_minutiae,
        image_size=(args.size, args.size),
        seed=args.seed,
        max_rotation=math.radians(args.max_rotation_deg),
        max_translation=args.max_translation,
        drop_fraction=args.drop_fraction,
    )
    manifest = synth_generate(spec, args.out_dir)
    _emit(
        args,
        {"outDir": str(args.out_dir), "records": len(manifest["records"])},
        f"wrote {len(manifest['records'])} records to {args.out_dir}",
    )
    return 0


def cmd_bench(args) -> int:
    from .bench import bench_tasks, bench_workers

    if args.experiment == "workers":
        result = bench_workers(tasks=args.tasks, simulate_ms=args.simulate, reps=args.reps)
    else:
        result = bench_tasks(workers=args.workers, simulate_ms=args.simulate, reps=args.reps)
    csv_text = result.to_csv()
    if args.out:
        Path(args.out).write_text(csv_text)
    if args.json:
        print(json.dumps(result.to_dict(), indent=2))
    else:
        sys.stdout.write(csv_text)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fingerid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def client_flags(p):
        p.add_argument("--master", help=f"master address host:port (default ${MASTER_ENV})")
        p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("enroll", help="enroll one fingerprint image")
    p.add_argument("image")
    p.add_argument("--name", default="")
    p.add_argument("--metadata", default="{}", help="JSON object with extra fields")
    p.add_argument("--photo", help="optional portrait file")
    client_flags(p)
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("query", help="submit query fingerprints")
    p.add_argument("images", nargs="+")
    p.add_argument("--wait", action="store_true", help="poll until done and print answers")
    p.add_argument("--poll-interval", type=float, default=0.2)
    client_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("status", help="records / workers / active jobs")
    client_flags(p)
    p.set_defaults(func=cmd_status)

    p = sub.add_parser("serve-master", help="run the master service")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--store", help="record store directory")
    p.add_argument("--listen-client", help="HOST:PORT for the HTTP API")
    p.add_argument("--listen-workers", help="HOST:PORT for worker connections")
    p.add_argument("--pack-size", type=int)
    p.add_argument("--heartbeat-secs", type=float)
    p.add_argument("--task-timeout-secs", type=float)
    p.add_argument("--min-similarity", type=float)
    p.add_argument("--cache-templates", action="store_true")
    p.add_argument("--ready-file", help="write ports/pid JSON here once listening")
    p.add_argument("--ui", help="serve this directory of static files under /ui")
    p.set_defaults(func=cmd_serve_master)

    p = sub.add_parser("worker", help="run a worker node")
    p.add_argument("--master", required=True, help="worker port of the master, host:port")
    p.add_argument("--id", default=f"worker-{os.getpid()}")
    p.add_argument("--simulate", type=int, default=None, metavar="MS",
                   help="sleep MS per record instead of matching")
    p.add_argument("--heartbeat-secs", type=float, default=2.0)
    p.set_defaults(func=cmd_worker)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("out_dir")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-minutiae", type=int, default=20)
    p.add_argument("--max-minutiae", type=int, default=40)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--max-rotation-deg", type=float, default=15.0)
    p.add_argument("--max-translation", type=float, default=10.0)
    p.add_argument("--drop-fraction", type=float, default=0.1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="scaling benchmarks, CSV output")
    p.add_argument("experiment", choices=["workers", "tasks"])
    p.add_argument("--simulate", type=int, default=50, metavar="MS")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--tasks", type=int, default=140, help="fixed task count (workers sweep)")
    p.add_argument("--workers", type=int, default=8, help="fixed worker count (tasks sweep)")
    p.add_argument("--out", help="also write the CSV to this file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"fingerid: {exc}", file=sys.stderr)
        return exc.code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
