"""Command-line entry points: bench-agent (one node) and bench-ctl
(cluster coordinator)."""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from pathlib import Path

from .agent import DEFAULT_PORT, BenchAgent
from .autotune import TunerConfig, TunerBusyError, run_autotune
from .coordinator import Coordinator, CoordinatorServer, NoTargetableNodesError
from .metrics import SlaPolicy
from .plugins import PluginError, parse_hosts
from .properties import PropertyFileError, PropertySet


def agent_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bench-agent", description="Run one benchmark node with its control API."
    )
    parser.add_argument("--port", type=int, default=DEFAULT_PORT)
    parser.add_argument("--plugin", default="memstore", help="registered plugin name")
    parser.add_argument("--config", help="properties file (polled for changes)")
    parser.add_argument("--hosts", default="", help="host:port[,host:port...] for network plugins")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--bind", default="127.0.0.1", help="address to listen on")
    parser.add_argument("--instance-id", default=None)
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="default-layer property, repeatable",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    properties = PropertySet()
    for item in args.set:
        name, sep, value = item.partition("=")
        if not sep:
            parser.error(f"--set expects NAME=VALUE, got {item!r}")
        properties.set_defaults({name: value})
    if args.config:
        try:
            properties.load_file(Path(args.config))
        except PropertyFileError as exc:
            parser.error(str(exc))

    try:
        hosts = parse_hosts(args.hosts) if args.hosts else ()
    except ValueError as exc:
        parser.error(str(exc))

    try:
        agent = BenchAgent(
            plugin_name=args.plugin,
            properties=properties,
            port=args.port,
            host=args.bind,
            hosts=hosts,
            seed=args.seed,
            instance_id=args.instance_id,
        )
    except PluginError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    agent.start()
    if args.config:
        properties.start_file_polling()
    print(f"agent {agent.instance_id} serving on {agent.url}", flush=True)

    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    stop.wait()
    agent.stop()
    return 0


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def ctl_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bench-ctl", description="Cluster-wide control over benchmark agents."
    )
    parser.add_argument(
        "--cluster",
        required=True,
        help="registry URL, host:port list, or cluster name (with --registry)",
    )
    parser.add_argument("--registry", help="registry base URL used with a bare cluster name")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("status", help="discover nodes and show the cluster view")

    start = sub.add_parser("start", help="start workload on all UP nodes")
    start.add_argument("--which", choices=["reads", "writes", "both"], default="both")

    stop = sub.add_parser("stop", help="stop workload on all UP nodes")
    stop.add_argument("--which", choices=["reads", "writes", "both"], default="both")

    backfill = sub.add_parser("backfill", help="pre-load a key range on all UP nodes")
    backfill.add_argument("--start", type=int, required=True)
    backfill.add_argument("--end", type=int, required=True)

    set_cmd = sub.add_parser("set", help="set one property on all UP nodes")
    set_cmd.add_argument("name")
    set_cmd.add_argument("value")

    sub.add_parser("stats", help="aggregate statistics across the cluster")
    sub.add_parser("reset", help="reset statistics on all UP nodes")

    tune = sub.add_parser("autotune", help="discover the maximum sustainable rate")
    tune.add_argument("--initial-rate", type=float, default=100.0)
    tune.add_argument("--max-rate", type=float, default=100_000.0)
    tune.add_argument("--violation", type=float, default=0.05)
    tune.add_argument("--epoch", type=float, default=30.0)
    tune.add_argument("--warmup", type=float, default=10.0)
    tune.add_argument("--increase-factor", type=float, default=1.25)
    tune.add_argument("--backoff-factor", type=float, default=0.5)
    tune.add_argument("--epsilon", type=float, default=0.02)
    tune.add_argument("--read-fraction", type=float, default=0.8)
    group = tune.add_mutually_exclusive_group(required=True)
    group.add_argument("--sla-p99-ms", type=float, help="p99 latency SLA in ms")
    group.add_argument("--sla-p95-ms", type=float, help="p95 latency SLA in ms")
    group.add_argument("--sla-avg-ms", type=float, help="average latency SLA in ms")
    group.add_argument("--sla-per-op-ms", type=float, help="per-op latency SLA in ms")

    serve = sub.add_parser("serve", help="run the coordinator API and dashboard")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--bind", default="127.0.0.1")
    serve.add_argument("--ui-dir", default=None, help="directory of built dashboard assets")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    source = args.cluster
    if args.registry and not source.startswith(("http://", "https://")) and ":" not in source:
        source = f"{args.registry.rstrip('/')}/{source}"
    coordinator = Coordinator(source)

    try:
        return _run_ctl_command(args, coordinator)
    except NoTargetableNodesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TunerBusyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def _run_ctl_command(args, coordinator: Coordinator) -> int:
    command = args.command
    if command == "status":
        view = coordinator.discover()
        _emit(view.as_dict())
        return 0

    if command == "serve":
        ui_dir = args.ui_dir or _default_ui_dir()
        server = CoordinatorServer(
            coordinator, port=args.port, host=args.bind, ui_dir=ui_dir
        )
        coordinator.discover()
        server.start()
        print(f"coordinator serving on {server.url} (ui: {ui_dir or 'disabled'})", flush=True)
        stopper = threading.Event()
        signal.signal(signal.SIGINT, lambda *_: stopper.set())
        signal.signal(signal.SIGTERM, lambda *_: stopper.set())
        stopper.wait()
        server.stop()
        return 0

    coordinator.discover()
    if command == "stats":
        _emit(coordinator.aggregate_stats())
        return 0

    if command == "autotune":
        if args.sla_p99_ms is not None:
            policy = SlaPolicy(metric="p99", threshold_us=args.sla_p99_ms * 1000)
        elif args.sla_p95_ms is not None:
            policy = SlaPolicy(metric="p95", threshold_us=args.sla_p95_ms * 1000)
        elif args.sla_avg_ms is not None:
            policy = SlaPolicy(metric="avg", threshold_us=args.sla_avg_ms * 1000)
        else:
            policy = SlaPolicy(metric="perOp", threshold_us=args.sla_per_op_ms * 1000)
        cfg = TunerConfig(
            initial_rate=args.initial_rate,
            max_rate=args.max_rate,
            sla=policy,
            increase_factor=args.increase_factor,
            backoff_factor=args.backoff_factor,
            epoch_seconds=args.epoch,
            warmup_seconds=args.warmup,
            violation_threshold=args.violation,
            convergence_epsilon=args.epsilon,
            read_fraction=args.read_fraction,
        )
        targets = [node.base_url for node in coordinator.view.targetable()]
        if not targets:
            raise NoTargetableNodesError("no targetable nodes (health UP) in cluster view")
        report = run_autotune(
            targets, cfg, on_epoch=lambda record: print(json.dumps(record.as_dict()))
        )
        _emit(report.as_dict())
        return 0 if report.converged else 4

    # fan-out verbs
    if command == "start":
        outcomes = coordinator.fanout("POST", "/workload/start", params={"which": args.which})
    elif command == "stop":
        outcomes = coordinator.fanout("POST", "/workload/stop", params={"which": args.which})
    elif command == "backfill":
        outcomes = coordinator.fanout("POST", "/backfill", body={"start": args.start, "end": args.end})
    elif command == "set":
        outcomes = coordinator.fanout("POST", "/properties", body={"name": args.name, "value": args.value})
    elif command == "reset":
        outcomes = coordinator.fanout("POST", "/stats/reset")
    else:  # pragma: no cover
        raise AssertionError(command)
    _emit({nid: outcome.as_dict() for nid, outcome in outcomes.items()})
    return 0 if all(o.ok for o in outcomes.values()) else 1


def _default_ui_dir() -> str | None:
    candidates = [
        Path.cwd() / "frontend" / "dist",
        Path(__file__).resolve().parent.parent.parent.parent / "frontend" / "dist",
    ]
    for candidate in candidates:
        if (candidate / "index.html").is_file():
            return str(candidate)
    return None


if __name__ == "__main__":
    sys.exit(ctl_main())
