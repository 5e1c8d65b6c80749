"""Command-line entry point: ``capifsim {run,validate,trace,topology-list}``.

Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from .errors import ConfigError
from .harness import ExperimentSpec, RunFailed, compare, comparison_json, run_experiment_detailed
from .model import Strategy, VnfKind, ZoneId
from .netem.latency import DelayMode
from .netem.topology import (
    TopologyError,
    bundled_topology,
    bundled_topology_document,
    load_topology,
    validate_document,
)
from .scp.routes import sidecar_port_for
from .telemetry.export import IoFailure, export_traces
from .telemetry.query import MalformedFilter, SpanFilter, query
from .telemetry.span import Side, Span, Trace
from .telemetry.store import StoreNotFound, StoreUnavailable, SpanStore
from .vnf.processing import ProcessingModel, load_processing_model

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

log = logging.getLogger("capifsim")


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage already; route the message through stderr."""

    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _strategy_names() -> str:
    return ", ".join(s.cli_name for s in Strategy)


def _load_ports(path: str) -> dict[VnfKind, int]:
    """Application ports per VNF; sidecars listen at port + offset."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read route table {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"route table {path} is not JSON: {exc}") from exc
    try:
        ports = {VnfKind.parse(k): int(v) for k, v in doc.get("appPorts", {}).items()}
    except (AttributeError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad route table {path}: {exc}") from exc
    missing = set(VnfKind) - set(ports)
    if missing:
        raise ConfigError(f"route table {path} lacks ports for {', '.join(sorted(k.value for k in missing))}")
    used: dict[int, str] = {}
    for kind, port in ports.items():
        for p, role in ((port, "app"), (sidecar_port_for(port), "sidecar")):
            if not 0 < p < 65536:
                raise ConfigError(f"{kind.value} {role} port {p} is out of range")
            if p in used:
                raise ConfigError(f"port {p} used twice ({used[p]} and {kind.value} {role})")
            used[p] = f"{kind.value} {role}"
    return ports


def _build_spec(args: argparse.Namespace, strategy: Strategy,
                ports: dict[VnfKind, int] | None = None) -> ExperimentSpec:
    topology = load_topology(args.topology) if args.topology else bundled_topology()
    processing = load_processing_model(args.processing) if args.processing else ProcessingModel()
    if args.processing_ms is not None:
        processing = ProcessingModel(args.processing_ms, processing.overrides)
    try:
        edge = ZoneId.parse(args.edge)
        az = ZoneId.parse(args.az) if args.az else None
        mode = DelayMode.parse(args.delay, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentSpec(
        strategy=strategy,
        edge=edge,
        az=az,
        topology=topology,
        delay_mode=mode,
        processing=processing,
        ue_count=args.ue_count,
        runs=args.runs,
        seed=args.seed,
        clock=args.mode,
        concurrent=args.concurrent,
        rtt_override_ms=args.rtt_override_ms,
        passthrough=args.passthrough,
        omit_hn_internal=not args.include_hn,
        buffer_cap=args.buffer_cap,
        app_ports=ports,
    )


def cmd_run(args: argparse.Namespace) -> int:
    if args.strategy == "all":
        strategies = list(Strategy)
    else:
        try:
            strategies = [Strategy.parse(args.strategy)]
        except ValueError:
            raise ConfigError(f"unknown strategy {args.strategy!r}; valid strategies: {_strategy_names()}, all")
    ports = _load_ports(args.route_table) if args.route_table else None
    specs = [_build_spec(args, s, ports) for s in strategies]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    store_dir = args.store_dir or os.environ.get("CAPIFSIM_STORE_DIR")

    reports = []
    failed = False
    for spec in specs:
        sub = None
        if store_dir:
            sub = Path(store_dir) / spec.strategy.cli_name if len(specs) > 1 else Path(store_dir)
        try:
            result = run_experiment_detailed(spec, sub)
        except RunFailed as exc:
            print(f"error: {spec.strategy.cli_name}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        for f in result.failures:
            print(f"warning: {spec.strategy.cli_name}: {f}", file=sys.stderr)
            failed = True
        reports.append(result.report)

    if len(reports) == 1:
        jp, cp = reports[0].write(out)
        print(f"wrote {jp} and {cp}")
        r = reports[0]
        print(f"{r.strategy.cli_name} @ {r.edge_zone}: total {r.total_latency_ms:.3f} ms over {r.runs} run(s)")
    else:
        for r in reports:
            r.write(out.with_name(f"{out.stem}.{r.strategy.cli_name}{out.suffix or '.json'}"))
        out.write_text(comparison_json(compare(reports)), encoding="utf-8")
        print(f"wrote {out} and one report per strategy next to it")
        for row in compare(reports):
            print(f"{row.strategy:>12}  total {row.total_ms:9.3f} ms  (+{row.delta_total_ms:.3f})")
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    if args.topology is None:
        doc = bundled_topology_document()
        label = "bundled topology"
    else:
        label = args.topology
        try:
            doc = json.loads(Path(args.topology).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read {args.topology}: {exc}") from exc
        except json.JSONDecodeError as exc:
            print(f"{label}: not valid JSON: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    violations = validate_document(doc)
    if violations:
        for v in violations:
            print(f"{label}: {v}")
        print(f"{len(violations)} violation(s)", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{label}: ok ({len(doc.get('zones', []))} zones, {len(doc.get('links', []))} links)")
    return EXIT_OK


def _resolve_store(path: str) -> Path:
    p = Path(path)
    if not p.exists() and not p.is_absolute():
        env_dir = os.environ.get("CAPIFSIM_STORE_DIR")
        if env_dir and (Path(env_dir) / p).exists():
            return Path(env_dir) / p
    if not p.exists():
        raise StoreNotFound(f"no span store at {path}")
    return p


def _format_span(span: Span) -> str:
    err = f" error={span.error}" if span.error else ""
    return (f"{span.operation} {span.src_vnf.value}->{span.dst_vnf.value} [{span.category.value}] "
            f"{span.side.value} start={span.start_us}us dur={span.duration_us / 1000:.3f}ms "
            f"span={span.span_id}{err}")


def _print_trace(trace: Trace, side: Side | None, filtered: bool) -> int:
    shown = 0
    # a category or service filter cuts trees apart on purpose; only flag
    # orphans when the whole trace was requested
    note = f" ({len(trace.orphans)} orphan span(s))" if trace.orphans and not filtered else ""
    print(f"trace {trace.trace_id}{note}")
    for depth, span in trace.walk():
        if side is not None and span.side is not side:
            continue
        if side is Side.SENDER:
            # one indent level per hop: skip the receiver layers in between
            depth //= 2
        print("  " * (depth + 1) + _format_span(span))
        shown += 1
    return shown


def cmd_trace(args: argparse.Namespace) -> int:
    store = SpanStore.open(_resolve_store(args.store))
    params = {
        "service": args.service,
        "category": args.category,
        "start": args.start,
        "end": args.end,
        "traceId": args.trace_id,
    }
    flt = SpanFilter.from_params({k: v for k, v in params.items() if v is not None})
    side = None if args.side == "all" else Side(args.side.capitalize())
    traces = query(store, flt)
    if args.export:
        export_traces(traces, args.export)
        print(f"exported {len(traces)} trace(s) to {args.export}")
        return EXIT_OK
    if args.json:
        json.dump({"traces": [t.to_dict() for t in traces]}, sys.stdout, indent=1, sort_keys=True)
        print()
        return EXIT_OK
    total = 0
    for trace in traces:
        total += _print_trace(trace, side, bool(args.category or args.service or args.start is not None or args.end is not None))
    print(f"{len(traces)} trace(s), {total} span(s) listed (store clock: {store.clock})")
    return EXIT_OK


def cmd_topology_list(args: argparse.Namespace) -> int:
    topo = load_topology(args.topology) if args.topology else bundled_topology()
    print(f"topology {topo.name} (fingerprint {topo.fingerprint}), intra-zone RTT {topo.intra_zone_rtt_ms} ms")
    print(f"{'edge':<10} {'az':<10} {'p50':>8} {'p90':>8} {'p99':>8}  label")
    for edge in topo.edge_zones():
        az = topo.anchor_az(edge)
        link = topo.link(edge, az)
        label = topo.labels.get(str(edge), "")
        print(f"{str(edge):<10} {str(az):<10} {link.rtt_p50:>8g} {link.rtt_p90:>8g} {link.rtt_p99:>8g}  {label}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="capifsim", description="5G core control-plane latency simulator")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="logging verbosity")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a placement experiment and write JSON + CSV reports")
    run.add_argument("--strategy", required=True,
                     help=f"placement strategy: {_strategy_names()}, or 'all' for a comparison")
    run.add_argument("--edge", required=True, help="edge zone, e.g. nyc-lz (or the AZ for monolithic)")
    run.add_argument("--az", help="availability zone (default: the edge zone's anchor AZ)")
    run.add_argument("--mode", "--clock", dest="mode", choices=["virtual", "wall"], default="virtual")
    run.add_argument("--delay", default="p50", help="p50 (default), p<N> such as p90, or stochastic")
    run.add_argument("--runs", type=int, default=10)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--ue-count", type=int, default=1)
    run.add_argument("--concurrent", action="store_true", help="drive UEs concurrently")
    run.add_argument("--rtt-override-ms", type=float, help="force every RTT to this value")
    run.add_argument("--processing-ms", type=float, help="uniform processing delay per endpoint")
    run.add_argument("--topology", help="topology JSON file (default: bundled edge measurements)")
    run.add_argument("--processing", help="processing-model JSON file")
    run.add_argument("--route-table", help="JSON file with appPorts per VNF; sidecars listen at port + 10016")
    run.add_argument("--passthrough", action="store_true", help="proxy without tracing")
    run.add_argument("--include-hn", action="store_true", help="count HnInternal in the total")
    run.add_argument("--buffer-cap", type=int, default=10_000, help="per-sidecar span buffer cap")
    run.add_argument("--store-dir", help="keep per-run span stores here (env CAPIFSIM_STORE_DIR)")
    run.add_argument("--out", required=True, help="report path; the CSV goes next to it")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a topology file")
    val.add_argument("topology", nargs="?", help="topology JSON (default: bundled)")
    val.set_defaults(func=cmd_validate)

    tr = sub.add_parser("trace", help="query a span store")
    tr.add_argument("--store", required=True, help="path to a .spans.jsonl store")
    tr.add_argument("--service", help="VNF kind or CAPIF service such as /nsmf-pdusession")
    tr.add_argument("--category", help="FiveGAka, SessionSetup, NrfRegister or HnInternal")
    tr.add_argument("--start", type=int, help="earliest startUs")
    tr.add_argument("--end", type=int, help="latest startUs")
    tr.add_argument("--trace-id", help="32-hex trace id")
    tr.add_argument("--side", choices=["sender", "receiver", "all"], default="sender")
    tr.add_argument("--export", help="write matching traces to this JSON file")
    tr.add_argument("--json", action="store_true", help="print matching traces as JSON")
    tr.set_defaults(func=cmd_trace)

    tl = sub.add_parser("topology-list", help="list edge zones and their RTT profiles")
    tl.add_argument("--topology", help="topology JSON (default: bundled)")
    tl.set_defaults(func=cmd_topology_list)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TopologyError as exc:
        for v in exc.violations:
            print(f"error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, StoreNotFound, MalformedFilter) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StoreUnavailable, IoFailure, RunFailed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
