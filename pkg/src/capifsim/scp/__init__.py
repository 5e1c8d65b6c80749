from .exporter import ExportCounters, SpanExporter, tcp_sink
from .paths import MalformedUrl, extract_capif_path
from .routes import SIDECAR_PORT_OFFSET, Route, RouteTable, UnknownRoute, load_route_table, sidecar_port_for
from .sidecar import Sidecar, SidecarStats
from .tracecontext import IdGenerator, TraceContext, format_traceparent, parse_traceparent

__all__ = [
    "ExportCounters",
    "IdGenerator",
    "MalformedUrl",
    "Route",
    "RouteTable",
    "SIDECAR_PORT_OFFSET",
    "Sidecar",
    "SidecarStats",
    "SpanExporter",
    "TraceContext",
    "UnknownRoute",
    "extract_capif_path",
    "format_traceparent",
    "load_route_table",
    "parse_traceparent",
    "sidecar_port_for",
    "tcp_sink",
]
