from .export import IoFailure, export_traces, import_traces, traces_document
from .pipeline import Agent, Collector, PipelineCounters
from .query import MalformedFilter, SpanFilter, filter_spans, make_query_app, query
from .span import SPAN_FIELDS, SPAN_SCHEMA, SchemaViolation, Side, Span, Trace, assemble_traces, validate_span_dict
from .store import STORE_SUFFIX, SpanStore, StorageFull, StoreNotFound, StoreUnavailable
from .wire import BatchRejected, NdjsonClient, NdjsonServer, WireError

__all__ = [
    "Agent",
    "BatchRejected",
    "Collector",
    "IoFailure",
    "MalformedFilter",
    "NdjsonClient",
    "NdjsonServer",
    "PipelineCounters",
    "SPAN_FIELDS",
    "SPAN_SCHEMA",
    "STORE_SUFFIX",
    "SchemaViolation",
    "Side",
    "Span",
    "SpanFilter",
    "SpanStore",
    "StorageFull",
    "StoreNotFound",
    "StoreUnavailable",
    "Trace",
    "WireError",
    "assemble_traces",
    "export_traces",
    "filter_spans",
    "import_traces",
    "make_query_app",
    "query",
    "traces_document",
    "validate_span_dict",
]
