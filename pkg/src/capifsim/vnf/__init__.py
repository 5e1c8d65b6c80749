from .base import AuthState, CallRecord, ProcedureFailed, SessionState, UeContext, VnfApp
from .core import APP_CLASSES, CoreNetwork, CoreOptions, ExportTotals, build_core, free_ports, virtual_ports
from .functions import (
    AmfApp,
    AuthChainTimeout,
    AusfApp,
    DiscoveryFailed,
    NotAuthenticated,
    SmfApp,
    UdmApp,
    UdrApp,
    UpfApp,
)
from .gnbsim import GnbSimApp, RunSummary, UeOutcome, ue_id_for
from .nrf import DuplicateInstanceId, NfProfile, NfRegistry, NoInstanceAvailable, NrfApp, UnknownInstance
from .processing import DEFAULT_PROCESSING_MS, ProcessingModel, load_processing_model

__all__ = [
    "APP_CLASSES",
    "AmfApp",
    "AuthChainTimeout",
    "AuthState",
    "AusfApp",
    "CallRecord",
    "CoreNetwork",
    "CoreOptions",
    "DEFAULT_PROCESSING_MS",
    "DiscoveryFailed",
    "DuplicateInstanceId",
    "ExportTotals",
    "GnbSimApp",
    "NfProfile",
    "NfRegistry",
    "NoInstanceAvailable",
    "NotAuthenticated",
    "NrfApp",
    "ProcedureFailed",
    "ProcessingModel",
    "RunSummary",
    "SessionState",
    "SmfApp",
    "UdmApp",
    "UdrApp",
    "UeContext",
    "UeOutcome",
    "UnknownInstance",
    "UpfApp",
    "VnfApp",
    "build_core",
    "free_ports",
    "load_processing_model",
    "ue_id_for",
    "virtual_ports",
]
