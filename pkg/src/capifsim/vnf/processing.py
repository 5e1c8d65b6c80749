"""Per-(VNF, message) processing delays."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from ..errors import ConfigError
from ..model import VnfKind, message
from ..netem.latency import ms_to_us

DEFAULT_PROCESSING_MS = 1.0


@dataclass(frozen=True)
class ProcessingModel:
    """Constant delay a VNF spends on each message it sends or serves.

    Lookups fall back to ``default_ms`` for pairs without an override,
    including traffic that is not in the catalog.
    """

    default_ms: float = DEFAULT_PROCESSING_MS
    overrides: Mapping[tuple[VnfKind, str], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.default_ms < 0:
            raise ConfigError(f"processing delay must be >= 0, got {self.default_ms}")
        for (kind, msg_id), ms in self.overrides.items():
            if ms < 0:
                raise ConfigError(f"processing delay for {kind.value}/{msg_id} must be >= 0, got {ms}")
            m = message(msg_id)
            if kind not in (m.src, m.dst):
                raise ConfigError(f"{kind.value} neither sends nor serves {msg_id}")

    @classmethod
    def uniform(cls, ms: float) -> "ProcessingModel":
        return cls(default_ms=ms)

    def ms(self, kind: VnfKind, message_id: str | None) -> float:
        if message_id is None:
            return self.default_ms
        return self.overrides.get((kind, message_id), self.default_ms)

    def us(self, kind: VnfKind, message_id: str | None) -> int:
        return ms_to_us(self.ms(kind, message_id))

    def to_dict(self) -> dict:
        return {
            "defaultMs": self.default_ms,
            "overrides": [
                {"vnf": k.value, "message": mid, "ms": ms}
                for (k, mid), ms in sorted(self.overrides.items(), key=lambda kv: (kv[0][0].value, kv[0][1]))
            ],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ProcessingModel":
        try:
            overrides = {
                (VnfKind.parse(o["vnf"]), str(o["message"])): float(o["ms"])
                for o in doc.get("overrides", [])
            }
            return cls(float(doc.get("defaultMs", DEFAULT_PROCESSING_MS)), overrides)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad processing model: {exc}") from exc


def load_processing_model(path: str | Path) -> ProcessingModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read processing model {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"processing model {path} is not JSON: {exc}") from exc
    return ProcessingModel.from_dict(doc)
