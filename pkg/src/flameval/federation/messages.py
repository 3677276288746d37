"""Round messages and their length-prefixed wire encoding.

Frame layout: 4-byte big-endian body length, then a UTF-8 JSON body::

    {"version": 1, "round_id": 3, "phase": "am_response",
     "participant_id": 2, "payload": {...}}

Integer counts travel as JSON integers and floats use Python's shortest
round-trip repr, so decoding reproduces every value exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from ..errors import ProtocolError
from ..measures import ClassificationAM, MeanStatistic, RegressionAM
from ..metrics import ConfusionMatrix, MetricSpec, MetricValue, Mode, Task

SCHEMA_VERSION = 1
MAX_FRAME = 16 * 1024 * 1024
COORDINATOR_ID = -1

_LEN = struct.Struct("!I")


class Phase(str, Enum):
    REGISTER = "register"
    STAT_REQUEST = "stat_request"
    STAT_RESPONSE = "stat_response"
    AM_REQUEST = "am_request"
    AM_RESPONSE = "am_response"
    RESULT_BROADCAST = "result_broadcast"
    ERROR = "error"


@dataclass(frozen=True)
class Registration:
    task: Task
    class_count: int | None


@dataclass(frozen=True)
class StatRequest:
    statistics: tuple[str, ...]


@dataclass(frozen=True)
class StatResponse:
    statistics: dict[str, MeanStatistic]


@dataclass(frozen=True)
class AMRequest:
    specs: tuple[MetricSpec, ...]
    statistics: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class AMResponse:
    am: ClassificationAM | RegressionAM


@dataclass(frozen=True)
class ResultBroadcast:
    values: tuple[MetricValue, ...]


@dataclass(frozen=True)
class ErrorText:
    text: str


_PAYLOAD_TYPES = {
    Phase.REGISTER: Registration,
    Phase.STAT_REQUEST: StatRequest,
    Phase.STAT_RESPONSE: StatResponse,
    Phase.AM_REQUEST: AMRequest,
    Phase.AM_RESPONSE: AMResponse,
    Phase.RESULT_BROADCAST: ResultBroadcast,
    Phase.ERROR: ErrorText,
}


@dataclass(frozen=True)
class RoundMessage:
    phase: Phase
    payload: Any
    round_id: int = 0
    participant_id: int = COORDINATOR_ID
    version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "phase", Phase(self.phase))
        expected = _PAYLOAD_TYPES[self.phase]
        if not isinstance(self.payload, expected):
            raise ProtocolError(
                f"{self.phase.value} carries {expected.__name__}, got {type(self.payload).__name__}"
            )


def _spec_to_json(spec: MetricSpec) -> dict:
    return {
        "kind": spec.kind.value,
        "averaging": spec.averaging.value,
        "zero_division_value": spec.zero_division_value,
    }


def _spec_from_json(d: dict) -> MetricSpec:
    return MetricSpec(d["kind"], d["averaging"], d["zero_division_value"])


def _am_to_json(am) -> dict:
    if isinstance(am, ClassificationAM):
        return {"type": "classification", "confusion": am.confusion.tolist()}
    return {
        "type": "regression",
        "rs_a": am.rs_a,
        "rs_b": am.rs_b,
        "n": am.n,
        "global_mean": am.global_mean,
    }


def _am_from_json(d: dict):
    if d["type"] == "classification":
        rows = d["confusion"]
        if not all(isinstance(x, int) and not isinstance(x, bool) for r in rows for x in r):
            raise ProtocolError("confusion counts must be integers")
        return ClassificationAM(ConfusionMatrix(rows))
    if d["type"] == "regression":
        return RegressionAM(float(d["rs_a"]), float(d["rs_b"]), int(d["n"]), float(d["global_mean"]))
    raise ProtocolError(f"unknown AM type {d['type']!r}")


def _payload_to_json(phase: Phase, p) -> Any:
    if phase is Phase.REGISTER:
        return {"task": p.task.value, "class_count": p.class_count}
    if phase is Phase.STAT_REQUEST:
        return {"statistics": list(p.statistics)}
    if phase is Phase.STAT_RESPONSE:
        return {
            "statistics": {
                k: {"sum_y": v.sum_y, "count": v.count} for k, v in p.statistics.items()
            }
        }
    if phase is Phase.AM_REQUEST:
        return {"specs": [_spec_to_json(s) for s in p.specs], "statistics": dict(p.statistics)}
    if phase is Phase.AM_RESPONSE:
        return {"am": _am_to_json(p.am)}
    if phase is Phase.RESULT_BROADCAST:
        return {
            "values": [
                {
                    "spec": _spec_to_json(v.spec),
                    "mode": v.mode.value,
                    "value": v.value,
                    "sample_count": v.sample_count,
                }
                for v in p.values
            ]
        }
    return {"text": p.text}


def _payload_from_json(phase: Phase, d: dict):
    if phase is Phase.REGISTER:
        return Registration(Task(d["task"]), d["class_count"])
    if phase is Phase.STAT_REQUEST:
        return StatRequest(tuple(d["statistics"]))
    if phase is Phase.STAT_RESPONSE:
        return StatResponse(
            {k: MeanStatistic(float(v["sum_y"]), int(v["count"])) for k, v in d["statistics"].items()}
        )
    if phase is Phase.AM_REQUEST:
        return AMRequest(
            tuple(_spec_from_json(s) for s in d["specs"]),
            {k: float(v) for k, v in d["statistics"].items()},
        )
    if phase is Phase.AM_RESPONSE:
        return AMResponse(_am_from_json(d["am"]))
    if phase is Phase.RESULT_BROADCAST:
        return ResultBroadcast(
            tuple(
                MetricValue(_spec_from_json(v["spec"]), Mode(v["mode"]), float(v["value"]), int(v["sample_count"]))
                for v in d["values"]
            )
        )
    return ErrorText(str(d["text"]))


def encode_body(msg: RoundMessage) -> bytes:
    body = {
        "version": msg.version,
        "round_id": msg.round_id,
        "phase": msg.phase.value,
        "participant_id": msg.participant_id,
        "payload": _payload_to_json(msg.phase, msg.payload),
    }
    return json.dumps(body, allow_nan=False, separators=(",", ":")).encode("utf-8")


def encode_message(msg: RoundMessage) -> bytes:
    body = encode_body(msg)
    if len(body) > MAX_FRAME:
        raise ProtocolError(f"frame of {len(body)} bytes exceeds {MAX_FRAME}")
    return _LEN.pack(len(body)) + body


def decode_body(body: bytes, expected_version: int = SCHEMA_VERSION) -> RoundMessage:
    try:
        d = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"undecodable frame body: {exc}") from None
    if not isinstance(d, dict):
        raise ProtocolError("frame body must be a JSON object")
    version = d.get("version")
    if version != expected_version:
        raise ProtocolError(f"schema version mismatch: got {version}, expected {expected_version}")
    try:
        phase = Phase(d["phase"])
    except (KeyError, ValueError):
        raise ProtocolError(f"unknown phase {d.get('phase')!r}") from None
    try:
        payload = _payload_from_json(phase, d["payload"])
        return RoundMessage(phase, payload, int(d["round_id"]), int(d["participant_id"]), version)
    except ProtocolError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed {phase.value} payload: {exc!r}") from None


def frame_length(prefix: bytes) -> int:
    if len(prefix) != _LEN.size:
        raise ProtocolError("truncated length prefix")
    (length,) = _LEN.unpack(prefix)
    if length > MAX_FRAME:
        raise ProtocolError(f"frame of {length} bytes exceeds {MAX_FRAME}")
    return length


def decode_message(frame: bytes, expected_version: int = SCHEMA_VERSION) -> RoundMessage:
    """Decode exactly one frame; trailing or missing bytes are errors."""
    length = frame_length(frame[: _LEN.size])
    body = frame[_LEN.size :]
    if len(body) < length:
        raise ProtocolError(f"truncated frame: prefix says {length} bytes, got {len(body)}")
    if len(body) > length:
        raise ProtocolError(f"{len(body) - length} trailing bytes after frame")
    return decode_body(body, expected_version)
