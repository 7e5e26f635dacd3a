"""Device session protocol: registration, framed command/ack wire format,
seq discipline, latency accounting, and system-info feedback.

Wire format: each message is one frame, `len:u32be || utf8-json`.
Envelope: {"v":1,"seq":n,"kind":"PageOp","issued_at":ms,"payload":{...}}
Ack:      {"v":1,"ack":n,"status":"applied"|"rejected","reason":?,"completed_at":ms}
Info:     {"v":1,"info":{...},"t":ms}
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Callable

PROTOCOL_VERSION = 1
DEFAULT_PORT = 7471
HEADER_SIZE = 4
MAX_FRAME = 1 << 20
HEARTBEAT_MS = 500.0
RETRY_TIMEOUT_MS = 1000.0

ROLE_RECORDING = "recording"
ROLE_REMOTE_OPERATION = "remote_operation"
ROLES = (ROLE_RECORDING, ROLE_REMOTE_OPERATION)

# Command kinds. PlaceSlide is issued by the remote console's asset picker.
KIND_PAGE_OP = "PageOp"
KIND_DISPLAY_STYLE = "DisplayStyle"
KIND_POINTER = "Pointer"
KIND_PIN = "Pin"
KIND_RETAKE = "Retake"
KIND_ADJUST_SLIDE = "AdjustSlide"
KIND_AGENT_HINT = "AgentHint"
KIND_POSITION_REPORT = "PositionReport"
KIND_REGISTER_ROLE = "RegisterRole"
KIND_MAP_TRANSFER = "MapTransfer"
KIND_PLACE_SLIDE = "PlaceSlide"

KNOWN_KINDS = frozenset(
    {
        KIND_PAGE_OP,
        KIND_DISPLAY_STYLE,
        KIND_POINTER,
        KIND_PIN,
        KIND_RETAKE,
        KIND_ADJUST_SLIDE,
        KIND_AGENT_HINT,
        KIND_POSITION_REPORT,
        KIND_REGISTER_ROLE,
        KIND_MAP_TRANSFER,
        KIND_PLACE_SLIDE,
    }
)

STATUS_APPLIED = "applied"
STATUS_REJECTED = "rejected"

REASON_OUT_OF_ORDER = "out_of_order"
REASON_NOT_READY = "not_ready"
REASON_UNKNOWN_KIND = "unknown_kind"


class ProtocolError(Exception):
    pass


class MalformedFrame(ProtocolError):
    """Bad length prefix, truncated body, or invalid UTF-8/JSON."""


class RoleConflict(ProtocolError):
    pass


@dataclass(frozen=True)
class CommandEnvelope:
    seq: int
    kind: str
    payload: dict
    issued_at: float

    def to_obj(self) -> dict:
        return {
            "v": PROTOCOL_VERSION,
            "seq": self.seq,
            "kind": self.kind,
            "issued_at": self.issued_at,
            "payload": self.payload,
        }


@dataclass(frozen=True)
class AckRecord:
    seq: int
    status: str
    completed_at: float
    reason: str | None = None

    @property
    def applied(self) -> bool:
        return self.status == STATUS_APPLIED

    def to_obj(self) -> dict:
        obj = {
            "v": PROTOCOL_VERSION,
            "ack": self.seq,
            "status": self.status,
            "completed_at": self.completed_at,
        }
        if self.reason is not None:
            obj["reason"] = self.reason
        return obj


@dataclass(frozen=True)
class SystemInfo:
    """Engine-state snapshot pushed to the remote-operation endpoint."""

    current_page: int
    page_count: int
    style: str
    pin_page: int | None
    pointer: dict
    camera_mode: str
    agent_popups: list
    last_ack_seq: int
    t: float
    assets: list = field(default_factory=list)

    def to_obj(self) -> dict:
        return {
            "v": PROTOCOL_VERSION,
            "t": self.t,
            "info": {
                "current_page": self.current_page,
                "page_count": self.page_count,
                "style": self.style,
                "pin_page": self.pin_page,
                "pointer": self.pointer,
                "camera_mode": self.camera_mode,
                "agent_popups": self.agent_popups,
                "last_ack_seq": self.last_ack_seq,
                "assets": self.assets,
            },
        }


@dataclass(frozen=True)
class LatencyRecord:
    kind: str
    elapsed_ms: float

    def __post_init__(self):
        if self.elapsed_ms < 0:
            raise ProtocolError("latency cannot be negative")


Message = CommandEnvelope | AckRecord | SystemInfo


def frame(body: bytes) -> bytes:
    if len(body) > MAX_FRAME:
        raise MalformedFrame(f"frame too large: {len(body)}")
    return struct.pack(">I", len(body)) + body


def encode_message(msg: Message) -> bytes:
    """Serialize a message into one length-prefixed frame."""
    body = json.dumps(msg.to_obj(), separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return frame(body)


def decode_body(body: bytes) -> Message:
    try:
        obj = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MalformedFrame(f"invalid frame body: {e}") from e
    if not isinstance(obj, dict):
        raise MalformedFrame("frame body is not an object")
    try:
        if "seq" in obj and "kind" in obj:
            # unknown kinds decode fine and get rejected at apply time
            return CommandEnvelope(
                seq=int(obj["seq"]),
                kind=str(obj["kind"]),
                payload=dict(obj.get("payload") or {}),
                issued_at=float(obj["issued_at"]),
            )
        if "ack" in obj:
            return AckRecord(
                seq=int(obj["ack"]),
                status=str(obj["status"]),
                completed_at=float(obj["completed_at"]),
                reason=obj.get("reason"),
            )
        if "info" in obj:
            info = obj["info"]
            return SystemInfo(
                current_page=int(info["current_page"]),
                page_count=int(info["page_count"]),
                style=str(info["style"]),
                pin_page=info["pin_page"],
                pointer=dict(info["pointer"]),
                camera_mode=str(info["camera_mode"]),
                agent_popups=list(info["agent_popups"]),
                last_ack_seq=int(info["last_ack_seq"]),
                t=float(obj["t"]),
                assets=list(info.get("assets", [])),
            )
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedFrame(f"bad message fields: {e}") from e
    raise MalformedFrame("unrecognized message shape")


def decode_frame(data: bytes) -> Message:
    """Decode exactly one complete frame (prefix included)."""
    if len(data) < HEADER_SIZE:
        raise MalformedFrame("truncated header")
    (n,) = struct.unpack(">I", data[:HEADER_SIZE])
    if n > MAX_FRAME:
        raise MalformedFrame(f"declared length {n} too large")
    if len(data) != HEADER_SIZE + n:
        raise MalformedFrame(f"frame length mismatch: declared {n}, have {len(data) - HEADER_SIZE}")
    return decode_body(data[HEADER_SIZE:])


class FrameReader:
    """Incremental frame splitter for a byte stream."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[bytes]:
        """Returns complete frame bodies accumulated so far."""
        self._buf.extend(data)
        bodies = []
        while True:
            if len(self._buf) < HEADER_SIZE:
                break
            (n,) = struct.unpack(">I", bytes(self._buf[:HEADER_SIZE]))
            if n > MAX_FRAME:
                raise MalformedFrame(f"declared length {n} too large")
            if len(self._buf) < HEADER_SIZE + n:
                break
            bodies.append(bytes(self._buf[HEADER_SIZE : HEADER_SIZE + n]))
            del self._buf[: HEADER_SIZE + n]
        return bodies


# --- payload validation -----------------------------------------------------


def validate_payload(kind: str, payload: dict) -> str | None:
    """Returns a rejection reason, or None when the payload fits the kind."""
    if kind not in KNOWN_KINDS:
        return REASON_UNKNOWN_KIND
    try:
        if kind == KIND_PAGE_OP:
            op = payload["op"]
            if op not in ("next", "prev", "goto"):
                return "bad page op"
            if op == "goto" and not isinstance(payload.get("page"), int):
                return "goto needs a page"
        elif kind == KIND_DISPLAY_STYLE:
            if payload["style"] not in ("single", "real_material", "multi_slide"):
                return "bad style"
        elif kind == KIND_POINTER:
            if payload.get("active", True):
                u, v = float(payload["u"]), float(payload["v"])
                if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
                    return "pointer uv outside [0,1]"
        elif kind == KIND_PIN:
            page = payload["page"]
            if page is not None and not isinstance(page, int):
                return "bad pin page"
        elif kind == KIND_RETAKE:
            if payload["method"] not in ("visual", "text"):
                return "bad retake method"
        elif kind == KIND_ADJUST_SLIDE:
            dx, dy = payload.get("translate", (0.0, 0.0))
            float(dx), float(dy)
            if float(payload.get("scale", 1.0)) <= 0:
                return "scale must be positive"
            if payload.get("aspect") is not None and float(payload["aspect"]) <= 0:
                return "aspect must be positive"
        elif kind == KIND_AGENT_HINT:
            if not isinstance(payload["text"], str):
                return "bad hint text"
        elif kind == KIND_POSITION_REPORT:
            p = payload["p"]
            if len(p) != 3:
                return "position must have 3 components"
            [float(c) for c in p]
        elif kind == KIND_REGISTER_ROLE:
            if payload["role"] not in ROLES:
                return "bad role"
        elif kind == KIND_MAP_TRANSFER:
            if not isinstance(payload["map_id"], str):
                return "bad map id"
        elif kind == KIND_PLACE_SLIDE:
            if not isinstance(payload["asset_id"], str):
                return "bad asset id"
            w, h = payload["size"]
            if float(w) <= 0 or float(h) <= 0:
                return "size must be positive"
    except (KeyError, TypeError, ValueError, IndexError):
        return f"malformed payload for {kind}"
    return None


# --- session state machine ----------------------------------------------------


class Session:
    """Engine-side session: role registration, in-order exactly-once command
    application, ack emission, and system-info fan-out.

    The applier callback performs the actual state transition and returns a
    rejection reason or None; this class owns everything transport-visible.
    """

    def __init__(self, clock, applier: Callable[[CommandEnvelope], str | None]):
        self.clock = clock
        self.applier = applier
        self.roles: dict[str, str] = {}  # role -> endpoint id
        self.expected_seq = 1
        self.last_ack: AckRecord | None = None
        self.applied_seqs: list[int] = []
        self.latencies: list[LatencyRecord] = []
        self.info_listeners: list[Callable[[], None]] = []

    # -- registration

    def claim_role(self, endpoint_id: str, role: str) -> str:
        if role not in ROLES:
            raise ProtocolError(f"unknown role {role!r}")
        holder = self.roles.get(role)
        if holder is not None and holder != endpoint_id:
            raise RoleConflict(f"role {role!r} already taken by {holder!r}")
        for r, e in self.roles.items():
            if e == endpoint_id and r != role:
                raise RoleConflict(f"endpoint {endpoint_id!r} already holds {r!r}")
        self.roles[role] = endpoint_id
        return role

    @property
    def registered(self) -> bool:
        return set(self.roles) == set(ROLES)

    # -- command path

    def submit(self, env: CommandEnvelope) -> AckRecord:
        """Apply one command envelope; always returns an ack."""
        if env.kind == KIND_REGISTER_ROLE:
            return self._register_via_command(env)
        if not self.registered:
            return self._reject(env, REASON_NOT_READY)
        if env.seq != self.expected_seq:
            return self._reject(
                env, f"{REASON_OUT_OF_ORDER}: expected {self.expected_seq}"
            )
        reason = validate_payload(env.kind, env.payload)
        if reason is None:
            reason = self.applier(env)
        self.expected_seq += 1
        if reason is not None:
            return self._ack(env, STATUS_REJECTED, reason)
        self.applied_seqs.append(env.seq)
        ack = self._ack(env, STATUS_APPLIED, None)
        self._notify_info()
        return ack

    def _register_via_command(self, env: CommandEnvelope) -> AckRecord:
        reason = validate_payload(env.kind, env.payload)
        if reason is not None:
            return self._ack(env, STATUS_REJECTED, reason)
        endpoint = env.payload.get("endpoint")
        if not endpoint:
            return self._ack(env, STATUS_REJECTED, "registration needs an endpoint id")
        try:
            self.claim_role(endpoint, env.payload["role"])
        except RoleConflict as e:
            return self._ack(env, STATUS_REJECTED, f"role_conflict: {e}")
        if self.registered:
            self._notify_info()
        return self._ack(env, STATUS_APPLIED, None)

    def _reject(self, env: CommandEnvelope, reason: str) -> AckRecord:
        return self._ack(env, STATUS_REJECTED, reason)

    def _ack(self, env: CommandEnvelope, status: str, reason: str | None) -> AckRecord:
        ack = AckRecord(
            seq=env.seq,
            status=status,
            completed_at=self.clock.now_ms(),
            reason=reason,
        )
        self.last_ack = ack
        return ack

    def _notify_info(self):
        for fn in self.info_listeners:
            fn()


class CommandIssuer:
    """Remote-operation side: seq allocation, latency measurement, retries."""

    def __init__(self, clock, send: Callable[[CommandEnvelope], AckRecord | None]):
        self.clock = clock
        self.send = send
        self.next_seq = 1
        self.latencies: list[LatencyRecord] = []
        self.acks: list[AckRecord] = []

    def register(self, role: str, endpoint: str) -> AckRecord:
        """Claim a device role. Registration rides seq 0, outside the
        in-order command stream that starts at seq 1."""
        env = CommandEnvelope(
            0, KIND_REGISTER_ROLE, {"role": role, "endpoint": endpoint}, self.clock.now_ms()
        )
        ack = self.send(env)
        if ack is None:
            raise ProtocolError("registration got no ack")
        self.acks.append(ack)
        return ack

    def issue(self, kind: str, payload: dict) -> AckRecord:
        """Issue one command over a lossless transport and record latency."""
        env = CommandEnvelope(self.next_seq, kind, payload, self.clock.now_ms())
        self.next_seq += 1
        ack = self.send(env)
        if ack is None:
            raise ProtocolError("lossless transport returned no ack")
        elapsed = self.clock.now_ms() - env.issued_at
        self.latencies.append(LatencyRecord(kind, elapsed))
        self.acks.append(ack)
        return ack

    def issue_with_retry(self, kind: str, payload: dict, max_attempts: int = 20) -> AckRecord:
        """Issue over a lossy/reordering transport: resend the same seq after
        the retry timeout until the engine settles it.

        A rejection whose expected-seq hint is *past* our seq means the
        command was applied but the ack got lost; treat as applied.
        """
        env = CommandEnvelope(self.next_seq, kind, payload, self.clock.now_ms())
        self.next_seq += 1
        for _ in range(max_attempts):
            ack = self.send(env)
            if ack is None:
                self.clock.advance(RETRY_TIMEOUT_MS)
                continue
            if ack.applied:
                self.latencies.append(
                    LatencyRecord(kind, self.clock.now_ms() - env.issued_at)
                )
                self.acks.append(ack)
                return ack
            if ack.reason and ack.reason.startswith(REASON_OUT_OF_ORDER):
                expected = int(ack.reason.rsplit(" ", 1)[-1])
                if expected > env.seq:
                    # engine moved past us: original delivery was applied and
                    # only the ack was lost, so settle as applied
                    ack = AckRecord(env.seq, STATUS_APPLIED, ack.completed_at)
                    self.acks.append(ack)
                    return ack
                self.clock.advance(RETRY_TIMEOUT_MS)
                continue
            self.acks.append(ack)
            return ack
        raise ProtocolError(f"command seq={env.seq} never settled")


class LoopbackTransport:
    """In-process transport binding an issuer to a session, with optional
    symmetric one-way delay realized on a virtual clock."""

    def __init__(self, session: Session, clock, one_way_delay_ms: float = 0.0):
        self.session = session
        self.clock = clock
        self.delay = float(one_way_delay_ms)

    def send(self, env: CommandEnvelope) -> AckRecord:
        if self.delay:
            self.clock.advance(self.delay)
        # wire round trip: encode on the way in, decode the ack on the way out
        delivered = decode_frame(encode_message(env))
        ack = self.session.submit(delivered)
        if self.delay:
            self.clock.advance(self.delay)
        return decode_frame(encode_message(ack))
