"""Drive a live engine over TCP, the way the handheld remote does.

Starts the engine server on an ephemeral port, connects a raw socket client,
registers for the remote-operation role, and walks through a handful of
commands while printing every ack and the state snapshots the engine pushes
back. The wire format is a 4-byte big-endian length prefix followed by UTF-8
JSON, in both directions.
"""

import socket
import time

from arlecture.protocol import (
    AckRecord,
    CommandEnvelope,
    FrameReader,
    SystemInfo,
    decode_body,
    encode_message,
)
from arlecture.server import EngineServer

with EngineServer(port=0, tick_hz=30, seed=0) as srv:
    host, port = srv.address
    print(f"engine up on {host}:{port}")

    sock = socket.create_connection((host, port), timeout=5)
    sock.settimeout(0.2)
    reader = FrameReader()
    seq = 1

    def send(kind, payload, use_seq=None):
        global seq
        n = use_seq if use_seq is not None else seq
        if use_seq is None:
            seq += 1
        sock.sendall(encode_message(CommandEnvelope(n, kind, payload, 0.0)))

    def drain(duration=0.4):
        out = []
        deadline = time.monotonic() + duration
        while time.monotonic() < deadline:
            try:
                data = sock.recv(65536)
            except socket.timeout:
                continue
            if not data:
                break
            out.extend(decode_body(b) for b in reader.feed(data))
        return out

    def show(msgs):
        for m in msgs:
            if isinstance(m, AckRecord):
                verdict = "applied" if m.applied else f"rejected ({m.reason})"
                print(f"  ack seq={m.seq}: {verdict}")
            elif isinstance(m, SystemInfo):
                ptr = "on" if m.pointer["active"] else "off"
                print(
                    f"  info: page {m.current_page}/{m.page_count}, "
                    f"style {m.style}, pin {m.pin_page}, pointer {ptr}, "
                    f"camera {m.camera_mode}"
                )

    print("\nregistering the remote role (seq 0 rides outside the stream)")
    send("RegisterRole", {"role": "remote_operation", "endpoint": "demo-remote"}, use_seq=0)
    show(drain())

    print("\nplacing a 6-page deck on the wall")
    send("PlaceSlide", {"asset_id": "talk", "page_count": 6, "size": [1.6, 0.9]})
    show(drain())

    print("\npaging forward twice")
    send("PageOp", {"op": "next"})
    send("PageOp", {"op": "next"})
    show(drain())

    print("\ntrying to jump past the last page (the engine must refuse)")
    send("PageOp", {"op": "goto", "page": 99})
    show(drain())

    print("\npointer on, then off")
    send("Pointer", {"active": True, "u": 0.5, "v": 0.25})
    send("Pointer", {"active": False})
    show(drain())

    print("\ngoing quiet: heartbeat snapshots keep arriving every 500 ms")
    beats = [m for m in drain(1.3) if isinstance(m, SystemInfo)]
    print(f"  {len(beats)} heartbeats in 1.3 s of silence")

    sock.close()

print("server stopped")
