"""Regenerate the shared codec test vectors from the engine package.

Run from frontend/: python3 tools/gen_wire_vectors.py
The console's codec tests decode these frames and must agree byte for byte
when re-encoding, so both ends speak exactly one protocol.
"""

import json
import pathlib

from arlecture.protocol import (
    AckRecord,
    CommandEnvelope,
    SystemInfo,
    encode_message,
    frame,
)

OUT = pathlib.Path(__file__).resolve().parent.parent / "test" / "vectors" / "wire_vectors.json"

messages = [
    CommandEnvelope(0, "RegisterRole",
                    {"role": "remote_operation", "endpoint": "console-1"}, 0.0),
    CommandEnvelope(1, "PlaceSlide",
                    {"asset_id": "deck", "page_count": 12, "size": [1.6, 0.9]}, 120.5),
    CommandEnvelope(2, "PageOp", {"op": "next"}, 200.0),
    CommandEnvelope(3, "PageOp", {"op": "goto", "page": 7}, 233.25),
    CommandEnvelope(4, "DisplayStyle", {"style": "multi_slide"}, 300.0),
    CommandEnvelope(5, "Pointer", {"active": True, "u": 0.25, "v": 0.75}, 350.0),
    CommandEnvelope(6, "Pointer", {"active": False}, 400.0),
    CommandEnvelope(7, "Pin", {"page": 3}, 450.0),
    CommandEnvelope(8, "Pin", {"page": None}, 500.0),
    CommandEnvelope(9, "Retake", {"method": "visual"}, 550.0),
    CommandEnvelope(10, "AgentHint", {"text": "Wrap up — tambien ünïcode"}, 600.0),
    AckRecord(2, "applied", 210.7),
    AckRecord(9, "rejected", 560.0, reason="out_of_order: expected 7"),
    SystemInfo(current_page=7, page_count=12, style="multi_slide", pin_page=3,
               pointer={"active": True, "u": 0.25, "v": 0.75},
               camera_mode="lecturer_closeup",
               agent_popups=["Now on slide 7"],
               last_ack_seq=8, t=1234.5, assets=["deck"]),
    SystemInfo(current_page=0, page_count=0, style="single", pin_page=None,
               pointer={"active": False, "u": 0.5, "v": 0.5},
               camera_mode="normal", agent_popups=[], last_ack_seq=0, t=0.0),
]

vectors = []
for m in messages:
    framed = encode_message(m)
    vectors.append({
        "name": f"{type(m).__name__}_{len(vectors)}",
        "frame_hex": framed.hex(),
        "decoded": m.to_obj(),
    })

# a deliberately bad one: declared length exceeds the 1 MiB cap
too_big = (1 << 21).to_bytes(4, "big").hex()
split = frame(b'{"ack":1,"status":"applied","completed_at":2.0,"v":1}')

OUT.write_text(json.dumps({
    "max_frame": 1 << 20,
    "vectors": vectors,
    "oversize_header_hex": too_big,
    "split_frame_hex": split.hex(),
}, indent=1, ensure_ascii=False), encoding="utf-8")
print(f"wrote {OUT} ({len(vectors)} vectors)")
