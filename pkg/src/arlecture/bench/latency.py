"""Remote-command latency and accuracy bench.

Replays randomized valid commands of each remote-control kind against a live
engine over the in-process loopback transport and measures issue-to-ack time
on the session clock. Accuracy is checked from the outside: after every ack
the engine-state snapshot pushed back to the remote must match an independent
mirror of what the command should have done.

Reference envelope per kind (mean/max milliseconds) for the pass check; a
zero-delay loopback trivially sits inside it, an injected transport delay
must still clear it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..engine import SessionEngine
from ..protocol import (
    KIND_DISPLAY_STYLE,
    KIND_PAGE_OP,
    KIND_PIN,
    KIND_PLACE_SLIDE,
    KIND_POINTER,
    ROLE_REMOTE_OPERATION,
    CommandIssuer,
    LoopbackTransport,
)
from ..stage import STYLE_MULTI_SLIDE, STYLE_REAL_MATERIAL, STYLE_SINGLE

PAGE_COUNT = 12
TRIALS_PER_KIND = 100

# kind -> (mean bound ms, max bound ms)
REFERENCE_BOUNDS = {
    KIND_PAGE_OP: (61.0, 189.0),
    KIND_DISPLAY_STYLE: (53.0, 162.0),
    KIND_POINTER: (69.0, 177.0),
    KIND_PIN: (74.0, 302.0),
}
BENCH_KINDS = tuple(REFERENCE_BOUNDS)

_STYLES = (STYLE_SINGLE, STYLE_MULTI_SLIDE, STYLE_REAL_MATERIAL)


@dataclass
class KindStats:
    kind: str
    trials: int
    accuracy_pct: float
    mean_ms: float
    max_ms: float

    @property
    def passed(self) -> bool:
        mean_bound, max_bound = REFERENCE_BOUNDS[self.kind]
        return (
            self.accuracy_pct == 100.0
            and self.mean_ms <= mean_bound
            and self.max_ms <= max_bound
        )


class _Mirror:
    """Independent model of what each issued command should do."""

    def __init__(self):
        self.page = 1
        self.style = STYLE_SINGLE
        self.pin = None
        self.pointer = {"active": False, "u": 0.0, "v": 0.0}

    def expect(self, kind, payload):
        if kind == KIND_PAGE_OP:
            op = payload["op"]
            if op == "next":
                self.page += 1
            elif op == "prev":
                self.page -= 1
            else:
                self.page = payload["page"]
        elif kind == KIND_DISPLAY_STYLE:
            self.style = payload["style"]
        elif kind == KIND_PIN:
            self.pin = payload["page"]
        elif kind == KIND_POINTER:
            if payload.get("active", True):
                self.pointer = {"active": True, "u": payload["u"], "v": payload["v"]}
            else:
                self.pointer = {"active": False, "u": 0.0, "v": 0.0}

    def matches(self, info) -> bool:
        return (
            info.current_page == self.page
            and info.style == self.style
            and info.pin_page == self.pin
            and info.pointer == self.pointer
        )


def _random_command(rng, kind, mirror):
    """A payload that is valid in the mirror's current state."""
    if kind == KIND_PAGE_OP:
        ops = ["goto"]
        if mirror.page < PAGE_COUNT:
            ops.append("next")
        if mirror.page > 1:
            ops.append("prev")
        op = ops[rng.integers(len(ops))]
        if op == "goto":
            return {"op": "goto", "page": int(rng.integers(1, PAGE_COUNT + 1))}
        return {"op": op}
    if kind == KIND_DISPLAY_STYLE:
        return {"style": _STYLES[rng.integers(len(_STYLES))]}
    if kind == KIND_POINTER:
        if rng.random() < 0.2:
            return {"active": False}
        return {
            "active": True,
            "u": round(float(rng.uniform(0, 1)), 6),
            "v": round(float(rng.uniform(0, 1)), 6),
        }
    if kind == KIND_PIN:
        if rng.random() < 0.3:
            return {"page": None}
        return {"page": int(rng.integers(1, PAGE_COUNT + 1))}
    raise ValueError(f"no generator for {kind}")


def run_latency_bench(seed: int = 0, trials: int = TRIALS_PER_KIND,
                      delay_ms: float = 0.0) -> list[KindStats]:
    eng = SessionEngine(seed=seed)
    transport = LoopbackTransport(eng.session, eng.clock, one_way_delay_ms=delay_ms)
    issuer = CommandIssuer(eng.clock, transport.send)
    assert issuer.register(ROLE_REMOTE_OPERATION, "latency-bench").applied
    assert issuer.issue(
        KIND_PLACE_SLIDE,
        {"asset_id": "bench-deck", "page_count": PAGE_COUNT, "size": [1.6, 0.9]},
    ).applied

    rng = np.random.default_rng(seed)
    mirror = _Mirror()
    results = []
    for kind in BENCH_KINDS:
        correct = 0
        t0 = len(issuer.latencies)
        for _ in range(trials):
            payload = _random_command(rng, kind, mirror)
            ack = issuer.issue(kind, payload)
            if ack.applied:
                mirror.expect(kind, payload)
                if mirror.matches(eng.info_log[-1]):
                    correct += 1
        lat = [r.elapsed_ms for r in issuer.latencies[t0:]]
        results.append(
            KindStats(
                kind=kind,
                trials=trials,
                accuracy_pct=100.0 * correct / trials,
                mean_ms=float(np.mean(lat)),
                max_ms=float(np.max(lat)),
            )
        )
    return results


def format_stats(results: list[KindStats]) -> str:
    head = f"{'kind':<14} {'trials':>6} {'accuracy':>9} {'mean ms':>8} {'max ms':>7}  bound(mean/max)"
    lines = [head, "-" * len(head)]
    for s in results:
        mb, xb = REFERENCE_BOUNDS[s.kind]
        mark = "PASS" if s.passed else "FAIL"
        lines.append(
            f"{s.kind:<14} {s.trials:>6} {s.accuracy_pct:>8.1f}% "
            f"{s.mean_ms:>8.2f} {s.max_ms:>7.2f}  <= {mb:.0f}/{xb:.0f}  {mark}"
        )
    return "\n".join(lines)


def write_csv(results: list[KindStats], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["kind", "trials", "accuracy_pct", "mean_ms", "max_ms"])
        for s in results:
            w.writerow([s.kind, s.trials, s.accuracy_pct, s.mean_ms, s.max_ms])
