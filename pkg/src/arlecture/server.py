"""Live TCP endpoint for the recording engine.

Length-prefixed JSON frames in both directions: clients send command
envelopes, the server answers each with its ack and pushes engine-state
snapshots to every connected client. One engine instance, one writer lock;
the tick loop runs on a wall clock at the configured rate.
"""

from __future__ import annotations

import socketserver
import threading
import time

from .clock import WallClock
from .engine import SessionEngine
from .protocol import (
    DEFAULT_PORT,
    CommandEnvelope,
    FrameReader,
    MalformedFrame,
    decode_body,
    encode_message,
)


class _Client:
    def __init__(self, sock):
        self.sock = sock
        self.write_lock = threading.Lock()

    def send(self, data: bytes) -> bool:
        try:
            with self.write_lock:
                self.sock.sendall(data)
            return True
        except OSError:
            return False


class EngineServer:
    """Serves one engine session over TCP; context manager handles lifecycle."""

    def __init__(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT,
                 tick_hz: int = 30, seed: int = 0, store=None):
        self.engine = SessionEngine(store=store, seed=seed, tick_hz=tick_hz,
                                    clock=WallClock())
        self.lock = threading.Lock()
        self.tick_hz = tick_hz
        self._clients: set[_Client] = set()
        self._clients_lock = threading.Lock()
        self._stop = threading.Event()
        self.engine.on_info = self._broadcast_info

        outer = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                client = _Client(self.request)
                with outer._clients_lock:
                    outer._clients.add(client)
                reader = FrameReader()
                try:
                    while not outer._stop.is_set():
                        data = self.request.recv(65536)
                        if not data:
                            break
                        try:
                            bodies = reader.feed(data)
                            msgs = [decode_body(b) for b in bodies]
                        except MalformedFrame:
                            break  # protocol violation: drop the connection
                        for msg in msgs:
                            if not isinstance(msg, CommandEnvelope):
                                continue
                            with outer.lock:
                                ack = outer.engine.submit(msg)
                            if not client.send(encode_message(ack)):
                                return
                except OSError:
                    pass
                finally:
                    with outer._clients_lock:
                        outer._clients.discard(client)

        socketserver.ThreadingTCPServer.allow_reuse_address = True
        self._server = socketserver.ThreadingTCPServer((host, port), Handler)
        self._server.daemon_threads = True
        self._serve_thread: threading.Thread | None = None
        self._tick_thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return host, port

    def _broadcast_info(self, info) -> None:
        data = encode_message(info)
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            c.send(data)

    def _tick_loop(self) -> None:
        period = 1.0 / self.tick_hz
        next_t = time.perf_counter()
        while not self._stop.is_set():
            with self.lock:
                self.engine.step()
            next_t += period
            delay = next_t - time.perf_counter()
            if delay > 0:
                self._stop.wait(delay)
            else:
                next_t = time.perf_counter()  # fell behind, resync

    def start(self) -> "EngineServer":
        self._serve_thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.05},
            daemon=True,
        )
        self._tick_thread = threading.Thread(target=self._tick_loop, daemon=True)
        self._serve_thread.start()
        self._tick_thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        self._server.shutdown()
        self._server.server_close()
        with self._clients_lock:
            for c in self._clients:
                try:
                    c.sock.close()
                except OSError:
                    pass
            self._clients.clear()
        for t in (self._serve_thread, self._tick_thread):
            if t is not None:
                t.join(timeout=2.0)

    def __enter__(self) -> "EngineServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
