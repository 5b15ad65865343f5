"""Stream-socket protocol exposing StreamingEnv to external trainers.

Frames are a 4-byte big-endian payload length followed by UTF-8 JSON.  One
connection drives one environment instance; open several connections for
vectorised training.  See PROTOCOL.md for the message grammar and the
observation / action encodings (both frozen wire contracts).
"""
from __future__ import annotations

import json
import logging
import socket
import socketserver
import struct
import threading
from typing import Callable, Optional

import numpy as np

from .env import StreamingEnv

logger = logging.getLogger(__name__)

_HEADER = struct.Struct(">I")
MAX_FRAME_BYTES = 8 * 1024 * 1024


class ProtocolError(RuntimeError):
    pass


def send_frame(sock: socket.socket, payload: dict) -> None:
    data = json.dumps(payload, separators=(",", ":")).encode("utf-8")
    sock.sendall(_HEADER.pack(len(data)) + data)


def recv_frame(sock: socket.socket) -> Optional[dict]:
    header = _recv_exactly(sock, _HEADER.size)
    if header is None:
        return None
    (length,) = _HEADER.unpack(header)
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {length} bytes exceeds limit")
    body = _recv_exactly(sock, length)
    if body is None:
        raise ProtocolError("connection closed mid-frame")
    return json.loads(body.decode("utf-8"))


def _recv_exactly(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            if buf:
                raise ProtocolError("connection closed mid-frame")
            return None
        buf += chunk
    return buf


class _SessionHandler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        env: StreamingEnv = self.server.env_factory()
        last_id = -1
        obs = mask = None
        try:
            while True:
                try:
                    msg = recv_frame(self.request)
                except (ProtocolError, json.JSONDecodeError) as exc:
                    send_frame(self.request, {"kind": "error", "message": str(exc)})
                    return
                if msg is None:
                    return
                msg_id = msg.get("id", last_id + 1)
                if not isinstance(msg_id, int) or msg_id <= last_id:
                    send_frame(
                        self.request,
                        {"kind": "error", "id": msg_id,
                         "message": f"ids must increase; got {msg_id} after {last_id}"},
                    )
                    return
                last_id = msg_id
                kind = msg.get("kind")
                if kind == "handshake":
                    send_frame(self.request, {
                        "id": msg_id,
                        "kind": "handshake_reply",
                        "obs_size": env.observation_size,
                        "action_space": env.space.kind,
                        "action_space_size": env.space.size,
                        "num_paths": env.num_paths,
                        "window": env.space.window,
                        "num_levels": env.space.num_levels,
                    })
                elif kind == "reset":
                    obs, mask = env.reset(int(msg.get("seed", 0)))
                    send_frame(self.request, _obs_reply(msg_id, obs, mask, 0.0, False, {
                        "path_id": env.info["path_id"],
                    }))
                elif kind == "step":
                    if obs is None:
                        send_frame(self.request, {"id": msg_id, "kind": "error",
                                                  "message": "step before reset"})
                        continue
                    try:
                        obs, mask, reward, done, info = env.step(int(msg["action"]))
                    except (KeyError, TypeError, ValueError) as exc:
                        # Masked/malformed action: report and keep the session alive.
                        send_frame(self.request, {"id": msg_id, "kind": "error",
                                                  "message": f"invalid action: {exc}"})
                        continue
                    if done:
                        obs = mask = None
                    send_frame(self.request, _obs_reply(
                        msg_id, obs, mask, reward, done, _json_safe(info)))
                elif kind == "close":
                    send_frame(self.request, {"id": msg_id, "kind": "closed"})
                    return
                else:
                    send_frame(self.request, {"id": msg_id, "kind": "error",
                                              "message": f"unknown kind {kind!r}"})
                    return
        except (ConnectionError, BrokenPipeError):
            logger.info("bridge session dropped")


def _obs_reply(msg_id, obs, mask, reward, done, info) -> dict:
    return {
        "id": msg_id,
        "kind": "obs_reply",
        "obs": list(obs) if obs is not None else [],
        "mask": [bool(b) for b in mask] if mask is not None else [],
        "reward": float(reward),
        "done": bool(done),
        "info": info,
    }


def _json_safe(value):
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


class BridgeServer(socketserver.ThreadingTCPServer):
    """One environment per connection; connections are isolated sessions."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, host: str, port: int, env_factory: Callable[[], StreamingEnv]):
        super().__init__((host, port), _SessionHandler)
        self.env_factory = env_factory

    @property
    def endpoint(self) -> tuple[str, int]:
        return self.server_address[0], self.server_address[1]


def serve(host: str, port: int, env_factory: Callable[[], StreamingEnv]) -> BridgeServer:
    """Start serving in a background thread; caller owns shutdown()."""
    server = BridgeServer(host, port, env_factory)
    thread = threading.Thread(target=server.serve_forever, name="msdash-bridge", daemon=True)
    thread.start()
    return server


class BridgeClient:
    """Minimal blocking client used by tests and local tooling."""

    def __init__(self, host: str, port: int, timeout_s: float = 30.0):
        self._sock = socket.create_connection((host, port), timeout=timeout_s)
        self._next_id = 0

    def request(self, kind: str, **fields) -> dict:
        msg = {"id": self._next_id, "kind": kind, **fields}
        self._next_id += 1
        send_frame(self._sock, msg)
        reply = recv_frame(self._sock)
        if reply is None:
            raise ProtocolError("server closed the connection")
        return reply

    def close(self) -> None:
        try:
            self.request("close")
        finally:
            self._sock.close()
