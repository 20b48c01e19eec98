"""The sidecar server: newline-delimited JSON requests, id-correlated replies.

Listens on standard I/O or a TCP socket. Every request line carries an op;
"hello" answers the capability handshake, "embed_video_frames" and
"embed_audio" produce vectors, anything else gets an in-band error carrying
the request id. Per-request media failures are also in-band; only a backend
that cannot load at startup aborts the process.

Vectors cross the wire as JSON numbers. Each float32 component converts to
the exact double it denotes, so the client recovers bit-identical float32
values.
"""

from __future__ import annotations

import json
import socket
import sys
from dataclasses import dataclass

from .backends import make_backend


@dataclass(frozen=True)
class SidecarConfig:
    backend: str = "stub"
    dim: int = 16
    device: str = "cpu"
    listen: str = "stdio"  # "stdio" or "host:port"
    batch_size: int = 16
    max_in_flight: int = 64


def _hello_response(backend, cfg: SidecarConfig) -> dict:
    return {
        "dim_video": backend.dim_video,
        "dim_audio": backend.dim_audio,
        "max_in_flight": cfg.max_in_flight,
        "backend": backend.name,
    }


def handle_line(backend, cfg: SidecarConfig, line: str) -> dict:
    """One request line to one response object; errors stay in-band."""
    try:
        req = json.loads(line)
    except json.JSONDecodeError as exc:
        return {"error": f"invalid JSON: {exc}"}
    rid = req.get("id")
    base = {} if rid is None else {"id": rid}
    try:
        op = req.get("op")
        if op == "hello":
            return {**base, **_hello_response(backend, cfg)}
        if op == "embed_video_frames":
            vectors = backend.embed_video_frames(
                req["media"], req["media"], req["window"], req["frame_indices"]
            )
            return {
                **base,
                "dim": int(vectors.shape[1]),
                "vectors": [[float(x) for x in vec] for vec in vectors],
            }
        if op == "embed_audio":
            vector = backend.embed_audio(req["media"], req["media"], req["window"])
            return {
                **base,
                "dim": int(len(vector)),
                "vectors": [[float(x) for x in vector]],
            }
        return {**base, "error": f"unknown op {op!r}"}
    except Exception as exc:  # in-band per the protocol
        return {**base, "error": f"{type(exc).__name__}: {exc}"}


def serve_stream(backend, cfg: SidecarConfig, rfile, wfile) -> None:
    for line in rfile:
        if not line.strip():
            continue
        response = handle_line(backend, cfg, line)
        wfile.write(json.dumps(response) + "\n")
        wfile.flush()


def serve(cfg: SidecarConfig) -> None:
    """Run until the peer disconnects (stdio) or forever (TCP)."""
    backend = make_backend(cfg.backend, dim=cfg.dim, device=cfg.device)
    if cfg.listen == "stdio":
        serve_stream(backend, cfg, sys.stdin, sys.stdout)
        return
    host, _, port = cfg.listen.rpartition(":")
    with socket.create_server((host or "127.0.0.1", int(port))) as server:
        while True:
            conn, _addr = server.accept()
            with conn:
                rfile = conn.makefile("r", encoding="utf-8")
                wfile = conn.makefile("w", encoding="utf-8")
                serve_stream(backend, cfg, rfile, wfile)
