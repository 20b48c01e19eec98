"""The embedding-provider boundary.

The scorer never runs an encoder itself: it asks a provider for one vector
per (window, frame) or (window, audio-span) key. Three providers satisfy that
contract:

  - StubProvider: deterministic pseudo-random unit vectors derived from each
    key's canonical string (FNV-1a seed -> SplitMix64 counter stream ->
    Box-Muller), bit-stable across runs and platforms. The test double for
    real encoders.
  - StoreProvider: exact lookups against an on-disk store file written ahead
    of time, so scoring runs fully offline.
  - RemoteProvider: newline-delimited JSON client for an encoder sidecar over
    a TCP socket or a spawned subprocess's stdio; responses correlate by
    request id and may arrive out of order.

Zero-norm vectors are always an error, never "similarity 0": a silent zero
would bias the least-synchronized-frames selection downstream.
"""

from __future__ import annotations

import json
import shlex
import socket
import struct
import subprocess
from dataclasses import dataclass
from pathlib import Path
from threading import Lock

import numpy as np

from .errors import ParameterError, ProviderError, StoreError
from .rng import CounterRng, fnv1a64

STORE_MAGIC = b"JVEMB1\n"

VIDEO_FRAME = "video_frame"
AUDIO_WINDOW = "audio_window"


@dataclass(frozen=True)
class EmbeddingKey:
    """Identifies one requested vector: media, window, modality, frame."""

    media_id: str
    window_index: int
    modality: str
    frame_index: int | None = None

    def __post_init__(self):
        if self.modality not in (VIDEO_FRAME, AUDIO_WINDOW):
            raise ParameterError(f"unknown modality {self.modality!r}")
        if (self.frame_index is not None) != (self.modality == VIDEO_FRAME):
            raise ParameterError("frame_index is required iff modality is video_frame")
        if self.window_index < 0 or (self.frame_index or 0) < 0:
            raise ParameterError("indices must be non-negative")

    def canonical(self) -> str:
        """Stable string form used for store keys and stub seeding."""
        if self.modality == VIDEO_FRAME:
            return f"{self.media_id}|w{self.window_index}|video_frame|f{self.frame_index}"
        return f"{self.media_id}|w{self.window_index}|audio_window"


@dataclass(frozen=True)
class ProviderCapability:
    kind: str  # store | stub | remote
    dimension: int
    max_in_flight: int

    def __post_init__(self):
        if self.dimension <= 0 or self.max_in_flight <= 0:
            raise ParameterError("dimension and max_in_flight must be positive")


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ParameterError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ProviderError("cosine similarity undefined for zero-norm vector")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


# --- deterministic stub -------------------------------------------------------


def stub_embed(key: EmbeddingKey, dimension: int) -> np.ndarray:
    """Deterministic unit vector (float32) for a key.

    Procedure, fixed for cross-implementation portability: seed = FNV-1a-64
    of the canonical key string (UTF-8); draw standard normals from the
    SplitMix64 counter stream via Box-Muller; normalize in float64; cast to
    float32. The sidecar's stub backend mirrors this exactly.
    """
    if dimension < 2:
        raise ParameterError("stub dimension must be >= 2")
    rng = CounterRng(fnv1a64(key.canonical().encode("utf-8")))
    v = rng.normals(dimension)
    norm = float(np.linalg.norm(v))
    return (v / norm).astype(np.float32)


class StubProvider:
    """Provider backed by stub_embed; no media access, pure key lookups."""

    def __init__(self, dimension: int = 16):
        self._capability = ProviderCapability(kind="stub", dimension=dimension, max_in_flight=1024)

    def capability(self) -> ProviderCapability:
        return self._capability

    def embed_video_frames(self, media_id, window, frame_indices) -> np.ndarray:
        d = self._capability.dimension
        keys = [
            EmbeddingKey(media_id, window.index, VIDEO_FRAME, int(fi)) for fi in frame_indices
        ]
        return np.stack([stub_embed(k, d) for k in keys])

    def embed_audio(self, media_id, window) -> np.ndarray:
        return stub_embed(
            EmbeddingKey(media_id, window.index, AUDIO_WINDOW), self._capability.dimension
        )


# --- on-disk store ------------------------------------------------------------


def write_embedding_store(entries, path, header_extra: dict | None = None) -> None:
    """Write (EmbeddingKey, vector) pairs to a store file.

    Format: magic "JVEMB1\\n"; one JSON header line {"dim", "count",
    "dtype": "f32le", ...}; then per record a u32-LE key length, the
    canonical key bytes, and dim float32-LE values. Round-trips are bit
    exact for float32 payloads.
    """
    entries = list(entries)
    if not entries:
        raise StoreError("refusing to write an empty embedding store")
    dim = len(np.asarray(entries[0][1]).reshape(-1))
    seen = set()
    records = []
    for key, vec in entries:
        canon = key.canonical() if isinstance(key, EmbeddingKey) else str(key)
        if canon in seen:
            raise StoreError(f"duplicate embedding key {canon!r}")
        seen.add(canon)
        arr = np.asarray(vec, dtype="<f4").reshape(-1)
        if len(arr) != dim:
            raise StoreError(f"vector for {canon!r} has dim {len(arr)}, expected {dim}")
        kb = canon.encode("utf-8")
        records.append(struct.pack("<I", len(kb)) + kb + arr.tobytes())
    header = {"dim": dim, "count": len(records), "dtype": "f32le"}
    header.update(header_extra or {})
    blob = STORE_MAGIC + (json.dumps(header, sort_keys=True) + "\n").encode("utf-8")
    Path(path).write_bytes(blob + b"".join(records))


def read_embedding_store(path) -> dict[str, np.ndarray]:
    """Read a store file into {canonical key: float32 vector}."""
    data = Path(path).read_bytes()
    if not data.startswith(STORE_MAGIC):
        raise StoreError(f"{path}: bad store magic")
    nl = data.find(b"\n", len(STORE_MAGIC))
    if nl < 0:
        raise StoreError(f"{path}: missing header line")
    try:
        header = json.loads(data[len(STORE_MAGIC) : nl])
    except json.JSONDecodeError as exc:
        raise StoreError(f"{path}: malformed header: {exc}") from exc
    if header.get("dtype") != "f32le":
        raise StoreError(f"{path}: unsupported dtype {header.get('dtype')!r}")
    dim, count = header.get("dim"), header.get("count")
    if not isinstance(dim, int) or dim <= 0 or not isinstance(count, int) or count < 0:
        raise StoreError(f"{path}: invalid dim/count in header")
    out: dict[str, np.ndarray] = {}
    pos = nl + 1
    vec_bytes = dim * 4
    for _ in range(count):
        if pos + 4 > len(data):
            raise StoreError(f"{path}: truncated record header")
        (klen,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if pos + klen + vec_bytes > len(data):
            raise StoreError(f"{path}: record payload does not match header dim {dim}")
        key = data[pos : pos + klen].decode("utf-8")
        pos += klen
        vec = np.frombuffer(data[pos : pos + vec_bytes], dtype="<f4").copy()
        pos += vec_bytes
        if key in out:
            raise StoreError(f"{path}: duplicate key {key!r}")
        out[key] = vec
    if pos != len(data):
        raise StoreError(f"{path}: {len(data) - pos} trailing bytes after {count} records")
    return out


class StoreProvider:
    """Provider over a precomputed store file; lookups are exact."""

    def __init__(self, path):
        self._path = str(path)
        self._table = read_embedding_store(path)
        dims = {len(v) for v in self._table.values()}
        if len(dims) != 1:
            raise StoreError(f"{path}: inconsistent vector dimensions {sorted(dims)}")
        self._capability = ProviderCapability(
            kind="store", dimension=dims.pop(), max_in_flight=1024
        )

    def capability(self) -> ProviderCapability:
        return self._capability

    def _lookup(self, key: EmbeddingKey) -> np.ndarray:
        try:
            return self._table[key.canonical()]
        except KeyError:
            raise ProviderError(
                f"store {self._path} has no embedding for {key.canonical()!r}"
            ) from None

    def embed_video_frames(self, media_id, window, frame_indices) -> np.ndarray:
        return np.stack(
            [
                self._lookup(EmbeddingKey(media_id, window.index, VIDEO_FRAME, int(fi)))
                for fi in frame_indices
            ]
        )

    def embed_audio(self, media_id, window) -> np.ndarray:
        return self._lookup(EmbeddingKey(media_id, window.index, AUDIO_WINDOW))


# --- remote sidecar client ----------------------------------------------------


class _LineChannel:
    """Newline-delimited JSON over a socket or a child process's stdio."""

    def __init__(self, endpoint: str, timeout_s: float):
        self._proc = None
        self._sock = None
        if endpoint.startswith("stdio:"):
            argv = shlex.split(endpoint[len("stdio:") :])
            if not argv:
                raise ProviderError("stdio endpoint needs a command")
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
            )
        else:
            hostport = endpoint[len("tcp://") :] if endpoint.startswith("tcp://") else endpoint
            host, _, port = hostport.rpartition(":")
            if not host or not port.isdigit():
                raise ProviderError(f"cannot parse remote endpoint {endpoint!r}")
            try:
                self._sock = socket.create_connection((host, int(port)), timeout=timeout_s)
            except OSError as exc:
                raise ProviderError(f"cannot connect to {endpoint}: {exc}") from exc
            self._reader = self._sock.makefile("r", encoding="utf-8")
            self._writer = self._sock.makefile("w", encoding="utf-8")

    def send(self, obj: dict) -> None:
        line = json.dumps(obj) + "\n"
        try:
            if self._proc is not None:
                self._proc.stdin.write(line)
                self._proc.stdin.flush()
            else:
                self._writer.write(line)
                self._writer.flush()
        except (OSError, BrokenPipeError) as exc:
            raise ProviderError(f"remote send failed: {exc}") from exc

    def recv(self) -> dict:
        try:
            line = (self._proc.stdout if self._proc is not None else self._reader).readline()
        except OSError as exc:
            raise ProviderError(f"remote receive failed: {exc}") from exc
        if not line:
            raise ProviderError("remote closed the connection")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProviderError(f"remote sent invalid JSON: {exc}") from exc

    def close(self) -> None:
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)
        if self._sock is not None:
            self._sock.close()


class RemoteProvider:
    """Client for the encoder sidecar's wire protocol.

    Requests carry a u64 id; responses may arrive in any order and are
    matched back by id. Access is serialized with a lock, which keeps the
    declared max_in_flight honest no matter how many workers call in.
    """

    def __init__(self, endpoint: str, timeout_s: float = 60.0):
        self._channel = _LineChannel(endpoint, timeout_s)
        self._lock = Lock()
        self._next_id = 1
        self._pending: dict[int, dict] = {}
        hello = self._roundtrip({"op": "hello"})
        try:
            self._capability = ProviderCapability(
                kind="remote",
                dimension=int(hello["dim_video"]),
                max_in_flight=int(hello["max_in_flight"]),
            )
            self.dim_audio = int(hello["dim_audio"])
            self.backend = str(hello.get("backend", "unknown"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderError(f"malformed hello response: {hello}") from exc

    def capability(self) -> ProviderCapability:
        return self._capability

    def _roundtrip(self, body: dict) -> dict:
        with self._lock:
            rid = self._next_id
            self._next_id += 1
            self._channel.send({"id": rid, **body})
            while rid not in self._pending:
                resp = self._channel.recv()
                self._pending[int(resp.get("id", -1))] = resp
            resp = self._pending.pop(rid)
        if "error" in resp:
            raise ProviderError(f"remote error: {resp['error']}")
        return resp

    def _vectors(self, resp: dict, expect: int) -> np.ndarray:
        vecs = resp.get("vectors")
        if not isinstance(vecs, list) or len(vecs) != expect:
            raise ProviderError(f"expected {expect} vectors, got {resp.get('vectors')!r}")
        arr = np.asarray(vecs, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[1] != int(resp.get("dim", arr.shape[1])):
            raise ProviderError("response vectors do not match declared dim")
        return arr

    @staticmethod
    def _window_body(window) -> dict:
        # "index" is additive to the documented schema: content encoders can
        # ignore it, but the stub backend needs it to reproduce exact keys.
        return {"start_s": window.start_s, "end_s": window.end_s, "index": window.index}

    def embed_video_frames(self, media_id, window, frame_indices) -> np.ndarray:
        resp = self._roundtrip(
            {
                "op": "embed_video_frames",
                "media": media_id,
                "window": self._window_body(window),
                "frame_indices": [int(i) for i in frame_indices],
            }
        )
        return self._vectors(resp, len(list(frame_indices)))

    def embed_audio(self, media_id, window) -> np.ndarray:
        resp = self._roundtrip(
            {
                "op": "embed_audio",
                "media": media_id,
                "window": self._window_body(window),
            }
        )
        return self._vectors(resp, 1)[0]

    def close(self) -> None:
        self._channel.close()
