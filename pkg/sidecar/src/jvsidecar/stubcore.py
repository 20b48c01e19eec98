"""The deterministic stub-embedding procedure, sidecar copy.

This is the cross-process determinism contract with the scoring engine, so
the procedure is fixed down to the arithmetic:

  1. canonical key string:
       "<media>|w<window>|video_frame|f<frame>"  or
       "<media>|w<window>|audio_window"
  2. seed = 64-bit FNV-1a of the key's UTF-8 bytes,
  3. standard normals from the SplitMix64 counter stream via Box-Muller
     (pair j uses uniforms (2j, 2j+1): r = sqrt(-2 ln(1-u0)),
     theta = 2 pi u1), computed in float64,
  4. normalize in float64, cast to float32.

The engine implements the identical steps; both sides must produce
bit-identical float32 vectors for the same key. Do not "improve" anything
here without changing both.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MUL1 = 0xBF58476D1CE4E5B9
_SM_MUL2 = 0x94D049BB133111EB


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _splitmix64_block(seed: int, count: int) -> np.ndarray:
    idx = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + idx * np.uint64(_SM_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_SM_MUL1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_SM_MUL2)
        return z ^ (z >> np.uint64(31))


def canonical_key(media_id: str, window_index: int, modality: str, frame_index=None) -> str:
    if modality == "video_frame":
        return f"{media_id}|w{window_index}|video_frame|f{frame_index}"
    if modality == "audio_window":
        return f"{media_id}|w{window_index}|audio_window"
    raise ValueError(f"unknown modality {modality!r}")


def stub_vector(key: str, dimension: int) -> np.ndarray:
    """Unit float32 vector for one canonical key string."""
    if dimension < 2:
        raise ValueError("stub dimension must be >= 2")
    seed = fnv1a64(key.encode("utf-8"))
    pairs = (dimension + 1) // 2
    u = (_splitmix64_block(seed, 2 * pairs) >> np.uint64(11)).astype(np.float64) * 2.0**-53
    r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
    theta = (2.0 * math.pi) * u[1::2]
    normals = np.empty(2 * pairs, dtype=np.float64)
    normals[0::2] = r * np.cos(theta)
    normals[1::2] = r * np.sin(theta)
    v = normals[:dimension]
    return (v / float(np.linalg.norm(v))).astype(np.float32)


# --- windowing enumeration (mirrors the engine's defaults) ----------------------


def segment_spans(duration_s: float, window_s: float = 2.0, overlap_s: float = 1.5):
    """(index, start, end) spans the engine's default windowing produces."""
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    if duration_s < window_s:
        return [(0, 0.0, duration_s)]
    stride = window_s - overlap_s
    count = math.floor((duration_s - window_s) / stride) + 1
    return [
        (i, i * stride, min(i * stride + window_s, duration_s)) for i in range(count)
    ]


def frame_indices_for(start_s: float, end_s: float, fps: float, n_frames: int) -> list[int]:
    """Frames whose timestamp lies in [start, end), nearest-frame fallback."""
    lo = max(0, math.floor(start_s * fps) - 1)
    hi = min(n_frames, math.ceil(end_s * fps) + 2)
    indices = [i for i in range(lo, hi) if start_s <= i / fps < end_s]
    if indices:
        return indices
    return [min(max(0, round(start_s * fps)), n_frames - 1)]
