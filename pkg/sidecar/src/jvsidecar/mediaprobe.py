"""Just enough media parsing for the sidecar: durations and frame counts.

Reads the engine's two public input formats (RIFF/WAVE and the
frame-sequence descriptor JSON) far enough to enumerate windows. Real
encoder backends would decode full content here too; the stub never needs
it.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path


class MediaProbeError(Exception):
    pass


def probe_wav(path) -> tuple[int, int]:
    """(n_samples, sample_rate) of a mono/stereo PCM16 or float32 WAV."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MediaProbeError(f"{path}: not a RIFF/WAVE file")
    fmt = None
    data_size = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        if cid == b"fmt " and size >= 16:
            fmt = struct.unpack_from("<HHIIHH", data, pos + 8)
        elif cid == b"data":
            data_size = min(size, len(data) - pos - 8)
        pos += 8 + size + (size & 1)
    if fmt is None or data_size is None:
        raise MediaProbeError(f"{path}: missing fmt or data chunk")
    _, channels, sample_rate, _, block_align, _ = fmt
    if block_align == 0:
        raise MediaProbeError(f"{path}: zero block align")
    return data_size // block_align, sample_rate


def probe_frames(descriptor_path) -> tuple[int, float]:
    """(n_frames, fps) from a frame-sequence descriptor."""
    try:
        desc = json.loads(Path(descriptor_path).read_text())
        n = len(desc["frames"])
        fps = float(desc["fps"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise MediaProbeError(f"{descriptor_path}: bad descriptor: {exc}") from exc
    if n < 1 or fps <= 0:
        raise MediaProbeError(f"{descriptor_path}: empty frame list or bad fps")
    return n, fps


def wav_duration_s(path) -> float:
    n, rate = probe_wav(path)
    return n / rate


def video_duration_s(descriptor_path) -> float:
    n, fps = probe_frames(descriptor_path)
    return n / fps


# --- content loaders for real encoder backends -----------------------------------


def resolve_frame_paths(descriptor_path) -> list:
    descriptor_path = Path(descriptor_path)
    desc = json.loads(descriptor_path.read_text())
    return [descriptor_path.parent / p for p in desc["frames"]]


def load_frame_rgb(path):
    """Decode one P6 PPM or JVRGB1 raw frame to a uint8 H x W x 3 array."""
    import numpy as np

    data = Path(path).read_bytes()
    if data[:2] == b"P6":
        fields, pos = [], 2
        while len(fields) < 3:
            while pos < len(data) and data[pos : pos + 1].isspace():
                pos += 1
            if data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos] != 0x0A:
                    pos += 1
                continue
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            fields.append(data[start:pos])
        pos += 1
        width, height, maxval = (int(f) for f in fields)
        if maxval != 255:
            raise MediaProbeError(f"{path}: only maxval 255 supported")
    elif data[:8] == b"JVRGB1\x00\x00":
        width, height = struct.unpack_from("<II", data, 8)
        pos = 16
    else:
        raise MediaProbeError(f"{path}: unknown frame format")
    need = width * height * 3
    if len(data) - pos < need:
        raise MediaProbeError(f"{path}: truncated frame payload")
    return np.frombuffer(data[pos : pos + need], dtype=np.uint8).reshape(height, width, 3)


def load_wav_mono(path):
    """Decode a PCM16/float32 WAV to (float64 mono samples, rate)."""
    import numpy as np

    data = Path(path).read_bytes()
    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        if cid == b"fmt " and size >= 16:
            fmt = struct.unpack_from("<HHIIHH", data, pos + 8)
        elif cid == b"data":
            payload = data[pos + 8 : pos + 8 + size]
        pos += 8 + size + (size & 1)
    if fmt is None or payload is None:
        raise MediaProbeError(f"{path}: missing fmt or data chunk")
    code, channels, rate, _, _, bits = fmt
    if code == 1 and bits == 16:
        samples = np.frombuffer(payload[: len(payload) // 2 * 2], dtype="<i2") / 32768.0
    elif code == 3 and bits == 32:
        samples = np.frombuffer(payload[: len(payload) // 4 * 4], dtype="<f4").astype(np.float64)
    else:
        raise MediaProbeError(f"{path}: unsupported codec")
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    elif channels != 1:
        raise MediaProbeError(f"{path}: unsupported channel count {channels}")
    return samples, rate


def write_wav_mono(path, samples, rate) -> None:
    import numpy as np

    scaled = np.clip(np.round(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")
    payload = scaled.tobytes()
    fmt = struct.pack("<HHIIHH", 1, 1, rate, rate * 2, 2, 16)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
