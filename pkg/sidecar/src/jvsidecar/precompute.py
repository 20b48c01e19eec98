"""Precompute embedding stores so the scoring engine can run fully offline.

For every media pair in a manifest, enumerates exactly the keys the engine's
default windowing (2 s windows, 1.5 s overlap) will request: one key per
(window, frame) plus one audio key per window. Store keys use the pair's
identifier strings, which default to the manifest's literal "video"/"audio"
values; score offline with those same strings or lookups will miss.

The store file is written deterministically (manifest order, then window,
then frame), so reruns are byte-identical; a rerun over an existing complete
store is skipped outright. Pairs that fail to probe are reported and the
store header is marked {"complete": false}.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .backends import make_backend
from .mediaprobe import MediaProbeError, probe_frames, wav_duration_s
from .stubcore import canonical_key, frame_indices_for, segment_spans

STORE_MAGIC = b"JVEMB1\n"


def write_store(entries, path, complete: bool) -> None:
    """Write [(key string, float32 vector)] in the engine's store format."""
    entries = list(entries)
    if not entries:
        raise ValueError("refusing to write an empty store")
    dim = len(entries[0][1])
    blob = [STORE_MAGIC]
    header = {"complete": complete, "count": len(entries), "dim": dim, "dtype": "f32le"}
    blob.append((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
    seen = set()
    for key, vec in entries:
        if key in seen:
            raise ValueError(f"duplicate key {key!r}")
        seen.add(key)
        arr = np.asarray(vec, dtype="<f4").reshape(-1)
        if len(arr) != dim:
            raise ValueError(f"vector for {key!r} has dim {len(arr)}, expected {dim}")
        kb = key.encode("utf-8")
        blob.append(struct.pack("<I", len(kb)) + kb + arr.tobytes())
    Path(path).write_bytes(b"".join(blob))


def read_store_header(path) -> dict | None:
    try:
        with Path(path).open("rb") as fh:
            if fh.read(len(STORE_MAGIC)) != STORE_MAGIC:
                return None
            return json.loads(fh.readline())
    except (OSError, json.JSONDecodeError):
        return None


def pair_keys(video_path, audio_path, video_id: str, audio_id: str):
    """Every (key kind, window, frame) the default windowing would request."""
    n_frames, fps = probe_frames(video_path)
    duration = min(n_frames / fps, wav_duration_s(audio_path))
    out = []
    for index, start, end in segment_spans(duration):
        window = {"index": index, "start_s": start, "end_s": end}
        frames = frame_indices_for(start, end, fps, n_frames)
        out.append((window, frames))
    return out


def load_manifest(path) -> list[dict]:
    path = Path(path)
    records = []
    for line_no, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            rec["_video_path"] = str(path.parent / rec["video"])
            rec["_audio_path"] = str(path.parent / rec["audio"])
            rec.setdefault("video_id", rec["video"])
            rec.setdefault("audio_id", rec["audio"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MediaProbeError(f"{path}:{line_no}: bad manifest record: {exc}") from exc
        records.append(rec)
    if not records:
        raise MediaProbeError(f"{path}: empty manifest")
    return records


def expected_key_count(records) -> int:
    total = 0
    for rec in records:
        for _window, frames in pair_keys(
            rec["_video_path"], rec["_audio_path"], rec["video_id"], rec["audio_id"]
        ):
            total += len(frames) + 1
    return total


def precompute(manifest_path, out_path, backend_name: str = "stub", dim: int = 16,
               device: str = "cpu") -> dict:
    """Build (or verify) the store for a manifest; returns a run report."""
    records = load_manifest(manifest_path)
    backend = make_backend(backend_name, dim=dim, device=device)

    header = read_store_header(out_path)
    if header is not None and header.get("complete"):
        try:
            if header.get("count") == expected_key_count(records):
                return {"store": str(out_path), "keys": header["count"],
                        "failures": [], "skipped": True}
        except MediaProbeError:
            pass  # fall through and rebuild, surfacing the probe failure

    entries = []
    failures = []
    for rec in records:
        try:
            plan = pair_keys(rec["_video_path"], rec["_audio_path"],
                             rec["video_id"], rec["audio_id"])
            for window, frames in plan:
                vectors = backend.embed_video_frames(
                    rec["video_id"], rec["_video_path"], window, frames
                )
                for frame, vec in zip(frames, vectors):
                    key = canonical_key(rec["video_id"], window["index"], "video_frame", frame)
                    entries.append((key, vec))
                audio_vec = backend.embed_audio(rec["audio_id"], rec["_audio_path"], window)
                key = canonical_key(rec["audio_id"], window["index"], "audio_window")
                entries.append((key, audio_vec))
        except Exception as exc:
            failures.append(
                {"video": rec["video"], "audio": rec["audio"],
                 "reason": f"{type(exc).__name__}: {exc}"}
            )
    if not entries:
        raise MediaProbeError("no pair in the manifest produced any embeddings")
    write_store(entries, out_path, complete=not failures)
    return {"store": str(out_path), "keys": len(entries),
            "failures": failures, "skipped": False}
