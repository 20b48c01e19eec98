"""Synthetic audio-video fixtures for tests, demos, and the CLI examples.

Generates a "flash-and-click" pair: a dark video that flashes bright for one
frame at chosen event times, and a click train (short decaying bursts) at
the same times. The pair is deterministic given its arguments, loud enough
to trip the onset/motion peak pickers, and cheap to synthesize, which makes
it the standard substrate for exercising the scoring pipeline end to end.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .media import AudioClip, VideoClip, write_frame_sequence, write_wav
from .rng import CounterRng


def click_train_audio(
    duration_s: float,
    sample_rate: int = 16000,
    event_times=(0.5, 1.5, 2.5, 3.5),
    click_freq: float = 1000.0,
    click_len_s: float = 0.03,
) -> AudioClip:
    """Silence with a short decaying sine burst at each event time."""
    n = int(round(duration_s * sample_rate))
    samples = np.zeros(n)
    burst_len = int(click_len_s * sample_rate)
    t = np.arange(burst_len) / sample_rate
    burst = 0.8 * np.sin(2 * math.pi * click_freq * t) * np.exp(-t / (click_len_s / 3))
    for event in event_times:
        start = int(round(event * sample_rate))
        stop = min(n, start + burst_len)
        if start < n:
            samples[start:stop] += burst[: stop - start]
    return AudioClip(samples=np.clip(samples, -1.0, 1.0), sample_rate=sample_rate)


def flash_video(
    duration_s: float,
    fps: float = 8.0,
    size: int = 48,
    event_times=(0.5, 1.5, 2.5, 3.5),
    base_level: float = 0.1,
    seed: int = 0,
) -> VideoClip:
    """Dim noise-textured frames that jump to white at each event time."""
    n = int(round(duration_s * fps))
    rng = CounterRng(seed)
    texture = base_level * rng.uniforms(size * size * 3).reshape(size, size, 3)
    frames = np.tile(texture, (n, 1, 1, 1))
    for event in event_times:
        idx = int(round(event * fps))
        if 0 <= idx < n:
            frames[idx] = 1.0
    return VideoClip(frames=frames, fps=fps)


def write_fixture_pair(
    directory,
    name: str = "flash",
    duration_s: float = 4.0,
    fps: float = 8.0,
    sample_rate: int = 16000,
    event_times=(0.5, 1.5, 2.5, 3.5),
    size: int = 48,
    seed: int = 0,
) -> dict:
    """Write a synchronized fixture pair; returns its media paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    video = flash_video(duration_s, fps, size, event_times, seed=seed)
    audio = click_train_audio(duration_s, sample_rate, event_times)
    descriptor = write_frame_sequence(directory / f"{name}-frames", video, stem="frame")
    wav = directory / f"{name}.wav"
    write_wav(wav, audio, encoding="pcm16")
    return {"video": str(descriptor), "audio": str(wav)}


def write_verification_fixture(
    directory,
    n_triplets: int = 4,
    duration_s: float = 2.0,
    fps: float = 8.0,
    size: int = 48,
    seed: int = 0,
) -> Path:
    """Write a small triplet manifest over freshly synthesized media.

    Each anchor gets its own positive pair plus two negatives: the positive
    video against a time-shifted audio (audio_temporal) and against an
    unrelated click pattern tagged generated_text_only. Paths inside the
    manifest are relative to the directory, so the tree is relocatable.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for i in range(n_triplets):
        rng = CounterRng(seed + i)
        events = tuple(
            round(0.2 + 0.8 * j / 2 + 0.2 * rng.uniform(), 3) for j in range(2)
        )
        pos = write_fixture_pair(
            directory,
            name=f"pos{i:03d}",
            duration_s=duration_s,
            fps=fps,
            event_times=events,
            size=size,
            seed=seed + i,
        )
        shifted = tuple((e + duration_s / 2) % duration_s for e in events)
        neg_aug = write_fixture_pair(
            directory,
            name=f"neg{i:03d}-shift",
            duration_s=duration_s,
            fps=fps,
            event_times=shifted,
            size=size,
            seed=seed + i,
        )
        other = tuple(round(0.1 + 0.37 * j + 0.13 * rng.uniform(), 3) for j in range(3))
        neg_gen = write_fixture_pair(
            directory,
            name=f"neg{i:03d}-gen",
            duration_s=duration_s,
            fps=fps,
            event_times=other,
            size=size,
            seed=seed + 1000 + i,
        )
        rel = lambda p: str(Path(p).relative_to(directory))
        lines.append(
            json.dumps(
                {
                    "anchor_id": f"anchor{i:03d}",
                    "positive": {"video": rel(pos["video"]), "audio": rel(pos["audio"])},
                    "negatives": [
                        {
                            "video": rel(pos["video"]),
                            "audio": rel(neg_aug["audio"]),
                            "tag": {
                                "source": "augmented",
                                "axis": "audio_temporal",
                                "kind": "audio_temporal_shift",
                                "seed": seed + i,
                            },
                        },
                        {
                            "video": rel(pos["video"]),
                            "audio": rel(neg_gen["audio"]),
                            "tag": {"source": "generated_text_only"},
                        },
                    ],
                },
                sort_keys=True,
            )
        )
    manifest = directory / "triplets.jsonl"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest
