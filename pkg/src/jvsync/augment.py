"""Synthesis of asynchronous ("hard negative") video-audio pairs.

Eleven seeded transforms, four on video and seven on audio, each breaking
synchrony along one axis while leaving the other modality untouched:

  video spatial   - random grid masking, moving-sprite overlay
  video temporal  - cyclic frame shift, frame pausing
  audio spatial   - source mixing, stem removal, volume envelopes
  audio temporal  - cyclic shift, silence insertion, segment repeat,
                    speed change

Every transform preserves container shape (frame count/size/fps, sample
count/rate): insertions truncate the tail and speed-ups zero-pad, because
the downstream scorer requires equal durations. All randomness comes from
the SplitMix64 counter stream seeded per spec, so results are bit-identical
across runs and independent of execution order.

The sprite overlay is a synthetic stand-in for dataset-derived object
trajectories, and stem removal takes a caller-provided stem instead of
running source separation; both keep the intent without external models.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ManifestError, ParameterError
from .media import (
    AudioClip,
    VideoClip,
    load_frame_sequence,
    load_wav,
    write_frame_sequence,
    write_wav,
)
from .rng import CounterRng

VIDEO_SPATIAL = "video_spatial"
VIDEO_TEMPORAL = "video_temporal"
AUDIO_SPATIAL = "audio_spatial"
AUDIO_TEMPORAL = "audio_temporal"

AXIS_BY_KIND = {
    "video_random_mask": VIDEO_SPATIAL,
    "video_overlay_sprite": VIDEO_SPATIAL,
    "video_cyclic_shift": VIDEO_TEMPORAL,
    "video_pause": VIDEO_TEMPORAL,
    "audio_mix": AUDIO_SPATIAL,
    "audio_remove_stem": AUDIO_SPATIAL,
    "audio_volume_envelope": AUDIO_SPATIAL,
    "audio_temporal_shift": AUDIO_TEMPORAL,
    "audio_insert_silence": AUDIO_TEMPORAL,
    "audio_insert_repeat": AUDIO_TEMPORAL,
    "audio_speed_change": AUDIO_TEMPORAL,
}

ALL_KINDS = tuple(AXIS_BY_KIND)
VOLUME_SHAPES = ("cosine_fall", "sine_bump", "linear_rise", "linear_fall")


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


@dataclass(frozen=True)
class TargetInterval:
    """A sound-producing span [start_s, end_s) that audio transforms target."""

    start_s: float
    end_s: float

    def __post_init__(self):
        if not 0 <= self.start_s < self.end_s:
            raise ParameterError(
                f"invalid target interval [{self.start_s}, {self.end_s})"
            )

    def check_within(self, duration_s: float) -> None:
        if self.end_s > duration_s + 1e-9:
            raise ParameterError(
                f"interval end {self.end_s} s exceeds clip duration {duration_s} s"
            )


@dataclass(frozen=True)
class NegativeTag:
    """Provenance of a synthesized negative: which axis, which kind, which seed."""

    axis: str
    kind: str
    seed: int

    def __post_init__(self):
        if AXIS_BY_KIND.get(self.kind) != self.axis:
            raise ParameterError(f"axis {self.axis!r} inconsistent with kind {self.kind!r}")

    def to_json_dict(self) -> dict:
        return {"source": "augmented", "axis": self.axis, "kind": self.kind, "seed": self.seed}


@dataclass(frozen=True)
class AugSpec:
    """One augmentation request: kind, kind-specific params, seed."""

    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in AXIS_BY_KIND:
            raise ParameterError(f"unknown augmentation kind {self.kind!r}")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must fit in 64 unsigned bits")
        p = self.params
        if "ratio" in p and not 0 < p["ratio"] < 1:
            raise ParameterError(f"mask ratio must lie in (0, 1), got {p['ratio']}")
        if "grid" in p and p["grid"] < 1:
            raise ParameterError("grid must be >= 1")
        if "gain" in p and not 0 < p["gain"] <= 1:
            raise ParameterError(f"gain must lie in (0, 1], got {p['gain']}")
        if "pause_s" in p and p["pause_s"] < 0.5:
            raise ParameterError(f"pause_s must be >= 0.5, got {p['pause_s']}")
        if "dur_s" in p and not p["dur_s"] > 0:
            raise ParameterError(f"dur_s must be > 0, got {p['dur_s']}")
        if "factor" in p and p["factor"] not in (0.5, 2.0):
            raise ParameterError(f"speed factor must be 0.5 or 2.0, got {p['factor']}")
        if "shape" in p and p["shape"] not in VOLUME_SHAPES:
            raise ParameterError(f"unknown volume shape {p['shape']!r}")

    @property
    def axis(self) -> str:
        return AXIS_BY_KIND[self.kind]

    def tag(self) -> NegativeTag:
        return NegativeTag(axis=self.axis, kind=self.kind, seed=self.seed)


# --- video transforms ----------------------------------------------------------


def video_random_mask(
    clip: VideoClip, grid: int = 6, ratio: float | None = None, seed: int = 0
) -> VideoClip:
    """Black out a seeded selection of grid cells in every frame.

    The frame is split into grid x grid cells; round(ratio * grid^2) distinct
    cells are chosen once and zeroed in all frames (a static mask). When
    ratio is omitted it is drawn uniformly from (0.2, 0.8).
    """
    if grid < 1:
        raise ParameterError("grid must be >= 1")
    rng = CounterRng(seed)
    if ratio is None:
        ratio = rng.uniform(0.2, 0.8)
    if not 0 < ratio < 1:
        raise ParameterError(f"mask ratio must lie in (0, 1), got {ratio}")
    n_cells = _round_half_up(ratio * grid * grid)
    cells = rng.sample(grid * grid, n_cells)
    _, h, w, _ = clip.frames.shape
    rows = [h * g // grid for g in range(grid + 1)]
    cols = [w * g // grid for g in range(grid + 1)]
    frames = clip.frames.copy()
    for cell in cells:
        r, c = divmod(cell, grid)
        frames[:, rows[r] : rows[r + 1], cols[c] : cols[c + 1], :] = 0.0
    return VideoClip(frames=frames, fps=clip.fps)


@dataclass(frozen=True)
class SpriteConfig:
    """Solid rectangle composited over the video to fake a new sound source.

    velocity, color, and start default to None, meaning: one left-to-right
    crossing per clip, a seeded color, and a seeded start position.
    """

    width: int = 32
    height: int = 32
    velocity: tuple | None = None  # (vx, vy) pixels/second
    color: tuple | None = None  # (r, g, b) in [0, 1]
    start: tuple | None = None  # (x0, y0) top-left pixel

    def __post_init__(self):
        if self.width < 32 or self.height < 32:
            raise ParameterError("sprite must be at least 32 x 32 pixels")


def video_overlay_sprite(
    clip: VideoClip, sprite: SpriteConfig | None = None, seed: int = 0
) -> VideoClip:
    """Composite a moving solid rectangle over every frame.

    Unspecified sprite fields are drawn from the seed in a fixed order
    (color, then start position, uniform over placements fully inside the
    frame); motion is linear and the rectangle is clipped at frame edges
    once it moves out.
    """
    rng = CounterRng(seed)
    _, h, w, _ = clip.frames.shape
    sprite = sprite or SpriteConfig()
    if sprite.width > w or sprite.height > h:
        raise ParameterError(
            f"sprite {sprite.width}x{sprite.height} does not fit in frame {w}x{h}"
        )
    velocity = sprite.velocity if sprite.velocity is not None else (w / clip.duration_s, 0.0)
    color = sprite.color if sprite.color is not None else tuple(rng.uniforms(3))
    if sprite.start is not None:
        x0, y0 = sprite.start
    else:
        x0 = rng.randint(w - sprite.width + 1)
        y0 = rng.randint(h - sprite.height + 1)
    color = np.asarray(color, dtype=np.float64)
    frames = clip.frames.copy()
    for i in range(clip.n_frames):
        t = i / clip.fps
        x = _round_half_up(x0 + velocity[0] * t)
        y = _round_half_up(y0 + velocity[1] * t)
        x_lo, x_hi = max(0, x), min(w, x + sprite.width)
        y_lo, y_hi = max(0, y), min(h, y + sprite.height)
        if x_lo < x_hi and y_lo < y_hi:
            frames[i, y_lo:y_hi, x_lo:x_hi, :] = color
    return VideoClip(frames=frames, fps=clip.fps)


def video_cyclic_shift(clip: VideoClip, start_frame: int | None = None, seed: int = 0) -> VideoClip:
    """Rearrange frames cyclically from a (possibly seeded) starting point.

    The seeded default draws from [1, n) so it always desynchronizes;
    start_frame 0 (the identity) must be asked for explicitly.
    """
    n = clip.n_frames
    if start_frame is None:
        if n < 2:
            raise ParameterError("cyclic shift needs at least 2 frames for a seeded draw")
        start_frame = 1 + CounterRng(seed).randint(n - 1)
    if not 0 <= start_frame < n:
        raise ParameterError(f"start_frame {start_frame} outside [0, {n})")
    frames = np.roll(clip.frames, -start_frame, axis=0)
    return VideoClip(frames=frames.copy(), fps=clip.fps)


def video_pause(
    clip: VideoClip, at_frame: int | None = None, pause_s: float = 0.5, seed: int = 0
) -> VideoClip:
    """Freeze one frame for at least half a second; length is preserved.

    round(pause_s * fps) copies of the chosen frame are inserted right after
    it and the sequence is truncated back to the original frame count.
    """
    if pause_s < 0.5:
        raise ParameterError(f"pause_s must be >= 0.5, got {pause_s}")
    n = clip.n_frames
    if at_frame is None:
        # the final frame is excluded from the draw: pausing there is a no-op
        # after truncation, which defeats the purpose of a negative
        if n < 2:
            raise ParameterError("pause needs at least 2 frames for a seeded draw")
        at_frame = CounterRng(seed).randint(n - 1)
    if not 0 <= at_frame < n:
        raise ParameterError(f"at_frame {at_frame} outside [0, {n})")
    repeats = _round_half_up(pause_s * clip.fps)
    held = np.repeat(clip.frames[at_frame : at_frame + 1], repeats, axis=0)
    frames = np.concatenate([clip.frames[: at_frame + 1], held, clip.frames[at_frame + 1 :]])
    return VideoClip(frames=frames[:n].copy(), fps=clip.fps)


# --- audio transforms -----------------------------------------------------------


def _fit_length(samples: np.ndarray, n: int) -> np.ndarray:
    """Tile or truncate a waveform to exactly n samples."""
    if len(samples) >= n:
        return samples[:n]
    reps = -(-n // len(samples))
    return np.tile(samples, reps)[:n]


def audio_mix(clip: AudioClip, other: AudioClip, gain: float = 0.5) -> AudioClip:
    """Mix another source in at the given gain, clamping to [-1, 1]."""
    if not 0 < gain <= 1:
        raise ParameterError(f"gain must lie in (0, 1], got {gain}")
    if other.sample_rate != clip.sample_rate:
        raise ParameterError(
            f"sample-rate mismatch: {clip.sample_rate} vs {other.sample_rate}"
        )
    added = _fit_length(other.samples, len(clip.samples))
    out = np.clip(clip.samples + gain * added, -1.0, 1.0)
    return AudioClip(samples=out, sample_rate=clip.sample_rate)


def audio_remove_stem(clip: AudioClip, stem: AudioClip) -> AudioClip:
    """Subtract a separated stem (caller-provided), clamping to [-1, 1]."""
    if stem.sample_rate != clip.sample_rate:
        raise ParameterError(
            f"sample-rate mismatch: {clip.sample_rate} vs {stem.sample_rate}"
        )
    if len(stem.samples) != len(clip.samples):
        raise ParameterError(
            f"stem length {len(stem.samples)} != clip length {len(clip.samples)}"
        )
    out = np.clip(clip.samples - stem.samples, -1.0, 1.0)
    return AudioClip(samples=out, sample_rate=clip.sample_rate)


def _volume_gain(shape: str, u: np.ndarray) -> np.ndarray:
    if shape == "cosine_fall":
        return 0.5 * (1.0 + np.cos(math.pi * u))
    if shape == "sine_bump":
        return np.sin(math.pi * u)
    if shape == "linear_rise":
        return u
    if shape == "linear_fall":
        return 1.0 - u
    raise ParameterError(f"unknown volume shape {shape!r}")


def audio_volume_envelope(
    clip: AudioClip, interval: TargetInterval, shape: str = "cosine_fall"
) -> AudioClip:
    """Reshape loudness inside the target interval with a gain curve g(u),
    u = (t - start) / (end - start); samples outside are untouched."""
    interval.check_within(clip.duration_s)
    t = np.arange(len(clip.samples)) / clip.sample_rate
    mask = (t >= interval.start_s) & (t < interval.end_s)
    u = (t[mask] - interval.start_s) / (interval.end_s - interval.start_s)
    out = clip.samples.copy()
    out[mask] *= _volume_gain(shape, u)
    return AudioClip(samples=out, sample_rate=clip.sample_rate)


def audio_temporal_shift(
    clip: AudioClip, offset_s: float | None = None, seed: int = 0
) -> AudioClip:
    """Cyclically shift the waveform: out[i] = in[(i + round(offset*sr)) % N].

    Cyclic rather than re-cropped from a longer source because the engine
    only holds the clip itself; the tag records the kind so consumers know.
    The seeded default draws a magnitude in [0.1, 0.9] of the duration (sign
    seeded too), keeping the shift audible rather than sub-sample.
    """
    duration = clip.duration_s
    if offset_s is None:
        rng = CounterRng(seed)
        magnitude = rng.uniform(0.1 * duration, 0.9 * duration)
        offset_s = magnitude if rng.uniform() < 0.5 else -magnitude
    if not abs(offset_s) < duration:
        raise ParameterError(f"|offset| must be < duration ({duration} s), got {offset_s}")
    shift = _round_half_up(offset_s * clip.sample_rate)
    out = np.roll(clip.samples, -shift)
    return AudioClip(samples=out.copy(), sample_rate=clip.sample_rate)


def audio_insert_silence(clip: AudioClip, at_s: float, dur_s: float) -> AudioClip:
    """Insert exact zeros at a position, pushing the tail out (truncated)."""
    if not dur_s > 0:
        raise ParameterError(f"dur_s must be > 0, got {dur_s}")
    n = len(clip.samples)
    if not 0 <= at_s <= clip.duration_s:
        raise ParameterError(f"at_s {at_s} outside clip [0, {clip.duration_s}]")
    idx = _round_half_up(at_s * clip.sample_rate)
    zeros = np.zeros(_round_half_up(dur_s * clip.sample_rate))
    out = np.concatenate([clip.samples[:idx], zeros, clip.samples[idx:]])[:n]
    return AudioClip(samples=out, sample_rate=clip.sample_rate)


def audio_insert_repeat(clip: AudioClip, interval: TargetInterval, at_s: float) -> AudioClip:
    """Re-insert a copy of the target interval later in the timeline.

    The copy lands at at_s (which must not precede the interval's end), the
    remainder shifts right, and the result is truncated to the original
    length.
    """
    interval.check_within(clip.duration_s)
    if at_s < interval.end_s:
        raise ParameterError(
            f"at_s {at_s} must not precede the source interval end {interval.end_s}"
        )
    if at_s > clip.duration_s:
        raise ParameterError(f"at_s {at_s} outside clip [0, {clip.duration_s}]")
    sr = clip.sample_rate
    n = len(clip.samples)
    i0, i1 = _round_half_up(interval.start_s * sr), _round_half_up(interval.end_s * sr)
    idx = _round_half_up(at_s * sr)
    out = np.concatenate([clip.samples[:idx], clip.samples[i0:i1], clip.samples[idx:]])[:n]
    return AudioClip(samples=out, sample_rate=clip.sample_rate)


def audio_speed_change(
    clip: AudioClip, interval: TargetInterval, factor: float | None = None, seed: int = 0
) -> AudioClip:
    """Play the target interval at 0.5x or 2x via linear interpolation.

    Content after the interval keeps its order but shifts in time; the
    result is truncated (slow-down) or zero-padded (speed-up) back to the
    original sample count.
    """
    interval.check_within(clip.duration_s)
    if factor is None:
        factor = 0.5 if CounterRng(seed).uniform() < 0.5 else 2.0
    if factor not in (0.5, 2.0):
        raise ParameterError(f"speed factor must be 0.5 or 2.0, got {factor}")
    sr = clip.sample_rate
    n = len(clip.samples)
    i0, i1 = _round_half_up(interval.start_s * sr), _round_half_up(interval.end_s * sr)
    segment = clip.samples[i0:i1]
    if len(segment) < 2:
        raise ParameterError("interval too short to resample")
    target_len = _round_half_up(len(segment) / factor)
    positions = np.arange(target_len) * factor
    resampled = np.interp(positions, np.arange(len(segment)), segment)
    out = np.concatenate([clip.samples[:i0], resampled, clip.samples[i1:]])
    if len(out) >= n:
        out = out[:n]
    else:
        out = np.concatenate([out, np.zeros(n - len(out))])
    return AudioClip(samples=out, sample_rate=clip.sample_rate)


# --- dispatch -------------------------------------------------------------------


def _interval_from_params(params: dict, what: str) -> TargetInterval:
    try:
        return TargetInterval(start_s=params["start_s"], end_s=params["end_s"])
    except KeyError:
        raise ParameterError(
            f"{what} requires params 'start_s' and 'end_s' (a target interval)"
        ) from None


def synthesize_negative(
    video: VideoClip,
    audio: AudioClip,
    spec: AugSpec,
    *,
    aux_audio: AudioClip | None = None,
) -> tuple[VideoClip, AudioClip, NegativeTag]:
    """Apply one augmentation to exactly one modality of a synchronized pair.

    The untouched modality is returned as-is (bit-identical). audio_mix and
    audio_remove_stem need auxiliary audio, either passed directly or named
    by params["aux_wav"]. Returns (video, audio, provenance tag).
    """
    p = dict(spec.params)
    if spec.kind in ("audio_mix", "audio_remove_stem") and aux_audio is None:
        if "aux_wav" not in p:
            raise ParameterError(f"{spec.kind} needs aux_audio or params['aux_wav']")
        aux_audio = load_wav(p["aux_wav"])

    kind, seed = spec.kind, spec.seed
    if kind == "video_random_mask":
        video = video_random_mask(video, p.get("grid", 6), p.get("ratio"), seed)
    elif kind == "video_overlay_sprite":
        sprite = SpriteConfig(
            width=p.get("width", 32),
            height=p.get("height", 32),
            velocity=tuple(p["velocity"]) if "velocity" in p else None,
            color=tuple(p["color"]) if "color" in p else None,
            start=tuple(p["start"]) if "start" in p else None,
        )
        video = video_overlay_sprite(video, sprite, seed)
    elif kind == "video_cyclic_shift":
        video = video_cyclic_shift(video, p.get("start_frame"), seed)
    elif kind == "video_pause":
        video = video_pause(video, p.get("at_frame"), p.get("pause_s", 0.5), seed)
    elif kind == "audio_mix":
        audio = audio_mix(audio, aux_audio, p.get("gain", 0.5))
    elif kind == "audio_remove_stem":
        audio = audio_remove_stem(audio, aux_audio)
    elif kind == "audio_volume_envelope":
        shape = p.get("shape") or VOLUME_SHAPES[CounterRng(seed).randint(len(VOLUME_SHAPES))]
        audio = audio_volume_envelope(audio, _interval_from_params(p, kind), shape)
    elif kind == "audio_temporal_shift":
        audio = audio_temporal_shift(audio, p.get("offset_s"), seed)
    elif kind == "audio_insert_silence":
        try:
            audio = audio_insert_silence(audio, p["at_s"], p["dur_s"])
        except KeyError:
            raise ParameterError("audio_insert_silence requires params 'at_s' and 'dur_s'") from None
    elif kind == "audio_insert_repeat":
        interval = _interval_from_params(p, kind)
        try:
            audio = audio_insert_repeat(audio, interval, p["at_s"])
        except KeyError:
            raise ParameterError("audio_insert_repeat requires params 'at_s'") from None
    elif kind == "audio_speed_change":
        audio = audio_speed_change(audio, _interval_from_params(p, kind), p.get("factor"), seed)
    else:  # pragma: no cover - AugSpec validation rejects unknown kinds
        raise ParameterError(f"unknown augmentation kind {kind!r}")
    return video, audio, spec.tag()


def suggest_target_interval(
    clip: AudioClip, frame_s: float = 0.05, threshold_ratio: float = 0.5
) -> TargetInterval:
    """Convenience: the longest loud run, by short-frame RMS thresholding.

    A rough stand-in for metadata-driven interval selection; callers with
    real annotations should supply intervals themselves.
    """
    hop = max(1, int(frame_s * clip.sample_rate))
    n_frames = len(clip.samples) // hop
    if n_frames < 1:
        raise ParameterError("clip too short for interval suggestion")
    trimmed = clip.samples[: n_frames * hop].reshape(n_frames, hop)
    rms = np.sqrt((trimmed**2).mean(axis=1))
    threshold = threshold_ratio * rms.max()
    loud = rms >= threshold
    best_start, best_len, run_start = 0, 0, None
    for i, flag in enumerate(np.append(loud, False)):
        if flag and run_start is None:
            run_start = i
        elif not flag and run_start is not None:
            if i - run_start > best_len:
                best_start, best_len = run_start, i - run_start
            run_start = None
    if best_len == 0:
        raise ParameterError("no sound-producing interval found")
    return TargetInterval(
        start_s=best_start * hop / clip.sample_rate,
        end_s=(best_start + best_len) * hop / clip.sample_rate,
    )


# --- batch manifest -------------------------------------------------------------


def apply_augment_manifest(manifest_path, out_dir=None) -> list[dict]:
    """Run every record of a JSON-lines augmentation manifest.

    Each record: {"media_id", "video": descriptor path, "audio": wav path,
    "kind", "params", "seed"}. The modified modality is written beside its
    input (or under out_dir) with a "-neg-<kind>-<seed>" suffix plus a
    sidecar tag record; the untouched modality keeps its original path.
    Returns one result dict per record.
    """
    manifest_path = Path(manifest_path)
    results = []
    for line_no, line in enumerate(manifest_path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            spec = AugSpec(kind=rec["kind"], params=rec.get("params", {}), seed=rec.get("seed", 0))
            video_path, audio_path = Path(rec["video"]), Path(rec["audio"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ManifestError(f"{manifest_path}:{line_no}: bad record: {exc}") from exc
        video = load_frame_sequence(video_path)
        audio = load_wav(audio_path)
        aux = dict(rec.get("params", {}))
        if "aux_wav" in aux:
            aux["aux_wav"] = str(manifest_path.parent / aux["aux_wav"])
            spec = AugSpec(kind=spec.kind, params=aux, seed=spec.seed)
        new_video, new_audio, tag = synthesize_negative(video, audio, spec)

        suffix = f"-neg-{spec.kind}-{spec.seed}"
        base = Path(out_dir) if out_dir is not None else None
        if tag.axis.startswith("video"):
            stem = video_path.stem.replace(".frames", "")
            target_dir = (base or video_path.parent) / f"{stem}{suffix}"
            out_path = write_frame_sequence(target_dir, new_video, stem="frame")
            out_pair = {"video": str(out_path), "audio": str(audio_path)}
        else:
            target = (base or audio_path.parent) / f"{audio_path.stem}{suffix}.wav"
            write_wav(target, new_audio, encoding="float32")
            out_path = target
            out_pair = {"video": str(video_path), "audio": str(target)}
        tag_path = Path(str(out_path) + ".tag.json")
        tag_record = {
            "media_id": rec.get("media_id", video_path.stem),
            "tag": tag.to_json_dict(),
            "params": rec.get("params", {}),
            **out_pair,
        }
        tag_path.write_text(json.dumps(tag_record, sort_keys=True, indent=2) + "\n")
        results.append({**tag_record, "tag_path": str(tag_path)})
    return results
