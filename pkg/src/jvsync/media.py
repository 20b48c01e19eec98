"""Raw audio/video handling: file I/O, mel spectrograms, envelopes, peaks.

Audio arrives as RIFF/WAVE (PCM16 or IEEE float32, mono or stereo, no
resampling). Video arrives as an ordered list of frame files named by a JSON
descriptor; frames are binary P6 PPM or a small headered raw-RGB24 format so
no codec dependency is needed. Everything decodes to floats: samples in
[-1, 1], pixels in [0, 1].

The analysis half provides the signals the AV-Align baseline consumes: a
mel power spectrogram (HTK mel scale, Hann window, centered reflect padding),
a rectified log-mel spectral-flux onset envelope, a frame-difference motion
envelope standing in for optical flow, and threshold-plus-local-max peak
picking. All functions are pure; arrays are frozen after construction.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MediaFormatError, ParameterError

RAW_RGB_MAGIC = b"JVRGB1\x00\x00"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AudioClip:
    """Mono waveform with its sample rate. Samples are float64 in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ParameterError(f"sample_rate must be > 0, got {self.sample_rate}")
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ParameterError("samples must be one-dimensional")
        if not np.all(np.isfinite(samples)):
            raise ParameterError("samples must be finite")
        object.__setattr__(self, "samples", _freeze(samples))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class FrameImage:
    """One decoded RGB frame: pixels are H x W x 3 float64 in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ParameterError(f"pixels must be H x W x 3, got shape {px.shape}")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ParameterError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", _freeze(px))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class VideoClip:
    """Ordered frame stack (n, H, W, 3) in [0, 1] plus the frame rate.

    Frame i sits at timestamp i / fps.
    """

    frames: np.ndarray
    fps: float

    def __post_init__(self):
        if not self.fps > 0:
            raise ParameterError(f"fps must be > 0, got {self.fps}")
        frames = np.ascontiguousarray(self.frames, dtype=np.float64)
        if frames.ndim != 4 or frames.shape[3] != 3 or frames.shape[0] < 1:
            raise ParameterError(f"frames must be n x H x W x 3, got shape {frames.shape}")
        if frames.min() < 0.0 or frames.max() > 1.0:
            raise ParameterError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "frames", _freeze(frames))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def duration_s(self) -> float:
        return self.frames.shape[0] / self.fps

    def frame(self, i: int) -> FrameImage:
        return FrameImage(self.frames[i])


@dataclass(frozen=True)
class MelParams:
    """STFT and mel-filterbank settings.

    The window is always Hann (periodic) and padding is always centered
    reflect; those two are fixed by contract, not configurable.
    """

    n_fft: int = 1024
    hop: int = 160
    n_mels: int = 64
    fmin: float = 0.0
    fmax: float = 8000.0

    def __post_init__(self):
        if self.n_fft <= 0 or self.hop <= 0 or self.n_mels <= 0:
            raise ParameterError("n_fft, hop, and n_mels must be positive")
        if self.hop > self.n_fft:
            raise ParameterError(f"hop ({self.hop}) must not exceed n_fft ({self.n_fft})")
        if not 0 <= self.fmin < self.fmax:
            raise ParameterError(f"need 0 <= fmin < fmax, got [{self.fmin}, {self.fmax}]")

    def validate_for(self, sample_rate: int) -> None:
        if self.fmax > sample_rate / 2:
            raise ParameterError(
                f"fmax {self.fmax} Hz exceeds Nyquist {sample_rate / 2} Hz"
            )


@dataclass(frozen=True)
class MelSpectrogram:
    """T x M linear-power mel spectrogram at `frame_rate` frames/second."""

    values: np.ndarray
    frame_rate: float
    params: MelParams

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ParameterError("mel values must be 2-D (time x bands)")
        if values.min() < 0.0:
            raise ParameterError("mel power values must be non-negative")
        object.__setattr__(self, "values", _freeze(values))


@dataclass(frozen=True)
class EnvelopeSeries:
    """A one-dimensional signal sampled at `rate` values/second."""

    values: np.ndarray
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ParameterError(f"rate must be > 0, got {self.rate}")
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 1 or len(values) == 0:
            raise ParameterError("envelope must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(values)):
            raise ParameterError("envelope values must be finite")
        object.__setattr__(self, "values", _freeze(values))


@dataclass(frozen=True)
class PeakConfig:
    """Threshold multiplier and local-max radius for peak picking."""

    alpha: float = 1.5
    half_window: int = 3

    def __post_init__(self):
        if self.half_window < 1:
            raise ParameterError("half_window must be >= 1")


@dataclass(frozen=True)
class PeakList:
    """Strictly increasing peak times in seconds."""

    times: tuple = field(default_factory=tuple)

    def __post_init__(self):
        ts = tuple(float(t) for t in self.times)
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ParameterError("peak times must be strictly increasing")
        object.__setattr__(self, "times", ts)

    def __len__(self) -> int:
        return len(self.times)


# --- WAV I/O -----------------------------------------------------------------

_WAVE_PCM = 1
_WAVE_FLOAT = 3


def load_wav(path) -> AudioClip:
    """Load a RIFF/WAVE file as a mono AudioClip.

    Supports PCM16 (scaled by 1/32768) and IEEE float32 payloads, mono or
    stereo; stereo is downmixed by channel mean. The sample rate is kept
    as-is, never resampled.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MediaFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise MediaFormatError(f"{path}: truncated '{cid!r}' chunk")
        if cid == b"fmt ":
            if size < 16:
                raise MediaFormatError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or payload is None:
        raise MediaFormatError(f"{path}: missing fmt or data chunk")
    audio_format, channels, sample_rate, _byte_rate, block_align, bits = fmt
    if channels not in (1, 2):
        raise MediaFormatError(f"{path}: unsupported channel count {channels}")
    if len(payload) == 0:
        raise MediaFormatError(f"{path}: zero-length data chunk")

    if audio_format == _WAVE_PCM and bits == 16:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % (2 * channels)], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif audio_format == _WAVE_FLOAT and bits == 32:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % (4 * channels)], dtype="<f4")
        samples = raw.astype(np.float64)
    else:
        raise MediaFormatError(
            f"{path}: unsupported codec (format {audio_format}, {bits}-bit)"
        )
    if len(samples) == 0:
        raise MediaFormatError(f"{path}: data chunk holds no complete sample frame")
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioClip(samples=samples, sample_rate=sample_rate)


def write_wav(path, clip: AudioClip, encoding: str = "pcm16") -> None:
    """Write an AudioClip as mono RIFF/WAVE, PCM16 or IEEE float32."""
    if encoding == "pcm16":
        fmt_code, bits = _WAVE_PCM, 16
        scaled = np.clip(np.round(clip.samples * 32768.0), -32768, 32767)
        payload = scaled.astype("<i2").tobytes()
    elif encoding == "float32":
        fmt_code, bits = _WAVE_FLOAT, 32
        payload = clip.samples.astype("<f4").tobytes()
    else:
        raise ParameterError(f"unknown WAV encoding {encoding!r}")
    block_align = bits // 8
    fmt_chunk = struct.pack(
        "<HHIIHH", fmt_code, 1, clip.sample_rate, clip.sample_rate * block_align, block_align, bits
    )
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt_chunk)) + fmt_chunk
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


# --- frame I/O ---------------------------------------------------------------


def _load_ppm(path) -> FrameImage:
    data = Path(path).read_bytes()
    # P6 header: magic, width, height, maxval, separated by whitespace and
    # optional '#' comments, then a single whitespace byte before the payload.
    if data[:2] != b"P6":
        raise MediaFormatError(f"{path}: not a P6 PPM file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MediaFormatError(f"{path}: malformed PPM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise MediaFormatError(f"{path}: malformed PPM header") from exc
    if maxval != 255:
        raise MediaFormatError(f"{path}: only maxval 255 PPM supported, got {maxval}")
    need = width * height * 3
    raw = data[pos : pos + need]
    if len(raw) < need:
        raise MediaFormatError(f"{path}: truncated PPM payload")
    px = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return FrameImage(px.astype(np.float64) / 255.0)


def _load_raw_rgb(path) -> FrameImage:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != RAW_RGB_MAGIC:
        raise MediaFormatError(f"{path}: bad raw-RGB24 header")
    width, height = struct.unpack_from("<II", data, 8)
    need = width * height * 3
    raw = data[16 : 16 + need]
    if len(raw) < need:
        raise MediaFormatError(f"{path}: truncated raw-RGB24 payload")
    px = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return FrameImage(px.astype(np.float64) / 255.0)


def load_frame(path) -> FrameImage:
    """Decode one frame file, dispatching on its magic bytes."""
    head = Path(path).open("rb").read(8)
    if head[:2] == b"P6":
        return _load_ppm(path)
    if head == RAW_RGB_MAGIC:
        return _load_raw_rgb(path)
    raise MediaFormatError(f"{path}: unknown frame format")


def write_ppm(path, frame: FrameImage) -> None:
    px = np.clip(np.round(frame.pixels * 255.0), 0, 255).astype(np.uint8)
    header = f"P6\n{frame.width} {frame.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + px.tobytes())


def write_raw_rgb(path, frame: FrameImage) -> None:
    px = np.clip(np.round(frame.pixels * 255.0), 0, 255).astype(np.uint8)
    header = RAW_RGB_MAGIC + struct.pack("<II", frame.width, frame.height)
    Path(path).write_bytes(header + px.tobytes())


def load_frame_sequence(descriptor_path) -> VideoClip:
    """Load a video from a JSON descriptor {"fps": number, "frames": [paths]}.

    Frame paths are resolved relative to the descriptor's directory. All
    frames must share one size.
    """
    descriptor_path = Path(descriptor_path)
    try:
        desc = json.loads(descriptor_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MediaFormatError(f"{descriptor_path}: unreadable descriptor: {exc}") from exc
    if not isinstance(desc, dict) or "fps" not in desc or "frames" not in desc:
        raise MediaFormatError(f"{descriptor_path}: descriptor needs 'fps' and 'frames'")
    fps = desc["fps"]
    paths = [descriptor_path.parent / p for p in desc["frames"]]
    if not paths:
        raise MediaFormatError(f"{descriptor_path}: empty frame list")
    frames = []
    shape = None
    for p in paths:
        try:
            img = load_frame(p)
        except OSError as exc:
            raise MediaFormatError(f"{p}: unreadable frame file: {exc}") from exc
        if shape is None:
            shape = img.pixels.shape
        elif img.pixels.shape != shape:
            raise MediaFormatError(
                f"{p}: frame size {img.pixels.shape[:2]} differs from {shape[:2]}"
            )
        frames.append(img.pixels)
    return VideoClip(frames=np.stack(frames), fps=fps)


def write_frame_sequence(directory, clip: VideoClip, stem: str = "frame") -> Path:
    """Write every frame as P6 PPM plus a descriptor JSON; returns its path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i in range(clip.n_frames):
        name = f"{stem}_{i:05d}.ppm"
        write_ppm(directory / name, FrameImage(clip.frames[i]))
        names.append(name)
    descriptor = directory / f"{stem}s.json"
    descriptor.write_text(json.dumps({"fps": clip.fps, "frames": names}, indent=2) + "\n")
    return descriptor


# --- analysis ----------------------------------------------------------------


def _hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * math.pi * np.arange(n) / n)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(params: MelParams, sample_rate: int) -> np.ndarray:
    """Triangular HTK-mel filters as an (n_mels, n_fft//2 + 1) weight matrix.

    Peaks are unit height (no bandwidth normalization).
    """
    edges = _mel_to_hz(
        np.linspace(_hz_to_mel(params.fmin), _hz_to_mel(params.fmax), params.n_mels + 2)
    )
    freqs = np.fft.rfftfreq(params.n_fft, d=1.0 / sample_rate)
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / np.maximum(mid - lo, 1e-12)
    falling = (hi - freqs[None, :]) / np.maximum(hi - mid, 1e-12)
    return np.maximum(0.0, np.minimum(rising, falling))


def mel_spectrogram(clip: AudioClip, params: MelParams | None = None) -> MelSpectrogram:
    """Linear-power mel spectrogram with exactly floor(N/hop) + 1 frames.

    The signal is reflect-padded by n_fft//2 on the left (center alignment);
    the right padding extends as far as the last frame needs.
    """
    params = params or MelParams()
    params.validate_for(clip.sample_rate)
    n = len(clip.samples)
    if n < params.hop:
        raise ParameterError(f"clip of {n} samples is shorter than one hop ({params.hop})")
    left = params.n_fft // 2
    n_frames = n // params.hop + 1
    right = max(0, (n_frames - 1) * params.hop + params.n_fft - n - left)
    if max(left, right) > n - 1:
        raise ParameterError("clip too short for centered reflect padding at this n_fft")
    x = np.pad(clip.samples, (left, right), mode="reflect")
    window = _hann_periodic(params.n_fft)
    idx = np.arange(params.n_fft)[None, :] + params.hop * np.arange(n_frames)[:, None]
    spectrum = np.fft.rfft(x[idx] * window[None, :], axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    weights = mel_filterbank(params, clip.sample_rate)
    values = power @ weights.T
    return MelSpectrogram(
        values=values, frame_rate=clip.sample_rate / params.hop, params=params
    )


def spectral_flux(mel: MelSpectrogram) -> EnvelopeSeries:
    """Onset-strength envelope: rectified per-band log-mel differences.

    values[t] = sum_m max(0, log(1 + mel[t, m]) - log(1 + mel[t-1, m])),
    with values[0] = 0. Serves as the audio-onset carrier for the AV-Align
    baseline; the rule is a fully specified stand-in, not a reproduction of
    any external onset detector.
    """
    if mel.values.shape[0] < 2:
        raise ParameterError("spectral flux needs at least 2 spectrogram frames")
    logmel = np.log1p(mel.values)
    diff = np.maximum(0.0, logmel[1:] - logmel[:-1]).sum(axis=1)
    values = np.concatenate([[0.0], diff])
    return EnvelopeSeries(values=values, rate=mel.frame_rate)


def motion_energy(clip: VideoClip) -> EnvelopeSeries:
    """Mean absolute inter-frame pixel difference, a proxy for flow energy.

    values[t] = mean |frame_t - frame_{t-1}| for t >= 1, values[0] = 0.
    """
    if clip.n_frames < 2:
        raise ParameterError("motion energy needs at least 2 frames")
    diff = np.abs(clip.frames[1:] - clip.frames[:-1]).mean(axis=(1, 2, 3))
    values = np.concatenate([[0.0], diff])
    return EnvelopeSeries(values=values, rate=clip.fps)


def pick_peaks(env: EnvelopeSeries, cfg: PeakConfig | None = None) -> PeakList:
    """Select envelope peaks above mean + alpha * std (population std).

    Index t is a peak iff it clears the threshold and is the earliest
    maximum of its neighborhood [t - half_window, t + half_window]: strictly
    greater than every earlier neighbor, at least as large as every later
    one, and strictly greater than at least one neighbor (so plateaus that
    fill the whole neighborhood, e.g. a constant envelope, yield nothing).
    """
    cfg = cfg or PeakConfig()
    v = env.values
    n = len(v)
    threshold = v.mean() + cfg.alpha * v.std()
    times = []
    for t in range(n):
        if v[t] < threshold:
            continue
        lo = max(0, t - cfg.half_window)
        hi = min(n, t + cfg.half_window + 1)
        before, after = v[lo:t], v[t + 1 : hi]
        if before.size and before.max() >= v[t]:
            continue
        if after.size and after.max() > v[t]:
            continue
        if not ((before < v[t]).any() or (after < v[t]).any()):
            continue
        times.append(t / env.rate)
    return PeakList(times=tuple(times))
