import json
import math
import struct

import numpy as np
import pytest

from jvsync.errors import MediaFormatError, ParameterError
from jvsync.media import (
    AudioClip,
    EnvelopeSeries,
    FrameImage,
    MelParams,
    MelSpectrogram,
    PeakConfig,
    VideoClip,
    load_frame_sequence,
    load_wav,
    mel_filterbank,
    mel_spectrogram,
    motion_energy,
    pick_peaks,
    spectral_flux,
    write_frame_sequence,
    write_ppm,
    write_raw_rgb,
    write_wav,
)


def _write_stereo_pcm16(path, left, right, sample_rate=16000):
    interleaved = np.empty(2 * len(left), dtype="<i2")
    interleaved[0::2] = np.asarray(left)
    interleaved[1::2] = np.asarray(right)
    payload = interleaved.tobytes()
    fmt = struct.pack("<HHIIHH", 1, 2, sample_rate, sample_rate * 4, 4, 16)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


# --- WAV ------------------------------------------------------------------


def test_load_wav_duration_arithmetic(tmp_path):
    clip = AudioClip(samples=np.linspace(-0.5, 0.5, 32000), sample_rate=16000)
    write_wav(tmp_path / "a.wav", clip, encoding="pcm16")
    loaded = load_wav(tmp_path / "a.wav")
    assert loaded.sample_rate == 16000
    assert len(loaded.samples) == 32000
    assert loaded.duration_s == 2.0


def test_load_wav_all_zero_payload(tmp_path):
    write_wav(tmp_path / "z.wav", AudioClip(np.zeros(1000), 8000))
    assert np.array_equal(load_wav(tmp_path / "z.wav").samples, np.zeros(1000))


def test_load_wav_stereo_downmix_cancels(tmp_path):
    _write_stereo_pcm16(tmp_path / "s.wav", [16384] * 100, [-16384] * 100)
    loaded = load_wav(tmp_path / "s.wav")
    assert np.array_equal(loaded.samples, np.zeros(100))


def test_wav_pcm16_round_trip_within_quantum(tmp_path):
    rng = np.random.default_rng(3)
    clip = AudioClip(samples=rng.uniform(-1, 1, 5000) * 0.99, sample_rate=44100)
    write_wav(tmp_path / "r.wav", clip, encoding="pcm16")
    loaded = load_wav(tmp_path / "r.wav")
    assert np.abs(loaded.samples - clip.samples).max() <= 1.0 / 32768


def test_wav_float32_round_trip(tmp_path):
    clip = AudioClip(samples=np.sin(np.linspace(0, 20, 4000)), sample_rate=16000)
    write_wav(tmp_path / "f.wav", clip, encoding="float32")
    loaded = load_wav(tmp_path / "f.wav")
    assert np.array_equal(loaded.samples, clip.samples.astype("<f4").astype(np.float64))


def test_load_wav_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"OGGS" + b"\x00" * 40)
    with pytest.raises(MediaFormatError):
        load_wav(bad)


def test_load_wav_rejects_unsupported_codec(tmp_path):
    fmt = struct.pack("<HHIIHH", 6, 1, 8000, 8000, 1, 8)  # A-law
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", 4) + b"\x00" * 4
    (tmp_path / "alaw.wav").write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    with pytest.raises(MediaFormatError, match="unsupported codec"):
        load_wav(tmp_path / "alaw.wav")


def test_load_wav_rejects_empty_data_chunk(tmp_path):
    fmt = struct.pack("<HHIIHH", 1, 1, 8000, 16000, 2, 16)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", 0)
    (tmp_path / "empty.wav").write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    with pytest.raises(MediaFormatError, match="zero-length"):
        load_wav(tmp_path / "empty.wav")


# --- frames ---------------------------------------------------------------


def _gradient_frame(h, w):
    x = np.linspace(0, 1, w)[None, :, None]
    y = np.linspace(0, 1, h)[:, None, None]
    return FrameImage(np.clip(np.concatenate([x + 0 * y, 0 * x + y, 0.5 * (x + y)], axis=2), 0, 1))


def test_ppm_round_trip(tmp_path):
    frame = _gradient_frame(24, 32)
    write_ppm(tmp_path / "f.ppm", frame)
    from jvsync.media import load_frame

    loaded = load_frame(tmp_path / "f.ppm")
    assert loaded.pixels.shape == (24, 32, 3)
    assert np.abs(loaded.pixels - frame.pixels).max() <= 0.5 / 255 + 1e-12


def test_raw_rgb_round_trip(tmp_path):
    frame = _gradient_frame(16, 20)
    write_raw_rgb(tmp_path / "f.rgb", frame)
    from jvsync.media import load_frame

    loaded = load_frame(tmp_path / "f.rgb")
    assert loaded.pixels.shape == (16, 20, 3)
    assert np.abs(loaded.pixels - frame.pixels).max() <= 0.5 / 255 + 1e-12


def test_frame_sequence_duration(tmp_path):
    clip = VideoClip(frames=np.zeros((96, 8, 8, 3)), fps=24.0)
    descriptor = write_frame_sequence(tmp_path, clip)
    loaded = load_frame_sequence(descriptor)
    assert loaded.n_frames == 96
    assert loaded.duration_s == 4.0


def test_frame_sequence_single_frame(tmp_path):
    descriptor = write_frame_sequence(tmp_path, VideoClip(np.zeros((1, 4, 4, 3)), fps=1.0))
    loaded = load_frame_sequence(descriptor)
    assert loaded.n_frames == 1 and loaded.duration_s == 1.0


def test_frame_sequence_rejects_mismatched_sizes(tmp_path):
    write_ppm(tmp_path / "a.ppm", FrameImage(np.zeros((8, 8, 3))))
    write_ppm(tmp_path / "b.ppm", FrameImage(np.zeros((8, 10, 3))))
    descriptor = tmp_path / "seq.json"
    descriptor.write_text(json.dumps({"fps": 2, "frames": ["a.ppm", "b.ppm"]}))
    with pytest.raises(MediaFormatError, match="differs"):
        load_frame_sequence(descriptor)


def test_frame_sequence_rejects_truncated_frame(tmp_path):
    write_ppm(tmp_path / "a.ppm", FrameImage(np.zeros((8, 8, 3))))
    (tmp_path / "b.ppm").write_bytes((tmp_path / "a.ppm").read_bytes()[:-10])
    descriptor = tmp_path / "seq.json"
    descriptor.write_text(json.dumps({"fps": 2, "frames": ["a.ppm", "b.ppm"]}))
    with pytest.raises(MediaFormatError, match="truncated"):
        load_frame_sequence(descriptor)


# --- mel spectrogram --------------------------------------------------------


def test_mel_shape_formula():
    clip = AudioClip(samples=np.random.default_rng(0).normal(0, 0.1, 64000), sample_rate=16000)
    mel = mel_spectrogram(clip, MelParams(n_fft=1024, hop=160, n_mels=64))
    assert mel.values.shape == (64000 // 160 + 1, 64)
    assert mel.frame_rate == 100.0


@pytest.mark.parametrize("n,hop", [(64000, 160), (12345, 200), (8000, 512)])
def test_mel_frame_count_exact(n, hop):
    clip = AudioClip(samples=np.zeros(n), sample_rate=16000)
    mel = mel_spectrogram(clip, MelParams(n_fft=1024, hop=hop, n_mels=32))
    assert mel.values.shape == (n // hop + 1, 32)


def test_mel_zero_input_is_zero():
    mel = mel_spectrogram(AudioClip(np.zeros(16000), 16000))
    assert np.array_equal(mel.values, np.zeros_like(mel.values))


def test_mel_sinusoid_band_matches_dft_oracle():
    sr, freq = 16000, 1000.0
    params = MelParams()
    t = np.arange(sr) / sr
    clip = AudioClip(samples=0.5 * np.sin(2 * math.pi * freq * t), sample_rate=sr)
    mel = mel_spectrogram(clip, params)

    # Oracle: naive DFT (explicit basis, no fft) of one Hann-windowed tone
    # frame locates the spectral peak bin; the expected band is the filter
    # with the greatest weight at that bin.
    n = params.n_fft
    window = 0.5 - 0.5 * np.cos(2 * math.pi * np.arange(n) / n)
    segment = clip.samples[:n] * window
    k = np.arange(n // 2 + 1)
    basis = np.exp(-2j * math.pi * k[:, None] * np.arange(n)[None, :] / n)
    power = np.abs(basis @ segment) ** 2
    peak_bin = int(np.argmax(power))
    assert peak_bin == round(freq / sr * n)
    expected_band = int(np.argmax(mel_filterbank(params, sr)[:, peak_bin]))

    t_frames = mel.values.shape[0]
    for ti in range(5, t_frames - 5, 25):
        assert int(np.argmax(mel.values[ti])) == expected_band


def test_mel_rejects_short_clip_and_bad_fmax():
    with pytest.raises(ParameterError, match="shorter than one hop"):
        mel_spectrogram(AudioClip(np.zeros(100), 16000), MelParams(n_fft=1024, hop=160))
    with pytest.raises(ParameterError, match="Nyquist"):
        mel_spectrogram(AudioClip(np.zeros(16000), 8000), MelParams(fmax=8000.0))


# --- envelopes --------------------------------------------------------------


def _mel_from_rows(rows):
    return MelSpectrogram(values=np.asarray(rows, dtype=float), frame_rate=100.0, params=MelParams())


def test_spectral_flux_constant_is_zero():
    flux = spectral_flux(_mel_from_rows([[1.0, 2.0]] * 10))
    assert np.array_equal(flux.values, np.zeros(10))


def test_spectral_flux_step_up_single_spike():
    rows = [[1.0, 1.0]] * 4 + [[3.0, 5.0]] * 4
    flux = spectral_flux(_mel_from_rows(rows))
    expected = (math.log1p(3.0) - math.log1p(1.0)) + (math.log1p(5.0) - math.log1p(1.0))
    assert flux.values[4] == pytest.approx(expected, abs=1e-12)
    assert np.count_nonzero(flux.values) == 1


def test_spectral_flux_step_down_clipped():
    rows = [[5.0, 5.0]] * 4 + [[1.0, 1.0]] * 4
    flux = spectral_flux(_mel_from_rows(rows))
    assert np.array_equal(flux.values, np.zeros(8))


def test_motion_energy_static_and_flash():
    static = VideoClip(np.full((5, 4, 4, 3), 0.5), fps=10.0)
    assert np.array_equal(motion_energy(static).values, np.zeros(5))

    frames = np.zeros((4, 4, 4, 3))
    frames[2] = 1.0
    env = motion_energy(VideoClip(frames, fps=10.0))
    assert env.values[2] == 1.0 and env.values[3] == 1.0
    assert env.values[0] == 0.0 and env.values[1] == 0.0


def test_motion_energy_block_wave_enumeration():
    k, n = 4, 24
    frames = np.zeros((n, 2, 2, 3))
    for i in range(n):
        if (i // k) % 2 == 1:
            frames[i] = 1.0
    env = motion_energy(VideoClip(frames, fps=8.0))
    nonzero = set(np.nonzero(env.values)[0].tolist())
    assert nonzero == {t for t in range(1, n) if t % k == 0}


def test_envelopes_nonnegative_zero_at_origin(fixture_pair):
    flux = spectral_flux(mel_spectrogram(fixture_pair["audio_clip"]))
    motion = motion_energy(fixture_pair["video_clip"])
    for env in (flux, motion):
        assert env.values[0] == 0.0
        assert env.values.min() >= 0.0


# --- peak picking ------------------------------------------------------------


def _env(values, rate=1.0):
    return EnvelopeSeries(values=np.asarray(values, dtype=float), rate=rate)


def test_pick_peaks_enumerated_example():
    peaks = pick_peaks(_env([0, 1, 0, 0, 2, 0]), PeakConfig(alpha=0.0, half_window=1))
    assert peaks.times == (1.0, 4.0)


def test_pick_peaks_constant_envelope_empty():
    assert pick_peaks(_env([0.7] * 10), PeakConfig(alpha=0.0, half_window=1)).times == ()


def test_pick_peaks_plateau_earliest_only():
    peaks = pick_peaks(_env([0, 1, 1, 0]), PeakConfig(alpha=0.0, half_window=1))
    assert set(peaks.times) <= {1.0}


def test_pick_peaks_times_increasing_within_duration(fixture_pair):
    env = spectral_flux(mel_spectrogram(fixture_pair["audio_clip"]))
    peaks = pick_peaks(env, PeakConfig(alpha=1.5, half_window=3))
    assert len(peaks) > 0
    assert all(b > a for a, b in zip(peaks.times, peaks.times[1:]))
    assert all(0 <= t < len(env.values) / env.rate for t in peaks.times)


def test_pick_peaks_threshold_filters():
    # alpha high enough that only the tallest spike clears mean + alpha*std
    values = [0, 1, 0, 0, 5, 0, 0, 1, 0]
    peaks = pick_peaks(_env(values), PeakConfig(alpha=2.0, half_window=1))
    assert peaks.times == (4.0,)
