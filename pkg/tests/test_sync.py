import heapq
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jvsync.embeddings import StubProvider
from jvsync.errors import ParameterError
from jvsync.media import AudioClip, VideoClip
from jvsync.sync import (
    WindowingConfig,
    frames_in_window,
    javis_score,
    segment_windows,
    window_score,
)


def make_pair(duration_s: float, fps: float, sample_rate: int = 8000):
    n_frames = max(1, round(duration_s * fps))
    n_samples = round(duration_s * sample_rate)
    video = VideoClip(frames=np.zeros((n_frames, 2, 2, 3)), fps=fps)
    audio = AudioClip(samples=np.zeros(n_samples), sample_rate=sample_rate)
    return video, audio


def reference_javis(video, audio, provider, cfg, video_id, audio_id) -> float:
    """Straight-line re-derivation of the whole metric, sharing no helpers
    with the implementation: windowing, frame selection, cosine, and the
    least-k mean are all recomputed from scratch."""
    duration = min(video.duration_s, audio.duration_s)
    if duration < cfg.window_s:
        spans = [(0.0, duration)]
    else:
        stride = cfg.window_s - cfg.overlap_s
        count = math.floor((duration - cfg.window_s) / stride) + 1
        spans = [(i * stride, min(i * stride + cfg.window_s, duration)) for i in range(count)]
    per_window = []
    for wi, (start, end) in enumerate(spans):
        indices = [i for i in range(video.n_frames) if start <= i / video.fps < end]
        if not indices:
            indices = [min(max(0, round(start * video.fps)), video.n_frames - 1)]
        handle = SimpleNamespace(index=wi, start_s=start, end_s=end)
        audio_vec = [float(x) for x in provider.embed_audio(audio_id, handle)]
        norm_a = math.sqrt(math.fsum(x * x for x in audio_vec))
        sims = []
        for fi in indices:
            vec = [float(x) for x in provider.embed_video_frames(video_id, handle, [fi])[0]]
            dot = math.fsum(x * y for x, y in zip(vec, audio_vec))
            norm_v = math.sqrt(math.fsum(x * x for x in vec))
            sims.append(max(-1.0, min(1.0, dot / (norm_v * norm_a))))
        k = max(1, math.ceil(cfg.min_ratio * len(sims)))
        worst = heapq.nsmallest(k, sims)
        per_window.append(math.fsum(worst) / k)
    return math.fsum(per_window) / len(per_window)


# --- segment_windows ---------------------------------------------------------


def test_segment_windows_default_example():
    windows = segment_windows(4.0, WindowingConfig(2.0, 1.5))
    assert [w.start_s for w in windows] == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert all(w.end_s == w.start_s + 2.0 for w in windows)


def test_segment_windows_exact_fit():
    windows = segment_windows(2.0, WindowingConfig(2.0, 1.5))
    assert len(windows) == 1 and (windows[0].start_s, windows[0].end_s) == (0.0, 2.0)


def test_segment_windows_short_clip_fallback():
    windows = segment_windows(1.2, WindowingConfig(2.0, 1.5))
    assert len(windows) == 1 and (windows[0].start_s, windows[0].end_s) == (0.0, 1.2)


def test_segment_windows_zero_overlap_partitions():
    windows = segment_windows(6.0, WindowingConfig(2.0, 0.0))
    assert [(w.start_s, w.end_s) for w in windows] == [(0.0, 2.0), (2.0, 4.0), (4.0, 6.0)]


def test_segment_windows_count_grid():
    checked = 0
    for duration in np.linspace(0.3, 12.0, 40):
        for window, overlap in [(1.0, 0.5), (2.0, 1.5), (2.0, 0.5), (3.0, 1.0), (0.7, 0.2)]:
            cfg = WindowingConfig(window, overlap)
            got = segment_windows(float(duration), cfg)
            if duration < window:
                assert len(got) == 1
            else:
                stride = window - overlap
                assert len(got) == math.floor((duration - window) / stride) + 1
                assert [w.start_s for w in got] == [i * stride for i in range(len(got))]
            checked += 1
    assert checked == 200


def test_windowing_config_validation():
    with pytest.raises(ParameterError):
        WindowingConfig(window_s=2.0, overlap_s=2.0)
    with pytest.raises(ParameterError):
        WindowingConfig(min_ratio=0.0)
    with pytest.raises(ParameterError):
        segment_windows(0.0)


# --- frames_in_window ---------------------------------------------------------


def test_frames_in_window_timestamp_arithmetic():
    video, _ = make_pair(4.0, 24.0)
    w0 = segment_windows(4.0, WindowingConfig(2.0, 1.5))[0]
    assert frames_in_window(video, w0) == list(range(48))
    w1 = segment_windows(4.0, WindowingConfig(2.0, 1.5))[1]
    assert frames_in_window(video, w1) == list(range(12, 60))


def test_frames_in_window_nearest_fallback():
    video, _ = make_pair(3.0, 1.0)
    from jvsync.sync import Window

    assert frames_in_window(video, Window(0, 0.2, 0.4)) == [0]
    assert frames_in_window(video, Window(0, 1.8, 1.9)) == [2]


# --- window_score ----------------------------------------------------------------


def oracle_window_score(sims, ratio):
    k = max(1, math.ceil(ratio * len(sims)))
    return math.fsum(heapq.nsmallest(k, [float(s) for s in sims])) / k


def test_window_score_examples():
    assert window_score([0.9, 0.1, 0.5, 0.3, 0.7], 0.4) == pytest.approx(0.2, abs=1e-15)
    assert window_score([0.42], 0.4) == 0.42
    for ratio in (0.1, 0.4, 0.9, 1.0):
        assert window_score([0.25] * 7, ratio) == 0.25


def test_window_score_matches_oracle_randomized():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        sims = rng.uniform(-1, 1, n).tolist()
        ratio = float(rng.uniform(0.01, 1.0))
        assert window_score(sims, ratio) == oracle_window_score(sims, ratio)


def test_window_score_rejects_empty():
    with pytest.raises(ParameterError):
        window_score([], 0.4)


@given(
    st.lists(st.floats(min_value=-1, max_value=1, allow_nan=False), min_size=1, max_size=30),
    st.floats(min_value=0.01, max_value=1.0),
    st.randoms(),
)
@settings(max_examples=200, deadline=None)
def test_window_score_permutation_invariant(sims, ratio, rand):
    shuffled = list(sims)
    rand.shuffle(shuffled)
    assert window_score(shuffled, ratio) == window_score(sims, ratio)


@given(
    st.lists(st.floats(min_value=-1, max_value=1, allow_nan=False), min_size=1, max_size=20),
    st.floats(min_value=0.01, max_value=1.0),
    st.data(),
)
@settings(max_examples=200, deadline=None)
def test_window_score_monotone_under_decrease(sims, ratio, data):
    idx = data.draw(st.integers(min_value=0, max_value=len(sims) - 1))
    delta = data.draw(st.floats(min_value=0.0, max_value=2.0))
    lowered = list(sims)
    lowered[idx] = max(-1.0, lowered[idx] - delta)
    assert window_score(lowered, ratio) <= window_score(sims, ratio) + 1e-12


# --- javis_score ------------------------------------------------------------------


def test_javis_score_identical_and_orthogonal():
    from conftest import ConstantProvider, RiggedProvider

    video, audio = make_pair(4.0, 8.0)
    report = javis_score(video, audio, ConstantProvider(), video_id="pos_v", audio_id="pos_a")
    assert report.javis_score == 1.0
    rigged = RiggedProvider()
    report = javis_score(video, audio, rigged, video_id="pos_v", audio_id="neg_a")
    assert report.javis_score == 0.0


def test_javis_score_matches_reference_on_random_fixtures():
    rng = np.random.default_rng(5)
    cfg = WindowingConfig()
    provider = StubProvider(16)
    for trial in range(10):
        duration = float(rng.uniform(1.2, 10.0))
        fps = float(rng.choice([8.0, 24.0]))
        video, audio = make_pair(duration, fps)
        got = javis_score(
            video, audio, provider, cfg, video_id=f"v{trial}", audio_id=f"a{trial}"
        ).javis_score
        want = reference_javis(video, audio, provider, cfg, f"v{trial}", f"a{trial}")
        assert got == pytest.approx(want, abs=1e-12)


def test_javis_score_bounded_by_window_scores():
    video, audio = make_pair(5.0, 8.0)
    report = javis_score(video, audio, StubProvider(8), video_id="v", audio_id="a")
    scores = [w.score for w in report.windows]
    assert min(scores) <= report.javis_score <= max(scores)


def test_javis_score_duration_mismatch_rejected():
    video, _ = make_pair(4.0, 8.0)
    _, audio = make_pair(4.5, 8.0)
    with pytest.raises(ParameterError, match="durations differ"):
        javis_score(video, audio, StubProvider(8))


def test_sync_report_serialization_round_trip(tmp_path):
    import json

    video, audio = make_pair(3.0, 8.0)
    report = javis_score(video, audio, StubProvider(8), video_id="v", audio_id="a")
    report.write_json(tmp_path / "report.json")
    loaded = json.loads((tmp_path / "report.json").read_text())
    assert loaded["javis_score"] == report.javis_score
    assert len(loaded["windows"]) == len(report.windows)
    assert loaded["windows"][0]["frame_sims"] == list(report.windows[0].frame_sims)
