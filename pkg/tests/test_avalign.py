import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jvsync.augment import audio_temporal_shift
from jvsync.avalign import AlignConfig, av_align_from_clips, av_align_score
from jvsync.errors import ParameterError
from jvsync.media import PeakList


def peaks(*times):
    return PeakList(times=tuple(times))


def test_greedy_matching_example():
    score = av_align_score(peaks(1.0, 2.0, 3.0), peaks(1.02, 2.5), AlignConfig(tolerance_s=0.1))
    assert score == pytest.approx(0.4)


def test_identical_lists_score_one():
    assert av_align_score(peaks(0.5, 1.0, 2.0), peaks(0.5, 1.0, 2.0)) == 1.0


def test_both_empty_scores_zero():
    assert av_align_score(peaks(), peaks()) == 0.0


def test_one_empty_scores_zero():
    assert av_align_score(peaks(1.0, 2.0), peaks()) == 0.0


def test_symmetry_in_inputs():
    rng = np.random.default_rng(2)
    for _ in range(50):
        a = peaks(*np.sort(rng.uniform(0, 10, rng.integers(0, 8))))
        b = peaks(*np.sort(rng.uniform(0, 10, rng.integers(0, 8))))
        cfg = AlignConfig(tolerance_s=float(rng.uniform(0.05, 0.5)))
        assert av_align_score(a, b, cfg) == av_align_score(b, a, cfg)


def test_score_bounded_and_perfect_iff_equal_lengths():
    assert av_align_score(peaks(1.0, 2.0), peaks(1.0, 2.0, 3.0)) < 1.0
    rng = np.random.default_rng(4)
    for _ in range(50):
        a = peaks(*np.sort(rng.uniform(0, 10, rng.integers(1, 8))))
        b = peaks(*np.sort(rng.uniform(0, 10, rng.integers(1, 8))))
        assert 0.0 <= av_align_score(a, b) <= 1.0


def test_large_uniform_shift_kills_score():
    base = [1.0, 2.0, 3.0, 4.0]
    # a shift that is neither within tolerance nor a multiple of the gap
    for shift in (0.5, 10.0):
        shifted = peaks(*[t + shift for t in base])
        assert av_align_score(peaks(*base), shifted, AlignConfig(tolerance_s=0.1)) == 0.0


@given(
    st.lists(st.floats(min_value=0, max_value=30, allow_nan=False), max_size=10),
    st.floats(min_value=0.01, max_value=1.0),
)
@settings(max_examples=100, deadline=None)
def test_self_match_is_perfect(times, tol):
    unique = sorted(set(times))
    lst = peaks(*unique)
    expected = 1.0 if unique else 0.0
    assert av_align_score(lst, lst, AlignConfig(tolerance_s=tol)) == expected


def test_config_validation():
    with pytest.raises(ParameterError):
        AlignConfig(tolerance_s=0.0)


def test_aligned_beats_shifted_on_flash_fixture(fixture_pair):
    video = fixture_pair["video_clip"]
    audio = fixture_pair["audio_clip"]
    aligned = av_align_from_clips(video, audio)
    shifted = av_align_from_clips(video, audio_temporal_shift(audio, offset_s=0.5))
    assert aligned - shifted >= 0.3
