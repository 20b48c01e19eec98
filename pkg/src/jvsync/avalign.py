"""AV-Align baseline: motion peaks matched against audio onsets.

This is a documented variant, not a reproduction: the original method's
matching rule lives in external code. Here video motion peaks (from the
frame-difference envelope) and audio onset peaks (from log-mel spectral
flux) are matched greedily in time order, one-to-one, within a tolerance,
and scored F1-style. Its known failure modes (subtle motion, noisy onsets)
are exactly what the windowed embedding metric exists to fix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParameterError
from .media import (
    AudioClip,
    MelParams,
    PeakConfig,
    PeakList,
    VideoClip,
    mel_spectrogram,
    motion_energy,
    pick_peaks,
    spectral_flux,
)


@dataclass(frozen=True)
class AlignConfig:
    tolerance_s: float = 0.1
    peak_cfg_video: PeakConfig = field(default_factory=PeakConfig)
    peak_cfg_audio: PeakConfig = field(default_factory=PeakConfig)

    def __post_init__(self):
        if not self.tolerance_s > 0:
            raise ParameterError(f"tolerance_s must be > 0, got {self.tolerance_s}")


def av_align_score(
    video_peaks: PeakList, audio_peaks: PeakList, cfg: AlignConfig | None = None
) -> float:
    """F1-style agreement between two peak lists.

    Peaks are matched greedily in global time order: the earliest unmatched
    pair within tolerance is taken (ties toward the earlier audio peak);
    otherwise the earlier of the two current candidates is discarded. The
    rule is symmetric in its inputs. Score = 2 |matches| / (|V| + |A|);
    two empty lists score 0.0 since "no detectable events" is a failure
    mode, not evidence of synchrony.
    """
    cfg = cfg or AlignConfig()
    v, a = video_peaks.times, audio_peaks.times
    if not v and not a:
        return 0.0
    matches = 0
    i = j = 0
    while i < len(v) and j < len(a):
        if abs(v[i] - a[j]) <= cfg.tolerance_s:
            matches += 1
            i += 1
            j += 1
        elif v[i] < a[j]:
            i += 1
        else:
            j += 1
    return 2.0 * matches / (len(v) + len(a))


def av_align_from_clips(
    video: VideoClip,
    audio: AudioClip,
    cfg: AlignConfig | None = None,
    mel_params: MelParams | None = None,
) -> float:
    """Run the full baseline on raw clips: envelopes, peaks, then matching."""
    cfg = cfg or AlignConfig()
    video_peaks = pick_peaks(motion_energy(video), cfg.peak_cfg_video)
    audio_peaks = pick_peaks(
        spectral_flux(mel_spectrogram(audio, mel_params)), cfg.peak_cfg_audio
    )
    return av_align_score(video_peaks, audio_peaks, cfg)
