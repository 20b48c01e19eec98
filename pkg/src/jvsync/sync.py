"""Sliding-window audio-visual synchrony scoring.

A paired clip is chunked into fixed-length windows (default 2 s long,
1.5 s overlap). Within each window, every video frame is compared against
the window's whole audio span by cosine similarity of provider embeddings;
the window's score is the mean of its least-similar 40% of frames, which
keeps the measure sensitive to local desynchronization that a plain mean
would wash out. The final score is the unweighted mean over windows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .embeddings import cosine_similarity
from .errors import ParameterError
from .media import AudioClip, VideoClip


@dataclass(frozen=True)
class WindowingConfig:
    window_s: float = 2.0
    overlap_s: float = 1.5
    min_ratio: float = 0.4  # fraction of least-synchronized frames kept

    def __post_init__(self):
        if not self.window_s > 0:
            raise ParameterError(f"window_s must be > 0, got {self.window_s}")
        if not 0 <= self.overlap_s < self.window_s:
            raise ParameterError(
                f"overlap_s must lie in [0, window_s), got {self.overlap_s}"
            )
        if not 0 < self.min_ratio <= 1:
            raise ParameterError(f"min_ratio must lie in (0, 1], got {self.min_ratio}")

    @property
    def stride_s(self) -> float:
        return self.window_s - self.overlap_s


@dataclass(frozen=True)
class Window:
    """Half-open time slice [start_s, end_s), with its position index."""

    index: int
    start_s: float
    end_s: float

    def __post_init__(self):
        if self.index < 0 or not 0 <= self.start_s < self.end_s:
            raise ParameterError(f"invalid window [{self.start_s}, {self.end_s})")


@dataclass(frozen=True)
class WindowScore:
    window: Window
    frame_indices: tuple
    frame_sims: tuple
    score: float


@dataclass(frozen=True)
class SyncReport:
    windows: tuple
    javis_score: float

    def to_json_dict(self) -> dict:
        return {
            "javis_score": self.javis_score,
            "windows": [
                {
                    "index": ws.window.index,
                    "start_s": ws.window.start_s,
                    "end_s": ws.window.end_s,
                    "frame_indices": list(ws.frame_indices),
                    "frame_sims": list(ws.frame_sims),
                    "score": ws.score,
                }
                for ws in self.windows
            ],
        }

    def write_json(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"
        )


def segment_windows(duration_s: float, cfg: WindowingConfig | None = None) -> list[Window]:
    """Chunk [0, duration) into overlapping windows.

    Clips shorter than one window degrade to a single whole-clip window
    (the encoder's minimum usable span makes shorter slices pointless).
    Trailing partial windows are dropped; with the default 0.5 s stride
    every instant is still covered by up to four windows.
    """
    cfg = cfg or WindowingConfig()
    if not duration_s > 0:
        raise ParameterError(f"duration_s must be > 0, got {duration_s}")
    if duration_s < cfg.window_s:
        return [Window(index=0, start_s=0.0, end_s=duration_s)]
    count = math.floor((duration_s - cfg.window_s) / cfg.stride_s) + 1
    windows = []
    for i in range(count):
        start = i * cfg.stride_s
        windows.append(Window(index=i, start_s=start, end_s=min(start + cfg.window_s, duration_s)))
    return windows


def frames_in_window(clip: VideoClip, window: Window) -> list[int]:
    """Indices of frames whose timestamp i/fps falls in [start, end).

    Never empty: a window narrower than one frame period falls back to the
    single frame nearest its start.
    """
    n = clip.n_frames
    lo = max(0, math.floor(window.start_s * clip.fps) - 1)
    hi = min(n, math.ceil(window.end_s * clip.fps) + 2)
    indices = [i for i in range(lo, hi) if window.start_s <= i / clip.fps < window.end_s]
    if indices:
        return indices
    nearest = min(max(0, round(window.start_s * clip.fps)), n - 1)
    return [nearest]


def window_score(frame_sims, min_ratio: float = 0.4) -> float:
    """Mean of the k least-synchronized frame similarities.

    k = max(1, ceil(min_ratio * n)); ceil keeps the selection non-empty for
    tiny windows. The sum is exactly rounded (math.fsum) so the result does
    not depend on accumulation order.
    """
    sims = [float(s) for s in frame_sims]
    if not sims:
        raise ParameterError("window_score needs at least one frame similarity")
    if not 0 < min_ratio <= 1:
        raise ParameterError(f"min_ratio must lie in (0, 1], got {min_ratio}")
    k = max(1, math.ceil(min_ratio * len(sims)))
    worst = sorted(sims)[:k]
    return math.fsum(worst) / k


def javis_score(
    video: VideoClip,
    audio: AudioClip,
    provider,
    cfg: WindowingConfig | None = None,
    *,
    video_id: str = "video",
    audio_id: str = "audio",
) -> SyncReport:
    """Score a video-audio pair for synchrony with the given provider.

    One embedding per selected frame and one per window audio span are
    requested through the provider, compared by cosine similarity, reduced
    per window, then averaged across windows. The report keeps every
    intermediate for auditability.
    """
    cfg = cfg or WindowingConfig()
    if abs(video.duration_s - audio.duration_s) > 1.0 / video.fps + 1e-9:
        raise ParameterError(
            f"video ({video.duration_s:.4f} s) and audio ({audio.duration_s:.4f} s) "
            "durations differ by more than one frame period"
        )
    duration = min(video.duration_s, audio.duration_s)
    scored = []
    for window in segment_windows(duration, cfg):
        indices = frames_in_window(video, window)
        frame_vecs = provider.embed_video_frames(video_id, window, indices)
        audio_vec = provider.embed_audio(audio_id, window)
        sims = tuple(cosine_similarity(fv, audio_vec) for fv in frame_vecs)
        scored.append(
            WindowScore(
                window=window,
                frame_indices=tuple(indices),
                frame_sims=sims,
                score=window_score(sims, cfg.min_ratio),
            )
        )
    total = math.fsum(ws.score for ws in scored) / len(scored)
    return SyncReport(windows=tuple(scored), javis_score=total)
