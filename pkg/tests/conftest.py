import numpy as np
import pytest

from jvsync.embeddings import ProviderCapability
from jvsync.fixtures import write_fixture_pair
from jvsync.media import load_frame_sequence, load_wav


def basis_vector(dim: int, axis: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.float32)
    v[axis] = 1.0
    return v


class RiggedProvider:
    """Embeds everything on one axis, except audio of media whose filename
    contains 'neg', which lands on an orthogonal axis. Positives therefore
    score cosine 1.0 everywhere and negatives 0.0."""

    def __init__(self, dim: int = 8):
        self.dim = dim

    def capability(self):
        return ProviderCapability(kind="stub", dimension=self.dim, max_in_flight=1024)

    def _vec(self, media_id: str, is_audio: bool) -> np.ndarray:
        from pathlib import Path

        if is_audio and "neg" in Path(media_id).name:
            return basis_vector(self.dim, 1)
        return basis_vector(self.dim, 0)

    def embed_video_frames(self, media_id, window, frame_indices):
        return np.stack([self._vec(media_id, False) for _ in frame_indices])

    def embed_audio(self, media_id, window):
        return self._vec(media_id, True)


class ConstantProvider:
    """One fixed unit vector for every key: every pair scores exactly 1.0."""

    def __init__(self, dim: int = 8):
        self.dim = dim

    def capability(self):
        return ProviderCapability(kind="stub", dimension=self.dim, max_in_flight=1024)

    def embed_video_frames(self, media_id, window, frame_indices):
        return np.stack([basis_vector(self.dim, 0) for _ in frame_indices])

    def embed_audio(self, media_id, window):
        return basis_vector(self.dim, 0)


@pytest.fixture(scope="session")
def fixture_pair(tmp_path_factory):
    """One bundled 4 s synchronized pair at 24 fps, decoded once."""
    directory = tmp_path_factory.mktemp("pair")
    paths = write_fixture_pair(directory, duration_s=4.0, fps=24.0, size=48)
    return {
        **paths,
        "video_clip": load_frame_sequence(paths["video"]),
        "audio_clip": load_wav(paths["audio"]),
    }
