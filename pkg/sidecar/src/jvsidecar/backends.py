"""Embedding backends: the deterministic stub and real encoder adapters.

Backends receive both the media identifier (the string the scoring engine
keys its requests with) and a resolvable path. The stub derives vectors
from the identifier alone; content backends decode the path and ignore the
identifier. Real encoders are optional heavyweights: their imports happen
at construction, and a missing package or checkpoint raises
BackendUnavailable so the server can exit nonzero at startup instead of
failing mid-stream.
"""

from __future__ import annotations

import numpy as np

from .stubcore import canonical_key, stub_vector


class BackendUnavailable(Exception):
    """The requested backend cannot be loaded in this environment."""


class StubBackend:
    """Bit-exact twin of the scoring engine's stub provider."""

    name = "stub"

    def __init__(self, dim: int = 16):
        if dim < 2:
            raise ValueError("stub dimension must be >= 2")
        self.dim_video = dim
        self.dim_audio = dim

    def embed_video_frames(self, media_id, media_path, window, frame_indices):
        if "index" not in window:
            raise ValueError("stub backend needs window.index to reproduce keys")
        keys = [
            canonical_key(media_id, int(window["index"]), "video_frame", int(fi))
            for fi in frame_indices
        ]
        return np.stack([stub_vector(k, self.dim_video) for k in keys])

    def embed_audio(self, media_id, media_path, window):
        if "index" not in window:
            raise ValueError("stub backend needs window.index to reproduce keys")
        key = canonical_key(media_id, int(window["index"]), "audio_window")
        return stub_vector(key, self.dim_audio)


class ClipClapBackend:
    """CLIP (frames) + CLAP (audio) via huggingface transformers.

    Preprocessing: frames are decoded from the descriptor's PPM/RGB24 files
    and handed to the CLIP processor (which resizes/normalizes them); audio
    is linearly resampled to CLAP's expected rate. Needs the transformers,
    torch, and Pillow packages plus locally available checkpoints; vision
    and audio dimensions differ between the two models, so this backend
    projects both to the smaller common dimension by truncation. Untested
    against the paper's setup; scores are encoder-dependent and not
    contractual.
    """

    name = "clip_clap"

    def __init__(
        self,
        device: str = "cpu",
        clip_model: str = "openai/clip-vit-base-patch32",
        clap_model: str = "laion/clap-htsat-unfused",
    ):
        try:
            import torch  # noqa: F401
            from PIL import Image  # noqa: F401
            from transformers import (
                ClapModel,
                ClapProcessor,
                CLIPModel,
                CLIPProcessor,
            )
        except ImportError as exc:
            raise BackendUnavailable(f"clip_clap backend needs torch/transformers/Pillow: {exc}")
        try:
            self._clip = CLIPModel.from_pretrained(clip_model).to(device).eval()
            self._clip_proc = CLIPProcessor.from_pretrained(clip_model)
            self._clap = ClapModel.from_pretrained(clap_model).to(device).eval()
            self._clap_proc = ClapProcessor.from_pretrained(clap_model)
        except OSError as exc:
            raise BackendUnavailable(
                f"clip_clap checkpoints unavailable (offline?): {exc}"
            )
        self._device = device
        dim = min(self._clip.config.projection_dim, self._clap.config.projection_dim)
        self.dim_video = dim
        self.dim_audio = dim

    def embed_video_frames(self, media_id, media_path, window, frame_indices):
        import torch
        from PIL import Image

        from .mediaprobe import load_frame_rgb, resolve_frame_paths

        paths = resolve_frame_paths(media_path)
        images = [Image.fromarray(load_frame_rgb(paths[int(i)])) for i in frame_indices]
        inputs = self._clip_proc(images=images, return_tensors="pt").to(self._device)
        with torch.no_grad():
            feats = self._clip.get_image_features(**inputs)
        return feats.cpu().numpy().astype(np.float32)[:, : self.dim_video]

    def embed_audio(self, media_id, media_path, window):
        import torch

        from .mediaprobe import load_wav_mono

        samples, rate = load_wav_mono(media_path)
        lo = int(window["start_s"] * rate)
        hi = int(window["end_s"] * rate)
        span = samples[lo:hi]
        target = self._clap_proc.feature_extractor.sampling_rate
        if rate != target and len(span) > 1:
            positions = np.arange(round(len(span) * target / rate)) * (rate / target)
            span = np.interp(positions, np.arange(len(span)), span)
        inputs = self._clap_proc(
            audios=span, sampling_rate=target, return_tensors="pt"
        ).to(self._device)
        with torch.no_grad():
            feats = self._clap.get_audio_features(**inputs)
        return feats.cpu().numpy().astype(np.float32)[0, : self.dim_audio]


class ImageBindBackend:
    """ImageBind adapter; requires the imagebind package and its checkpoint."""

    name = "imagebind"

    def __init__(self, device: str = "cpu"):
        try:
            import torch  # noqa: F401
            from imagebind.models import imagebind_model
        except ImportError as exc:
            raise BackendUnavailable(
                f"imagebind backend needs the 'imagebind' package and torch: {exc}"
            )
        try:
            self._model = imagebind_model.imagebind_huge(pretrained=True).to(device).eval()
        except Exception as exc:  # checkpoint download/load failure
            raise BackendUnavailable(f"imagebind checkpoint unavailable: {exc}")
        self._device = device
        self.dim_video = 1024
        self.dim_audio = 1024

    def embed_video_frames(self, media_id, media_path, window, frame_indices):
        import torch
        from imagebind import data
        from imagebind.models.imagebind_model import ModalityType

        from .mediaprobe import resolve_frame_paths

        # frame files are PPM/RGB24; PIL reads PPM natively, so the stock
        # vision loader accepts the paths as-is
        paths = resolve_frame_paths(media_path)
        selected = [str(paths[int(i)]) for i in frame_indices]
        tensors = data.load_and_transform_vision_data(selected, self._device)
        with torch.no_grad():
            out = self._model({ModalityType.VISION: tensors})
        return out[ModalityType.VISION].cpu().numpy().astype(np.float32)

    def embed_audio(self, media_id, media_path, window):
        import tempfile
        from pathlib import Path

        import torch
        from imagebind import data
        from imagebind.models.imagebind_model import ModalityType

        from .mediaprobe import load_wav_mono, write_wav_mono

        samples, rate = load_wav_mono(media_path)
        lo = int(window["start_s"] * rate)
        hi = int(window["end_s"] * rate)
        with tempfile.TemporaryDirectory() as tmp:
            slice_path = Path(tmp) / "window.wav"
            write_wav_mono(slice_path, samples[lo:hi], rate)
            tensors = data.load_and_transform_audio_data([str(slice_path)], self._device)
        with torch.no_grad():
            out = self._model({ModalityType.AUDIO: tensors})
        return out[ModalityType.AUDIO].cpu().numpy().astype(np.float32)[0]


BACKENDS = {
    "stub": StubBackend,
    "clip_clap": ClipClapBackend,
    "imagebind": ImageBindBackend,
}


def make_backend(name: str, dim: int = 16, device: str = "cpu"):
    if name == "stub":
        return StubBackend(dim)
    if name == "clip_clap":
        return ClipClapBackend(device=device)
    if name == "imagebind":
        return ImageBindBackend(device=device)
    raise BackendUnavailable(f"unknown backend {name!r} (choose from {sorted(BACKENDS)})")
