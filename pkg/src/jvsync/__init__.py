"""jvsync: deterministic audio-video synchrony evaluation.

Windowed embedding-similarity scoring with a pluggable embedding provider,
an onset/motion peak-matching baseline, seeded negative-pair augmentation,
embedding-space distribution metrics, and a verification harness that grades
any synchrony metric by AUROC and paired accuracy.
"""

from .augment import AugSpec, NegativeTag, TargetInterval, synthesize_negative
from .avalign import AlignConfig, av_align_from_clips, av_align_score
from .distmetrics import (
    CompositeScores,
    GaussianStats,
    MetricTable,
    MmdConfig,
    SampleSet,
    composite_scores,
    cosine_consistency,
    frechet_distance,
    gaussian_stats,
    mmd_poly,
)
from .embeddings import (
    EmbeddingKey,
    ProviderCapability,
    RemoteProvider,
    StoreProvider,
    StubProvider,
    cosine_similarity,
    read_embedding_store,
    stub_embed,
    write_embedding_store,
)
from .errors import (
    JvsyncError,
    ManifestError,
    MediaFormatError,
    ParameterError,
    ProviderError,
    StoreError,
)
from .media import (
    AudioClip,
    EnvelopeSeries,
    FrameImage,
    MelParams,
    MelSpectrogram,
    PeakConfig,
    PeakList,
    VideoClip,
    load_frame_sequence,
    load_wav,
    mel_spectrogram,
    motion_energy,
    pick_peaks,
    spectral_flux,
)
from .sync import (
    SyncReport,
    Window,
    WindowingConfig,
    WindowScore,
    frames_in_window,
    javis_score,
    segment_windows,
    window_score,
)
from .verify import (
    BenchItem,
    EvalTriplet,
    SweepGrid,
    TaxonomyLabel,
    aggregate_by_category,
    auroc,
    load_benchmark_manifest,
    load_verification_manifest,
    paired_accuracy,
    run_sweep,
    run_verification,
)

__version__ = "0.1.0"
