"""Metric verification: ranking quality over positive/negative pairs.

Each evaluation triplet ties one synchronized (positive) pair to one or more
desynchronized (negative) pairs, tagged with how the negative was made:
augmented along one of the four axes, generated from text alone, or produced
by a generative model. The harness scores every referenced pair exactly once
(cache keyed by media paths), then reports

  - AUROC of positives vs negatives (rank-based, exact tie handling),
  - paired accuracy: fraction of anchor-linked (positive, negative) pairs
    ranked correctly, strict (>) and relaxed (>=),
  - the same, broken down per negative-source group,

plus a counted skip list: a pair that fails to score is surfaced with its
reason, never silently dropped. Parameter sweeps re-run the whole protocol
per grid cell, and benchmark items aggregate scores over the five-aspect,
nineteen-category taxonomy.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from .augment import NegativeTag
from .avalign import AlignConfig, av_align_from_clips
from .errors import ManifestError, ParameterError
from .media import MelParams, load_frame_sequence, load_wav
from .sync import WindowingConfig, javis_score

GENERATED_SOURCES = ("generated_text_only", "generated_model")

TAXONOMY = {
    "event_scenario": ("natural", "urban", "living", "industrial", "virtual"),
    "visual_style": ("camera_shooting", "2d_animate", "3d_animate"),
    "sound_type": ("ambient", "biological", "mechanical", "musical", "speech"),
    "spatial_composition": ("single_subject", "multiple_subject", "offscreen_sound"),
    "temporal_composition": ("single_event", "sequential_events", "simultaneous_events"),
}


def auroc(pos_scores, neg_scores) -> float:
    """Probability a random positive outscores a random negative, ties 0.5.

    Computed with the rank formulation (O(n log n)), which equals exact
    pairwise counting: U = sum of positive ranks - n_pos(n_pos+1)/2 over
    midranks of the pooled sample.
    """
    pos = np.asarray(list(pos_scores), dtype=np.float64)
    neg = np.asarray(list(neg_scores), dtype=np.float64)
    if len(pos) == 0 or len(neg) == 0:
        raise ParameterError("auroc needs non-empty score sets")
    pooled = np.concatenate([pos, neg])
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(len(pooled), dtype=np.float64)
    i = 0
    while i < len(pooled):
        j = i
        while j + 1 < len(pooled) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # midrank, 1-based
        i = j + 1
    u = float(ranks[: len(pos)].sum()) - len(pos) * (len(pos) + 1) / 2.0
    return u / (len(pos) * len(neg))


def paired_accuracy(pairs, relaxed: bool = False) -> float:
    """Fraction of (positive, negative) score pairs ranked correctly.

    Strict counts pos > neg; relaxed counts pos >= neg.
    """
    pairs = list(pairs)
    if not pairs:
        raise ParameterError("paired_accuracy needs at least one pair")
    if relaxed:
        correct = sum(1 for p, n in pairs if p >= n)
    else:
        correct = sum(1 for p, n in pairs if p > n)
    return correct / len(pairs)


# --- triplets and manifests -----------------------------------------------------


@dataclass(frozen=True)
class PairRef:
    """Paths to one video-audio pair (descriptor JSON + WAV)."""

    video: str
    audio: str

    @property
    def key(self) -> tuple:
        return (self.video, self.audio)


@dataclass(frozen=True)
class NegativeRef:
    pair: PairRef
    tag: NegativeTag | None  # None for generated negatives
    source: str  # augmented | generated_text_only | generated_model

    @property
    def group(self) -> str:
        """Breakdown group: the augmentation axis, or the generated source."""
        return self.tag.axis if self.tag is not None else self.source


@dataclass(frozen=True)
class EvalTriplet:
    anchor_id: str
    positive: PairRef
    negatives: tuple

    def __post_init__(self):
        if not self.negatives:
            raise ParameterError(f"triplet {self.anchor_id!r} has no negatives")


def _parse_tag(obj: dict) -> tuple[NegativeTag | None, str]:
    source = obj.get("source", "augmented")
    if source == "augmented":
        return (
            NegativeTag(axis=obj["axis"], kind=obj["kind"], seed=int(obj.get("seed", 0))),
            "augmented",
        )
    if source in GENERATED_SOURCES:
        return None, source
    raise ManifestError(f"unknown negative source {source!r}")


def load_verification_manifest(path) -> list[EvalTriplet]:
    """Parse a JSON-lines manifest of evaluation triplets.

    Record: {"anchor_id", "positive": {"video", "audio"},
             "negatives": [{"video", "audio", "tag": {...}}, ...]}
    Relative media paths resolve against the manifest's directory.
    """
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")

    def resolve(p: str) -> str:
        return str(path.parent / p)

    triplets = []
    for line_no, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            negatives = []
            for neg in rec["negatives"]:
                tag, source = _parse_tag(neg.get("tag", {}))
                negatives.append(
                    NegativeRef(
                        pair=PairRef(video=resolve(neg["video"]), audio=resolve(neg["audio"])),
                        tag=tag,
                        source=source,
                    )
                )
            triplets.append(
                EvalTriplet(
                    anchor_id=rec["anchor_id"],
                    positive=PairRef(
                        video=resolve(rec["positive"]["video"]),
                        audio=resolve(rec["positive"]["audio"]),
                    ),
                    negatives=tuple(negatives),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ManifestError(f"{path}:{line_no}: bad triplet record: {exc}") from exc
    if not triplets:
        raise ManifestError(f"{path}: no triplets found")
    return triplets


# --- verification protocol ------------------------------------------------------


@dataclass(frozen=True)
class GroupStats:
    auroc: float | None
    acc_strict: float | None
    acc_relaxed: float | None
    n_pairs: int


@dataclass(frozen=True)
class VerificationReport:
    metric: str
    n_triplets: int
    n_pos: int
    n_neg: int
    n_pairs: int
    auroc: float | None
    acc_strict: float | None
    acc_relaxed: float | None
    by_group: dict
    positive_scores: dict
    negative_scores: dict
    skipped: tuple

    def to_json_dict(self) -> dict:
        return {
            "metric": self.metric,
            "n_triplets": self.n_triplets,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "n_pairs": self.n_pairs,
            "auroc": self.auroc,
            "acc_strict": self.acc_strict,
            "acc_relaxed": self.acc_relaxed,
            "by_group": {
                name: {
                    "auroc": g.auroc,
                    "acc_strict": g.acc_strict,
                    "acc_relaxed": g.acc_relaxed,
                    "n_pairs": g.n_pairs,
                }
                for name, g in sorted(self.by_group.items())
            },
            "positive_scores": dict(sorted(self.positive_scores.items())),
            "negative_scores": {
                k: list(v) for k, v in sorted(self.negative_scores.items())
            },
            "skipped": list(self.skipped),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", "group", "auroc", "acc_strict", "acc_relaxed", "n_pairs"])
        writer.writerow(
            [self.metric, "all", self.auroc, self.acc_strict, self.acc_relaxed, self.n_pairs]
        )
        for name, g in sorted(self.by_group.items()):
            writer.writerow([self.metric, name, g.auroc, g.acc_strict, g.acc_relaxed, g.n_pairs])
        return buf.getvalue()


def _pair_scorer(metric: str, provider, cfg, mel_params: MelParams | None):
    """Build the score-one-pair callable for the chosen metric.

    Decoded media are cached so pairs sharing a file (the usual case for
    augmented negatives) decode it once.
    """
    load_video = lru_cache(maxsize=16)(load_frame_sequence)
    load_audio = lru_cache(maxsize=16)(load_wav)

    if metric == "javis":
        windowing = cfg or WindowingConfig()

        def score(pair: PairRef) -> float:
            video = load_video(pair.video)
            audio = load_audio(pair.audio)
            report = javis_score(
                video, audio, provider, windowing, video_id=pair.video, audio_id=pair.audio
            )
            return report.javis_score

    elif metric == "av_align":
        align = cfg or AlignConfig()

        def score(pair: PairRef) -> float:
            return av_align_from_clips(
                load_video(pair.video), load_audio(pair.audio), align, mel_params
            )

    else:
        raise ParameterError(f"unknown metric {metric!r} (expected 'javis' or 'av_align')")
    return score


def run_verification(
    triplets,
    metric: str = "javis",
    provider=None,
    cfg=None,
    *,
    mel_params: MelParams | None = None,
    jobs: int = 1,
) -> VerificationReport:
    """Score all triplets with one metric and report ranking quality.

    Every distinct (video, audio) pair is scored once; failures are recorded
    in the skip list with their reason and excluded from the statistics.
    Results are independent of triplet order and of scoring order.
    """
    triplets = list(triplets)
    if metric == "javis" and provider is None:
        raise ParameterError("metric 'javis' requires an embedding provider")
    score_pair = _pair_scorer(metric, provider, cfg, mel_params)

    unique = sorted({t.positive.key for t in triplets}
                    | {n.pair.key for t in triplets for n in t.negatives})
    if jobs > 1 and provider is not None:
        jobs = min(jobs, provider.capability().max_in_flight)
    scores: dict[tuple, float] = {}
    failures: dict[tuple, str] = {}

    def attempt(key: tuple) -> tuple:
        try:
            return key, score_pair(PairRef(video=key[0], audio=key[1])), None
        except Exception as exc:  # surfaced in the skip list, never dropped
            return key, None, f"{type(exc).__name__}: {exc}"

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(attempt, unique))
    else:
        outcomes = [attempt(key) for key in unique]
    for key, value, error in outcomes:
        if error is None:
            scores[key] = value
        else:
            failures[key] = error

    pos_scores: dict[str, float] = {}
    neg_scores: dict[str, list] = {}
    paired: list[tuple] = []
    groups: dict[str, dict] = {}
    skipped: list[dict] = []
    for t in sorted(triplets, key=lambda t: t.anchor_id):
        pos = scores.get(t.positive.key)
        if pos is None:
            skipped.append(
                {
                    "anchor_id": t.anchor_id,
                    "pair": "positive",
                    "reason": failures[t.positive.key],
                }
            )
        else:
            pos_scores[t.anchor_id] = pos
        for idx, neg in enumerate(t.negatives):
            value = scores.get(neg.pair.key)
            if value is None:
                skipped.append(
                    {
                        "anchor_id": t.anchor_id,
                        "pair": f"negative[{idx}]",
                        "reason": failures[neg.pair.key],
                    }
                )
                continue
            entry = {"group": neg.group, "score": value}
            if neg.tag is not None:
                entry["kind"] = neg.tag.kind
            neg_scores.setdefault(t.anchor_id, []).append(entry)
            group = groups.setdefault(neg.group, {"neg": [], "paired": []})
            group["neg"].append(value)
            if pos is not None:
                paired.append((pos, value))
                group["paired"].append((pos, value))

    all_pos = list(pos_scores.values())
    all_neg = [e["score"] for entries in neg_scores.values() for e in entries]
    by_group = {}
    for name, payload in groups.items():
        by_group[name] = GroupStats(
            auroc=auroc(all_pos, payload["neg"]) if all_pos and payload["neg"] else None,
            acc_strict=paired_accuracy(payload["paired"]) if payload["paired"] else None,
            acc_relaxed=paired_accuracy(payload["paired"], relaxed=True)
            if payload["paired"]
            else None,
            n_pairs=len(payload["paired"]),
        )
    return VerificationReport(
        metric=metric,
        n_triplets=len(triplets),
        n_pos=len(all_pos),
        n_neg=len(all_neg),
        n_pairs=len(paired),
        auroc=auroc(all_pos, all_neg) if all_pos and all_neg else None,
        acc_strict=paired_accuracy(paired) if paired else None,
        acc_relaxed=paired_accuracy(paired, relaxed=True) if paired else None,
        by_group=by_group,
        positive_scores=pos_scores,
        negative_scores=neg_scores,
        skipped=tuple(skipped),
    )


# --- parameter sweep ------------------------------------------------------------


@dataclass(frozen=True)
class SweepGrid:
    window_s: tuple = (1.0, 2.0, 3.0)
    overlap_s: tuple = (0.5, 1.0, 1.5)
    min_ratio: tuple = (0.2, 0.4, 0.6, 1.0)

    def __post_init__(self):
        if not (self.window_s and self.overlap_s and self.min_ratio):
            raise ParameterError("sweep grid axes must be non-empty")


@dataclass(frozen=True)
class ReportRow:
    window_s: float
    overlap_s: float
    min_ratio: float
    auroc: float | None
    accuracy: float | None
    n_pairs: int


@dataclass(frozen=True)
class SweepReport:
    rows: tuple
    skipped: tuple  # invalid (window, overlap, ratio) combinations

    def to_json_dict(self) -> dict:
        return {
            "rows": [row.__dict__ for row in self.rows],
            "skipped": [list(cell) for cell in self.skipped],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["window_s", "overlap_s", "min_ratio", "auroc", "accuracy", "n_pairs"])
        for row in self.rows:
            writer.writerow(
                [row.window_s, row.overlap_s, row.min_ratio, row.auroc, row.accuracy, row.n_pairs]
            )
        return buf.getvalue()


def run_sweep(triplets, provider, grid: SweepGrid | None = None, *, jobs: int = 1) -> SweepReport:
    """Re-run verification for every grid cell, in lexicographic order.

    Cells with overlap >= window cannot form a valid configuration; they go
    to the skipped list instead of a row. Accuracy reported per row is the
    strict paired accuracy.
    """
    grid = grid or SweepGrid()
    rows = []
    skipped = []
    for window in sorted(grid.window_s):
        for overlap in sorted(grid.overlap_s):
            for ratio in sorted(grid.min_ratio):
                if not 0 <= overlap < window or not 0 < ratio <= 1:
                    skipped.append((window, overlap, ratio))
                    continue
                cfg = WindowingConfig(window_s=window, overlap_s=overlap, min_ratio=ratio)
                report = run_verification(triplets, "javis", provider, cfg, jobs=jobs)
                rows.append(
                    ReportRow(
                        window_s=window,
                        overlap_s=overlap,
                        min_ratio=ratio,
                        auroc=report.auroc,
                        accuracy=report.acc_strict,
                        n_pairs=report.n_pairs,
                    )
                )
    return SweepReport(rows=tuple(rows), skipped=tuple(skipped))


# --- taxonomy aggregation -------------------------------------------------------


@dataclass(frozen=True)
class TaxonomyLabel:
    event_scenario: str
    visual_style: str
    sound_type: str
    spatial_composition: str
    temporal_composition: str

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value not in TAXONOMY[f.name]:
                raise ParameterError(
                    f"{f.name} must be one of {TAXONOMY[f.name]}, got {value!r}"
                )


@dataclass(frozen=True)
class BenchItem:
    id: str
    caption: str
    labels: TaxonomyLabel
    media: PairRef


def load_benchmark_manifest(path) -> list[BenchItem]:
    """Parse a JSON-lines benchmark manifest with taxonomy labels.

    Record: {"id", "caption", "labels": {aspect: category, ...},
             "media": {"video", "audio"}}.
    """
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    items = []
    seen = set()
    for line_no, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            item = BenchItem(
                id=rec["id"],
                caption=rec.get("caption", ""),
                labels=TaxonomyLabel(**rec["labels"]),
                media=PairRef(
                    video=str(path.parent / rec["media"]["video"]),
                    audio=str(path.parent / rec["media"]["audio"]),
                ),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ParameterError) as exc:
            raise ManifestError(f"{path}:{line_no}: bad benchmark record: {exc}") from exc
        if item.id in seen:
            raise ManifestError(f"{path}:{line_no}: duplicate item id {item.id!r}")
        seen.add(item.id)
        items.append(item)
    if not items:
        raise ManifestError(f"{path}: no benchmark items found")
    return items


def aggregate_by_category(items, scores: dict) -> dict:
    """Mean score and count per taxonomy category, over scored items.

    Returns {aspect: {category: {"count": int, "mean": float?}}} covering
    every category, including empty ones (count 0, no mean). Scoring an id
    that is not among the items is an error.
    """
    by_id = {item.id: item for item in items}
    unknown = sorted(set(scores) - set(by_id))
    if unknown:
        raise ManifestError(f"scores reference unknown item ids: {unknown}")
    report = {
        aspect: {category: [] for category in categories}
        for aspect, categories in TAXONOMY.items()
    }
    for item_id in sorted(scores):
        item = by_id[item_id]
        for aspect in TAXONOMY:
            report[aspect][getattr(item.labels, aspect)].append(scores[item_id])
    out = {}
    for aspect, categories in report.items():
        out[aspect] = {}
        for category, values in categories.items():
            cell = {"count": len(values)}
            if values:
                cell["mean"] = math.fsum(values) / len(values)
            out[aspect][category] = cell
    return out


def category_report_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["aspect", "category", "count", "mean"])
    for aspect, categories in report.items():
        for category, cell in categories.items():
            writer.writerow([aspect, category, cell["count"], cell.get("mean", "")])
    return buf.getvalue()
