"""Command-line interface.

Subcommands: score, augment, verify, sweep, frechet, report. Runtime
settings come from flags layered over an optional JSON config file (flags
win); the fully resolved configuration is embedded in every report for
provenance. Output files never contain timestamps, so identical inputs
produce byte-identical reports.

Exit codes: 0 success, 1 usage error, 2 data/provider error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .augment import apply_augment_manifest
from .avalign import AlignConfig
from .distmetrics import (
    MetricTable,
    MmdConfig,
    composite_scores,
    frechet_distance,
    gaussian_stats,
    load_sample_set,
    mmd_poly,
)
from .embeddings import RemoteProvider, StoreProvider, StubProvider
from .errors import JvsyncError
from .media import MelParams, PeakConfig, load_frame_sequence, load_wav
from .sync import WindowingConfig, javis_score
from .verify import (
    SweepGrid,
    aggregate_by_category,
    category_report_csv,
    load_benchmark_manifest,
    load_verification_manifest,
    run_sweep,
    run_verification,
)

REMOTE_ENV_VAR = "JVSYNC_REMOTE"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1, not 2."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


@dataclass(frozen=True)
class RunConfig:
    provider_kind: str  # stub | store | remote
    stub_dim: int
    store_path: str | None
    remote_endpoint: str | None
    windowing: WindowingConfig
    align: AlignConfig
    mel: MelParams
    seed: int
    out_dir: str
    jobs: int

    def to_json_dict(self) -> dict:
        provider = {"kind": self.provider_kind}
        if self.provider_kind == "stub":
            provider["stub_dim"] = self.stub_dim
        elif self.provider_kind == "store":
            provider["store"] = self.store_path
        else:
            provider["remote"] = self.remote_endpoint
        return {
            "provider": provider,
            "window_s": self.windowing.window_s,
            "overlap_s": self.windowing.overlap_s,
            "min_ratio": self.windowing.min_ratio,
            "align": {
                "tolerance_s": self.align.tolerance_s,
                "peak_video": self.align.peak_cfg_video.__dict__,
                "peak_audio": self.align.peak_cfg_audio.__dict__,
            },
            "mel": self.mel.__dict__,
            "seed": self.seed,
            "jobs": self.jobs,
        }

    def make_provider(self):
        if self.provider_kind == "store":
            return StoreProvider(self.store_path)
        if self.provider_kind == "remote":
            return RemoteProvider(self.remote_endpoint)
        return StubProvider(self.stub_dim)


def _add_common_flags(parser):
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--out", help="output directory (default: current directory)")
    parser.add_argument("--stub-dim", type=int, help="use the deterministic stub provider")
    parser.add_argument("--store", help="use an embedding-store file as provider")
    parser.add_argument(
        "--remote", help=f"use a remote encoder endpoint (or ${REMOTE_ENV_VAR})"
    )
    parser.add_argument("--window", type=float, help="window length, seconds")
    parser.add_argument("--overlap", type=float, help="window overlap, seconds")
    parser.add_argument("--min-ratio", type=float, help="least-synchronized fraction kept")
    parser.add_argument("--seed", type=int, help="base seed for seeded operations")
    parser.add_argument("--jobs", type=int, help="worker pool width (default: CPU count)")


def _resolve_config(args) -> RunConfig:
    file_cfg = {}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise JvsyncError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise JvsyncError(f"config file {args.config} must hold a JSON object")

    def pick(flag_value, file_key, default):
        if flag_value is not None:
            return flag_value
        return file_cfg.get(file_key, default)

    provider_cfg = file_cfg.get("provider", {})
    selections = []
    stub_dim = args.stub_dim if args.stub_dim is not None else provider_cfg.get("stub_dim")
    store = args.store if args.store is not None else provider_cfg.get("store")
    remote = args.remote if args.remote is not None else provider_cfg.get("remote")
    if remote is None:
        remote = os.environ.get(REMOTE_ENV_VAR) or None
    flag_count = sum(x is not None for x in (args.stub_dim, args.store, args.remote))
    if flag_count > 1:
        raise _UsageError("choose exactly one of --stub-dim, --store, --remote")
    if args.stub_dim is not None:
        selections = [("stub", stub_dim)]
    elif args.store is not None:
        selections = [("store", store)]
    elif args.remote is not None:
        selections = [("remote", remote)]
    else:
        if stub_dim is not None:
            selections.append(("stub", stub_dim))
        if store is not None:
            selections.append(("store", store))
        if remote is not None:
            selections.append(("remote", remote))
        if len(selections) > 1:
            raise _UsageError("config selects more than one embedding provider")
        if not selections:
            selections = [("stub", 16)]  # documented default
    kind, value = selections[0]

    mel_cfg = file_cfg.get("mel", {})
    align_cfg = file_cfg.get("align", {})
    peak_video = align_cfg.get("peak_video", {})
    peak_audio = align_cfg.get("peak_audio", {})
    return RunConfig(
        provider_kind=kind,
        stub_dim=int(value) if kind == "stub" else 16,
        store_path=str(value) if kind == "store" else None,
        remote_endpoint=str(value) if kind == "remote" else None,
        windowing=WindowingConfig(
            window_s=pick(args.window, "window_s", 2.0),
            overlap_s=pick(args.overlap, "overlap_s", 1.5),
            min_ratio=pick(args.min_ratio, "min_ratio", 0.4),
        ),
        align=AlignConfig(
            tolerance_s=align_cfg.get("tolerance_s", 0.1),
            peak_cfg_video=PeakConfig(**peak_video),
            peak_cfg_audio=PeakConfig(**peak_audio),
        ),
        mel=MelParams(**mel_cfg),
        seed=pick(args.seed, "seed", 0),
        out_dir=pick(args.out, "out", "."),
        jobs=pick(args.jobs, "jobs", os.cpu_count() or 1),
    )


def _write_report(cfg: RunConfig, name: str, payload: dict) -> Path:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    document = {"config": cfg.to_json_dict(), **payload}
    path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n")
    return path


def _write_text(cfg: RunConfig, name: str, text: str) -> Path:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text)
    return path


# --- subcommands ----------------------------------------------------------------


def _cmd_score(args) -> int:
    cfg = _resolve_config(args)
    video = load_frame_sequence(args.video)
    audio = load_wav(args.audio)
    provider = cfg.make_provider()
    report = javis_score(
        video, audio, provider, cfg.windowing, video_id=args.video, audio_id=args.audio
    )
    path = _write_report(
        cfg,
        "sync_report.json",
        {"video": args.video, "audio": args.audio, **report.to_json_dict()},
    )
    print(f"javis_score {report.javis_score:.6f} ({len(report.windows)} windows) -> {path}")
    return 0


def _cmd_augment(args) -> int:
    cfg = _resolve_config(args)
    results = apply_augment_manifest(args.manifest, out_dir=args.out_media)
    summary_path = _write_report(cfg, "augment_summary.json", {"records": results})
    print(f"augmented {len(results)} records -> {summary_path}")
    return 0


def _cmd_verify(args) -> int:
    cfg = _resolve_config(args)
    triplets = load_verification_manifest(args.manifest)
    provider = cfg.make_provider() if args.metric == "javis" else None
    metric_cfg = cfg.windowing if args.metric == "javis" else cfg.align
    report = run_verification(
        triplets,
        args.metric,
        provider,
        metric_cfg,
        mel_params=cfg.mel,
        jobs=cfg.jobs,
    )
    json_path = _write_report(cfg, f"verification_{args.metric}.json", report.to_json_dict())
    csv_path = _write_text(cfg, f"verification_{args.metric}.csv", report.to_csv())
    print(
        f"{args.metric}: auroc={report.auroc} acc_strict={report.acc_strict} "
        f"acc_relaxed={report.acc_relaxed} pairs={report.n_pairs} "
        f"skipped={len(report.skipped)} -> {json_path}, {csv_path}"
    )
    return 0


def _parse_grid(spec: str) -> SweepGrid:
    if spec == "default":
        return SweepGrid()
    try:
        if spec.startswith("{"):
            raw = json.loads(spec)
        else:
            raw = json.loads(Path(spec).read_text())
        return SweepGrid(
            window_s=tuple(raw["window_s"]),
            overlap_s=tuple(raw["overlap_s"]),
            min_ratio=tuple(raw["min_ratio"]),
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise JvsyncError(f"cannot parse sweep grid {spec!r}: {exc}") from exc


def _cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    triplets = load_verification_manifest(args.manifest)
    provider = cfg.make_provider()
    report = run_sweep(triplets, provider, _parse_grid(args.grid), jobs=cfg.jobs)
    json_path = _write_report(cfg, "sweep.json", report.to_json_dict())
    csv_path = _write_text(cfg, "sweep.csv", report.to_csv())
    print(
        f"sweep: {len(report.rows)} rows, {len(report.skipped)} skipped cells "
        f"-> {json_path}, {csv_path}"
    )
    return 0


def _cmd_frechet(args) -> int:
    cfg = _resolve_config(args)
    set_a = load_sample_set(args.a)
    set_b = load_sample_set(args.b)
    payload = {
        "a": args.a,
        "b": args.b,
        "frechet": frechet_distance(gaussian_stats(set_a), gaussian_stats(set_b)),
    }
    if args.mmd:
        payload["mmd_poly"] = mmd_poly(
            set_a, set_b, MmdConfig(degree=args.mmd_degree, estimator=args.mmd_estimator)
        )
    path = _write_report(cfg, "distribution_metrics.json", payload)
    print(f"frechet {payload['frechet']:.6f} -> {path}")
    return 0


def _cmd_report(args) -> int:
    cfg = _resolve_config(args)
    try:
        table_raw = json.loads(Path(args.table).read_text())
        table = MetricTable(**table_raw)
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        raise JvsyncError(f"cannot read metric table {args.table}: {exc}") from exc
    payload = {"metrics": table_raw, "composites": composite_scores(table).to_json_dict()}
    if args.bench:
        if not args.scores:
            raise _UsageError("--bench requires --scores")
        items = load_benchmark_manifest(args.bench)
        try:
            scores = json.loads(Path(args.scores).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise JvsyncError(f"cannot read scores file {args.scores}: {exc}") from exc
        categories = aggregate_by_category(items, scores)
        payload["by_category"] = categories
        _write_text(cfg, "category_report.csv", category_report_csv(categories))
    path = _write_report(cfg, "composite_report.json", payload)
    print(f"composites {payload['composites']} -> {path}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="jvsync", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("score", parents=[], help="score one video-audio pair")
    p.add_argument("--video", required=True, help="frame-sequence descriptor JSON")
    p.add_argument("--audio", required=True, help="WAV file")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("augment", help="synthesize negatives from a manifest")
    p.add_argument("--manifest", required=True, help="JSON-lines augmentation manifest")
    p.add_argument(
        "--out-media",
        help="redirect synthesized media here (default: beside their inputs)",
    )
    _add_common_flags(p)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("verify", help="run the verification protocol")
    p.add_argument("--manifest", required=True, help="JSON-lines triplet manifest")
    p.add_argument("--metric", choices=("javis", "av_align"), default="javis")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("sweep", help="parameter-sensitivity sweep")
    p.add_argument("--manifest", required=True, help="JSON-lines triplet manifest")
    p.add_argument("--grid", default="default", help="'default', a JSON object, or a JSON file")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("frechet", help="distribution distance between two sample sets")
    p.add_argument("--a", required=True, help="embedding-store or matrix file")
    p.add_argument("--b", required=True, help="embedding-store or matrix file")
    p.add_argument("--mmd", action="store_true", help="also report polynomial-kernel MMD")
    p.add_argument("--mmd-degree", type=int, default=3)
    p.add_argument("--mmd-estimator", choices=("biased", "unbiased"), default="biased")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_frechet)

    p = sub.add_parser("report", help="composite scores and taxonomy aggregation")
    p.add_argument("--table", required=True, help="JSON file of named metric values")
    p.add_argument("--bench", help="benchmark manifest for per-category aggregation")
    p.add_argument("--scores", help="JSON file mapping item id to score")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_report)
    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise _UsageError("jvsync: a subcommand is required (see --help)")
        return args.func(args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except JvsyncError as exc:
        print(f"jvsync: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))
