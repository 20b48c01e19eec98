"""Sidecar command line: serve the wire protocol or precompute stores.

Exit codes: 0 success, 1 usage error, 2 backend/data failure (including a
backend that cannot load at startup).
"""

from __future__ import annotations

import argparse
import json
import sys

from .backends import BackendUnavailable
from .mediaprobe import MediaProbeError
from .precompute import precompute
from .server import SidecarConfig, serve


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def build_parser() -> _Parser:
    parser = _Parser(prog="jvsidecar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("serve", help="answer embedding requests until terminated")
    p.add_argument("--backend", choices=("stub", "clip_clap", "imagebind"), default="stub")
    p.add_argument("--dim", type=int, default=16, help="stub vector dimension")
    p.add_argument("--device", default="cpu")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--stdio", action="store_true", help="serve on standard I/O (default)")
    group.add_argument("--listen", help="serve on a TCP socket, host:port")
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--max-in-flight", type=int, default=64)

    p = sub.add_parser("precompute", help="write an embedding store for a media manifest")
    p.add_argument("--manifest", required=True, help='JSON lines of {"video", "audio"} pairs')
    p.add_argument("--out", required=True, help="store file to write")
    p.add_argument("--backend", choices=("stub", "clip_clap", "imagebind"), default="stub")
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--device", default="cpu")
    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "serve":
            cfg = SidecarConfig(
                backend=args.backend,
                dim=args.dim,
                device=args.device,
                listen=args.listen if args.listen else "stdio",
                batch_size=args.batch,
                max_in_flight=args.max_in_flight,
            )
            serve(cfg)
            return 0
        if args.command == "precompute":
            report = precompute(
                args.manifest, args.out, backend_name=args.backend,
                dim=args.dim, device=args.device,
            )
            print(json.dumps(report, sort_keys=True))
            return 0 if not report["failures"] else 2
        raise _UsageError("jvsidecar: a subcommand is required (see --help)")
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (BackendUnavailable, MediaProbeError, OSError, ValueError) as exc:
        print(f"jvsidecar: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
