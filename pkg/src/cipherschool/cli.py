"""Command line entry points: run the lesson service, or crunch pre/post
survey scores."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .stats import DegenerateSample, PairedSample, paired_t_test


def _read_scores(path: str) -> list[float]:
    values = []
    for line_number, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        try:
            values.append(float(text))
        except ValueError:
            raise SystemExit(f"{path}:{line_number}: not a number: {text!r}")
    return values


def cmd_analyze(args: argparse.Namespace) -> int:
    pre = _read_scores(args.pre)
    post = _read_scores(args.post)
    try:
        result = paired_t_test(PairedSample.of(pre, post))
    except (ValueError, DegenerateSample) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"t={result.t:.6g} df={result.df} p={result.p:.6g}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import SeedDataError, Settings, create_app

    try:
        app = create_app(
            Settings(
                data_dir=args.data_dir,
                content_path=args.content,
                accounts_path=args.accounts,
                seed=args.seed,
            )
        )
    except SeedDataError as exc:
        print("refusing to start:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return 1
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cipherschool")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the lesson service")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--content", default=None, help="content pack path (default: bundled pack)")
    serve.add_argument("--accounts", default=None, help="accounts YAML seeded at startup")
    serve.add_argument("--data-dir", default="./data", help="where the store file lives")
    serve.add_argument("--seed", type=int, default=None, help="deterministic demo mode")
    serve.set_defaults(func=cmd_serve)

    analyze = sub.add_parser("analyze", help="paired t-test on pre/post score files")
    analyze.add_argument("--pre", required=True, help="file with one pre score per line")
    analyze.add_argument("--post", required=True, help="file with one post score per line")
    analyze.set_defaults(func=cmd_analyze)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
