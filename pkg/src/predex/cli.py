"""Command-line entry point: score, explain, report, serve.

Exit codes: 0 success, 1 usage error, 2 data error. A predex.toml config file
(keys named after the long flags, grouped by subcommand or top-level) supplies
defaults that explicit flags override.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 fallback
    import tomli as tomllib

from . import insight
from .dataset import BinningSpec, load_csv, load_schema_hints, set_roles
from .errors import ConfigError, PredexError
from .figures import render_report_figures
from .scoring import fit_gaussian, import_scores, score_points, write_scores_csv
from .search import (
    BAYES,
    INFLUENCE,
    SearchConfig,
    explanations_to_json,
    rpi_search,
    search_multiple,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predex", description="Predicate induction for anomaly explanation"
    )
    parser.add_argument("--config", help="predex.toml config file", default=None)
    parser.add_argument("--json", action="store_true", help="structured diagnostics on stderr")
    parser.add_argument(
        "--seed", type=int, default=None, help="seed for synthetic generators in test mode"
    )
    sub = parser.add_subparsers(dest="command")

    score = sub.add_parser("score", help="fit the Gaussian scorer and write a score file")
    score.add_argument("--input", help="input CSV")
    score.add_argument("--targets", help="comma-separated target features")
    score.add_argument("--model", default="gaussian", choices=["gaussian"])
    score.add_argument("--schema-hints", default=None, help="JSON schema hints file")
    score.add_argument("--out", help="output score CSV (row_id,score)")

    explain = sub.add_parser("explain", help="induce explanatory predicates")
    explain.add_argument("--input", help="input CSV")
    explain.add_argument("--scores", default=None, help="score side file or column name")
    explain.add_argument(
        "--higher-is-anomalous",
        default=True,
        action=argparse.BooleanOptionalAction,
        help="orientation of imported scores (default: higher = more anomalous)",
    )
    explain.add_argument(
        "--min-shift",
        action="store_true",
        help="rebase imported scores so the minimum is 0",
    )
    explain.add_argument("--targets", default=None, help="fit Gaussian on these targets instead")
    explain.add_argument("--schema-hints", default=None)
    explain.add_argument("--strategy", default=INFLUENCE, choices=[INFLUENCE, BAYES])
    explain.add_argument("--strictness", type=float, default=1.0)
    explain.add_argument("--bins", type=int, default=20)
    explain.add_argument("--max-explanations", type=int, default=5)
    explain.add_argument("--user-points", default=None, help="file with one row id per line")
    explain.add_argument("--workers", type=int, default=1)
    explain.add_argument("--out", help="output explanation JSON")
    explain.add_argument("--summary", default=None, help="optional markdown summary path")

    report = sub.add_parser("report", help="render report.md/report.json (+figures)")
    report.add_argument("--explanations", help="explanation JSON from explain")
    report.add_argument("--input", default=None, help="input CSV, enables chart rendering")
    report.add_argument("--scores", default=None, help="score side file or column name")
    report.add_argument("--bookmarks", default=None, help="JSON list of {chart, sentence}")
    report.add_argument("--out-dir")
    report.add_argument(
        "--no-figures", action="store_true", help="skip PNG rendering of embedded charts"
    )

    serve = sub.add_parser("serve", help="run the JSON HTTP service")
    serve.add_argument("--port", type=int, default=8765)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--data-dir", default="predex-data")
    return parser


def _apply_config(argv: list[str], parser: argparse.ArgumentParser) -> argparse.Namespace:
    """Parse flags, then fill unset values from predex.toml if present."""
    args = parser.parse_args(argv)
    config_path = args.config or ("predex.toml" if Path("predex.toml").exists() else None)
    if not config_path:
        return args
    with open(config_path, "rb") as fh:
        config = tomllib.load(fh)
    section = dict(config.get(args.command or "", {}))
    for key, value in {**{k: v for k, v in config.items() if not isinstance(v, dict)}, **section}.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            continue
        # flags given on the command line win; argparse defaults are overridden
        if f"--{key}" in argv or f"--{attr}" in argv:
            continue
        setattr(args, attr, value)
    return args


def _load_dataset(args):
    hints = load_schema_hints(args.schema_hints) if getattr(args, "schema_hints", None) else None
    ds = load_csv(args.input, hints)
    if getattr(args, "targets", None):
        ds = set_roles(ds, [t.strip() for t in args.targets.split(",") if t.strip()])
    return ds


def _load_scores(args, ds):
    if args.scores:
        sv, ds = import_scores(
            ds,
            args.scores,
            higher_is_anomalous=getattr(args, "higher_is_anomalous", True),
            min_shift=getattr(args, "min_shift", False),
        )
        return sv, ds
    if getattr(args, "targets", None):
        model = fit_gaussian(ds)
        return score_points(model, ds), ds
    raise ConfigError("explain needs --scores or --targets (for the Gaussian scorer)")


def _cmd_score(args) -> int:
    ds = _load_dataset(args)
    model = fit_gaussian(ds)
    sv = score_points(model, ds)
    write_scores_csv(sv, args.out)
    print(f"wrote {len(sv)} scores to {args.out}")
    return EXIT_OK


def _cmd_explain(args) -> int:
    ds = _load_dataset(args)
    sv, ds = _load_scores(args, ds)
    user_points = None
    if args.user_points:
        lines = Path(args.user_points).read_text().split()
        user_points = frozenset(int(x) for x in lines)
    cfg = SearchConfig(
        strategy=args.strategy,
        strictness=args.strictness,
        binning=BinningSpec(bin_count=args.bins),
        max_explanations=args.max_explanations,
        user_points=user_points,
        workers=args.workers,
    )
    if cfg.strategy == BAYES:
        exps = rpi_search(ds, sv, cfg)[: cfg.max_explanations]
    else:
        exps, _combined = search_multiple(ds, sv, cfg)
    Path(args.out).write_text(explanations_to_json(exps))
    if args.summary:
        md, _ = insight.build_report(exps)
        Path(args.summary).write_text(md)
    print(f"wrote {len(exps)} explanation(s) to {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    records = json.loads(Path(args.explanations).read_text())
    if isinstance(records, dict):
        records = records.get("explanations", [])
    bookmarks = []
    if args.bookmarks:
        for item in json.loads(Path(args.bookmarks).read_text()):
            bookmarks.append(insight.Bookmark(item.get("chart", {}), item.get("sentence", "")))
    charts = []
    if args.input and args.scores:
        from .predicate import Selection, evaluate, parse

        ds = load_csv(args.input)
        sv, ds = import_scores(ds, args.scores)
        for i, record in enumerate(records, start=1):
            pred = parse(record["predicate"])
            sel = evaluate(pred, ds)
            hist = insight.score_histogram(
                sv,
                [(record["predicate"], sel), ("rest of data", Selection(~sel.mask))],
            )
            charts.append((f"explanation {i} score distribution", hist.to_chart_spec()))
    md, sidecar = insight.build_report(records, bookmarks, charts)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.md").write_text(md)
    (out_dir / "report.json").write_text(insight.sidecar_to_json(sidecar))
    (out_dir / "explanations.csv").write_text(insight.explanations_csv(records))
    written = 3
    if not args.no_figures:
        figures = render_report_figures(sidecar, out_dir)
        written += len(figures)
    print(f"wrote report ({written} file(s)) to {out_dir}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .service import serve

    serve(port=args.port, data_dir=args.data_dir, host=args.host)
    return EXIT_OK


def run(argv=None) -> int:
    parser = _build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(argv, parser)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    required = {
        "score": ("input", "targets", "out"),
        "explain": ("input", "out"),
        "report": ("explanations", "out_dir"),
        "serve": (),
    }
    missing = [
        f"--{name.replace('_', '-')}"
        for name in required[args.command]
        if getattr(args, name, None) in (None, "")
    ]
    if missing:
        print(
            f"usage: predex {args.command}: missing required {', '.join(missing)}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    handlers = {
        "score": _cmd_score,
        "explain": _cmd_explain,
        "report": _cmd_report,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except PredexError as exc:
        _diagnose(args, exc)
        return EXIT_DATA
    except (OSError, ValueError, KeyError) as exc:
        _diagnose(args, exc)
        return EXIT_DATA


def _diagnose(args, exc: Exception):
    if getattr(args, "json", False):
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
    else:
        print(f"predex: {exc}", file=sys.stderr)


def main():  # console entry point
    sys.exit(run())


if __name__ == "__main__":
    main()
