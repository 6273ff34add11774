"""Command-line entry point: ``dtlab trials | grid | plot``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from dtlab import experiments, plot
from dtlab.errors import DtlabError, FormatError, InvalidDomainError, InvalidParameterError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

_CONFIG_FLAGS = ("tester", "n", "eps", "ell", "mem_bits", "buckets", "samples", "trials", "seed",
                 "instance", "instance_file", "jobs")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags given here override it")
    p.add_argument("--tester", choices=experiments.TESTERS)
    p.add_argument("--n", help="domain size (domain elements, not pairs); 2^14 style accepted")
    p.add_argument("--eps", help="distance parameter in (0, 1]")
    p.add_argument("--ell", help="samples per player (distributed testers)")
    p.add_argument("--mem-bits", dest="mem_bits", help="memory budget in bits (streaming-uniformity)")
    p.add_argument("--buckets", help="hash buckets m (closeness-memory)")
    p.add_argument("--samples", help="total sample override (central-bipartite, streaming-uniformity)")
    p.add_argument("--trials")
    p.add_argument("--seed", help="master seed")
    p.add_argument("--instance", choices=experiments.INSTANCES)
    p.add_argument("--instance-file", dest="instance_file", help="probabilities for custom-file")
    p.add_argument("--jobs", help="worker processes")
    p.add_argument("--out", help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dtlab", description="Resource-accounted distribution testing experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    trials = sub.add_parser("trials", help="run seeded trials of one tester and report error rates")
    _add_config_flags(trials)
    grid = sub.add_parser("grid", help="sweep two parameters and write one CSV row per cell")
    _add_config_flags(grid)
    grid.add_argument("--axis1", required=True, help="NAME=v1,v2,... (varies slowest)")
    grid.add_argument("--axis2", required=True, help="NAME=v1,v2,...")
    pl = sub.add_parser("plot", help="render a result CSV as SVG")
    pl.add_argument("csv", help="table written by trials or grid")
    pl.add_argument("--kind", choices=plot.KINDS, default="frontier")
    pl.add_argument("--linear", action="store_true", help="linear instead of log2 axes")
    pl.add_argument("--out", help="SVG path (default: stdout)")
    return parser


def _config(args, swept=()) -> experiments.ExperimentConfig:
    # A swept field need not be given separately; its first value stands in.
    values = {name: vals[0] for name, vals in swept}
    if args.config:
        try:
            values.update(experiments.read_config_file(args.config))
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
    for name in _CONFIG_FLAGS:
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    return experiments.config_from_mapping(values)


def _axis(spec: str) -> tuple[str, list]:
    if "=" not in spec:
        raise UsageError(f"axis must look like NAME=v1,v2,...; got {spec!r}")
    name, raw = spec.split("=", 1)
    name = name.strip().replace("-", "_")
    if name not in experiments.GRID_AXES:
        raise UsageError(f"cannot sweep {name!r}; choose from {', '.join(experiments.GRID_AXES)}")
    items = [s for s in raw.split(",") if s.strip()]
    if not items:
        raise UsageError(f"axis {name} has no values")
    try:
        values = [experiments.coerce_value(name, s.strip()) for s in items]
    except InvalidParameterError as exc:
        raise UsageError(str(exc)) from None
    return name, values


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _summary(r: experiments.TrialReport) -> str:
    c = r.config
    parts = [
        f"{c.tester} n={c.n} eps={c.eps:g} instance={c.instance} trials={r.trials}",
        f"accepts={r.accepts} rejects={r.rejects}",
        f"error={r.error_rate:.4f} [{r.err_lo:.4f}, {r.err_hi:.4f}]",
        "reliable" if r.is_reliable else "unreliable",
    ]
    if r.out_of_regime:
        parts.append(f"unproven regime in {r.out_of_regime} runs")
    return "  ".join(parts) + "\n"


def _run(args) -> int:
    if args.command == "plot":
        try:
            text = Path(args.csv).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {args.csv}: {exc}") from None
        _write(args.out, plot.emit_plot(text, args.kind, log=not args.linear))
        return EXIT_OK
    if args.command == "trials":
        config = _config(args)
        report = experiments.run_trials(config)
        if args.out:
            _write(args.out, experiments.reports_to_csv([report]))
            sys.stderr.write(_summary(report))
        else:
            sys.stdout.write(_summary(report))
        return EXIT_OK
    a1, a2 = _axis(args.axis1), _axis(args.axis2)
    config = _config(args, (a1, a2))
    result = experiments.tradeoff_grid(config, a1, a2)
    _write(args.out, experiments.reports_to_csv(result.reports))
    if args.out:
        resources = sorted({v for name, vals in (a1, a2) for v in vals
                            if name in ("mem_bits", "buckets", "ell")})
        if resources:
            ref = Path(args.out).with_suffix(".ref.csv")
            ref.write_text(experiments.reference_curves(config.n, config.eps, resources))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except (UsageError, InvalidParameterError, InvalidDomainError) as exc:
        print(f"dtlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"dtlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE if args.command == "plot" else EXIT_RUNTIME
    except (DtlabError, OSError) as exc:
        print(f"dtlab: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
