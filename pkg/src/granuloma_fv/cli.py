"""Command-line entry point: ``granuloma-fv {simulate,verify,mms,sweep,functionals}``."""

from __future__ import annotations

import argparse
import csv
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, PositivityError
from .functionals import DIAGNOSTIC_COLUMNS, diagnostics_row
from .io import (
    load_config, output_directory, parse_config, read_state, render_config, write_diagnostics,
)
from .runner import run
from . import verify


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.t_end is not None:
        cfg = replace(cfg, step=replace(cfg.step, t_end=args.t_end))
    directory = Path(args.output) if args.output else output_directory(cfg)
    result = run(cfg, directory, write=True)
    print(f"{len(result.rows)} diagnostics rows, {result.steps} steps "
          f"({result.rejections} rejected) -> {directory}")
    return 0


def _write_report(report, path):
    if path:
        Path(path).write_text(report.to_json() + "\n")


def _cmd_verify(args) -> int:
    kwargs = {}
    if args.catalog and args.suite in ("apriori", "epsilon_limit"):
        scenarios = verify.load_scenarios(sorted(Path(args.catalog).glob("*.toml")))
        if args.suite == "apriori":
            kwargs["scenarios"] = scenarios
        else:
            kwargs["cfg"] = next(iter(scenarios.values()))
    if args.workers and args.suite in ("apriori", "epsilon_limit"):
        kwargs["workers"] = args.workers
    report = verify.run_suite(args.suite, **kwargs)
    print(report.summary())
    _write_report(report, args.report)
    return 0 if report.passed else 1


def _cmd_mms(args) -> int:
    kwargs = {}
    if args.sizes:
        kwargs["sizes"] = tuple(args.sizes)
    report = verify.mms_suite(**kwargs)
    print(report.summary())
    _write_report(report, args.report)
    return 0 if report.passed else 1


def _parse_assignment(text):
    key, sep, values = text.partition("=")
    section, dot, name = key.strip().partition(".")
    if not sep or not dot or not values:
        raise ConfigError(f"--set expects section.key=v1,v2,..., got {text!r}")
    return section, name, [v.strip() for v in values.split(",")]


def _apply(cfg_text, overrides):
    # values are TOML literals; each replaces (or adds) its key inside its section
    lines = cfg_text.splitlines()
    for (section, name), value in overrides.items():
        header = f"[{section}]"
        if header not in lines:
            lines += ["", header]
        start = lines.index(header) + 1
        end = start
        while end < len(lines) and not lines[end].startswith("["):
            end += 1
        block = [ln for ln in lines[start:end] if not ln.split("=")[0].strip() == name]
        block.append(f"{name} = {value}")
        lines = lines[:start] + block + lines[end:]
    return "\n".join(lines) + "\n"


def _sweep_point(job):
    index, text, directory = job
    try:
        cfg = parse_config(text)
        run(cfg, directory, write=True)
        return index, "ok", ""
    except (ConfigError, PositivityError) as err:
        return index, "failed", str(err)


def _cmd_sweep(args) -> int:
    base = load_config(args.config)
    base_text = render_config(base)
    axes = [_parse_assignment(a) for a in args.set]
    keys = [(section, name) for section, name, _ in axes]
    points = list(itertools.product(*(values for _, _, values in axes)))
    root = Path(args.output) if args.output else output_directory(base)
    root.mkdir(parents=True, exist_ok=True)
    jobs = []
    for k, values in enumerate(points):
        text = _apply(base_text, dict(zip(keys, values)))
        jobs.append((k, text, root / f"point_{k:04d}"))
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            outcomes = list(pool.map(_sweep_point, jobs))
    else:
        outcomes = [_sweep_point(job) for job in jobs]
    with open(root / "index.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["point", "directory"] + [f"{s}.{n}" for s, n in keys] + ["status", "message"])
        for (k, status, message), values in zip(outcomes, points):
            writer.writerow([k, f"point_{k:04d}", *(v.strip('"') for v in values), status, message])
    failed = sum(status != "ok" for _, status, _ in outcomes)
    print(f"{len(points)} points, {failed} failed -> {root / 'index.csv'}")
    return 0 if failed == 0 else 1


def _cmd_functionals(args) -> int:
    cfg = load_config(args.config)
    state = read_state(args.snapshot[0] if len(args.snapshot) == 1 else args.snapshot)
    row = diagnostics_row(state, cfg.params, cfg.spec)
    if args.output:
        write_diagnostics([row], args.output)
    else:
        print(",".join(DIAGNOSTIC_COLUMNS))
        print(",".join("%.16e" % v for v in row.values()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="granuloma-fv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--t-end", type=float)
    p.add_argument("--output", help="output directory (overrides [output].directory)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", default="all", choices=sorted(verify.SUITES) + ["all"])
    p.add_argument("--catalog", help="directory of scenario .toml files")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--report", help="write the JSON report here")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("mms", help="manufactured-solution convergence study")
    p.add_argument("--sizes", type=int, nargs="+")
    p.add_argument("--report")
    p.set_defaults(func=_cmd_mms)

    p = sub.add_parser("sweep", help="run a parameter grid, one directory per point")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", required=True, metavar="SECTION.KEY=V1,V2")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("functionals", help="recompute a diagnostics row from snapshots")
    p.add_argument("--config", required=True, help="configuration supplying parameters")
    p.add_argument("--snapshot", nargs="+", required=True,
                   help="the four species snapshots, or one of them (siblings are found)")
    p.add_argument("--output")
    p.set_defaults(func=_cmd_functionals)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PositivityError, FileNotFoundError, ValueError, OSError) as err:
        print(f"granuloma-fv {args.command}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
