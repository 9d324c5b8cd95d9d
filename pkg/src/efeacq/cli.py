"""Command-line entry point: ``run``, ``sweep``, ``report`` and ``verify``.

Exit codes: 0 success, 1 a run or check failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from . import harness, report, verify
from .errors import ConfigError, DomainError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("efeacq")


def _load(args, extra=()):
    cfg = harness.load_config(args.config, [*args.set, *extra])
    if args.seed_offset:
        cfg = harness.config_from_dict({**cfg.as_dict(),
                                        "seeds": [s + args.seed_offset for s in cfg.seeds]})
    return cfg


def _execute(cfg, out: Path, jobs: int) -> bool:
    traces = harness.run(cfg, jobs=jobs)
    harness.write_outputs(cfg, traces, out)
    bad = [t for t in traces if t.status != "ok"]
    for t in bad:
        print(f"seed {t.seed} aborted: {t.diagnostic}", file=sys.stderr)
    return not bad


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out or cfg.out)
    ok = _execute(cfg, out, args.jobs)
    print(f"wrote {len(cfg.seeds)} traces for {cfg.label}/{cfg.strategy} to {out}")
    return EXIT_OK if ok else EXIT_FAIL


def parse_sweep(axes_args) -> list[tuple[str, list]]:
    axes = []
    for arg in axes_args:
        if "=" not in arg:
            raise ConfigError(f"sweep argument {arg!r} is not key=v1,v2,...")
        key, values = arg.split("=", 1)
        items = [v for v in values.split(",") if v.strip()]
        if not items:
            raise ConfigError(f"sweep over {key!r} has no values")
        if key not in harness.FIELD_NAMES | {"lambda"} and not key.startswith("env."):
            raise ConfigError(f"unknown sweep key {key!r}")
        axes.append((key, [v.strip() for v in items]))
    if not axes:
        raise ConfigError("sweep needs at least one --sweep key=values")
    return axes


def _cell(payload):
    cfg, out, jobs = payload
    return _execute(cfg, out, jobs)


def cmd_sweep(args) -> int:
    axes = parse_sweep(args.sweep)
    cells = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        sets = [f"{k}={v}" for (k, _), v in zip(axes, combo)]
        cfg = _load(args, sets)
        sub = "_".join(s.replace("/", "-") for s in sets)
        cells.append((cfg, Path(args.out or cfg.out) / sub, 1))
    if args.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_cell, cells))
    else:
        results = [_cell(c) for c in cells]
    print(f"ran {len(cells)} sweep cells")
    return EXIT_OK if all(results) else EXIT_FAIL


def cmd_report(args) -> int:
    try:
        paths = report.write_report(args.directory, args.out)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print((Path(paths[-1])).read_text(), end="")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify.run_all(seed=args.seed)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="efeacq", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("--config", required=True)
        sp.add_argument("--out")
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        sp.add_argument("--seed-offset", type=int, default=0)

    sp = sub.add_parser("run", help="run every seed of one config")
    common(sp)
    sp.set_defaults(func=cmd_run)
    sp = sub.add_parser("sweep", help="run the cross product of config overrides")
    common(sp)
    sp.add_argument("--sweep", action="append", default=[], metavar="KEY=V1,V2")
    sp.set_defaults(func=cmd_sweep)
    sp = sub.add_parser("report", help="charts and final-value table from summaries")
    sp.add_argument("directory")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)
    sp = sub.add_parser("verify", help="numerical identity checks")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, yaml.YAMLError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
