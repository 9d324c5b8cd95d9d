"""Run every shipped config with each of its strategies, then build the report.

    python3 scripts/reproduce.py [--out runs] [--jobs 1]

Each (config, strategy) pair writes to ``<out>/<config>/<strategy>``; the
report (charts plus final-value table) goes to ``<out>/report``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from efeacq import cli

ROOT = Path(__file__).resolve().parents[1]

PLAN = {
    "csi-localization": ("aif", "eig", "greedy", "random"),
    "csi-wind": ("aif", "eig", "greedy", "random"),
    "csi-sources": ("aif", "eig", "greedy", "random"),
    "tas": ("aif", "eig", "greedy", "random"),
    "composite-vehicle": ("full", "g+gIG", "g-only", "random"),
    "composite-grid": ("full", "g+gIG", "g-only", "random"),
}


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--only", nargs="*", choices=sorted(PLAN), help="subset of configs")
    args = p.parse_args(argv)
    out = Path(args.out)
    status = 0
    for name in args.only or PLAN:
        for strategy in PLAN[name]:
            code = cli.main(["run", "--config", str(ROOT / "configs" / f"{name}.yaml"),
                             "--out", str(out / name / strategy), "--jobs", str(args.jobs),
                             "--set", f"strategy={strategy}"])
            status = max(status, code)
    status = max(status, cli.main(["report", str(out)]))
    return status


if __name__ == "__main__":
    sys.exit(main())
