"""Command-line runner: ``treelocal <experiment> --config <path> [--key value ...]``.

Exit status is 0 when every embedded verdict passes, 1 when any fails and
2 on usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from treelocal import __version__
from treelocal.errors import DomainError
from treelocal.experiments import RECIPES, ExperimentConfig, Result, run_experiment
from treelocal.serialize import write_table
from treelocal.stats import REPORT_COLUMNS

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def build_id() -> str:
    """Hash of the package sources, stable for a given checkout."""
    h = hashlib.sha1()
    for path in sorted(Path(__file__).parent.glob("*.py")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()[:12]


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _overrides(extra: list[str]) -> dict:
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise DomainError(f"unexpected argument {tok!r}")
        key, eq, val = tok[2:].partition("=")
        if not eq:
            if i + 1 >= len(extra):
                raise DomainError(f"missing value for --{key}")
            val = extra[i + 1]
            i += 1
        out[key.replace("-", "_")] = _parse_value(val)
        i += 1
    return out


def load_config(experiment: str, path: str | None, extra: list[str]) -> ExperimentConfig:
    params = {}
    if path:
        try:
            params = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DomainError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(params, dict):
            raise DomainError("config file must hold a JSON object")
        params.pop("experiment", None)
    params.update(_overrides(extra))
    return ExperimentConfig(experiment, params)


def write_outputs(config: ExperimentConfig, result: Result, wall_time: float) -> list[Path]:
    outdir = Path(config["outdir"])
    outdir.mkdir(parents=True, exist_ok=True)
    stem = f"{config.experiment}-{config['seed']}"
    # scheduling keys do not affect results and stay out of the data files
    params = {k: v for k, v in config.items() if k not in ("workers", "outdir")}
    header = json.dumps({"experiment": config.experiment, "version": __version__, "config": params}, sort_keys=True)
    written = []
    for name, table in result.tables.items():
        path = outdir / (f"{stem}.csv" if name == "main" else f"{stem}.{name}.csv")
        write_table(path, table.columns, table.rows, header=header)
        written.append(path)
    rpath = outdir / f"{stem}.reports.csv"
    write_table(rpath, REPORT_COLUMNS, ([r.row()[c] for c in REPORT_COLUMNS] for r in result.reports), header=header)
    written.append(rpath)
    meta = {
        "experiment": config.experiment,
        "config": dict(config),
        "version": __version__,
        "build_id": build_id(),
        "wall_time_s": wall_time,
        "passed": result.passed,
        "reports": [r.row() for r in result.reports],
        "files": [p.name for p in written],
    }
    mpath = outdir / f"{stem}.meta.json"
    mpath.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    written.append(mpath)
    return written


def run(config: ExperimentConfig, quiet: bool = False) -> int:
    t0 = time.perf_counter()
    result = run_experiment(config)
    write_outputs(config, result, time.perf_counter() - t0)
    if not quiet:
        for r in result.reports:
            print(r.line())
    return EXIT_PASS if result.passed else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="treelocal",
        description="Run a simulation experiment and write CSV/JSON results.",
        epilog="experiments: " + ", ".join(RECIPES),
    )
    parser.add_argument("experiment", help="experiment name")
    parser.add_argument("--config", help="JSON file of parameters")
    parser.add_argument("--quiet", action="store_true", help="do not print verdicts")
    parser.add_argument("--show-config", action="store_true", help="print the resolved configuration and exit")
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        config = load_config(args.experiment, args.config, extra)
    except DomainError as exc:
        print(f"treelocal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.show_config:
        print(json.dumps(dict(config), indent=2, sort_keys=True))
        return EXIT_PASS
    try:
        return run(config, quiet=args.quiet)
    except DomainError as exc:
        print(f"treelocal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
