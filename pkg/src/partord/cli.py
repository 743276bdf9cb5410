"""Command line: ``run``, ``sweep``, ``verify`` and ``demo``.

Exit codes: 0 success or pass, 1 verifier violation, 2 bad input (config,
trace or arguments), 3 simulation failure (stall, event limit).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import config as cfgmod
from .simnet import ConfigError, SimulationError, run as simulate
from .trace import MalformedTrace, Trace
from .verifier import CONDITIONS, check

FIXED_COLUMNS = ["seed", "delivered", "postponed_total", "postponed_max", "pulses_max"]


def _resolve(spec: list[str]) -> tuple[str, list[dict]]:
    """A config file path, a demo name, or ``demo <name>``."""
    if len(spec) == 2 and spec[0] == "demo":
        return spec[1], cfgmod.demo(spec[1])
    if len(spec) != 1:
        raise ConfigError("config: expected a file path, a demo name, or 'demo <name>'")
    p = Path(spec[0])
    if p.is_file():
        return p.stem, [cfgmod.load(p)]
    if spec[0] in cfgmod.DEMOS:
        return spec[0], cfgmod.demo(spec[0])
    raise ConfigError(f"config: no such file or demo {spec[0]!r}")


def _run_one(cfg: dict, seed: int | None = None):
    return simulate(cfgmod.build(cfg, seed))


def _emit(name: str, cfgs: list[dict], out: Path | None, seed: int | None, quiet: bool = False):
    results = []
    for v, cfg in enumerate(cfgs):
        trace, report = _run_one(cfg, seed)
        tag = name if len(cfgs) == 1 else f"{name}.{v + 1}"
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{tag}.trace.jsonl").write_text(trace.dumps())
            (out / f"{tag}.report.txt").write_text(report.to_text())
        if not quiet:
            if len(cfgs) > 1:
                print(f"# {tag}")
            sys.stdout.write(report.to_text())
        results.append((tag, trace, report))
    return results


def cmd_run(args) -> int:
    name, cfgs = _resolve(args.config)
    _emit(name, cfgs, Path(args.out) if args.out else None, args.seed)
    return 0


def _parse_seeds(text: str) -> range:
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise ConfigError(f"--seeds: expected a..b, got {text!r}") from None
    if hi < lo:
        raise ConfigError(f"--seeds: empty range {text!r}")
    return range(lo, hi + 1)


def _sweep_row(job):
    cfg, seed = job
    _, report = _run_one(cfg, seed)
    d = report.as_dict()
    row = {"seed": seed}
    for k in FIXED_COLUMNS[1:]:
        row[k] = d[k]
    for k, v in report.app.items():
        if isinstance(v, (int, float, str, bool)):
            row[k] = v
    return row


def cmd_sweep(args) -> int:
    name, cfgs = _resolve(args.config)
    seeds = _parse_seeds(args.seeds)
    jobs = [(cfg, s) for cfg in cfgs for s in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_sweep_row, jobs, chunksize=8))
    else:
        rows = [_sweep_row(j) for j in jobs]
    if len(cfgs) > 1:
        for k, row in enumerate(rows):
            row["variant"] = k // len(seeds) + 1
    cols = (["variant"] if len(cfgs) > 1 else []) + FIXED_COLUMNS
    cols += [k for k in rows[0] if k not in cols]
    fp = open(args.csv, "w", newline="") if args.csv else sys.stdout
    try:
        w = csv.DictWriter(fp, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    finally:
        if fp is not sys.stdout:
            fp.close()
    return 0


def _parse_params(items: list[str]) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise MalformedTrace(f"--params: expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def cmd_verify(args) -> int:
    try:
        with open(args.trace) as fp:
            trace = Trace.read(fp)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    params = _parse_params(args.params)
    worst = 0
    for cond in args.condition.split(","):
        res = check(trace, cond.strip(), params)
        print(res)
        worst = max(worst, 0 if res.ok else 1)
    return worst


def cmd_demo(args) -> int:
    cfgs = cfgmod.demo(args.name)
    results = _emit(args.name, cfgs, Path(args.out) if args.out else None, None,
                    quiet=len(cfgs) > 1)
    if len(cfgs) > 1:
        print(f"{'variant':<18}{'delays':<20}{'delivered':>10}{'postponed':>10}{'pulses_max':>11}")
        for (tag, _, rep), cfg in zip(results, cfgs):
            d = cfg["ordering"]["delays"]
            label = f"rho={d['rho']} delta={d['delta']}"
            print(f"{tag:<18}{label:<20}{rep.delivered:>10}{rep.postponed_total:>10}{rep.pulses_max:>11}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="partord", description="Ordered delivery simulator and trace verifier")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run one configuration")
    r.add_argument("config", nargs="+", help="config file, demo name, or 'demo <name>'")
    r.add_argument("--seed", type=int, default=None, help="override the config seed")
    r.add_argument("--out", default=None, help="directory for <name>.trace.jsonl and <name>.report.txt")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a seed range and write per-seed metrics as CSV")
    s.add_argument("config", nargs="+")
    s.add_argument("--seeds", required=True, help="inclusive range a..b")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--csv", default=None, help="output file (default stdout)")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="check a trace against a delivery condition")
    v.add_argument("trace")
    v.add_argument("--condition", required=True,
                   help="one or more of " + ", ".join(CONDITIONS) + " (comma separated)")
    v.add_argument("--params", nargs="*", default=[], help="key=value overrides, e.g. mu=1 delta=2")
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("demo", help="run a bundled configuration")
    d.add_argument("name", choices=sorted(cfgmod.DEMOS))
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_demo)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MalformedTrace, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
