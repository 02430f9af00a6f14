"""Command-line driver: ``analyze``, ``simulate`` and ``sweep``.

Exit codes: 0 on success, 2 for bad input (missing or invalid config,
unknown algorithm, malformed sweep file), 1 when output cannot be written.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from .analysis import analysis_curve, maximize_upper_bound, write_analysis_csv
from .config import (
    InvalidConfig,
    NetworkConfig,
    config_hash,
    load_config,
    resolve_field,
    trial_rng,
    validate_config,
)
from .sim import (
    THROTTLING_NOTE,
    Algorithm,
    aggregate,
    run_benchmark,
    run_trial,
    write_aggregate_json,
    write_trials_csv,
)

__all__ = ["main", "SweepSpec", "parse_sweep_spec", "SWEEP_COLUMNS", "SWEEP_PARAMETERS"]

# Sweepable parameters: symbol -> field.
SWEEP_PARAMETERS = {
    "C": "backhaul_capacity",
    "D": "cell_radius",
    "beta": "blockage_beta",
    "P_M": "max_power",
    "delta": "zipf_delta",
    "lambda": "ue_density",
}

SWEEP_COLUMNS = ["param_name", "param_value", "algorithm", "mean_throughput_bps", "ci95",
                 "mean_utilization", "r_plus_bps", "config_sha256"]


class UsageError(Exception):
    """Bad user input; reported on stderr with exit code 2."""


@dataclass(frozen=True)
class SweepSpec:
    parameter: str  # NetworkConfig field name
    values: tuple[float, ...]
    algorithms: tuple[Algorithm, ...]
    trials: int
    output: Path
    seed: int
    base: NetworkConfig

    @property
    def symbol(self) -> str:
        return next(k for k, v in SWEEP_PARAMETERS.items() if v == self.parameter)

    def point_config(self, value: float) -> NetworkConfig:
        # moving D keeps the mean number of UEs per cell (and per drop) fixed
        if self.parameter == "cell_radius":
            return self.base.with_radius(value, hold_ue_count=True)
        return self.base.replace(**{self.parameter: value})


def _parse_sets(pairs: Sequence[str] | None) -> dict[str, str]:
    out = {}
    for p in pairs or ():
        key, sep, value = p.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects KEY=VALUE, got {p!r}")
        out[key.strip()] = value.strip()
    return out


def _load(path: str | None, sets: dict[str, Any] | None = None) -> NetworkConfig:
    if path is not None and not Path(path).is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        return load_config(path, sets)
    except json.JSONDecodeError as exc:
        raise UsageError(f"cannot parse config file {path}: {exc}") from exc
    except InvalidConfig as exc:
        raise UsageError(str(exc)) from exc


def parse_sweep_spec(path: str | Path) -> SweepSpec:
    """Read and check a JSON sweep file; every problem is reported at once.

    Keys: ``parameter`` (C, D, beta, P_M, delta, lambda or the field
    name), ``values``, ``algorithms`` (default all four), ``trials``,
    ``output``, optional ``seed``, ``config`` (path, relative to the sweep
    file) and ``overrides`` (flat mapping applied over the config).
    """
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"sweep file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"cannot parse sweep file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: sweep file must hold a JSON object")

    errors: list[str] = []
    known = {"parameter", "values", "algorithms", "trials", "output", "seed", "config", "overrides"}
    errors += [f"{k}: unknown key" for k in sorted(set(doc) - known)]

    cfg_path = doc.get("config")
    if cfg_path is not None:
        cfg_path = str((path.parent / cfg_path) if not Path(cfg_path).is_absolute() else cfg_path)
    overrides = doc.get("overrides") or {}
    base = None
    if not isinstance(overrides, dict):
        errors.append("overrides: must be an object")
    else:
        try:
            base = _load(cfg_path, overrides)
        except UsageError as exc:
            errors.append(f"config: {exc}")

    field = None
    raw = doc.get("parameter")
    try:
        field = resolve_field(str(raw))
    except KeyError:
        pass
    if field not in SWEEP_PARAMETERS.values():
        errors.append(f"parameter: {raw!r} is not one of {', '.join(SWEEP_PARAMETERS)}")
        field = None

    values = doc.get("values")
    ok_values = (isinstance(values, list) and values
                 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values))
    if not ok_values:
        errors.append("values: must be a nonempty list of numbers")
        values = []

    algs = doc.get("algorithms", [a.value for a in Algorithm])
    parsed: list[Algorithm] = []
    if not isinstance(algs, list) or not algs:
        errors.append("algorithms: must be a nonempty list")
    else:
        for a in algs:
            try:
                parsed.append(Algorithm.parse(a))
            except ValueError as exc:
                errors.append(f"algorithms: {exc}")

    trials = doc.get("trials")
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        errors.append("trials: must be a positive integer")
    output = doc.get("output")
    if not isinstance(output, str) or not output:
        errors.append("output: must be a path string")
    seed = doc.get("seed", base.rng_seed if base else 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        errors.append("seed: must be an unsigned 64-bit integer")

    if base is not None and field is not None:
        for v in values:
            spec = SweepSpec(field, (), (), 1, Path("."), 0, base)
            try:
                validate_config(spec.point_config(float(v)))
            except InvalidConfig as exc:
                errors += [f"values[{v!r}]: {f}: {r}" for f, r in exc.violations]

    if errors:
        raise UsageError("invalid sweep spec:\n  " + "\n  ".join(errors))
    out_path = Path(output)
    if not out_path.is_absolute():
        out_path = path.parent / out_path
    return SweepSpec(field, tuple(float(v) for v in values), tuple(parsed), trials, out_path, seed, base)


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_analyze(args) -> int:
    cfg = _load(args.config, _parse_sets(args.set))
    if args.grid < 1:
        raise UsageError("--grid must be at least 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = analysis_curve(cfg, args.grid)
    best = maximize_upper_bound(cfg)
    write_analysis_csv(rows, out / "analysis.csv", f"config_sha256={config_hash(cfg)}")
    _write_json(out / "summary.json", {
        "config_sha256": config_hash(cfg),
        "P_T_star_watts": best.P_T_star,
        "R_plus_bps": best.R_plus,
        "tau_at_star_bps_hz": best.tau_at_star,
        "hit_ratio_at_star": best.hit_ratio_at_star,
        "cache_utilization": best.cache_utilization,
    })
    print(f"P_T*={best.P_T_star:.4f} W  R+={best.R_plus / 1e9:.3f} Gbit/s  "
          f"utilization={best.cache_utilization:.4f}  -> {out}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load(args.config, _parse_sets(args.set))
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    seed = cfg.rng_seed if args.seed is None else args.seed
    if not 0 <= seed < 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stats = run_benchmark(cfg, args.algorithm, args.trials, seed, workers=args.workers)
    write_trials_csv(stats, out / "trials.csv", cfg)
    write_aggregate_json(stats, out / "aggregate.json", cfg, {"seed": seed})
    print(f"{stats.algorithm}: {stats.trials} trials, mean throughput "
          f"{stats.mean_throughput / 1e9:.3f} +/- {stats.ci95_throughput / 1e9:.3f} Gbit/s  -> {out}")
    return 0


def _sweep_job(job):
    cfg, alg, seed, point, t = job
    return run_trial(cfg, alg, trial_rng(seed, point, t))


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[dict]:
    """Rows of SWEEP_COLUMNS; point i, trial t draws from stream (seed, i, t)."""
    jobs = []
    for i, v in enumerate(spec.values):
        cfg = spec.point_config(v)
        for alg in spec.algorithms:
            jobs += [(cfg, alg, spec.seed, i, t) for t in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_job, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        results = [_sweep_job(j) for j in jobs]

    rows = []
    k = 0
    for v in spec.values:
        cfg = spec.point_config(v)
        r_plus = maximize_upper_bound(cfg).R_plus
        for alg in spec.algorithms:
            st = aggregate(results[k:k + spec.trials], cfg)
            k += spec.trials
            rows.append({
                "param_name": spec.symbol,
                "param_value": v,
                "algorithm": alg.value,
                "mean_throughput_bps": st.mean_throughput,
                "ci95": st.ci95_throughput,
                "mean_utilization": st.mean_utilization,
                "r_plus_bps": r_plus,
                "config_sha256": config_hash(cfg),
            })
    return rows


def cmd_sweep(args) -> int:
    spec = parse_sweep_spec(args.spec)
    out = Path(args.out) if args.out else spec.output
    rows = run_sweep(spec, workers=args.workers)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_sha256={config_hash(spec.base)} seed={spec.seed} trials={spec.trials}\n")
        fh.write(f"# backhaul: {THROTTLING_NOTE}\n")
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(r[k]) if isinstance(r[k], float) else r[k] for k in SWEEP_COLUMNS})
    print(f"{len(rows)} rows -> {out}")
    return 0


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fiwicache", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH", help="flat JSON config; defaults for missing keys")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field (name or symbol, e.g. C=1e10); repeatable")

    a = sub.add_parser("analyze", help="analytic curves and the throughput bound")
    common(a)
    a.add_argument("--grid", type=int, default=50, metavar="N", help="P_T grid points (default 50)")
    a.add_argument("--out", default="analysis_out", metavar="DIR")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="Monte Carlo run of one allocator")
    common(s)
    s.add_argument("--algorithm", default=Algorithm.VABWF_DP.value, type=str.lower,
                   choices=[x.value for x in Algorithm], metavar="NAME",
                   help="one of: " + ", ".join(x.value for x in Algorithm))
    s.add_argument("--trials", type=int, default=200, metavar="N")
    s.add_argument("--seed", type=_u64, default=None, metavar="U64",
                   help="base seed (default: the config's rng_seed)")
    s.add_argument("--out", default="simulate_out", metavar="DIR")
    s.add_argument("--workers", type=int, default=1, metavar="N")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="parameter sweep from a JSON spec")
    w.add_argument("spec", metavar="SPEC", help="sweep JSON file")
    w.add_argument("--out", default=None, metavar="PATH", help="CSV path (overrides the spec's output)")
    w.add_argument("--workers", type=int, default=1, metavar="N")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fiwicache {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"fiwicache {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
