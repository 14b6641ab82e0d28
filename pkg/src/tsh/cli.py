"""Command-line front end: ``tsh run | sweep | thresholds | verify``.

Exit codes: 0 success, 1 invalid configuration or failed verification,
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path
from typing import Sequence

from .bandit import ProblemInstance
from .errors import DomainError
from .harness import (
    ExperimentConfig,
    RegretCurve,
    geometric_checkpoints,
    linear_checkpoints,
    run_experiment,
    sweep_h,
)
from .policy import PolicyConfig, SelectionMode
from . import theory

SCHEMA_VERSION = "1.0"
CURVE_COLUMNS = ("t", "mean_regret", "stderr", "runs")
SUMMARY_COLUMNS = ("h", "final_regret_mean", "stderr", "log_slope", "power_exponent", "predicted_regime")
LONG_COLUMNS = ("h", "t", "mean_regret", "stderr")

SUITES = ("lemma3", "fact2", "lemma4", "chernoff", "lemma567", "exceedance")


class ConfigError(Exception):
    """Flags parsed but describe an invalid experiment."""


def fmt(value: float | None) -> str:
    if value is None:
        return ""
    return f"{value:.12g}"


def _json_default(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default, allow_nan=False)


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------


def parse_mu(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"--mu expects a comma-separated list of numbers, got {text!r}") from None


def parse_checkpoints(spec: str, horizon: int) -> tuple[int, ...]:
    if spec == "geometric":
        return geometric_checkpoints(horizon)
    if spec.startswith("linear:"):
        try:
            count = int(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad checkpoint spec {spec!r}") from None
        return linear_checkpoints(horizon, count)
    raise ConfigError(f"--checkpoints must be 'geometric' or 'linear:<k>', got {spec!r}")


def parse_h_grid(spec: str) -> list[float]:
    """``start:stop:step`` with both ends included."""
    try:
        start, stop, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise ConfigError(f"--h-grid expects start:stop:step, got {spec!r}") from None
    if step <= 0.0:
        raise ConfigError("--h-grid step must be positive")
    if stop < start:
        raise ConfigError(f"--h-grid is empty: {spec!r}")
    count = math.floor((stop - start) / step + 1e-9) + 1
    return [round(start + i * step, 12) for i in range(count)]


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.from_envelope:
        envelope = json.loads(Path(args.from_envelope).read_text())
        return ExperimentConfig.from_dict(envelope["config"])
    if args.mu is None:
        raise ConfigError("--mu is required (or --from-envelope)")
    mode = SelectionMode.POSTERIOR_DRAW_BASELINE if args.mode == "baseline" else SelectionMode.EXACT_PROBABILITY
    return ExperimentConfig(
        instance=ProblemInstance(parse_mu(args.mu)),
        policy=PolicyConfig(args.h, mode),
        horizon=args.horizon,
        runs=args.runs,
        master_seed=args.seed,
        checkpoints=parse_checkpoints(args.checkpoints, args.horizon),
    )


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------


def curve_csv(curve: RegretCurve) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_COLUMNS)
    for t, m, se in zip(curve.t, curve.mean, curve.stderr):
        writer.writerow((int(t), fmt(m), fmt(se), curve.runs))
    return buf.getvalue()


def curve_payload(curve: RegretCurve) -> list[dict]:
    return [
        {"t": int(t), "mean_regret": float(m), "stderr": float(se), "runs": curve.runs}
        for t, m, se in zip(curve.t, curve.mean, curve.stderr)
    ]


def envelope(command: str, config: dict, results, started: float) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "results": results,
        "wall_time": time.perf_counter() - started,
    }


GNUPLOT_TEMPLATE = """\
# gnuplot script for {long}
set datafile separator ','
set key autotitle columnhead
set logscale x
set xlabel 't'
set ylabel 'mean cumulative pseudo-regret'
plot for [h in "{hs}"] '{long}' using ($1 == h+0 ? $2 : 1/0):3 with linespoints title sprintf('h=%s', h)
"""


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    config = build_config(args)
    curve = run_experiment(config)
    text = curve_csv(curve)
    env = envelope("run", config.to_dict(), {"curve": curve_payload(curve)}, started)
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        env["results"]["csv"] = out.name
        out.with_suffix(".json").write_text(_dump(env) + "\n")
    if args.json:
        print(_dump(env))
    elif not args.out:
        sys.stdout.write(text)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    base = build_config(args)
    hs = parse_h_grid(args.h_grid)
    rows = sweep_h(base, hs)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)

    summary = io.StringIO()
    summary_writer = csv.writer(summary, lineterminator="\n")
    summary_writer.writerow(SUMMARY_COLUMNS)
    long = io.StringIO()
    long_writer = csv.writer(long, lineterminator="\n")
    long_writer.writerow(LONG_COLUMNS)
    results = []
    for row in rows:
        curve = row.curve
        name = f"curve_h{fmt(row.h)}.csv"
        (out_dir / name).write_text(curve_csv(curve))
        predicted = None if row.predicted is None else str(row.predicted)
        summary_writer.writerow((
            fmt(row.h), fmt(curve.mean[-1]), fmt(curve.stderr[-1]),
            fmt(row.log_slope), fmt(row.power_exponent), predicted or "",
        ))
        for t, m, se in zip(curve.t, curve.mean, curve.stderr):
            long_writer.writerow((fmt(row.h), int(t), fmt(m), fmt(se)))
        results.append({
            "h": row.h,
            "csv": name,
            "config": row.config.to_dict(),
            "log_slope": row.log_slope,
            "power_exponent": row.power_exponent,
            "predicted_regime": predicted,
        })
    (out_dir / "summary.csv").write_text(summary.getvalue())
    (out_dir / "long.csv").write_text(long.getvalue())
    (out_dir / "plot.gp").write_text(
        GNUPLOT_TEMPLATE.format(long="long.csv", hs=" ".join(fmt(h) for h in hs))
    )
    config = base.to_dict()
    config["h_grid"] = hs
    env = envelope("sweep", config, {"rows": results}, started)
    (out_dir / "sweep.json").write_text(_dump(env) + "\n")
    if args.json:
        print(_dump(env))
    else:
        sys.stdout.write(summary.getvalue())
    return 0


def cmd_thresholds(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    if not args.mu1 > args.mu2:
        raise ConfigError(f"need mu1 > mu2, got mu1={args.mu1}, mu2={args.mu2}")
    report = theory.threshold_report(args.mu1, args.mu2, args.h, args.horizon)
    config = {"mu1": args.mu1, "mu2": args.mu2, "h": args.h, "horizon": args.horizon}
    print(_dump(envelope("thresholds", config, report.to_dict(), started)))
    return 0


def _run_suite(name: str) -> theory.VerificationReport:
    return {
        "lemma3": theory.verify_lemma3,
        "fact2": theory.verify_fact2,
        "lemma4": theory.verify_lemma4,
        "chernoff": theory.verify_chernoff,
        "lemma567": theory.verify_lemma567,
        "exceedance": theory.verify_exceedance,
    }[name]()


def cmd_verify(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    names = SUITES if args.suite == "all" else (args.suite,)
    reports = [_run_suite(n) for n in names]
    # keep stdout pure JSON when the report is streamed there
    table = sys.stderr if args.json and not args.out else sys.stdout
    print(f"{'suite':<12} {'points':>9} {'violations':>10} {'max_residual':>16}  status", file=table)
    for r in reports:
        status = "PASS" if r.ok else "FAIL"
        print(f"{r.suite:<12} {r.n_points:>9} {r.n_violations:>10} {fmt(r.max_residual):>16}  {status}",
              file=table)
    if args.json:
        target = open(args.out, "w") if args.out else sys.stdout
        try:
            target.write('{"schema_version": "%s", "command": "verify", "suites": {' % SCHEMA_VERSION)
            for i, r in enumerate(reports):
                target.write(", " if i else "")
                target.write(json.dumps(r.suite) + ": ")
                r.write_json(target)
            target.write('}, "wall_time": %s}\n' % json.dumps(time.perf_counter() - started))
        finally:
            if target is not sys.stdout:
                target.close()
    return 0 if all(r.ok for r in reports) else 1


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mu", help="comma-separated arm means, optimal arm first")
    p.add_argument("--h", type=float, default=1.0, help="selection exponent (default 1)")
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--checkpoints", default="geometric", help="geometric | linear:<k>")
    p.add_argument("--mode", choices=("exact", "baseline"), default="exact",
                   help="exact selection probabilities or posterior-draw argmax")
    p.add_argument("--from-envelope", help="re-run the config embedded in a JSON envelope")
    p.add_argument("--json", action="store_true", help="print the JSON envelope to stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsh", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Monte Carlo regret curve for one h")
    _add_run_flags(p)
    p.add_argument("--out", help="CSV path; the JSON envelope goes next to it")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="regret curves over a grid of h")
    _add_run_flags(p)
    p.add_argument("--h-grid", required=True, help="start:stop:step (inclusive)")
    p.add_argument("--out", help="output directory (default: current directory)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("thresholds", help="analysis quantities and regime for (mu1, mu2, h)")
    p.add_argument("--mu1", type=float, required=True)
    p.add_argument("--mu2", type=float, required=True)
    p.add_argument("--h", type=float)
    p.add_argument("--horizon", type=int, help="horizon T for the phase length N")
    p.add_argument("--json", action="store_true", help="accepted for symmetry; output is always JSON")
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("verify", help="numeric checks of the supporting lemmas")
    p.add_argument("--suite", choices=("all",) + SUITES, default="all")
    p.add_argument("--json", action="store_true", help="emit per-grid-point records")
    p.add_argument("--out", help="file for the --json report (default stdout)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"tsh {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
