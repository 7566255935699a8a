"""Command-line interface: analyze, simulate, sweep, optimize, validate.

Exit codes: 0 ok, 1 validation failed, 2 usage error, 3 divergent
configuration, 4 simulation produced too few receptions.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction

from . import __version__
from .analytic import FIXED_DEFECTS, PRINTED_DEFECTS, RANDOM_DEFECTS, analyze
from .config import ExponentialDeadline, FixedDeadline, InfiniteDeadline, ServiceModel, SystemConfig
from .errors import AoiError, ConfigError, DivergenceError, SimulationDivergenceError

EXIT_OK, EXIT_VALIDATION, EXIT_USAGE, EXIT_DIVERGENT, EXIT_SIM_DIVERGENT = 0, 1, 2, 3, 4

# Stable column order; new columns may only ever be appended.
CSV_COLUMNS = (
    "policy", "n", "k", "service_rate", "service_shift", "deadline_param", "engine",
    "average_aoi", "peak_aoi", "p_success", "e_w", "e_xs", "e_that", "ci_aoi",
    "ci_peak", "error",
)


class UsageError(Exception):
    pass


# ---- parsing helpers -------------------------------------------------------

def parse_number(text):
    """Float from a decimal or a ``p/q`` fraction such as ``1/3``."""
    try:
        value = float(Fraction(text.strip())) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a number: {text!r}") from None
    if math.isnan(value):
        raise UsageError(f"not a number: {text!r}")
    return value


def parse_deadline(text, shift):
    """``none``, ``fixed:<T_D>`` or ``exp:<mean>`` into a deadline policy."""
    text = text.strip()
    if text == "none":
        return InfiniteDeadline()
    kind, sep, arg = text.partition(":")
    if not sep or kind not in ("fixed", "exp"):
        raise UsageError(f"deadline must be none, fixed:<T_D> or exp:<mean>, got {text!r}")
    value = parse_number(arg)
    if kind == "fixed":
        if value <= shift:
            raise DivergenceError(f"deadline <= service shift ({value!r} <= {shift!r})")
        return FixedDeadline(value)
    return ExponentialDeadline.from_mean(value, shift)


def _number(text):
    try:
        return parse_number(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _bracket(text):
    lo, sep, hi = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"bracket must be lo:hi, got {text!r}")
    return _number(lo), _number(hi)


# ---- manifest and output ---------------------------------------------------

def _timestamp(enabled):
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
    if enabled:
        return datetime.now(timezone.utc).isoformat()
    return None


def build_manifest(args, seeds=()):
    # workers and output never change the result, so they are not echoed
    params = {k: v for k, v in sorted(vars(args).items())
              if k not in ("func", "timestamp", "command", "workers", "output")}
    return {
        "subcommand": args.command,
        "parameters": _jsonable(params),
        "tool_version": __version__,
        "seeds": list(seeds),
        "timestamp": _timestamp(getattr(args, "timestamp", False)),
        "format": getattr(args, "format", "json"),
    }


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isfinite(obj):
            return obj
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def dump_json(manifest, payload):
    return json.dumps({"manifest": manifest, "report": _jsonable(payload)},
                      indent=2, allow_nan=False) + "\n"


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    return str(value)


def csv_text(manifest, rows):
    buf = io.StringIO()
    for key, value in manifest.items():
        buf.write(f"# {key}: {json.dumps(_jsonable(value), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def config_columns(config):
    return {
        "policy": config.policy,
        "n": config.num_devices,
        "k": config.threshold,
        "service_rate": config.service.rate,
        "service_shift": config.service.shift,
        "deadline_param": config.deadline_param(),
    }


def analytic_row(report):
    m = report.moments
    return {
        **config_columns(report.config),
        "engine": "analytic",
        "average_aoi": report.average_aoi,
        "peak_aoi": report.average_peak_aoi,
        "p_success": report.cases.p_success,
        "e_w": m.e_w,
        "e_xs": m.e_xs,
        "e_that": m.e_that,
    }


def simulation_row(result):
    return {
        **config_columns(result.config),
        "engine": "simulation",
        "average_aoi": result.average_aoi,
        "peak_aoi": result.average_peak_aoi,
        "p_success": result.success_fraction,
        "e_w": result.mean_wait,
        "e_xs": result.mean_success_intergen,
        "e_that": result.mean_service,
        "ci_aoi": result.ci_halfwidth_aoi,
        "ci_peak": result.ci_halfwidth_peak,
    }


def _emit(args, text):
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---- subcommands -----------------------------------------------------------

def _system(args):
    service = ServiceModel(args.service_rate, args.service_shift)
    return SystemConfig(args.n, args.k, service, parse_deadline(args.deadline, args.service_shift))


def cmd_analyze(args):
    report = analyze(_system(args))
    manifest = build_manifest(args)
    if args.format == "csv":
        _emit(args, csv_text(manifest, [analytic_row(report)]))
    else:
        _emit(args, dump_json(manifest, report.to_dict()))
    return EXIT_OK


def _sim_config(args):
    from .simulator import SimConfig

    return SimConfig(num_updates=args.updates, seed=args.seed, tracked_device=args.tracked_device,
                     num_batches=args.batches, replications=args.replications)


def cmd_simulate(args):
    from .simulator import simulate, write_event_log

    config, sim = _system(args), _sim_config(args)
    result = simulate(config, sim, workers=args.workers)
    if args.event_log:
        with open(args.event_log, "w", encoding="utf-8", newline="") as fh:
            write_event_log(config, sim, fh)
    manifest = build_manifest(args, seeds=[sim.seed])
    if args.format == "csv":
        _emit(args, csv_text(manifest, [simulation_row(result)]))
    else:
        _emit(args, dump_json(manifest, result.to_dict()))
    return EXIT_OK


def cmd_optimize(args):
    from .optimizer import OptimizeSpec, optimize_deadline

    lo, hi = args.bracket
    if lo <= args.service_shift:
        raise ConfigError(f"bracket low {lo!r} must exceed the service shift {args.service_shift!r}")
    objective = {"average": "average_aoi", "peak": "average_peak_aoi"}.get(args.objective, args.objective)
    spec = OptimizeSpec(objective=objective,
                        policy_kind="fixed" if args.policy == "fixed" else "random-mean",
                        bracket=(lo, hi), tolerance=args.tol, grid_prescan_points=args.prescan)
    template = SystemConfig(args.n, args.k, ServiceModel(args.service_rate, args.service_shift))
    result = optimize_deadline(template, spec)
    _emit(args, dump_json(build_manifest(args), result.to_dict()))
    return EXIT_OK


# ---- sweep files -----------------------------------------------------------

@dataclass
class SweepPlan:
    axis: str
    values: list
    n: int
    k: int
    service_rates: list
    service_shift: float
    policies: list
    deadline: str
    engines: list
    updates: int
    seed: int
    batches: int
    replications: int


_SWEEP_KEYS = {"axis", "values", "n", "k", "service_rate", "service_shift", "policy",
               "deadline", "engines", "updates", "seed", "batches", "replications"}


def _range_values(text):
    start, stop, step = (parse_number(p) for p in text.split(":"))
    if step <= 0 or stop < start:
        raise UsageError(f"bad range {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def _value_list(text):
    text = text.strip()
    if text.count(":") == 2:
        return _range_values(text)
    out = []
    for part in text.split(","):
        part = part.strip()
        out.append("inf" if part.lower() in ("inf", "none") else parse_number(part))
    return out


def parse_sweep_file(text):
    """Parse the flat ``key = value`` sweep format; ``#`` starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise UsageError(f"sweep file line {lineno}: expected key=value, got {line.strip()!r}")
        if key not in _SWEEP_KEYS:
            raise UsageError(f"sweep file line {lineno}: unknown key {key!r}")
        if key in raw:
            raise UsageError(f"sweep file line {lineno}: duplicate key {key!r}")
        raw[key] = (lineno, value)

    def get(key, default=None, conv=str):
        if key not in raw:
            if default is None:
                raise UsageError(f"sweep file: missing required key {key!r}")
            return default
        lineno, value = raw[key]
        try:
            return conv(value)
        except (UsageError, ValueError) as exc:
            raise UsageError(f"sweep file line {lineno}: {exc}") from None

    def int_of(v):
        x = parse_number(v)
        if x != int(x):
            raise UsageError(f"expected an integer, got {v!r}")
        return int(x)

    def names(v):
        return [p.strip() for p in v.split(",") if p.strip()]

    axis = get("axis")
    if axis not in ("deadline", "threshold_k", "num_devices_n"):
        raise UsageError(f"sweep file line {raw['axis'][0]}: unknown axis {axis!r}")
    plan = SweepPlan(
        axis=axis,
        values=get("values", conv=_value_list),
        n=get("n", 0 if axis == "num_devices_n" else None, int_of),
        k=get("k", 0 if axis == "threshold_k" else None, int_of),
        service_rates=get("service_rate", conv=lambda v: [parse_number(p) for p in v.split(",")]),
        service_shift=get("service_shift", 0.0, parse_number),
        policies=get("policy", ["fixed"], names),
        deadline=get("deadline", "" if axis == "deadline" else None),
        engines=get("engines", ["analytic"], names),
        updates=get("updates", 100_000, int_of),
        seed=get("seed", 0, int_of),
        batches=get("batches", 20, int_of),
        replications=get("replications", 1, int_of),
    )
    if axis != "deadline":
        plan.values = [int(v) if v != "inf" and v == int(v) else v for v in plan.values]
    for p in plan.policies:
        if p not in ("fixed", "exp"):
            raise UsageError(f"sweep file line {raw['policy'][0]}: unknown policy {p!r}")
    for e in plan.engines:
        if e not in ("analytic", "simulation"):
            raise UsageError(f"sweep file line {raw['engines'][0]}: unknown engine {e!r}")
    return plan


def _error_row(row, template, axis):
    cols = config_columns(row.config) if row.config is not None else {
        "policy": template.policy, "n": template.num_devices, "k": template.threshold,
        "service_rate": template.service.rate, "service_shift": template.service.shift,
        "deadline_param": template.deadline_param(),
    }
    if row.config is None:
        if axis == "deadline":
            cols["deadline_param"] = row.value
        elif axis == "threshold_k":
            cols["k"] = row.value
        else:
            cols["n"] = row.value
    return {**cols, "engine": row.engine, "error": row.error}


def _sweep_rows(plan, workers):
    from .optimizer import sweep
    from .simulator import SimConfig

    sim = None
    if "simulation" in plan.engines:
        sim = SimConfig(num_updates=plan.updates, seed=plan.seed, num_batches=plan.batches,
                        replications=plan.replications)
    rows = []
    for rate in plan.service_rates:
        service = ServiceModel(rate, plan.service_shift)
        if plan.axis == "deadline":
            policies = [("fixed" if p == "fixed" else "random-mean",
                         FixedDeadline(plan.service_shift + 1.0) if p == "fixed"
                         else ExponentialDeadline.from_mean(plan.service_shift + 1.0, plan.service_shift))
                        for p in plan.policies]
        else:
            policies = [(None, parse_deadline(plan.deadline, plan.service_shift))]
        for kind, deadline in policies:
            # placeholders for the swept count keep the template valid
            n = plan.n or max(plan.k, 1)
            k = plan.k or 1
            template = SystemConfig(n, min(k, n), service, deadline)
            for row in sweep(template, plan.axis, plan.values, plan.engines, sim=sim,
                             workers=workers, policy_kind=kind):
                if row.error is not None:
                    rows.append(_error_row(row, template, plan.axis))
                elif row.engine == "analytic":
                    rows.append(analytic_row(row.report))
                else:
                    rows.append(simulation_row(row.report))
    return rows, sim


def cmd_sweep(args):
    try:
        with open(args.sweep_file, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read sweep file: {exc}") from None
    plan = parse_sweep_file(text)
    rows, sim = _sweep_rows(plan, args.workers)
    manifest = build_manifest(args, seeds=[sim.seed] if sim else [])
    manifest["sweep"] = {k: v for k, v in plan.__dict__.items()}
    _emit(args, csv_text(manifest, rows))
    return EXIT_OK


# ---- validation ------------------------------------------------------------

def validation_grid(name):
    if name == "small":
        pairs = [(1, 1), (2, 1), (2, 2), (5, 1), (5, 5)]
        rates, shifts = (0.5,), (0.0, 0.1)
        fixed, means = (1.0, 3.0), (3.0,)
    else:
        pairs = [(n, k) for n in (1, 2, 5, 10) for k in sorted({1, math.ceil(n / 2), n})]
        rates, shifts = (1 / 3, 0.5, 1.0), (0.0, 0.1)
        fixed, means = None, (1.0, 3.0, 10.0)
    out = []
    for n, k in pairs:
        for rate in rates:
            for c in shifts:
                service = ServiceModel(rate, c)
                horizons = fixed if fixed is not None else (c + 0.1, 1.0, 3.0, 10.0)
                deadlines = [InfiniteDeadline()] + [FixedDeadline(t) for t in horizons]
                deadlines += [ExponentialDeadline.from_mean(m, c) for m in means]
                out.extend(SystemConfig(n, k, service, d) for d in deadlines)
    return out


def _label(config):
    return (f"N={config.num_devices} K={config.threshold} rate={config.service.rate!r} "
            f"shift={config.service.shift!r} deadline={config.policy}:{config.deadline_param()!r}")


def _inject_for(config, inject):
    pool = RANDOM_DEFECTS if isinstance(config.deadline, ExponentialDeadline) else FIXED_DEFECTS
    return frozenset(d for d in inject if d in pool)


def _validate_one(config, args, inject, sim):
    from .oracle import compare_reports, oracle_aoi

    items = []
    printed = _inject_for(config, inject)
    try:
        closed = analyze(config, printed)
    except AoiError as exc:
        items.append({"config": _label(config), "check": "oracle", "quantity": "evaluation",
                      "delta": math.inf, "limit": args.threshold, "passed": False,
                      "detail": f"{type(exc).__name__}: {exc}"})
        closed = None
    oracle = oracle_aoi(config)
    if closed is not None:
        cmp = compare_reports(closed, oracle, args.threshold)
        for e in cmp.entries:
            items.append({"config": _label(config), "check": "oracle", "quantity": e.name,
                          "closed_form": e.closed_form_value, "reference": e.oracle_value,
                          "delta": e.relative_delta, "limit": args.threshold,
                          "passed": e.relative_delta <= args.threshold})
    if sim is not None:
        from .simulator import simulate

        result = simulate(config, sim)
        ref = closed or oracle
        for name, got, want, se in (
            ("average_aoi", result.average_aoi, ref.average_aoi, result.se_aoi),
            ("average_peak_aoi", result.average_peak_aoi, ref.average_peak_aoi, result.se_peak),
            ("success_fraction", result.success_fraction, ref.cases.p_success, result.se_success),
        ):
            diff = abs(got - want)
            z = diff / se if se > 0 else (0.0 if diff <= 1e-12 * max(1.0, abs(want)) else math.inf)
            items.append({"config": _label(config), "check": "simulation", "quantity": name,
                          "closed_form": want, "reference": got, "delta": z, "limit": 3.0,
                          "passed": z <= 3.0})
    return items


def cmd_validate(args):
    from .simulator import SimConfig

    unknown = set(args.inject) - PRINTED_DEFECTS
    if unknown:
        raise UsageError(f"unknown --inject value(s) {sorted(unknown)}; choose from {sorted(PRINTED_DEFECTS)}")
    sim = None if args.no_simulation else SimConfig(num_updates=args.updates, seed=args.seed,
                                                     num_batches=args.batches)
    configs = validation_grid(args.grid)
    if args.inject:
        # only configurations the injected variants apply to
        configs = [c for c in configs if _inject_for(c, args.inject)]
    items = []
    for config in configs:
        items.extend(_validate_one(config, args, args.inject, sim))
    failures = [i for i in items if not i["passed"]]
    # name a measured quantity before falling back to an evaluation error
    worst = max(failures, key=lambda i: (math.isfinite(i["delta"]), i["delta"] / i["limit"]),
                default=None)
    report = {
        "passed": not failures,
        "threshold": args.threshold,
        "configs": len(configs),
        "checks": len(items),
        "failures": len(failures),
        "worst": worst,
        "entries": items,
    }
    _emit(args, dump_json(build_manifest(args, seeds=[sim.seed] if sim else []), report))
    if failures:
        print(f"validation failed: worst offender {worst['quantity']} ({worst['check']}) at "
              f"{worst['config']}, delta {worst['delta']!r} > {worst['limit']!r}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


# ---- argument parsing ------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _system_flags(p, deadline=True):
    p.add_argument("--n", type=int, required=True, help="number of devices N")
    p.add_argument("--k", type=int, required=True, help="receptions that terminate an update")
    p.add_argument("--service-rate", type=_number, required=True, help="rate, e.g. 0.5 or 1/3")
    p.add_argument("--service-shift", type=_number, required=True, help="minimum service time c")
    if deadline:
        p.add_argument("--deadline", required=True, help="none | fixed:<T_D> | exp:<mean>")


def _common(p, formats=("json", "csv")):
    p.add_argument("--format", choices=formats, default=formats[0])
    p.add_argument("--output", "-o", help="write here instead of stdout")
    p.add_argument("--timestamp", action="store_true",
                   help="record the wall-clock time in the manifest (breaks byte-identical output)")


def _sim_flags(p):
    p.add_argument("--updates", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batches", type=int, default=20)


def build_parser():
    parser = _Parser(prog="aoi-multicast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="closed-form average and peak AoI")
    _system_flags(p)
    _common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte-Carlo estimate with batch-means CIs")
    _system_flags(p)
    _sim_flags(p)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--workers", type=int, default=None, help="threads for replications")
    p.add_argument("--tracked-device", type=int, default=1)
    p.add_argument("--event-log", help="CSV file receiving every simulated update")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="tabulate a sweep described by a key=value file")
    p.add_argument("sweep_file")
    p.add_argument("--workers", type=int, default=None)
    _common(p, formats=("csv",))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize", help="find the AoI-minimizing deadline")
    _system_flags(p, deadline=False)
    p.add_argument("--policy", choices=("fixed", "random"), default="fixed")
    p.add_argument("--objective", choices=("average", "peak", "average_aoi", "average_peak_aoi"),
                   default="average")
    p.add_argument("--bracket", type=_bracket, required=True, help="lo:hi")
    p.add_argument("--tol", type=_number, default=1e-4)
    p.add_argument("--prescan", type=int, default=64)
    _common(p, formats=("json",))
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("validate", help="closed forms vs quadrature oracle vs simulation")
    p.add_argument("--grid", choices=("small", "full"), default="small")
    p.add_argument("--threshold", type=_number, default=1e-8)
    p.add_argument("--inject", action="append", default=[], metavar="VARIANT",
                   help=f"evaluate an uncorrected printed form: {', '.join(sorted(PRINTED_DEFECTS))}")
    p.add_argument("--no-simulation", action="store_true")
    _sim_flags(p)
    _common(p, formats=("json",))
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationDivergenceError as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return EXIT_SIM_DIVERGENT
    except DivergenceError as exc:
        print(f"divergent configuration: {exc}", file=sys.stderr)
        return EXIT_DIVERGENT


if __name__ == "__main__":
    sys.exit(main())
