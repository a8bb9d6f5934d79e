"""Command-line entry point.

Exit status: 0 success, 1 input error, 2 numerical error, 3 the simulated
network could not be classified as stable or unstable.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from .errors import NumericalError
from .figures import FIGURES, figure_dataset
from .netsim import Classification, adjudicate_baf, classify_stability, run_sim
from .qapprox import fit_constants
from .scenario import Scenario, ScenarioError, load_scenario
from .stability import baf_stable, cc_stable, tdma_stable
from .throughput import (Protocol, baf_relay_throughput, baf_source_throughput,
                         cc_throughput, nc_throughput, optimize_protocol)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_INDETERMINATE = 0, 1, 2, 3

OPTIMIZE_COLUMNS = ["protocol", "n", "k", "L", "snr_sd", "snr_sr", "snr_rd", "model",
                    "throughput", "binding", "is_optimal"]

log = logging.getLogger("fblmac")


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10g}"
    return str(getattr(value, "value", value))


def write_csv(out, header, rows, comments=()):
    for line in comments:
        out.write(f"# {line}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])


def write_json(out, payload):
    out.write(json.dumps(payload, sort_keys=True, indent=2, default=_json_default))
    out.write("\n")


def _json_default(obj):
    if hasattr(obj, "value"):
        return obj.value
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# --------------------------------------------------------------------------
# commands


def _row(sc: Scenario, protocol, k, L, u, binding, optimal):
    links = sc.links()
    return [protocol, sc.n, k, L, *links.snrs, sc.model, u, binding, optimal]


def _candidates(sc: Scenario, protocol: Protocol):
    links = sc.links()
    n, model = sc.n, sc.model
    k = np.arange(1, (sc.k_max or n) + 1)
    if protocol is Protocol.NC:
        yield 1, k, nc_throughput(k, n, links, model), ["na"] * len(k)
    elif protocol is Protocol.CC:
        yield 1, k, cc_throughput(k, n, links, model), ["na"] * len(k)
    else:
        fn = baf_relay_throughput if protocol is Protocol.BAF_RELAY else baf_source_throughput
        for L in range(1, sc.l_max + 1):
            u, binding = fn(k, L, n, links, model, sc.relay_arm)
            yield L, k, u, binding


def optimum_row(sc: Scenario):
    best = optimize_protocol(sc.protocol, sc.n, sc.links(), sc.model, sc.k_max, sc.l_max,
                             sc.relay_arm)
    return _row(sc, best.protocol, best.k_star, best.l_star, best.u_star, best.binding, "*")


def cmd_optimize(sc: Scenario, best_only: bool = False):
    rows = []
    if not best_only:
        protocols = ([Protocol.BAF_RELAY, Protocol.BAF_SOURCE]
                     if sc.protocol is Protocol.OVERALL else [sc.protocol])
        for protocol in protocols:
            for L, ks, us, bindings in _candidates(sc, protocol):
                rows += [_row(sc, protocol, k, L, u, b, 0) for k, u, b in zip(ks, us, bindings)]
    rows.append(optimum_row(sc))
    return rows


def _require_k(sc: Scenario) -> tuple[int, int]:
    if sc.k is not None:
        return sc.k, sc.L or 1
    best = optimize_protocol(sc.protocol, sc.n, sc.links(), sc.model, sc.k_max, sc.l_max,
                             sc.relay_arm)
    return best.k_star, sc.L or best.l_star


def cmd_throughput(sc: Scenario):
    if sc.k is None:
        raise ScenarioError("throughput needs 'k'")
    k, L = sc.k, sc.L or 1
    links, n, model = sc.links(), sc.n, sc.model
    p = sc.protocol
    if p is Protocol.NC:
        u, b = nc_throughput(k, n, links, model), "na"
    elif p is Protocol.CC:
        u, b = cc_throughput(k, n, links, model), "na"
    elif p is Protocol.BAF_RELAY:
        u, b = baf_relay_throughput(k, L, n, links, model, sc.relay_arm)
    elif p is Protocol.BAF_SOURCE:
        u, b = baf_source_throughput(k, L, n, links, model, sc.relay_arm)
    else:
        raise ScenarioError("throughput needs a concrete protocol, not 'overall'")
    return [_row(sc, p, k, L, u, b, 0)]


def _verdict_dict(v):
    return {"stable": v.stable, "margin": v.margin, "binding": v.binding,
            "margins": dict(v.margins)}


def analytic_verdict(sc: Scenario, k: int, L: int) -> dict:
    traffic, links, n, model = sc.traffic(), sc.links(), sc.n, sc.model
    p = sc.protocol
    if p is Protocol.NC:
        return {"verdict": _verdict_dict(tdma_stable(traffic, k, k, n, links.sd, model))}
    if p is Protocol.CC:
        return {"verdict": _verdict_dict(cc_stable(traffic, k, n, links, model))}
    if p in (Protocol.BAF_RELAY, Protocol.BAF_SOURCE):
        variant = "relay" if p is Protocol.BAF_RELAY else "source"
        v = baf_stable(traffic, k, L, n, links, model, variant)
        chosen = v.published if sc.relay_arm.value == "published" else v.rederived
        return {"verdict": _verdict_dict(chosen), "published": _verdict_dict(v.published),
                "rederived": _verdict_dict(v.rederived), "disagree": v.disagree}
    raise ScenarioError("stability needs a concrete protocol, not 'overall'")


def cmd_stability(sc: Scenario):
    k, L = _require_k(sc)
    out = {"protocol": sc.protocol, "k": k, "L": L, "n": sc.n,
           "lambda_a": sc.lambda_a, "lambda_b": sc.lambda_b, "omega_a": sc.omega_a}
    out.update(analytic_verdict(sc, k, L))
    return out


def cmd_simulate(sc: Scenario, seed=None):
    k, L = _require_k(sc)
    report = run_sim(sc.sim_config(k, L, seed))
    lam = sc.lambda_a + sc.lambda_b
    cls = classify_stability(report, lam)
    analytic = analytic_verdict(sc, k, L)
    out = {"protocol": sc.protocol, "k": k, "L": L, "n": sc.n, "lambda_total": lam,
           "seed": sc.sim.seed if seed is None else seed, "slots": sc.sim.slots,
           "report": report.to_dict(), "classification": cls,
           "stable": cls is Classification.STABLE, **analytic}
    if cls is Classification.INDETERMINATE:
        out["agree"] = None
    else:
        out["agree"] = (cls is Classification.STABLE) == analytic["verdict"]["stable"]
    return out, cls


def _parse_axis_values(values: str | None, rng: str | None):
    if (values is None) == (rng is None):
        raise ScenarioError("give exactly one of --values or --range")
    if values is not None:
        out = [float(v) for v in values.split(",") if v.strip()]
    else:
        try:
            start, stop, step = (float(x) for x in rng.split(":"))
        except ValueError:
            raise ScenarioError(f"--range must be start:stop:step, got {rng!r}") from None
        if step <= 0:
            raise ScenarioError("--range step must be positive")
        out = list(np.arange(start, stop + step / 2, step))
    if not out or any(b <= a for a, b in zip(out, out[1:])):
        raise ScenarioError("sweep values must be non-empty and strictly increasing")
    return out


_AXES = {"n": "n", "k": "k", "L": "L", "snr": "snr_sd", "snr_sd": "snr_sd",
         "snr_sr": "snr_sr", "snr_rd": "snr_rd", "lambda": "lambda"}


def _sweep_point(args):
    sc, axis, value = args
    if axis == "lambda":
        sc = sc.with_values(lambda_a=value / 2.0, lambda_b=value / 2.0)
        k, L = _require_k(sc)
        v = analytic_verdict(sc, k, L)["verdict"]
        return [value, k, L, v["stable"], v["margin"], v["binding"]]
    field = _AXES[axis]
    if field in ("n", "k", "L"):
        value = int(round(value))
    sc = sc.with_values(**{field: value})
    if field in ("k", "L"):
        if sc.k is None:
            raise ScenarioError("sweeping L needs a fixed 'k'")
        return cmd_throughput(sc)[0]
    return optimum_row(sc)


def cmd_sweep(sc: Scenario, axis: str, values, jobs: int = 1):
    if axis not in _AXES:
        raise ScenarioError(f"unknown sweep axis {axis!r}; choose from {', '.join(_AXES)}")
    tasks = [(sc, axis, v) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    if axis == "lambda":
        return ["lambda_total", "k", "L", "stable", "margin", "binding"], rows
    return OPTIMIZE_COLUMNS, rows


# --------------------------------------------------------------------------
# argument handling


class _Parser(argparse.ArgumentParser):
    # usage mistakes are input errors, not numerical ones
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("-v", "--verbose", action="store_true")

    cfg = _Parser(add_help=False)
    cfg.add_argument("--config", required=True, help="scenario file (key=value lines)")

    p = _Parser(prog="fblmac", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    o = sub.add_parser("optimize", parents=[common, cfg], help="grid-search k (and L)")
    o.add_argument("--best-only", action="store_true", help="emit only the optimum row")
    sub.add_parser("throughput", parents=[common, cfg], help="throughput at the given k, L")
    sub.add_parser("stability", parents=[common, cfg], help="closed-form stability verdict")
    sub.add_parser("simulate", parents=[common, cfg], help="Monte Carlo run with verdicts")
    s = sub.add_parser("sweep", parents=[common, cfg], help="vary one scenario key")
    s.add_argument("--axis", required=True, choices=sorted(_AXES))
    s.add_argument("--values", help="comma-separated values")
    s.add_argument("--range", dest="range_", help="start:stop:step (inclusive)")
    r = sub.add_parser("reproduce", parents=[common], help="figure curve data as CSV")
    r.add_argument("figure", choices=FIGURES)
    r.add_argument("--model", choices=["second", "third"], default="second")
    f = sub.add_parser("fit", parents=[common], help="fit surrogate constants")
    f.add_argument("--norm", choices=["squared", "absolute"], default="squared")
    a = sub.add_parser("adjudicate", parents=[common, cfg],
                       help="simulate BAF boundaries against both relay-arm formulas")
    a.add_argument("--seeds", default="1,2,3,4,5")
    return p


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    buf = io.StringIO()
    status = EXIT_OK
    try:
        status = _dispatch(args, buf)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    with _output(args.out) as out:
        out.write(buf.getvalue())
    return status


def _dispatch(args, out) -> int:
    cmd = args.command
    if cmd == "reproduce":
        comments, header, rows = figure_dataset(args.figure, args.model)
        write_csv(out, header, rows, comments)
        return EXIT_OK
    if cmd == "fit":
        lin = fit_constants("linear", norm=args.norm)
        quad = fit_constants("quadratic", norm=args.norm)
        write_json(out, {"norm": args.norm, "linear": asdict(lin), "quadratic": asdict(quad)})
        return EXIT_OK

    sc = load_scenario(args.config)
    if cmd == "optimize":
        write_csv(out, OPTIMIZE_COLUMNS, cmd_optimize(sc, args.best_only))
    elif cmd == "throughput":
        write_csv(out, OPTIMIZE_COLUMNS, cmd_throughput(sc))
    elif cmd == "stability":
        write_json(out, cmd_stability(sc))
    elif cmd == "simulate":
        payload, cls = cmd_simulate(sc, args.seed)
        write_json(out, payload)
        if cls is Classification.INDETERMINATE:
            return EXIT_INDETERMINATE
    elif cmd == "sweep":
        header, rows = cmd_sweep(sc, args.axis, _parse_axis_values(args.values, args.range_),
                                 args.jobs)
        write_csv(out, header, rows)
    elif cmd == "adjudicate":
        if sc.protocol not in (Protocol.BAF_RELAY, Protocol.BAF_SOURCE):
            raise ScenarioError("adjudicate needs protocol baf_relay or baf_source")
        k, L = _require_k(sc)
        seeds = [int(s) for s in args.seeds.split(",")]
        slots = sc.sim.slots if sc.sim else 1_000_000
        from .fbl_model import CodeSpec
        result = adjudicate_baf(CodeSpec(k, sc.n, L), sc.links(), sc.model, sc.protocol,
                                slots=slots, seeds=seeds)
        write_json(out, result.to_dict())
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
