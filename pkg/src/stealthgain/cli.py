"""Command-line entry point.

Exit codes: 0 on success, 2 on invalid input, 3 when the solver reports a
numerical failure.  Structured results go to ``--out`` as JSON (CSV for
traces and benchmarks); a short summary is printed to standard output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench, esc, gridgen, metrics, oracle
from .sdp import SolveOptions
from .sysmodel import AttackBudget, load_system

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


class InputError(Exception):
    """Invalid user input; the message names the offending field or file."""


def _num(x):
    if x is None:
        return None
    x = float(x)
    if np.isfinite(x):
        return x
    return "nan" if np.isnan(x) else ("inf" if x > 0 else "-inf")


def _write_json(path: str | None, doc: dict) -> None:
    if path is None:
        return
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _options(args) -> SolveOptions:
    opts = SolveOptions()
    for name in ("feastol", "reltol", "abstol", "max_iters"):
        v = getattr(args, name, None)
        if v is not None:
            if v <= 0:
                raise InputError(f"--{name.replace('_', '-')}: must be positive, got {v}")
            setattr(opts, name, v)
    return opts


def _load(path: str):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{path}: file not found")
    try:
        return load_system(p)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _budget(args, file_budget: AttackBudget | None) -> AttackBudget:
    delta = args.delta if args.delta is not None else (file_budget.delta if file_budget else None)
    energy = args.energy if args.energy is not None else (file_budget.energy if file_budget else None)
    if delta is None or energy is None:
        missing = "delta" if delta is None else "energy"
        raise InputError(f"budget.{missing}: give --{missing} or a budget block in the system file")
    try:
        return AttackBudget(delta, energy)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _metric_doc(kind: str, res: metrics.MetricResult, budget: AttackBudget | None, **extra) -> dict:
    doc = {"metric": kind, **res.to_dict()}
    if budget is not None:
        doc["budget"] = {"delta": budget.delta, "energy": budget.energy}
    doc.update(extra)
    return doc


def _deviation(value: float, reference: float) -> float:
    if not (np.isfinite(value) and np.isfinite(reference)):
        return 0.0 if value == reference else float("nan")
    return abs(value - reference) / max(abs(reference), 1e-12)


def _status_code(status: str) -> int:
    return EXIT_NUMERICAL if status == "NumericalFailure" else EXIT_OK


def cmd_oog(args) -> int:
    sc, su, fb = _load(args.system)
    if sc is None or su is None:
        raise InputError(f"{args.system}: oog needs both 'certain' and 'uncertain' blocks")
    budget = _budget(args, fb)
    res = metrics.solve_oog(sc, su, budget, _options(args))
    doc = _metric_doc("oog", res, budget)
    if args.verify:
        ref = oracle.oog_oracle(sc, su, budget)
        doc["oracle"] = {"value": _num(ref), "relative_deviation": _num(_deviation(res.value, ref))}
    _write_json(args.out, doc)
    print(f"oog: Q = {res.value:.6g} ({res.status}, {res.solve_time:.2f} s)")
    if args.verify:
        print(f"oracle: {ref:.6g}, relative deviation {doc['oracle']['relative_deviation']}")
    return _status_code(res.status)


def cmd_proxy(args) -> int:
    sc, su, fb = _load(args.system)
    if sc is None:
        raise InputError(f"{args.system}: proxy needs a 'certain' block")
    budget = _budget(args, fb)
    opts = _options(args)
    if args.gamma_u is not None:
        if not (args.gamma_u >= 0 and np.isfinite(args.gamma_u)):
            raise InputError(f"--gamma-u: must be finite and nonnegative, got {args.gamma_u}")
        gamma_u, source = args.gamma_u, "flag"
    elif su is not None:
        g = metrics.gamma_u_model(su, opts)
        if not g.optimal:
            print(f"gamma_u: {g.status}", file=sys.stderr)
            return EXIT_NUMERICAL
        gamma_u, source = g.value, "model"
    else:
        raise InputError("--gamma-u: required when the system file has no 'uncertain' block")
    res = metrics.solve_proxy(sc, gamma_u, budget, opts)
    doc = _metric_doc("proxy", res, budget, gamma_u=_num(gamma_u), gamma_u_source=source)
    if args.verify:
        ref = oracle.proxy_oracle(sc, gamma_u, budget)
        doc["oracle"] = {"value": _num(ref), "relative_deviation": _num(_deviation(res.value, ref))}
    _write_json(args.out, doc)
    print(f"proxy: Q_hat = {res.value:.6g} with gamma_u = {gamma_u:.6g} ({res.status}, {res.solve_time:.2f} s)")
    if args.verify:
        print(f"oracle: {ref:.6g}, relative deviation {doc['oracle']['relative_deviation']}")
    return _status_code(res.status)


def cmd_gamma_model(args) -> int:
    _, su, _ = _load(args.system)
    if su is None:
        raise InputError(f"{args.system}: gamma-model needs an 'uncertain' block")
    res = metrics.gamma_u_model(su, _options(args))
    doc = _metric_doc("gamma_u", res, None)
    for k in ("psi", "theta"):
        doc.pop(k, None)
    if args.verify:
        ref = oracle.hinf_sweep(su)
        doc["oracle"] = {"value": _num(ref), "relative_deviation": _num(_deviation(res.value, ref))}
    _write_json(args.out, doc)
    print(f"gamma_u = {res.value:.6g} ({res.status})")
    if args.verify:
        print(f"frequency sweep: {ref:.6g}, relative deviation {doc['oracle']['relative_deviation']}")
    return _status_code(res.status)


def cmd_gamma_esc(args) -> int:
    _, su, _ = _load(args.system)
    if su is None:
        raise InputError(f"{args.system}: gamma-esc needs an 'uncertain' block")
    params = esc.EscParams()
    if args.params is not None:
        p = Path(args.params)
        if not p.is_file():
            raise InputError(f"{args.params}: file not found")
        try:
            params = esc.EscParams.from_dict(json.loads(p.read_text()))
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.params}: invalid JSON ({exc})") from None
        except (ValueError, TypeError) as exc:
            raise InputError(f"{args.params}: {exc}") from None
    if args.every < 1:
        raise InputError(f"--every: must be positive, got {args.every}")
    try:
        trace = esc.es_run(su.plant, params)
    except ValueError as exc:
        raise InputError(f"{args.params or 'params'}: {exc}") from None
    if args.out:
        trace.to_csv(args.out, every=args.every)
    _write_json(args.summary, {"final_estimate": _num(trace.final_estimate),
                               "final_frequency": _num(trace.final_frequency),
                               "params": params.to_dict()})
    print(f"gamma_u estimate = {trace.final_estimate:.6g} at omega_u = {trace.final_frequency:.4g}")
    return EXIT_OK


def _bus_list(text: str | None, flag: str):
    if text is None:
        return None
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise InputError(f"{flag}: expected comma-separated bus indices, got {text!r}") from None


def cmd_gen_grid(args) -> int:
    try:
        spec = gridgen.default_spec(args.n_certain, args.n_uncertain, args.topology, args.seed)
        if args.radius is not None:
            spec = gridgen.GridSpec(**{**gridgen.spec_to_dict(spec), "radius": args.radius})
        spec = spec.with_sets(_bus_list(args.attack, "--attack"), _bus_list(args.monitor, "--monitor"))
    except ValueError as exc:
        raise InputError(f"grid: {exc}") from None
    budget = None
    if args.delta is not None or args.energy is not None:
        budget = _budget(args, None)
    gridgen.dump_grid(args.out, spec, budget)
    sc, su = gridgen.build_partitioned_system(spec)
    print(f"grid: {spec.n_buses} buses, n_c = {sc.n_states}, n_u = {su.n_states}, "
          f"{sc.m_u} tie channels -> {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.grid == "default":
        base = gridgen.default_spec(seed=args.seed)
    else:
        p = Path(args.grid)
        if not p.is_file():
            raise InputError(f"{args.grid}: file not found")
        try:
            base, _, _, _ = gridgen.load_grid(p)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise InputError(f"{args.grid}: {exc}") from None
    if args.cases < 1:
        raise InputError(f"--cases: must be positive, got {args.cases}")
    budget = AttackBudget(args.delta if args.delta is not None else 1.0,
                          args.energy if args.energy is not None else 1.0)
    try:
        specs = bench.default_batch(base, tuple(args.attack), args.cases, args.seed, args.monitor)
        threads = bench.thread_cap() if args.threads is None else args.threads
    except ValueError as exc:
        raise InputError(str(exc)) from None
    records, summary = bench.run_benchmark(specs, budget, _options(args), threads=threads)
    bench.write_records_csv(args.out, records)
    if args.summary:
        bench.write_summary_json(args.summary, summary,
                                 {"budget": {"delta": budget.delta, "energy": budget.energy},
                                  "cases": args.cases, "attack_sizes": list(args.attack), "seed": args.seed})
    print(f"bench: {summary.n_records} scenarios, {summary.n_optimal} optimal, "
          f"median gap {summary.median_gap:.4g}, median time ratio {summary.median_time_ratio:.3g}, "
          f"bound violations {summary.bound_violations}")
    return EXIT_OK


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver tolerances")
    g.add_argument("--feastol", type=float)
    g.add_argument("--reltol", type=float)
    g.add_argument("--abstol", type=float)
    g.add_argument("--max-iters", dest="max_iters", type=int)


def _add_budget_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta", type=float, help="alarm threshold (overrides the system file)")
    p.add_argument("--energy", type=float, help="attack energy budget (overrides the system file)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stealthgain", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("oog", help="exact worst-case impact with both subsystem models")
    p.add_argument("--system", required=True)
    p.add_argument("--out")
    p.add_argument("--verify", action="store_true", help="cross-check with the frequency-domain oracle")
    _add_budget_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_oog)

    p = sub.add_parser("proxy", help="upper bound using only an energy-gain bound on the uncertain part")
    p.add_argument("--system", required=True)
    p.add_argument("--gamma-u", dest="gamma_u", type=float)
    p.add_argument("--out")
    p.add_argument("--verify", action="store_true")
    _add_budget_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_proxy)

    p = sub.add_parser("gamma-model", help="squared H-infinity norm of the uncertain subsystem")
    p.add_argument("--system", required=True)
    p.add_argument("--out")
    p.add_argument("--verify", action="store_true")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_gamma_model)

    p = sub.add_parser("gamma-esc", help="extremum-seeking estimate of the energy gain from simulation")
    p.add_argument("--system", required=True)
    p.add_argument("--params", help="JSON object of EscParams fields")
    p.add_argument("--out", help="trace CSV")
    p.add_argument("--summary", help="JSON with the final estimate")
    p.add_argument("--every", type=int, default=1, help="write every N-th sample")
    p.set_defaults(func=cmd_gamma_esc)

    p = sub.add_parser("gen-grid", help="write a partitioned swing-network system file")
    p.add_argument("--out", required=True)
    p.add_argument("--n-certain", dest="n_certain", type=int, default=20)
    p.add_argument("--n-uncertain", dest="n_uncertain", type=int, default=10)
    p.add_argument("--topology", choices=gridgen.TOPOLOGIES, default="ring")
    p.add_argument("--radius", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--attack", help="comma-separated attack buses")
    p.add_argument("--monitor", help="comma-separated monitor buses")
    _add_budget_flags(p)
    p.set_defaults(func=cmd_gen_grid)

    p = sub.add_parser("bench", help="run the scenario benchmark")
    p.add_argument("--grid", default="default", help="'default' or a gen-grid file")
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--attack", type=int, nargs="+", default=[2, 4, 6], help="attack-set sizes")
    p.add_argument("--monitor", type=int, help="monitor-set size (default: same as attack size)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, help="worker count (default: OOG_THREADS or CPU count)")
    p.add_argument("--out", required=True, help="records CSV")
    p.add_argument("--summary", help="summary JSON")
    _add_budget_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
