"""Scenario runner comparing the exact metric with its gain-bound proxy."""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .gridgen import GridSpec, build_partitioned_system, make_scenarios
from .metrics import gamma_u_model, solve_oog, solve_proxy
from .sdp import SolveOptions
from .sysmodel import AttackBudget, UncertainSubsystem

__all__ = ["BenchRecord", "BenchSummary", "run_benchmark", "summarize", "default_batch",
           "write_records_csv", "write_summary_json", "thread_cap"]

OPTIMAL = "Optimal"


@dataclass
class BenchRecord:
    scenario_id: str
    n_attack: int
    n_monitor: int
    Q: float
    Q_hat: float
    relative_gap: float
    t_full: float
    t_proxy: float
    status_full: str
    status_proxy: str
    gamma_u: float
    message: str = ""

    @property
    def both_optimal(self) -> bool:
        return self.status_full == OPTIMAL and self.status_proxy == OPTIMAL

    @property
    def bound_holds(self) -> bool:
        return self.Q <= self.Q_hat * (1 + 1e-6) + 1e-9


@dataclass
class BenchSummary:
    n_records: int
    n_optimal: int
    median_gap: float
    median_time_ratio: float
    median_t_full: float
    median_t_proxy: float
    bound_violations: int

    def to_dict(self) -> dict:
        return {k: (v if not isinstance(v, float) or np.isfinite(v) else str(v)) for k, v in asdict(self).items()}


def thread_cap() -> int:
    """Worker count from ``OOG_THREADS``, else the number of logical processors."""
    raw = os.environ.get("OOG_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"OOG_THREADS: expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"OOG_THREADS: expected a positive integer, got {raw!r}")
    return n


def _uncertain_key(su: UncertainSubsystem) -> bytes:
    return b"|".join(np.ascontiguousarray(M).tobytes() + str(M.shape).encode()
                     for M in (su.A_u, su.B_u, su.C_u, su.D_u))


def _run_one(sid: str, spec: GridSpec, budget: AttackBudget, gamma_u: float, gamma_msg: str,
             options: SolveOptions | None) -> BenchRecord:
    n_a, n_m = len(spec.attack_buses), len(spec.monitor_buses)
    nan = float("nan")
    try:
        sc, su = build_partitioned_system(spec)
        full = solve_oog(sc, su, budget, options)
        if np.isfinite(gamma_u):
            proxy = solve_proxy(sc, gamma_u, budget, options)
            proxy_status, proxy_value, t_proxy = proxy.status, proxy.value, proxy.solve_time
        else:
            proxy_status, proxy_value, t_proxy = "NumericalFailure", nan, nan
    except (ValueError, np.linalg.LinAlgError) as exc:
        return BenchRecord(sid, n_a, n_m, nan, nan, nan, nan, nan, "Error", "Error", gamma_u, str(exc))
    Q, Qh = full.value, proxy_value
    gap = (Qh - Q) / Q if full.status == OPTIMAL and proxy_status == OPTIMAL and Q > 0 else nan
    if proxy_status == "Unbounded":
        gap = float("inf")
    return BenchRecord(sid, n_a, n_m, Q, Qh, gap, full.solve_time, t_proxy, full.status, proxy_status,
                       gamma_u, gamma_msg)


def summarize(records: list[BenchRecord]) -> BenchSummary:
    ok = [r for r in records if r.both_optimal]
    gaps = [r.relative_gap for r in ok]
    ratios = [r.t_proxy / r.t_full for r in ok if r.t_full > 0]
    med = (lambda xs: float(np.median(xs)) if xs else float("nan"))
    return BenchSummary(
        n_records=len(records),
        n_optimal=len(ok),
        median_gap=med(gaps),
        median_time_ratio=med(ratios),
        median_t_full=med([r.t_full for r in ok]),
        median_t_proxy=med([r.t_proxy for r in ok]),
        bound_violations=sum(not r.bound_holds for r in ok),
    )


def run_benchmark(specs, budget: AttackBudget, options: SolveOptions | None = None,
                  threads: int | None = 1) -> tuple[list[BenchRecord], BenchSummary]:
    """Solve both metrics for every scenario.

    ``specs`` is a list of :class:`GridSpec` (ids are their zero-padded
    positions) or a mapping from scenario id to spec.  ``gamma_u`` is
    computed once per distinct uncertain subsystem.  Failures are recorded
    in the statuses and never abort the batch.  ``threads=None`` uses
    :func:`thread_cap`.
    """
    if isinstance(specs, dict):
        items = list(specs.items())
    else:
        width = max(3, len(str(len(specs))))
        items = [(f"{k:0{width}d}", s) for k, s in enumerate(specs)]

    gammas: dict[bytes, tuple[float, str]] = {}
    jobs = []
    for sid, spec in items:
        try:
            _, su = build_partitioned_system(spec)
            key = _uncertain_key(su)
            if key not in gammas:
                g = gamma_u_model(su, options)
                gammas[key] = (g.value, "") if g.optimal else (float("nan"), f"gamma_u solve: {g.status}")
            jobs.append((sid, spec, *gammas[key]))
        except (ValueError, np.linalg.LinAlgError) as exc:
            jobs.append((sid, spec, float("nan"), str(exc)))

    workers = thread_cap() if threads is None else max(1, threads)
    if workers == 1:
        records = [_run_one(sid, spec, budget, g, msg, options) for sid, spec, g, msg in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, sid, spec, budget, g, msg, options) for sid, spec, g, msg in jobs]
            records = [f.result() for f in futures]
    records.sort(key=lambda r: r.scenario_id)
    return records, summarize(records)


def default_batch(spec_base: GridSpec, attack_sizes=(2, 4, 6), n_cases: int = 20, seed: int = 0,
                  n_monitor: int | None = None) -> dict[str, GridSpec]:
    """Scenarios for each attack size, monitors as many as attackers unless given."""
    out = {}
    for n_a in attack_sizes:
        n_m = n_a if n_monitor is None else n_monitor
        for k, spec in enumerate(make_scenarios(spec_base, n_a, n_m, n_cases, seed)):
            out[f"a{n_a:02d}-m{n_m:02d}-{k:03d}"] = spec
    return out


CSV_FIELDS = ("scenario_id", "n_attack", "n_monitor", "Q", "Q_hat", "relative_gap", "t_full", "t_proxy",
              "status_full", "status_proxy", "gamma_u", "message")


def write_records_csv(path: str | Path, records: list[BenchRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for r in records:
            row = []
            for f in CSV_FIELDS:
                v = getattr(r, f)
                row.append(f"{v:.10g}" if isinstance(v, float) else v)
            w.writerow(row)


def write_summary_json(path: str | Path, summary: BenchSummary, extra: dict | None = None) -> None:
    doc = summary.to_dict()
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
