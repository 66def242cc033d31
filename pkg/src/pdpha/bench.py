"""Experiment harness: run solvers over instance sets and tabulate objective, gap and time."""

from __future__ import annotations

import csv
import io
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from pdpha import baselines
from pdpha.env import validate_route
from pdpha.instances import Instance
from pdpha.policy import PolicyNetwork, solve_greedy, solve_sampling

REPORT_VERSION = "# pdpha eval-report v1"
REPORT_FIELDS = ("setting", "method", "count", "mean_objective", "gap_pct", "mean_time_s")

_BASELINES: dict[str, Callable] = {
    "dp": baselines.exact_dp,
    "bf": baselines.brute_force,
    "nn": baselines.nearest_neighbor,
}


class UnknownMethodError(ValueError):
    pass


@dataclass
class Solution:
    perm: tuple[int, ...]
    objective: float
    seconds: float


@dataclass
class MethodSpec:
    token: str
    kind: str  # dp | bf | nn | sa | greedy | sample
    samples: int = 0
    checkpoint: str | None = None


_TOKEN = re.compile(r"^(?:(dp|bf|nn|sa)|(greedy|sample(\d+)):(.+))$")


def parse_methods(spec: str) -> list[MethodSpec]:
    out = []
    for tok in [t.strip() for t in spec.split(",") if t.strip()]:
        m = _TOKEN.match(tok)
        if not m:
            raise UnknownMethodError(f"unknown method token {tok!r}")
        if m.group(1):
            out.append(MethodSpec(tok, m.group(1)))
        elif m.group(2) == "greedy":
            out.append(MethodSpec(tok, "greedy", checkpoint=m.group(4)))
        else:
            samples = int(m.group(3))
            if samples < 1:
                raise UnknownMethodError(f"{tok!r}: sample count must be >= 1")
            out.append(MethodSpec(tok, "sample", samples=samples, checkpoint=m.group(4)))
    if not out:
        raise UnknownMethodError("no methods given")
    return out


def _timed_baseline(args) -> Solution:
    kind, inst, sa_cfg = args
    t = time.perf_counter()
    if kind == "sa":
        perm, obj = baselines.simulated_annealing(inst, sa_cfg)
    else:
        perm, obj = _BASELINES[kind](inst)
    return Solution(tuple(int(p) for p in perm), float(obj), time.perf_counter() - t)


def instance_rng(seed: int, index: int) -> np.random.Generator:
    """Per-instance stream so results do not depend on scheduling."""
    return np.random.default_rng([seed, index])


def run_method(
    method: MethodSpec,
    instances: Sequence[Instance],
    seed: int = 0,
    jobs: int = 1,
    sa_config: baselines.SAConfig | None = None,
    models: dict[str, PolicyNetwork] | None = None,
) -> list[Solution]:
    if method.kind in ("dp", "bf", "nn", "sa"):
        sa_cfg = sa_config or baselines.SAConfig(seed=seed)
        work = [(method.kind, inst, sa_cfg) for inst in instances]
        if jobs > 1 and len(instances) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                return list(pool.map(_timed_baseline, work, chunksize=max(1, len(work) // (4 * jobs))))
        return [_timed_baseline(w) for w in work]

    models = models if models is not None else {}
    if method.checkpoint not in models:
        models[method.checkpoint] = PolicyNetwork.load(method.checkpoint)
    model = models[method.checkpoint]
    out = []
    for i, inst in enumerate(instances):
        t = time.perf_counter()
        if method.kind == "greedy":
            res = solve_greedy(model, [inst])[0]
        else:
            res = solve_sampling(model, inst, method.samples, instance_rng(seed, i))
        out.append(Solution(tuple(res["perm"]), float(res["objective"]), time.perf_counter() - t))
    return out


@dataclass
class ReportRow:
    setting: str
    method: str
    count: int
    mean_objective: float
    gap_pct: float
    mean_time_s: float


@dataclass
class EvalReport:
    rows: list[ReportRow] = field(default_factory=list)

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        buf.write(REPORT_VERSION + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_FIELDS)
        for r in self.rows:
            w.writerow([
                r.setting,
                r.method,
                r.count,
                f"{r.mean_objective:.6f}",
                f"{r.gap_pct:.4f}",
                f"{r.mean_time_s:.6f}" if timing else "0",
            ])
        return buf.getvalue()

    def write_csv(self, path: str | Path, timing: bool = True) -> None:
        Path(path).write_text(self.to_csv(timing))

    def table(self) -> str:
        head = f"{'setting':<22} {'method':<28} {'count':>6} {'obj':>9} {'gap%':>8} {'time(s)':>9}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(
                f"{r.setting:<22} {r.method:<28} {r.count:>6} {r.mean_objective:>9.4f} "
                f"{r.gap_pct:>8.2f} {r.mean_time_s:>9.4f}"
            )
        return "\n".join(lines)

    def row(self, method: str, setting: str | None = None) -> ReportRow:
        for r in self.rows:
            if r.method == method and (setting is None or r.setting == setting):
                return r
        raise KeyError(method)


class InfeasibleSolutionError(RuntimeError):
    pass


def evaluate(
    instances: Sequence[Instance],
    methods: Sequence[MethodSpec],
    ref: str = "dp",
    setting: str = "",
    seed: int = 0,
    jobs: int = 1,
    sa_config: baselines.SAConfig | None = None,
    models: dict[str, PolicyNetwork] | None = None,
    solutions: dict[str, list[Solution]] | None = None,
) -> EvalReport:
    """Run every method and report mean objective, gap to ``ref`` and mean time.

    ``ref`` is a method token (run even when not listed) or ``best`` for the
    per-instance best over all listed methods.
    """
    models = {} if models is None else models
    results: dict[str, list[Solution]] = {} if solutions is None else solutions
    for m in methods:
        results[m.token] = run_method(m, instances, seed, jobs, sa_config, models)
        for inst, sol in zip(instances, results[m.token]):
            ev = validate_route(inst, sol.perm)
            if not ev.feasible:
                raise InfeasibleSolutionError(f"{m.token} produced an infeasible route: {ev.violation}")
    objs = {k: np.array([s.objective for s in v]) for k, v in results.items()}
    if ref == "best":
        ref_obj = np.min(np.stack(list(objs.values())), axis=0)
    else:
        if ref not in objs:
            (ref_spec,) = parse_methods(ref)
            results[ref] = run_method(ref_spec, instances, seed, jobs, sa_config, models)
            objs[ref] = np.array([s.objective for s in results[ref]])
        ref_obj = objs[ref]
    ref_mean = float(ref_obj.mean()) if len(instances) else float("nan")
    report = EvalReport()
    for m in methods:
        mean_obj = float(objs[m.token].mean()) if len(instances) else float("nan")
        report.rows.append(
            ReportRow(
                setting=setting,
                method=m.token,
                count=len(instances),
                mean_objective=mean_obj,
                gap_pct=baselines.gap_percent(mean_obj, ref_mean) if len(instances) else float("nan"),
                mean_time_s=float(np.mean([s.seconds for s in results[m.token]])) if len(instances) else 0.0,
            )
        )
    return report
