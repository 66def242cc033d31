"""Command-line entry point: ``pdpha {generate,train,solve,bench,generalize}``.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from itertools import product
from pathlib import Path

from pdpha import baselines
from pdpha.bench import EvalReport, UnknownMethodError, evaluate, instance_rng, parse_methods
from pdpha.env import validate_route
from pdpha.instances import GeneratorConfig, generate_many, load_instances, save_instances
from pdpha.policy import PolicyNetwork, solve_greedy, solve_sampling
from pdpha.training import TrainConfig, train

log = logging.getLogger("pdpha")


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("PDPHA_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"PDPHA_SEED must be an integer, got {raw!r}") from None


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_generate(args) -> None:
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    try:
        cfg = GeneratorConfig(n=args.n, distribution=args.dist, sdv=args.sdv, seed=args.seed)
    except ValueError as e:
        raise UsageError(str(e)) from e
    save_instances(generate_many(cfg, args.count), args.out)
    log.info("wrote %d instances to %s", args.count, args.out)


def cmd_train(args) -> None:
    try:
        cfg = TrainConfig.from_json(args.config)
    except (ValueError, TypeError) as e:
        raise UsageError(f"invalid training config: {e}") from e
    log_path = args.log or str(Path(args.out).with_suffix(".log.csv"))
    _, report = train(cfg, checkpoint=args.out, log_path=log_path, timing=not args.no_timing)
    log.info("trained %d epochs, %d baseline replacements", len(report.epochs), report.replacements)


def cmd_solve(args) -> None:
    model = PolicyNetwork.load(args.ckpt)
    instances = load_instances(args.instances)
    lines = []
    for i, inst in enumerate(instances):
        t = time.perf_counter()
        if args.mode == "greedy":
            res = solve_greedy(model, [inst])[0]
        else:
            res = solve_sampling(model, inst, args.samples, instance_rng(args.seed, i))
        secs = time.perf_counter() - t
        ev = validate_route(inst, res["perm"])
        lines.append(json.dumps({
            "perm": res["perm"],
            "objective": ev.total_time,
            "feasible": ev.feasible,
            "seconds": round(secs, 6) if not args.no_timing else 0,
        }))
    Path(args.out).write_text("".join(line + "\n" for line in lines))


def _methods(spec: str):
    try:
        return parse_methods(spec)
    except UnknownMethodError as e:
        raise UsageError(str(e)) from e


def _emit(report: EvalReport, out: str, timing: bool) -> None:
    report.write_csv(out, timing)
    print(report.table())


def cmd_bench(args) -> None:
    methods = _methods(args.methods)
    sa_cfg = baselines.SAConfig.from_json(args.sa_config) if args.sa_config else baselines.SAConfig(seed=args.seed)
    instances = load_instances(args.instances)
    report = evaluate(instances, methods, ref=args.ref, setting=Path(args.instances).name,
                      seed=args.seed, jobs=args.jobs, sa_config=sa_cfg)
    _emit(report, args.out, not args.no_timing)


def cmd_generalize(args) -> None:
    methods = _methods(args.methods.replace("{ckpt}", args.ckpt))
    dists = [d for d in args.dist.split(",") if d]
    for d in dists:
        if d not in ("uniform", "gaussian"):
            raise UsageError(f"unknown distribution {d!r}")
    settings = []
    for n, d in product(_ints(args.eval_n), dists):
        if d == "uniform":
            settings.append((n, d, 1.0))
        else:
            settings.extend((n, d, s) for s in _floats(args.sdv))
    report = EvalReport()
    models: dict = {}
    for k, (n, d, sdv) in enumerate(settings):
        label = f"train{args.train_n}->n{n}-{d}" + (f"-sdv{sdv:g}" if d == "gaussian" else "")
        insts = generate_many(GeneratorConfig(n=n, distribution=d, sdv=sdv, seed=args.seed + k), args.count)
        sub = evaluate(insts, methods, ref=args.ref, setting=label, seed=args.seed,
                       jobs=args.jobs, models=models)
        report.rows.extend(sub.rows)
    _emit(report, args.out, not args.no_timing)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pdpha", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write random instances as JSON lines")
    g.add_argument("--n", type=int, required=True, help="pickup/delivery pairs per instance")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--dist", choices=("uniform", "gaussian"), default="uniform")
    g.add_argument("--sdv", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a policy from a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--log", help="CSV log path (default: <out>.log.csv)")
    t.add_argument("--no-timing", action="store_true", help="write 0 in wall-clock columns")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("solve", help="decode routes with a trained policy")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--instances", required=True)
    s.add_argument("--mode", choices=("greedy", "sample"), default="greedy")
    s.add_argument("--samples", type=int, default=1280)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--no-timing", action="store_true")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="compare methods on an instance file")
    b.add_argument("--instances", required=True)
    b.add_argument("--methods", required=True, help="e.g. dp,sa,nn,greedy:ckpt,sample1280:ckpt")
    b.add_argument("--ref", default="dp", help="reference method token or 'best'")
    b.add_argument("--sa-config", help="JSON file with SAConfig fields")
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out", required=True)
    b.add_argument("--no-timing", action="store_true")
    b.set_defaults(func=cmd_bench)

    z = sub.add_parser("generalize", help="evaluate a checkpoint on other sizes/distributions")
    z.add_argument("--ckpt", required=True)
    z.add_argument("--train-n", type=int, required=True)
    z.add_argument("--eval-n", default="", help="comma-separated sizes (default: train-n)")
    z.add_argument("--dist", default="uniform", help="comma-separated: uniform,gaussian")
    z.add_argument("--sdv", default="0.6,0.8,1.0", help="comma-separated Gaussian deviations")
    z.add_argument("--count", type=int, default=100)
    z.add_argument("--methods", default="greedy:{ckpt}", help="method tokens; {ckpt} expands to --ckpt")
    z.add_argument("--ref", default="dp")
    z.add_argument("--seed", type=int, default=None)
    z.add_argument("--jobs", type=int, default=1)
    z.add_argument("--out", required=True)
    z.add_argument("--no-timing", action="store_true")
    z.set_defaults(func=cmd_generalize)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        if args.command == "generalize" and not args.eval_n:
            args.eval_n = str(args.train_n)
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        args.func(args)
    except UsageError as e:
        parser.error(str(e))  # exits with status 2
    except Exception as e:  # noqa: BLE001
        print(f"pdpha: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
