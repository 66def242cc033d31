"""Acceptance criteria 1-12; each test records a PASS/FAIL line shown in the terminal summary.

The desk-training checkpoint is trained once per session and shared by criteria 6, 7, 8 and 12.
"""

import json
import math
import time

import mpmath
import numpy as np
import pytest

from pdpha import baselines, nn
from pdpha.bench import evaluate, parse_methods
from pdpha.cli import main as cli
from pdpha.encoder import DELIVERY_ROLES, PICKUP_ROLES, EncoderConfig, attention_layer, embed_inputs, multihead
from pdpha.env import validate_route
from pdpha.instances import GeneratorConfig, Instance, generate_many, random_instances, stack_coords
from pdpha.policy import PolicyNetwork
from pdpha.training import TrainConfig, greedy_costs, one_sided_paired_ttest, paired_t_test_replace, random_coords, train

from conftest import CRITERIA, numeric_grad, rel_err

pytestmark = pytest.mark.acceptance

HELD_OUT_SEED = 12345
DESK_BUDGET_S = 60 * 60


def record(num: int, ok: bool, detail: str) -> None:
    CRITERIA[num] = (bool(ok), detail)
    assert ok, f"criterion {num}: {detail}"


def as_instances(coords):
    n = (coords.shape[1] - 1) // 2
    return [Instance(c[0], c[1:n + 1], c[n + 1:]) for c in coords]


@pytest.fixture(scope="session")
def held_out():
    insts = generate_many(GeneratorConfig(n=5, seed=HELD_OUT_SEED), 1000)
    optimum = np.array([baselines.exact_dp(i)[1] for i in insts])
    return insts, optimum


@pytest.fixture(scope="session")
def desk_runs(tmp_path_factory):
    """Train each encoder variant under the desk settings on first use."""
    root = tmp_path_factory.mktemp("desk")
    runs = {}

    def get(mode="seven", share=True):
        key = (mode, share)
        if key not in runs:
            cfg = TrainConfig(encoder=EncoderConfig(d_h=32, heads=4, layers=2, attention_mode=mode, share_kv=share))
            ck = root / f"{mode}-{'share' if share else 'sep'}.pdpha"
            t = time.perf_counter()
            model, report = train(cfg, checkpoint=ck, log_path=ck.with_suffix(".csv"))
            runs[key] = dict(cfg=cfg, ckpt=str(ck), model=model, report=report, seconds=time.perf_counter() - t)
        return runs[key]

    return get


def test_c01_dp_matches_brute_force():
    t = time.perf_counter()
    worst = 0.0
    for n in (1, 2, 3):
        for inst in random_instances(np.random.default_rng(100 + n), n, 200):
            worst = max(worst, abs(baselines.exact_dp(inst)[1] - baselines.brute_force(inst)[1]))
    secs = time.perf_counter() - t
    record(1, worst <= 1e-9 and secs < 30, f"max |dobj| {worst:.1e} over 600 instances in {secs:.1f}s")


def test_c02_feasibility_fuzz():
    t = time.perf_counter()
    model = PolicyNetwork(EncoderConfig(d_h=32, heads=4, layers=2), seed=21)
    rng = np.random.default_rng(22)
    total = violations = 0
    with nn.no_grad():
        for n in (1, 2, 3, 5, 8, 10):
            for mode in ("greedy", "sample"):
                coords = random_coords(rng, 10_000 // 12 + 1, n)
                u = rng.random((len(coords), 2 * n)) if mode == "sample" else None
                ro = model.rollout(coords, mode, uniforms=u)
                for inst, perm in zip(as_instances(coords), ro.perms):
                    total += 1
                    violations += not validate_route(inst, perm).feasible
    secs = time.perf_counter() - t
    record(2, total >= 10_000 and violations == 0 and secs < 120,
           f"{total} rollouts, {violations} violations, {secs:.1f}s")


def test_c03_gradient_fidelity():
    cfg = EncoderConfig(d_h=8, heads=2, layers=1, ff_hidden=16)
    model = PolicyNetwork(cfg, seed=31)
    coords = generate_many(GeneratorConfig(n=2, seed=32), 1)[0].coords[None]
    forced = np.array([[1, 2, 3, 4]])

    def log_prob():
        return model.rollout(coords, "forced", forced=forced, norm="batch").log_prob

    model.params.zero_grad()
    log_prob().backward()
    rng = np.random.default_rng(33)
    entries = [(name, idx) for name, p in model.params.items() for idx in np.ndindex(p.shape)]
    picks = rng.choice(len(entries), size=120, replace=False)
    worst = 0.0
    for k in picks:
        name, idx = entries[k]
        p = model.params[name]
        fd = numeric_grad(lambda: log_prob().item(), p, idx)
        worst = max(worst, rel_err(p.grad[idx], fd))
    record(3, worst < 1e-5, f"max relative error {worst:.2e} over {len(picks)} parameters")


def test_c04_masked_softmax_exactness():
    model = PolicyNetwork(EncoderConfig(d_h=32, heads=4, layers=2), seed=41)
    coords = random_coords(np.random.default_rng(42), 1000, 5)
    worst_masked, worst_sum = 0.0, 0.0

    def hook(t, probs, allowed):
        nonlocal worst_masked, worst_sum
        if (~allowed).any():
            worst_masked = max(worst_masked, probs[~allowed].max())
        worst_sum = max(worst_sum, np.abs(probs.sum(axis=1) - 1).max())

    with nn.no_grad():
        model.rollout(coords, "sample", uniforms=np.random.default_rng(43).random((1000, 10)), hook=hook)
    record(4, worst_masked < 1e-300 and worst_sum <= 1e-9,
           f"max masked prob {worst_masked:.1e}, max |sum-1| {worst_sum:.1e} over 1000 rollouts")


def test_c05_role_restriction():
    ok = True
    for share in (True, False):
        cfg = EncoderConfig(d_h=16, heads=4, layers=3, ff_hidden=32, share_kv=share)
        model = PolicyNetwork(cfg, seed=51)
        n = 3
        coords = random_coords(np.random.default_rng(52), 2, n)
        depot, pickups, deliveries = [0], list(range(1, n + 1)), list(range(n + 1, 2 * n + 1))
        for roles, keep in ((PICKUP_ROLES, depot + deliveries), (DELIVERY_ROLES, depot + pickups)):
            zeroed = model.clone()
            for layer in range(cfg.layers):
                for t in roles:
                    zeroed.params[f"enc.layer{layer}.W_Q_{t}"].data[:] = 0
            with nn.no_grad():
                h = embed_inputs(coords, model.params)
                for layer in range(cfg.layers):
                    a = multihead(h, model.params, cfg, layer).data
                    b = multihead(h, zeroed.params, cfg, layer).data
                    ok &= np.array_equal(a[:, keep], b[:, keep]) and not np.array_equal(a, b)
                    h, _ = attention_layer(h, model.params, cfg, layer)
    record(5, ok, "zeroed role queries leave the other role and the depot bit-identical at every layer")


@pytest.mark.slow
def test_c06_learning_evidence(desk_runs, held_out):
    insts, optimum = held_out
    run = desk_runs()
    coords = stack_coords(insts)
    untrained = greedy_costs(PolicyNetwork(run["cfg"].encoder, clip=run["cfg"].clip, seed=run["cfg"].seed), coords).mean()
    trained = greedy_costs(run["model"], coords).mean()
    reduction = 1 - trained / untrained
    gap = trained / optimum.mean() - 1
    ok = reduction >= 0.15 and gap <= 0.10 and run["seconds"] <= DESK_BUDGET_S
    record(6, ok, f"greedy {untrained:.4f} -> {trained:.4f} (reduction {reduction:.1%}), "
                  f"gap to DP {gap:.2%}, training {run['seconds'] / 60:.1f} min")


@pytest.mark.slow
def test_c07_decode_ordering(desk_runs, held_out):
    insts = held_out[0][:500]
    run = desk_runs()
    methods = parse_methods(f"greedy:{run['ckpt']},sample128:{run['ckpt']},sample1280:{run['ckpt']}")
    rep = evaluate(insts, methods, ref="dp", seed=7, models={run["ckpt"]: run["model"]})
    g, s128, s1280 = (r.mean_objective for r in rep.rows)
    ok = s1280 <= s128 <= g and s1280 < g
    record(7, ok, f"best-of-1280 {s1280:.4f} <= best-of-128 {s128:.4f} <= greedy {g:.4f}")


@pytest.mark.slow
def test_c08_ablation_harness(desk_runs, held_out, tmp_path):
    insts = held_out[0][:200]
    variants = [("seven", True), ("seven", False), ("four", True), ("four", False)]
    runs = {v: desk_runs(*v) for v in variants}
    tokens = ",".join(f"greedy:{runs[v]['ckpt']}" for v in variants)
    models = {runs[v]["ckpt"]: runs[v]["model"] for v in variants}
    rep = evaluate(insts, parse_methods(tokens), ref="dp", setting="ablation-n5", models=models)
    rep.write_csv(tmp_path / "ablation.csv")
    print(rep.table())
    counts_ok = True
    for mode, types in (("seven", 7), ("four", 4)):
        shared, sep = runs[(mode, True)]["model"], runs[(mode, False)]["model"]
        cfg = shared.config
        predicted = cfg.layers * (types - 1) * cfg.heads * (cfg.d_h * cfg.d_k + cfg.d_h * cfg.d_k)
        counts_ok &= sep.num_parameters() - shared.num_parameters() == predicted
    finite = all(math.isfinite(r.mean_objective) for r in rep.rows) and len(rep.rows) == 4
    table = "; ".join(f"{m}-{'share' if s else 'sep'} {r.mean_objective:.4f}" for (m, s), r in zip(variants, rep.rows))
    record(8, counts_ok and finite, f"{table}; parameter deltas match the sharing formula: {counts_ok}")


def test_c09_baseline_sanity():
    insts = generate_many(GeneratorConfig(n=10, seed=90), 100)
    dp = np.array([baselines.exact_dp(i)[1] for i in insts])
    nn_obj = np.array([baselines.nearest_neighbor(i)[1] for i in insts])
    sa = np.array([baselines.simulated_annealing(i)[1] for i in insts])
    gap = baselines.gap_percent(sa.mean(), dp.mean())
    record(9, sa.mean() <= nn_obj.mean() and gap <= 5.0,
           f"SA {sa.mean():.4f} <= NN {nn_obj.mean():.4f}; SA gap to DP {gap:.2f}%")


def test_c10_replacement_logic():
    model = PolicyNetwork(EncoderConfig(d_h=8, heads=2, layers=1, ff_hidden=16), seed=101)
    coords = random_coords(np.random.default_rng(102), 50, 3)
    same, _ = paired_t_test_replace(model, model.clone(), coords)
    costs = greedy_costs(model, coords, norm="batch")
    other = PolicyNetwork(model.config, seed=103)
    dominated, _ = paired_t_test_replace(model, other, coords, baseline_costs=costs + 0.25)
    diffs = np.array([-1.0, -2.0, -1.0, -2.0, -1.0])
    t, p = one_sided_paired_ttest(diffs, np.zeros(5))
    x = mpmath.mpf(4) / (4 + mpmath.mpf(t) ** 2)
    p_ref = float(mpmath.betainc(2, mpmath.mpf(1) / 2, 0, x, regularized=True) / 2)
    ok = (not same) and dominated and abs(p - p_ref) <= 1e-6
    record(10, ok, f"identical -> replaced={same}; dominating -> replaced={dominated}; p {p:.8f} vs oracle {p_ref:.8f}")


def test_c11_pipeline_reproducible(tmp_path):
    cfg = {"n": 3, "epochs": 2, "batches_per_epoch": 5, "batch_size": 16, "ttest_eval_size": 50, "seed": 4,
           "encoder": {"d_h": 16, "heads": 4, "layers": 1, "ff_hidden": 32}}
    (tmp_path / "train.json").write_text(json.dumps(cfg))
    outputs = []
    d = tmp_path / "run"
    d.mkdir()
    for _ in range(2):
        steps = [
            ["generate", "--n", "3", "--count", "20", "--seed", "5", "--out", str(d / "i.jsonl")],
            ["train", "--config", str(tmp_path / "train.json"), "--out", str(d / "m.pdpha"), "--no-timing"],
            ["solve", "--ckpt", str(d / "m.pdpha"), "--instances", str(d / "i.jsonl"), "--mode", "sample",
             "--samples", "16", "--seed", "6", "--out", str(d / "s.jsonl"), "--no-timing"],
            ["bench", "--instances", str(d / "i.jsonl"), "--methods", f"dp,sa,nn,greedy:{d / 'm.pdpha'},sample16:{d / 'm.pdpha'}",
             "--seed", "6", "--jobs", "1", "--out", str(d / "r.csv"), "--no-timing"],
        ]
        codes = [cli(argv) for argv in steps]
        assert codes == [0, 0, 0, 0]
        outputs.append([(d / f).read_bytes() for f in ("m.log.csv", "s.jsonl", "r.csv")])
    same = outputs[0] == outputs[1]
    record(11, same, "training log, solve output and bench report byte-identical across two runs")


@pytest.mark.slow
def test_c12_generalization(desk_runs, tmp_path, capsys):
    run = desk_runs()
    out = tmp_path / "gen.csv"
    code = cli(["generalize", "--ckpt", run["ckpt"], "--train-n", "5", "--eval-n", "5,10", "--dist", "uniform,gaussian",
                "--sdv", "0.6,0.8,1.0", "--count", "100", "--seed", "120", "--out", str(out), "--no-timing"])
    rows = [line.split(",") for line in out.read_text().splitlines()[2:]] if code == 0 else []
    gaps = {r[0]: float(r[4]) for r in rows}
    finite = len(gaps) == 8 and all(math.isfinite(g) for g in gaps.values())
    same = gaps.get("train5->n5-uniform", math.nan)
    lowest = finite and same <= min(gaps.values())
    with capsys.disabled():
        print("\ngeneralization gaps (%): " + ", ".join(f"{k} {v:.2f}" for k, v in gaps.items()))
    # feasibility is enforced inside evaluate; an infeasible route makes the command fail
    record(12, code == 0 and finite,
           f"{len(gaps)} settings, all routes feasible, gaps finite; same-size uniform lowest: {lowest} "
           f"(same-size {same:.2f}%, max {max(gaps.values(), default=math.nan):.2f}%)")
