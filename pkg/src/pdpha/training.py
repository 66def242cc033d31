"""REINFORCE with a greedy-rollout baseline that is swapped in after a paired t-test."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from pdpha import nn
from pdpha.encoder import EncoderConfig
from pdpha.instances import sample_points
from pdpha.policy import PolicyNetwork

log = logging.getLogger(__name__)

LOG_FIELDS = ("epoch", "mean_sample_reward", "mean_greedy_obj", "replaced", "seconds")


@dataclass
class TrainConfig:
    n: int = 5
    epochs: int = 15
    batches_per_epoch: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-4
    alpha: float = 0.05
    ttest_eval_size: int = 1000
    seed: int = 0
    clip: float = 10.0
    distribution: str = "uniform"
    sdv: float = 1.0
    encoder: EncoderConfig = field(default_factory=lambda: EncoderConfig(d_h=32, heads=4, layers=2))

    def __post_init__(self):
        if isinstance(self.encoder, dict):
            self.encoder = EncoderConfig(**self.encoder)
        for name in ("n", "batches_per_epoch", "batch_size", "ttest_eval_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.ttest_eval_size < 2:
            raise ValueError("the t-test needs at least two evaluation instances")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["encoder"] = self.encoder.to_dict()
        return d

    @classmethod
    def from_json(cls, path: str | Path) -> "TrainConfig":
        with open(path) as fh:
            raw = json.load(fh)
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**raw)


@dataclass
class EpochRecord:
    epoch: int
    mean_sample_reward: float
    mean_greedy_obj: float
    replaced: bool
    seconds: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)

    @property
    def replacements(self) -> int:
        return sum(e.replaced for e in self.epochs)

    def write_csv(self, path: str | Path, timing: bool = True) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LOG_FIELDS)
            for e in self.epochs:
                w.writerow([
                    e.epoch,
                    repr(e.mean_sample_reward),
                    repr(e.mean_greedy_obj),
                    int(e.replaced),
                    f"{e.seconds:.3f}" if timing else "0",
                ])


def reinforce_batch(
    policy: PolicyNetwork,
    baseline: PolicyNetwork,
    coords: np.ndarray,
    uniforms: np.ndarray,
    optimizer: nn.Adam | None = None,
) -> dict:
    """One policy-gradient update on a batch of same-size instances.

    The surrogate is mean((cost - baseline_cost) * log p); advantages are not
    normalised. Both networks normalise with batch statistics, and the policy's
    running statistics absorb them. With ``optimizer=None`` the gradients are
    left in place.
    """
    if len(coords) != len(uniforms):
        raise ValueError(f"{len(coords)} instances but {len(uniforms)} uniform rows")
    ro = policy.rollout(coords, "sample", uniforms=uniforms, norm="update")
    with nn.no_grad():
        base = baseline.rollout(coords, "greedy", norm="batch").objective
    advantage = ro.objective - base
    loss = nn.mean(nn.mul(ro.log_prob, advantage))
    loss.backward()
    if optimizer is not None:
        optimizer.step()
    return {
        "loss": loss.item(),
        "reward": -ro.objective,
        "baseline_reward": -base,
        "log_prob": ro.log_prob.data.copy(),
    }


def one_sided_paired_ttest(candidate: np.ndarray, baseline: np.ndarray) -> tuple[float, float]:
    """t statistic and p-value for H1: mean(candidate - baseline) < 0.

    Zero-variance differences are resolved without a t statistic: all-zero
    differences give p = 1, a constant improvement gives p = 0 and a constant
    deterioration gives p = 1.
    """
    diff = np.asarray(candidate, dtype=np.float64) - np.asarray(baseline, dtype=np.float64)
    if len(diff) < 2:
        raise ValueError("paired t-test needs at least two pairs")
    mean = diff.mean()
    sd = diff.std(ddof=1)
    if sd == 0.0:
        if mean < 0:
            return -math.inf, 0.0
        return (math.inf if mean > 0 else 0.0), 1.0
    t = mean / (sd / math.sqrt(len(diff)))
    return float(t), float(stats.t.cdf(t, df=len(diff) - 1))


def paired_t_test_replace(
    policy: PolicyNetwork,
    baseline: PolicyNetwork,
    eval_coords: np.ndarray,
    alpha: float = 0.05,
    baseline_costs: np.ndarray | None = None,
) -> tuple[bool, np.ndarray]:
    """Copy the policy into the baseline if its greedy tours are significantly shorter.

    Returns (replaced, greedy costs of the baseline after the decision).
    """
    cand = greedy_costs(policy, eval_coords, norm="batch")
    if baseline_costs is None:
        baseline_costs = greedy_costs(baseline, eval_coords, norm="batch")
    _, p = one_sided_paired_ttest(cand, baseline_costs)
    if p < alpha:
        baseline.copy_from(policy)
        return True, cand
    return False, baseline_costs


def random_coords(rng: np.random.Generator, count: int, n: int, distribution: str = "uniform", sdv: float = 1.0) -> np.ndarray:
    if distribution == "uniform":
        return rng.random((count, 2 * n + 1, 2))
    return sample_points(rng, count * (2 * n + 1), distribution, sdv).reshape(count, 2 * n + 1, 2)


def greedy_costs(model: PolicyNetwork, coords: np.ndarray, batch: int = 500, norm: str = "running") -> np.ndarray:
    with nn.no_grad():
        return np.concatenate([
            model.rollout(coords[s:s + batch], "greedy", norm=norm).objective for s in range(0, len(coords), batch)
        ])


def train(
    config: TrainConfig,
    checkpoint: str | Path | None = None,
    log_path: str | Path | None = None,
    timing: bool = True,
    model: PolicyNetwork | None = None,
) -> tuple[PolicyNetwork, TrainReport]:
    """Run the training loop; writes the checkpoint and CSV log after every epoch."""
    rng = np.random.default_rng(config.seed)
    eval_rng = np.random.default_rng([config.seed, 1])
    policy = model or PolicyNetwork(config.encoder, clip=config.clip, seed=config.seed)
    baseline = policy.clone()
    optimizer = nn.Adam(policy.params, lr=config.learning_rate)
    report = TrainReport()

    if checkpoint is not None:
        policy.save(checkpoint)
    if log_path is not None:
        report.write_csv(log_path, timing)
    if config.epochs == 0:
        return policy, report

    eval_coords = random_coords(eval_rng, config.ttest_eval_size, config.n, config.distribution, config.sdv)
    base_costs = greedy_costs(baseline, eval_coords, norm="batch")
    T = 2 * config.n
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        rewards = []
        for _ in range(config.batches_per_epoch):
            coords = random_coords(rng, config.batch_size, config.n, config.distribution, config.sdv)
            uniforms = rng.random((config.batch_size, T))
            out = reinforce_batch(policy, baseline, coords, uniforms, optimizer)
            rewards.append(out["reward"].mean())
        cand_costs = greedy_costs(policy, eval_coords, norm="batch")
        _, p = one_sided_paired_ttest(cand_costs, base_costs)
        replaced = p < config.alpha
        if replaced:
            baseline.copy_from(policy)
            base_costs = cand_costs
        rec = EpochRecord(
            epoch=epoch,
            mean_sample_reward=float(np.mean(rewards)),
            mean_greedy_obj=float(cand_costs.mean()),
            replaced=bool(replaced),
            seconds=time.perf_counter() - start,
        )
        report.epochs.append(rec)
        log.info(
            "epoch %d reward %.4f greedy %.4f p=%.3g replaced=%s (%.1fs)",
            epoch, rec.mean_sample_reward, rec.mean_greedy_obj, p, replaced, rec.seconds,
        )
        if checkpoint is not None:
            policy.save(checkpoint)
        if log_path is not None:
            report.write_csv(log_path, timing)
    return policy, report
