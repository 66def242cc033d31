"""The policy network: encoder + decoder parameters and the solving entry points."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from pdpha import nn
from pdpha.decoder import DecoderContext, Rollout, decode, init_decoder_params
from pdpha.encoder import EncoderConfig, encode, init_encoder_params, init_running_stats
from pdpha.instances import Instance, stack_coords


NORM_MODES = ("running", "batch", "update")


class PolicyNetwork:
    """Encoder and decoder parameters plus running batch-norm statistics.

    ``norm`` selects how batch norm behaves: ``running`` (inference, the default)
    uses the stored statistics, ``batch`` uses the statistics of the batch, and
    ``update`` does the same while folding them into the stored statistics.
    """

    def __init__(self, config: EncoderConfig | None = None, clip: float = 10.0, seed: int = 0):
        if not clip > 0:
            raise ValueError("clip constant must be positive")
        self.config = config or EncoderConfig()
        self.clip = clip
        self.params = nn.ParameterSet()
        rng = np.random.default_rng(seed)
        init_encoder_params(self.params, self.config, rng)
        init_decoder_params(self.params, self.config.d_h, self.config.heads, rng)
        self.running = init_running_stats(self.config)

    def hyperparameters(self) -> dict:
        return {"encoder": self.config.to_dict(), "clip": self.clip}

    def num_parameters(self) -> int:
        return self.params.count()

    def clone(self) -> "PolicyNetwork":
        other = PolicyNetwork.__new__(PolicyNetwork)
        other.config = self.config
        other.clip = self.clip
        other.params = nn.ParameterSet()
        for name, p in self.params.items():
            other.params.add(name, p.data)
        other.running = {k: v.copy() for k, v in self.running.items()}
        return other

    def copy_from(self, other: "PolicyNetwork") -> None:
        self.params.copy_from(other.params)
        self.running = {k: v.copy() for k, v in other.running.items()}

    def embed(self, coords: np.ndarray, norm: str = "running"):
        if norm not in NORM_MODES:
            raise ValueError(f"norm must be one of {NORM_MODES}, got {norm!r}")
        running = None if norm == "batch" else self.running
        return encode(coords, self.params, self.config, running, update=norm == "update")

    def context(self, coords: np.ndarray, norm: str = "running") -> DecoderContext:
        return DecoderContext(self.embed(coords, norm), self.params, self.config.heads, self.clip)

    def rollout(self, coords: np.ndarray, mode: str = "greedy", uniforms=None, forced=None, hook=None,
                norm: str = "running") -> Rollout:
        return decode(self.context(coords, norm), coords, mode, uniforms=uniforms, forced=forced, hook=hook)

    # persistence

    def save(self, path: str | Path) -> None:
        nn.save_checkpoint(path, {**self.params.state_dict(), **self.running}, self.hyperparameters())

    @classmethod
    def load(cls, path: str | Path) -> "PolicyNetwork":
        tensors, cfg = nn.load_checkpoint(path)
        model = cls(EncoderConfig(**cfg["encoder"]), clip=cfg["clip"])
        stats = {k: tensors.pop(k) for k in list(tensors) if k in model.running}
        model.params.load_state_dict(tensors)
        for name, ref in model.running.items():
            if name not in stats:
                raise KeyError(f"checkpoint is missing tensor {name!r}")
            if stats[name].shape != ref.shape:
                raise ValueError(f"shape mismatch for tensor {name!r}: checkpoint {stats[name].shape}, model {ref.shape}")
        model.running = stats
        return model


def _grouped(instances: Sequence[Instance]) -> dict[int, list[int]]:
    groups: dict[int, list[int]] = {}
    for i, inst in enumerate(instances):
        groups.setdefault(inst.n, []).append(i)
    return groups


def solve_greedy(model: PolicyNetwork, instances: Sequence[Instance], batch_size: int = 256) -> list[dict]:
    """Greedy routes for each instance, as dicts with perm/objective/log_prob."""
    out: list[dict | None] = [None] * len(instances)
    with nn.no_grad():
        for idx in _grouped(instances).values():
            for s in range(0, len(idx), batch_size):
                chunk = idx[s:s + batch_size]
                coords = stack_coords([instances[i] for i in chunk])
                ro = model.rollout(coords, "greedy")
                speeds = np.array([instances[i].speed for i in chunk])
                for b, i in enumerate(chunk):
                    res = ro.pick(b)
                    res["objective"] /= speeds[b]
                    out[i] = res
    return out


def sample_uniforms(rng: np.random.Generator, samples: int, n: int) -> np.ndarray:
    """Uniform draws for ``samples`` rollouts; a prefix of rows is a smaller nested draw."""
    return rng.random((samples, 2 * n))


def solve_sampling(
    model: PolicyNetwork,
    inst: Instance,
    samples: int,
    rng: np.random.Generator,
    chunk: int = 1280,
) -> dict:
    """Best of ``samples`` sampled routes; the encoder runs once per instance."""
    if samples < 1:
        raise ValueError("need at least one sample")
    U = sample_uniforms(rng, samples, inst.n)
    best = None
    with nn.no_grad():
        emb = model.embed(inst.coords[None])
        for s in range(0, samples, chunk):
            u = U[s:s + chunk]
            k = len(u)
            rep = type(emb)(
                nodes=nn.Tensor(np.repeat(emb.nodes.data, k, axis=0)),
                graph=nn.Tensor(np.repeat(emb.graph.data, k, axis=0)),
            )
            ctx = DecoderContext(rep, model.params, model.config.heads, model.clip)
            coords = np.repeat(inst.coords[None], k, axis=0)
            ro = decode(ctx, coords, "sample", uniforms=u)
            b = int(np.argmin(ro.objective))  # first minimum keeps nesting monotone
            if best is None or ro.objective[b] < best["objective"]:
                best = ro.pick(b)
    best["objective"] /= inst.speed
    return best
