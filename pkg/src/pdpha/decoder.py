"""Autoregressive route decoder with a multi-head glimpse and clipped pointer logits.

All routines are batched over instances that share the same ``n``; a single
instance is just a batch of one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from pdpha import nn
from pdpha.encoder import Embeddings, _heads
from pdpha.env import batch_mask, batch_route_costs
from pdpha.nn import Tensor


@dataclass
class Rollout:
    perms: np.ndarray  # (B, 2n) node indices
    step_log_probs: Tensor  # (B, 2n)
    log_prob: Tensor  # (B,)
    objective: np.ndarray  # (B,)

    def __len__(self):
        return len(self.perms)

    def pick(self, b: int) -> dict:
        return {
            "perm": self.perms[b].tolist(),
            "log_prob": float(self.log_prob.data[b]),
            "objective": float(self.objective[b]),
        }


def init_decoder_params(params: nn.ParameterSet, d_h: int, heads: int, rng: np.random.Generator) -> None:
    dk = d_h // heads
    b = 1.0 / math.sqrt(d_h)
    params.uniform(rng, "dec.placeholder", (d_h,), b)
    params.uniform(rng, "dec.glimpse.W_Q", (heads, 2 * d_h, dk), b)
    params.uniform(rng, "dec.glimpse.W_K", (heads, d_h, dk), b)
    params.uniform(rng, "dec.glimpse.W_V", (heads, d_h, dk), b)
    params.uniform(rng, "dec.glimpse.W_O", (d_h, d_h), b)
    params.uniform(rng, "dec.W_Q", (d_h, d_h), b)
    params.uniform(rng, "dec.W_K", (d_h, d_h), b)


class DecoderContext:
    """Per-instance projections computed once and reused at every decoding step."""

    def __init__(self, emb: Embeddings, params: nn.ParameterSet, heads: int, clip: float):
        self.nodes = emb.nodes
        self.graph = emb.graph
        self.params = params
        B, N, d = emb.nodes.shape
        self.B, self.N, self.d = B, N, d
        self.n = (N - 1) // 2
        self.heads = heads
        self.dk = d // heads
        self.clip = clip
        self.glimpse_K = nn.transpose(_heads(self.nodes, params["dec.glimpse.W_K"]), (0, 1, 3, 2))
        self.glimpse_V = _heads(self.nodes, params["dec.glimpse.W_V"])
        self.logit_K = nn.transpose(nn.matmul(self.nodes, params["dec.W_K"]), (0, 2, 1))

    def _clipped_logits(self, last: np.ndarray | None, allowed: np.ndarray) -> Tensor:
        """C * tanh(q.k / sqrt(d_k)) for every node; the glimpse already ignores masked nodes."""
        p = self.params
        B, d = self.B, self.d
        if last is None:
            prev = nn.add(Tensor(np.zeros((B, d))), p["dec.placeholder"])
        else:
            prev = nn.gather_rows(self.nodes, last)
        ctx = nn.reshape(nn.concat([self.graph, prev], axis=-1), (B, 1, 2 * d))
        q = _heads(ctx, p["dec.glimpse.W_Q"])  # (B, M, 1, dk)
        compat = nn.mul(nn.matmul(q, self.glimpse_K), 1.0 / math.sqrt(self.dk))
        attn = nn.softmax(nn.masked_fill(compat, ~allowed[:, None, None, :]), axis=-1)
        glimpse = nn.reshape(nn.transpose(nn.matmul(attn, self.glimpse_V), (0, 2, 1, 3)), (B, d))
        glimpse = nn.matmul(glimpse, p["dec.glimpse.W_O"])
        query = nn.reshape(nn.matmul(glimpse, p["dec.W_Q"]), (B, 1, d))
        scores = nn.reshape(nn.matmul(query, self.logit_K), (B, self.N))
        return nn.mul(nn.tanh(nn.mul(scores, 1.0 / math.sqrt(self.dk))), self.clip)

    def log_probs(self, last: np.ndarray | None, allowed: np.ndarray) -> Tensor:
        """Masked log-probabilities over all 2n+1 nodes, shape (B, N)."""
        logits = self._clipped_logits(last, allowed)
        # masking happens after clipping so invalid nodes get exactly zero probability
        return nn.log_softmax(nn.masked_fill(logits, ~allowed), axis=-1)

    def unmasked_logits(self, last: np.ndarray | None, allowed: np.ndarray) -> np.ndarray:
        """Clipped logits before masking (for inspection)."""
        with nn.no_grad():
            return self._clipped_logits(last, allowed).data


StepHook = Callable[[int, np.ndarray, np.ndarray], None]


def decode(
    ctx: DecoderContext,
    coords: np.ndarray,
    mode: str = "greedy",
    uniforms: np.ndarray | None = None,
    forced: np.ndarray | None = None,
    hook: StepHook | None = None,
) -> Rollout:
    """Build complete routes for every instance in the batch.

    ``mode`` is ``"greedy"`` (argmax, lowest index wins ties), ``"sample"``
    (inverse-CDF draws from ``uniforms`` of shape (B, 2n)) or ``"forced"``
    (replay the permutations in ``forced``, for likelihood evaluation).
    ``hook(t, probs, allowed)`` sees each step's distribution.
    """
    B, N, n = ctx.B, ctx.N, ctx.n
    T = 2 * n
    if mode == "sample" and (uniforms is None or uniforms.shape != (B, T)):
        raise ValueError(f"sampling needs uniforms of shape {(B, T)}")
    visited = np.zeros((B, N), dtype=bool)
    rows = np.arange(B)
    last = None
    perms = np.empty((B, T), dtype=np.int64)
    picked = []
    for t in range(T):
        allowed = batch_mask(visited, n)
        logp = ctx.log_probs(last, allowed)
        if hook is not None:
            hook(t, np.exp(logp.data), allowed)
        if mode == "greedy":
            action = np.argmax(logp.data, axis=1)
        elif mode == "sample":
            cum = np.cumsum(np.exp(logp.data), axis=1)
            cum /= cum[:, -1:]
            action = np.argmax(cum > uniforms[:, t:t + 1], axis=1)
        elif mode == "forced":
            action = np.asarray(forced[:, t], dtype=np.int64)
            if not allowed[rows, action].all():
                raise ValueError(f"forced route takes a masked node at step {t}")
        else:
            raise ValueError(f"unknown decode mode {mode!r}")
        picked.append(nn.reshape(nn.index(logp, (rows, action)), (B, 1)))
        perms[:, t] = action
        visited[rows, action] = True
        last = action
    step_lp = nn.concat(picked, axis=1)
    total = nn.sum(step_lp, axis=1)
    return Rollout(perms, step_lp, total, batch_route_costs(coords, perms))
