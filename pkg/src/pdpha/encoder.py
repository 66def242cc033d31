"""Heterogeneous-attention graph encoder.

Input rows follow node order (depot, pickups, deliveries). Pickup rows embed
their own coordinates concatenated with their paired delivery's, so the
pairing is visible before any attention layer runs.

Besides the usual all-node attention, each layer gives pickups and
deliveries role-specific attention heads:

* ``pd`` / ``dp``: a feature-wise gate between a node and its partner,
* ``pP`` / ``pD``: pickup queries over all pickups / all deliveries,
* ``dP`` / ``dD``: delivery queries over all pickups / all deliveries.

Role heads are only added to rows of the querying role; the depot receives
the plain attention only.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from pdpha import nn
from pdpha.nn import Tensor

SEVEN = ("orig", "pd", "dp", "pP", "pD", "dP", "dD")
FOUR = ("orig", "pd", "pP", "pD")
PICKUP_ROLES = ("pd", "pP", "pD")
DELIVERY_ROLES = ("dp", "dP", "dD")


@dataclass(frozen=True)
class EncoderConfig:
    d_h: int = 128
    heads: int = 8
    layers: int = 3
    ff_hidden: int = 512
    attention_mode: str = "seven"
    share_kv: bool = True

    def __post_init__(self):
        if self.d_h % self.heads:
            raise ValueError(f"d_h={self.d_h} is not divisible by heads={self.heads}")
        if self.layers < 1:
            raise ValueError("need at least one attention layer")
        if self.attention_mode not in ("seven", "four"):
            raise ValueError(f"attention_mode must be 'seven' or 'four', got {self.attention_mode!r}")

    @property
    def d_k(self) -> int:
        return self.d_h // self.heads

    @property
    def attention_types(self) -> tuple[str, ...]:
        return SEVEN if self.attention_mode == "seven" else FOUR

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Embeddings:
    nodes: Tensor  # (B, 2n+1, d_h)
    graph: Tensor  # (B, d_h)
    multihead: list[Tensor] = field(default_factory=list)  # per-layer attention sublayer outputs


def init_encoder_params(params: nn.ParameterSet, cfg: EncoderConfig, rng: np.random.Generator) -> None:
    d, dk, M = cfg.d_h, cfg.d_k, cfg.heads
    bound = 1.0 / math.sqrt(d)  # one bound for every matrix
    for role, width in (("depot", 2), ("pickup", 4), ("delivery", 2)):
        params.uniform(rng, f"enc.embed.{role}.W", (width, d), bound)
        params.uniform(rng, f"enc.embed.{role}.b", (d,), bound)
    for layer in range(cfg.layers):
        pre = f"enc.layer{layer}"
        kv_types = ("",) if cfg.share_kv else cfg.attention_types
        for t in kv_types:
            suffix = f"_{t}" if t else ""
            params.uniform(rng, f"{pre}.W_K{suffix}", (M, d, dk), bound)
            params.uniform(rng, f"{pre}.W_V{suffix}", (M, d, dk), bound)
        for t in cfg.attention_types:
            params.uniform(rng, f"{pre}.W_Q_{t}", (M, d, dk), bound)
        params.uniform(rng, f"{pre}.W_O", (d, d), bound)
        params.add(f"{pre}.bn1.gamma", np.ones(d))
        params.add(f"{pre}.bn1.beta", np.zeros(d))
        params.uniform(rng, f"{pre}.ff1.W", (d, cfg.ff_hidden), bound)
        params.uniform(rng, f"{pre}.ff1.b", (cfg.ff_hidden,), bound)
        params.uniform(rng, f"{pre}.ff2.W", (cfg.ff_hidden, d), bound)
        params.uniform(rng, f"{pre}.ff2.b", (d,), bound)
        params.add(f"{pre}.bn2.gamma", np.ones(d))
        params.add(f"{pre}.bn2.beta", np.zeros(d))


def embed_inputs(coords: np.ndarray, params: nn.ParameterSet) -> Tensor:
    """Initial embeddings h^0 for (B, 2n+1, 2) coordinates -> (B, 2n+1, d_h)."""
    coords = np.asarray(coords, dtype=np.float64)
    n = (coords.shape[1] - 1) // 2
    depot = coords[:, :1]
    pick = np.concatenate([coords[:, 1:n + 1], coords[:, n + 1:]], axis=-1)
    deliv = coords[:, n + 1:]
    rows = [
        nn.matmul(Tensor(x), params[f"enc.embed.{role}.W"]) + params[f"enc.embed.{role}.b"]
        for role, x in (("depot", depot), ("pickup", pick), ("delivery", deliv))
    ]
    return nn.concat(rows, axis=1)


def _heads(h: Tensor, W: Tensor) -> Tensor:
    """(B, R, d) x (M, d, dk) -> (B, M, R, dk)."""
    B, R, d = h.shape
    return nn.matmul(nn.reshape(h, (B, 1, R, d)), W)


def _attend(q: Tensor, k: Tensor, v: Tensor, scale: float) -> Tensor:
    scores = nn.mul(nn.matmul(q, nn.transpose(k, (0, 1, 3, 2))), scale)
    return nn.matmul(nn.softmax(scores, axis=-1), v)


def _pair_gate(q: Tensor, k: Tensor, v: Tensor, scale: float) -> Tensor:
    # softmax across the feature axis of q*k, used as an element-wise gate on v
    return nn.mul(nn.softmax(nn.mul(nn.mul(q, k), scale), axis=-1), v)


def multihead(h: Tensor, params: nn.ParameterSet, cfg: EncoderConfig, layer: int) -> Tensor:
    """Heterogeneous multi-head attention sublayer output, shape (B, 2n+1, d_h)."""
    pre = f"enc.layer{layer}"
    B, N, d = h.shape
    n = (N - 1) // 2
    M, dk = cfg.heads, cfg.d_k
    scale = 1.0 / math.sqrt(dk)
    types = cfg.attention_types

    def kv(t: str) -> tuple[Tensor, Tensor]:
        if cfg.share_kv:
            return params[f"{pre}.W_K"], params[f"{pre}.W_V"]
        return params[f"{pre}.W_K_{t}"], params[f"{pre}.W_V_{t}"]

    hP = h[:, 1:n + 1]
    hD = h[:, n + 1:]

    WK, WV = kv("orig")
    K, V = _heads(h, WK), _heads(h, WV)
    out = _attend(_heads(h, params[f"{pre}.W_Q_orig"]), K, V, scale)

    if cfg.share_kv:
        # slice the shared projections instead of recomputing them
        KP, VP = K[:, :, 1:n + 1], V[:, :, 1:n + 1]
        KD, VD = K[:, :, n + 1:], V[:, :, n + 1:]

        def keys(t, role):
            return (KP, VP) if role == "P" else (KD, VD)
    else:
        def keys(t, role):
            WK, WV = kv(t)
            src = hP if role == "P" else hD
            return _heads(src, WK), _heads(src, WV)

    pick_terms = []
    deliv_terms = []
    for t in types:
        if t == "orig":
            continue
        querier = hP if t[0] == "p" else hD
        target = "D" if t in ("pd", "pD", "dD") else "P"
        q = _heads(querier, params[f"{pre}.W_Q_{t}"])
        k, v = keys(t, target)
        if t in ("pd", "dp"):
            term = _pair_gate(q, k, v, scale)
        else:
            term = _attend(q, k, v, scale)
        (pick_terms if t[0] == "p" else deliv_terms).append(term)

    zeros = Tensor(np.zeros((B, M, n, dk)))
    pick = _sum(pick_terms) if pick_terms else zeros
    deliv = _sum(deliv_terms) if deliv_terms else zeros
    extra = nn.concat([Tensor(np.zeros((B, M, 1, dk))), pick, deliv], axis=2)
    heads = nn.add(out, extra)
    merged = nn.reshape(nn.transpose(heads, (0, 2, 1, 3)), (B, N, d))
    return nn.matmul(merged, params[f"{pre}.W_O"])


def _sum(terms: list[Tensor]) -> Tensor:
    acc = terms[0]
    for t in terms[1:]:
        acc = nn.add(acc, t)
    return acc


BN_MOMENTUM = 0.1
BN_EPS = 1e-5


def init_running_stats(cfg: EncoderConfig) -> dict[str, np.ndarray]:
    """Per-feature running mean/variance for every batch norm, used at inference."""
    stats = {}
    for layer in range(cfg.layers):
        for bn in ("bn1", "bn2"):
            stats[f"enc.layer{layer}.{bn}.running_mean"] = np.zeros(cfg.d_h)
            stats[f"enc.layer{layer}.{bn}.running_var"] = np.ones(cfg.d_h)
    return stats


def _norm(x: Tensor, params: nn.ParameterSet, name: str, running: dict | None, update: bool) -> Tensor:
    """Batch statistics when ``running`` is None or ``update`` is set, stored statistics otherwise."""
    gamma, beta = params[f"{name}.gamma"], params[f"{name}.beta"]
    if running is None or update:
        if update:
            axes = tuple(range(x.data.ndim - 1))
            for key, value in (("running_mean", x.data.mean(axis=axes)), ("running_var", x.data.var(axis=axes))):
                old = running[f"{name}.{key}"]
                running[f"{name}.{key}"] = (1 - BN_MOMENTUM) * old + BN_MOMENTUM * value
        return nn.batch_norm(x, gamma, beta, eps=BN_EPS)
    mean = running[f"{name}.running_mean"]
    inv = 1.0 / np.sqrt(running[f"{name}.running_var"] + BN_EPS)
    return nn.add(nn.mul(nn.mul(nn.sub(x, mean), inv), gamma), beta)


def attention_layer(
    h: Tensor,
    params: nn.ParameterSet,
    cfg: EncoderConfig,
    layer: int,
    running: dict | None = None,
    update: bool = False,
) -> tuple[Tensor, Tensor]:
    """One encoder layer; returns (h^l, multi-head sublayer output)."""
    pre = f"enc.layer{layer}"
    mh = multihead(h, params, cfg, layer)
    h1 = _norm(nn.add(h, mh), params, f"{pre}.bn1", running, update)
    ff = nn.relu(nn.add(nn.matmul(h1, params[f"{pre}.ff1.W"]), params[f"{pre}.ff1.b"]))
    ff = nn.add(nn.matmul(ff, params[f"{pre}.ff2.W"]), params[f"{pre}.ff2.b"])
    h2 = _norm(nn.add(h1, ff), params, f"{pre}.bn2", running, update)
    return h2, mh


def encode(
    coords: np.ndarray,
    params: nn.ParameterSet,
    cfg: EncoderConfig,
    running: dict | None = None,
    update: bool = False,
) -> Embeddings:
    """Node and graph embeddings.

    Without ``running`` every batch norm uses the statistics of this batch. With
    ``running`` the stored statistics are used, unless ``update`` is set, in which
    case batch statistics are used and folded into ``running``.
    """
    if coords.ndim == 2:
        coords = coords[None]
    if coords.shape[1] < 3 or coords.shape[1] % 2 == 0:
        raise nn.ShapeError(f"expected 2n+1 >= 3 nodes, got {coords.shape[1]}")
    h = embed_inputs(coords, params)
    mhs = []
    for layer in range(cfg.layers):
        h, mh = attention_layer(h, params, cfg, layer, running, update)
        mhs.append(mh)
    return Embeddings(nodes=h, graph=nn.mean_rows(h), multihead=mhs)


def kv_sharing_extra_params(cfg: EncoderConfig) -> int:
    """Parameters added per model by giving every attention type its own key/value maps."""
    extra_types = len(cfg.attention_types) - 1
    return cfg.layers * extra_types * cfg.heads * 2 * cfg.d_h * cfg.d_k
