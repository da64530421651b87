"""Independent brute-force references.

full_attention_reference recomputes the transformer with row-at-a-time
float64 arithmetic, a scalar-loop softmax, and no intermediate float32
rounding — a deliberately different code path from the engine's chunked
fp32 kernels, so shared bugs are unlikely. cost_model gives exact
closed-form attention-pair counts for all three topologies.

Engine-vs-oracle tolerance is 1e-5 relative: the engine rounds to fp32 at
every kernel boundary (unit roundoff ~6e-8) and desk-scale reductions are a
few hundred terms long, so worst-case drift stays two orders of magnitude
below 1e-5.
"""

from __future__ import annotations

import math

import numpy as np

from .model import ModelConfig, Weights
from .topology import SegmentGraph

F64 = np.float64


def _rms_row(x: np.ndarray, gain: np.ndarray, eps: float) -> np.ndarray:
    acc = 0.0
    for xi in x:
        acc += float(xi) * float(xi)
    return x * gain / math.sqrt(acc / len(x) + eps)


def _rope_row(vec: np.ndarray, position: int, theta_base: float) -> np.ndarray:
    d = len(vec)
    out = np.empty_like(vec)
    for i in range(0, d, 2):
        ang = position / theta_base ** (i / d)
        c, s = math.cos(ang), math.sin(ang)
        out[i] = vec[i] * c - vec[i + 1] * s
        out[i + 1] = vec[i] * s + vec[i + 1] * c
    return out


def full_attention_reference(tokens: list[int], positions: list[int],
                             mask: np.ndarray, config: ModelConfig,
                             weights: Weights):
    """Naive masked attention over one flat token list.

    mask[i, j] is True when token i may attend to key j. Returns per-layer
    rotated K and V ([n_layers, t, n_heads, d_head] fp32) and per-token
    logits (fp32).
    """
    config.validate()
    t = len(tokens)
    mask = np.asarray(mask)
    if len(positions) != t or mask.shape != (t, t) or mask.dtype != bool:
        raise ValueError("malformed mask or positions")
    if not mask.any(axis=1).all():
        raise ValueError("malformed mask: some row sees no key")

    nl, nh, dh = config.n_layers, config.n_heads, config.d_head
    x = weights.embedding.astype(F64)[np.asarray(tokens, dtype=np.int64)]
    ks = np.empty((nl, t, nh, dh), dtype=np.float32)
    vs = np.empty((nl, t, nh, dh), dtype=np.float32)

    for li, lw in enumerate(weights.layers):
        wq, wk, wv, wo = (m.astype(F64) for m in (lw.wq, lw.wk, lw.wv, lw.wo))
        wg, wu, wd = (m.astype(F64) for m in (lw.w_gate, lw.w_up, lw.w_down))
        q = np.empty((t, nh, dh))
        k = np.empty((t, nh, dh))
        v = np.empty((t, nh, dh))
        for i in range(t):
            h = _rms_row(x[i], lw.attn_norm.astype(F64), config.epsilon)
            qi, ki, vi = np.dot(h, wq), np.dot(h, wk), np.dot(h, wv)
            for hi in range(nh):
                sl = slice(hi * dh, (hi + 1) * dh)
                q[i, hi] = _rope_row(qi[sl], positions[i], config.theta_base)
                k[i, hi] = _rope_row(ki[sl], positions[i], config.theta_base)
                v[i, hi] = vi[sl]
        ks[li], vs[li] = k.astype(np.float32), v.astype(np.float32)

        ctx = np.zeros((t, nh, dh))
        for i in range(t):
            visible = [j for j in range(t) if mask[i, j]]
            for hi in range(nh):
                scores = [float(np.dot(q[i, hi], k[j, hi])) / math.sqrt(dh)
                          for j in visible]
                m = max(scores)
                exps = [math.exp(s - m) for s in scores]
                z = sum(exps)
                for e, j in zip(exps, visible):
                    ctx[i, hi] += (e / z) * v[j, hi]
        for i in range(t):
            x[i] = x[i] + np.dot(ctx[i].reshape(nh * dh), wo)
            h2 = _rms_row(x[i], lw.mlp_norm.astype(F64), config.epsilon)
            g = np.dot(h2, wg)
            g = g / (1.0 + np.exp(-g))  # silu
            x[i] = x[i] + np.dot(g * np.dot(h2, wu), wd)

    logits = np.empty((t, config.vocab_size), dtype=np.float32)
    for i in range(t):
        h = _rms_row(x[i], weights.final_norm.astype(F64), config.epsilon)
        logits[i] = np.dot(h, weights.w_out.astype(F64)).astype(np.float32)
    return ks, vs, logits


def _tri(n: int) -> int:
    return n * (n + 1) // 2


def cost_model(graph: SegmentGraph, topology: str, query_len: int,
               gen_len: int, L_override: int | None = None) -> dict:
    """Exact predicted counters for a prefill + generate run.

    Attention pairs are counted once per (query position, key position),
    independent of layers and heads, matching the engine's instrumentation.
    """
    lengths = {s.id: len(s) for s in graph.segments}
    total = sum(lengths.values())
    L = graph.max_len if L_override is None else L_override
    q, g = query_len, gen_len

    if topology == "sequential":
        prefill = _tri(total)
        peak = total
        query_start = total
    elif topology == "parallel":
        prefill = sum(_tri(n) for n in lengths.values())
        peak = graph.max_len
        query_start = L
    elif topology == "graphkv":
        prefill = sum(_tri(n) for n in lengths.values())
        for tid in graph.targets:
            src_total = sum(lengths[u] for u in graph.sources_of(tid))
            prefill += lengths[tid] * src_total + _tri(lengths[tid])
        peak = graph.max_len
        query_start = 2 * L if graph.edges else L
    else:
        raise ValueError(f"unknown topology {topology!r}")

    visible = total  # every segment contributes exactly one block at decode
    decode = q * visible + _tri(q) + g * (visible + q) + _tri(g)
    return {
        "prefill_score_count": prefill,
        "decode_score_count": decode,
        "score_count": prefill + decode,
        "peak_block_tokens": max(peak, q),
        "kv_entries": visible + q + g,
        "max_position_index": query_start + q + g - 1,
    }


def max_neighbors_within_budget(budget_tokens: int, chunk_len: int,
                                topology: str) -> int | None:
    """Largest star-graph neighbor count whose peak single-encode size fits
    the budget; None means unbounded (peak does not grow with neighbors)."""
    if budget_tokens < chunk_len:
        raise ValueError("budget below a single chunk; nothing fits")
    if topology == "sequential":
        # serialized prefill of k neighbors + center processes (k+1)*L tokens
        return budget_tokens // chunk_len - 1
    if topology in ("parallel", "graphkv"):
        return None
    raise ValueError(f"unknown topology {topology!r}")
