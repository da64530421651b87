"""Query encoding and greedy autoregressive generation over a populated
cache, with TTFT and positional-span instrumentation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .encoders import CacheState
from .kvcache import KVBlock
from .model import ModelConfig, Weights, encode_block
from .tokenizer import EOT
from .topology import SegmentGraph


@dataclass
class RunMetrics:
    ttft_ns: int = 0
    score_count: int = 0  # prefill + decode attention pairs
    prefill_score_count: int = 0
    decode_score_count: int = 0
    peak_block_tokens: int = 0
    kv_entries_total: int = 0
    max_position_index: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class GenerationResult:
    tokens: list[int]
    metrics: RunMetrics
    first_logits: np.ndarray | None = None


@dataclass
class _Tail:
    """Growing KV of query + generated tokens, in encode_block's block shape."""
    k: np.ndarray
    v: np.ndarray


def visible_set(cache: CacheState, graph: SegmentGraph) -> list[KVBlock]:
    """The cache blocks the query may attend to, in canonical order.

    sequential: the one contiguous run's blocks in serialization order.
    parallel:   every round-0 block.
    graphkv:    the latest-round block of each segment (round-R for targets,
                round-0 for pure sources); no segment contributes twice.
    """
    if cache.topology == "sequential":
        blocks = cache.store.get_blocks()
        return sorted(blocks, key=lambda b: b.position_start)
    if cache.topology == "parallel":
        return cache.store.get_blocks(lambda sid, rnd: rnd == 0)
    if cache.topology == "graphkv":
        wanted = {}
        for sid, rnd in sorted(k.key for k in cache.store.get_blocks()):
            wanted[sid] = max(wanted.get(sid, 0), rnd)
        out = []
        for sid in sorted(wanted):
            out.append(cache.store.get_block(sid, wanted[sid]))
        return out
    raise ValueError(f"unknown topology {cache.topology!r}")


def generate(cache: CacheState, graph: SegmentGraph, query_tokens: list[int],
             max_new: int, config: ModelConfig, weights: Weights) -> GenerationResult:
    """Greedy decoding: argmax per step, lowest token id on ties, stop at
    max_new tokens or the end-of-text byte. ttft_ns covers query prefill plus
    the first decode step only; chunk prefill is already in the cache.
    """
    if not query_tokens:
        raise ValueError("query must be non-empty")
    t0 = time.perf_counter_ns()
    vis = visible_set(cache, graph)
    vis_len = sum(b.length for b in vis)
    q_start = cache.plan.query_start

    enc = encode_block(query_tokens, q_start, vis, config, weights,
                       want_logits=True, temperature=cache.temperature,
                       scale=cache.scale)
    decode_score = enc.score_count
    tail = _Tail(k=enc.k, v=enc.v)
    first_logits = enc.logits[-1].copy()
    tok = int(np.argmax(first_logits))
    ttft_ns = time.perf_counter_ns() - t0

    out: list[int] = []
    appended = 0  # generated tokens appended to the tail KV (EOT never is)
    while tok != EOT and len(out) < max_new:
        out.append(tok)
        pos = q_start + len(query_tokens) + appended
        step = encode_block([tok], pos, vis + [tail], config, weights,
                            want_logits=True, temperature=cache.temperature,
                            scale=cache.scale)
        decode_score += step.score_count
        tail = _Tail(k=np.concatenate([tail.k, step.k], axis=1),
                     v=np.concatenate([tail.v, step.v], axis=1))
        appended += 1
        tok = int(np.argmax(step.logits[0]))

    q = len(query_tokens)
    metrics = RunMetrics(
        ttft_ns=ttft_ns,
        score_count=cache.score_count + decode_score,
        prefill_score_count=cache.score_count,
        decode_score_count=decode_score,
        peak_block_tokens=max(cache.peak_block_tokens, q),
        kv_entries_total=vis_len + q + appended,
        max_position_index=q_start + q + appended - 1,
    )
    return GenerationResult(tokens=out, metrics=metrics, first_logits=first_logits)
