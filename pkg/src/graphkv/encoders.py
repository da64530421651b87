"""The four cache-population strategies.

sequential  — one serialized causal prefill with true absolute positions.
parallel    — each chunk prefilled independently in the shared range [0, L);
              edges ignored; optional attention temperature/scale rescaling
              applied later at decode time.
graphkv     — parallel round 0, then each target re-encoded at [L, 2L)
              against the round-0 KV of its sources.

All three share encode_block as the only compute primitive, so their caches
feed the same decode path.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .kvcache import BlockStore, KVBlock, PEPlan, plan_positions, plan_sequential
from .model import ModelConfig, Weights, encode_block
from .topology import SegmentGraph


@dataclass
class CacheState:
    store: BlockStore
    plan: PEPlan
    topology: str
    temperature: float = 1.0
    scale: float = 1.0
    score_count: int = 0  # prefill-phase attention pairs
    peak_block_tokens: int = 0  # largest single encode_block call


def encode_sequential(graph: SegmentGraph, order: list[int], config: ModelConfig,
                      weights: Weights) -> CacheState:
    """Serialized causal prefill of the chunks in the given order."""
    if sorted(order) != sorted(s.id for s in graph.segments):
        raise ValueError("order must be a permutation of segment ids")
    plan = plan_sequential(graph, order)
    tokens: list[int] = []
    for sid in order:
        tokens.extend(graph.segment(sid).tokens)
    enc = encode_block(tokens, 0, [], config, weights)
    store = BlockStore()
    for sid in order:
        start = plan.starts[(sid, 0)]
        length = len(graph.segment(sid))
        store.put_block(KVBlock(segment_id=sid, round=0, position_start=start,
                                k=enc.k[:, start:start + length].copy(),
                                v=enc.v[:, start:start + length].copy()))
    return CacheState(store=store, plan=plan, topology="sequential",
                      score_count=enc.score_count, peak_block_tokens=enc.n_tokens)


def _round0(graph: SegmentGraph, plan: PEPlan, config: ModelConfig,
            weights: Weights, workers: int):
    """Independent prefill of every segment at its shared-range start."""
    def job(seg):
        return seg.id, encode_block(seg.tokens, plan.starts[(seg.id, 0)], [],
                                    config, weights)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(job, graph.segments))
    else:
        results = [job(seg) for seg in graph.segments]
    return dict(results)


def _encode_rounds(graph: SegmentGraph, config: ModelConfig, weights: Weights,
                   topology: str, rounds: int, temperature: float, scale: float,
                   workers: int, L_override: int | None, pe_offset: int) -> CacheState:
    plan = plan_positions(graph, L_override=L_override, rounds=rounds, pe_offset=pe_offset)
    store = BlockStore()
    score = 0
    peak = 0
    encs = _round0(graph, plan, config, weights, workers)
    for sid in sorted(encs):
        e = encs[sid]
        score += e.score_count
        peak = max(peak, e.n_tokens)
        store.put_block(KVBlock(segment_id=sid, round=0,
                                position_start=plan.starts[(sid, 0)], k=e.k, v=e.v))

    for r in range(1, plan.rounds_used + 1):
        def update(tid):
            seg = graph.segment(tid)
            # sources contribute their latest block at round <= r-1
            vis = []
            for u in graph.sources_of(tid):
                ur = max(rr for rr in range(r) if (u, rr) in store)
                vis.append(store.get_block(u, ur))
            return tid, encode_block(seg.tokens, plan.starts[(tid, r)], vis,
                                     config, weights)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(update, graph.targets))
        else:
            results = [update(tid) for tid in graph.targets]
        for tid, e in sorted(results):
            score += e.score_count
            peak = max(peak, e.n_tokens)
            store.put_block(KVBlock(segment_id=tid, round=r,
                                    position_start=plan.starts[(tid, r)], k=e.k, v=e.v))

    return CacheState(store=store, plan=plan, topology=topology,
                      temperature=temperature, scale=scale,
                      score_count=score, peak_block_tokens=peak)


def encode_parallel(graph: SegmentGraph, config: ModelConfig, weights: Weights,
                    temperature: float = 1.0, scale: float = 1.0,
                    workers: int = 1, L_override: int | None = None,
                    pe_offset: int = 0) -> CacheState:
    """Independent per-chunk prefill; graph edges are ignored."""
    edgeless = SegmentGraph(segments=graph.segments, edges=[])
    return _encode_rounds(edgeless, config, weights, "parallel", rounds=0,
                          temperature=temperature, scale=scale, workers=workers,
                          L_override=L_override, pe_offset=pe_offset)


def encode_graphkv(graph: SegmentGraph, config: ModelConfig, weights: Weights,
                   rounds: int = 1, workers: int = 1,
                   L_override: int | None = None, pe_offset: int = 0) -> CacheState:
    """Round-0 parallel prefill plus graph-masked target re-encoding.

    rounds > 1 is accepted as an experimental extension: round-r targets read
    their sources' round-(r-1) blocks (round 0 for never-updated sources).
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    return _encode_rounds(graph, config, weights, "graphkv", rounds=rounds,
                          temperature=1.0, scale=1.0, workers=workers,
                          L_override=L_override, pe_offset=pe_offset)
