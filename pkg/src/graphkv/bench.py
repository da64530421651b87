"""Stress benchmarks on synthetic star graphs: peak-memory sweep over
neighbor counts and TTFT sweep over words-per-node. Emits versioned CSV.
"""

from __future__ import annotations

import csv
import statistics
import time
import tracemalloc

from .decoder import generate
from .encoders import encode_graphkv, encode_sequential, CacheState
from .kvcache import load_cache, save_cache
from .model import ModelConfig, Weights
from .oracle import cost_model
from .tokenizer import encode_text
from .topology import synth_star

MEM_SCHEMA = "gkv-mem-v1"
MEM_COLUMNS = ["schema", "topology", "neighbors", "words", "peak_bytes",
               "model_peak_tokens", "kv_entries"]

TTFT_SCHEMA = "gkv-ttft-v1"
TTFT_COLUMNS = ["schema", "topology", "words_per_node", "run_index",
                "ttft_ns", "ttft_ns_median"]

DEFAULT_QUERY = "what does the graph core do"


def write_csv(path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=columns)
        w.writeheader()
        w.writerows(rows)


def _prefill(topology: str, graph, config, weights, workers: int) -> CacheState:
    if topology == "sequential":
        return encode_sequential(graph, [s.id for s in graph.segments], config, weights)
    if topology == "graphkv":
        return encode_graphkv(graph, config, weights, workers=workers)
    raise ValueError(topology)


def bench_memory(config: ModelConfig, weights: Weights,
                 words_list=(500, 1000), neighbors_list=(1, 2, 4, 8, 12, 16),
                 budget_tokens: int = 12000, seed: int = 42,
                 measure: bool = False, workers: int = 1) -> list[dict]:
    """Neighbor-count sweep. A topology drops out of a words group once its
    predicted peak single-encode size exceeds the token budget; rows emitted
    so far stay valid. peak_bytes is the traced allocation peak of an actual
    prefill when measure=True, else 0 (the cost-model columns are the
    authoritative ones)."""
    rows = []
    for words in words_list:
        alive = {"sequential", "graphkv"}
        for k in neighbors_list:
            graph = synth_star(k, words, seed)
            for topology in ("sequential", "graphkv"):
                if topology not in alive:
                    continue
                cm = cost_model(graph, topology, 0, 0)
                if cm["peak_block_tokens"] > budget_tokens:
                    alive.discard(topology)
                    continue
                peak_bytes = 0
                if measure:
                    tracemalloc.start()
                    _prefill(topology, graph, config, weights, workers)
                    _, peak_bytes = tracemalloc.get_traced_memory()
                    tracemalloc.stop()
                rows.append({
                    "schema": MEM_SCHEMA, "topology": topology,
                    "neighbors": k, "words": words, "peak_bytes": peak_bytes,
                    "model_peak_tokens": cm["peak_block_tokens"],
                    "kv_entries": cm["kv_entries"],
                })
    return rows


def bench_ttft(config: ModelConfig, weights: Weights, cache_dir,
               words_list=(100, 200, 400, 800), neighbors: int = 10,
               runs: int = 5, seed: int = 42, max_new: int = 4,
               query: str = DEFAULT_QUERY, workers: int = 1) -> list[dict]:
    """TTFT sweep on star graphs with a fixed neighbor count.

    sequential has no reusable cache, so its TTFT includes the full serialized
    prefill. graphkv-cached prefills once to disk; its TTFT covers query
    prefill plus the first decode step only.
    """
    query_tokens = encode_text(query)
    rows = []
    for words in words_list:
        graph = synth_star(neighbors, words, seed)
        order = [s.id for s in graph.segments]

        samples = {"sequential": [], "graphkv-cached": []}
        cache_path = f"{cache_dir}/ttft_w{words}.gkvc"
        gkv = encode_graphkv(graph, config, weights, workers=workers)
        save_cache(cache_path, gkv.store, gkv.plan, config, "graphkv")

        for _ in range(runs):
            t0 = time.perf_counter_ns()
            seq = encode_sequential(graph, order, config, weights)
            prefill_ns = time.perf_counter_ns() - t0
            res = generate(seq, graph, query_tokens, max_new, config, weights)
            samples["sequential"].append(prefill_ns + res.metrics.ttft_ns)

            store, plan, topology, temp, scale = load_cache(cache_path, config)
            cached = CacheState(store=store, plan=plan, topology=topology,
                                temperature=temp, scale=scale)
            res = generate(cached, graph, query_tokens, max_new, config, weights)
            samples["graphkv-cached"].append(res.metrics.ttft_ns)

        for topology, vals in samples.items():
            med = int(statistics.median(vals))
            for i, v in enumerate(vals):
                rows.append({
                    "schema": TTFT_SCHEMA, "topology": topology,
                    "words_per_node": words, "run_index": i,
                    "ttft_ns": v, "ttft_ns_median": med,
                })
    return rows
