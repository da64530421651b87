"""Command-line surface: generate, prefill, bench-memory, bench-ttft,
verify, build-graph, init-weights. All outputs are machine-readable
(JSON/CSV) and deterministic given (seed, inputs), timing fields excepted.

Exit codes: 0 ok, 1 bad input, 2 internal invariant violation.
GKV_SEED overrides the default seed 42.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import bench, oracle, topology
from .decoder import generate, visible_set
from .encoders import CacheState, encode_graphkv, encode_parallel, encode_sequential
from .kvcache import CacheFormatError, load_cache, save_cache
from .model import (ModelConfig, WeightFormatError, encode_block, load_weights,
                    random_weights, save_weights)
from .tokenizer import encode_text, decode_tokens

GEN_SCHEMA = "gkv-gen-v1"
VERIFY_SCHEMA = "gkv-verify-v1"


def default_seed() -> int:
    return int(os.environ.get("GKV_SEED", "42"))


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--weights", help="GKVW weight file; omit for seeded random weights")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--d-model", type=int, default=16)
    p.add_argument("--d-ff", type=int, default=32)
    p.add_argument("--model-seed", type=int, default=None)


def _resolve_model(args):
    if args.weights:
        return load_weights(args.weights)
    config = ModelConfig(n_layers=args.layers, n_heads=args.heads,
                         d_model=args.d_model, d_ff=args.d_ff)
    seed = args.model_seed if args.model_seed is not None else default_seed()
    return config, random_weights(config, seed)


def _add_topology_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topology", choices=["sequential", "parallel", "graphkv"],
                   default="graphkv")
    p.add_argument("--m", type=int, help="rebuild edges as bipartite top-m from scores")
    p.add_argument("--full", action="store_true", help="rebuild edges as full topology")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--order", help="comma-separated segment order (sequential only)")
    p.add_argument("--L", type=int, default=None, help="override shared chunk-range length")
    p.add_argument("--pe-offset", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)


def _load_graph_for(args):
    graph, scores = topology.load_graph(args.graph)
    if args.m is not None:
        if scores is None:
            raise ValueError("--m requires scores in the graph file")
        ids = [s.id for s in graph.segments]
        graph = topology.build_bipartite_topm(ids, scores, args.m, graph.segments)
    elif args.full:
        graph = topology.build_full([s.id for s in graph.segments], graph.segments)
    if args.topology == "parallel" and graph.edges:
        print("warning: --topology parallel ignores graph edges", file=sys.stderr)
    return graph


def _build_cache(args, graph, config, weights) -> CacheState:
    if args.topology == "sequential":
        order = ([int(x) for x in args.order.split(",")] if args.order
                 else [s.id for s in graph.segments])
        return encode_sequential(graph, order, config, weights)
    if args.topology == "parallel":
        return encode_parallel(graph, config, weights, temperature=args.temperature,
                               scale=args.scale, workers=args.workers,
                               L_override=args.L, pe_offset=args.pe_offset)
    return encode_graphkv(graph, config, weights, rounds=args.rounds,
                          workers=args.workers, L_override=args.L,
                          pe_offset=args.pe_offset)


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=1)
    if out:
        with open(out, "w") as f:
            f.write(text + "\n")
    else:
        print(text)


def cmd_generate(args) -> int:
    config, weights = _resolve_model(args)
    graph = _load_graph_for(args)
    if args.cache:
        store, plan, topo, temp, scale = load_cache(args.cache, config)
        cache = CacheState(store=store, plan=plan, topology=topo,
                           temperature=temp, scale=scale)
    else:
        cache = _build_cache(args, graph, config, weights)
    query = encode_text(args.query)
    result = generate(cache, graph, query, args.max_new, config, weights)
    expected_max = cache.plan.query_start + len(query) + len(result.tokens) - 1
    if result.metrics.max_position_index != expected_max:
        raise InternalInvariantError(
            f"positional span {result.metrics.max_position_index} != {expected_max}")
    _emit({
        "schema": GEN_SCHEMA,
        "topology": cache.topology,
        "output_tokens": result.tokens,
        "output_text": decode_tokens(result.tokens),
        "metrics": result.metrics.to_dict(),
    }, args.out)
    return 0


def cmd_prefill(args) -> int:
    config, weights = _resolve_model(args)
    graph = _load_graph_for(args)
    cache = _build_cache(args, graph, config, weights)
    save_cache(args.out, cache.store, cache.plan, config, cache.topology,
               temperature=cache.temperature, scale=cache.scale)
    print(f"wrote {args.out}: {len(cache.store)} blocks, "
          f"query_start={cache.plan.query_start}")
    return 0


def cmd_build_graph(args) -> int:
    graph, scores = topology.load_graph(args.graph)
    ids = [s.id for s in graph.segments]
    if args.m is not None:
        if scores is None:
            raise ValueError("--m requires scores in the graph file")
        graph = topology.build_bipartite_topm(ids, scores, args.m, graph.segments)
    elif args.full:
        graph = topology.build_full(ids, graph.segments)
    elif args.star is not None:
        graph = topology.build_star(args.star, [i for i in ids if i != args.star],
                                    graph.segments)
    else:
        raise ValueError("choose one of --m, --full, --star")
    topology.save_graph(args.out, graph, scores)
    print(f"wrote {args.out}: {len(graph.edges)} edges")
    return 0


def cmd_bench_memory(args) -> int:
    config, weights = _resolve_model(args)
    rows = bench.bench_memory(config, weights,
                              words_list=args.words, neighbors_list=args.neighbors,
                              budget_tokens=args.budget_tokens, seed=default_seed(),
                              measure=args.measure, workers=args.workers)
    bench.write_csv(args.out, bench.MEM_COLUMNS, rows)
    print(f"wrote {args.out}: {len(rows)} rows")
    return 0


def cmd_bench_ttft(args) -> int:
    config, weights = _resolve_model(args)
    cache_dir = args.cache_dir or tempfile.mkdtemp(prefix="gkv_ttft_")
    rows = bench.bench_ttft(config, weights, cache_dir,
                            words_list=args.words, neighbors=args.neighbors,
                            runs=args.runs, seed=default_seed(),
                            max_new=args.max_new, workers=args.workers)
    bench.write_csv(args.out, bench.TTFT_COLUMNS, rows)
    print(f"wrote {args.out}: {len(rows)} rows")
    return 0


def cmd_init_weights(args) -> int:
    config, weights = _resolve_model(args)
    save_weights(args.out, config, weights)
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# verify: oracle-equivalence and invariant suite
# ---------------------------------------------------------------------------

def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(float(np.max(np.abs(b))), 1e-12)
    return float(np.max(np.abs(a.astype(np.float64) - b.astype(np.float64)))) / denom


def _verify_checks(seed: int):
    from .tokenizer import VOCAB_SIZE  # noqa: F401  (docs anchor)
    config = ModelConfig(n_layers=2, n_heads=2, d_model=16, d_ff=32)
    weights = random_weights(config, seed)
    rng = np.random.Generator(np.random.PCG64(seed + 1))

    def rand_tokens(n):
        return [int(x) for x in rng.integers(0, 256, size=n)]

    checks = []

    # 1. plain causal prefill equals the full-attention oracle
    toks = rand_tokens(12)
    enc = encode_block(toks, 0, [], config, weights, want_logits=True)
    mask = np.tril(np.ones((12, 12), dtype=bool))
    ks, vs, logits = oracle.full_attention_reference(toks, list(range(12)), mask,
                                                     config, weights)
    err = max(_rel_err(enc.k, ks), _rel_err(enc.v, vs), _rel_err(enc.logits, logits))
    checks.append(("causal_prefill_vs_oracle", err <= 1e-5, f"rel_err={err:.2e}"))

    # 2. chain A->B target update equals oracle on A||B restricted to B rows
    a, b = rand_tokens(8), rand_tokens(6)
    segs = [topology.Segment(0, a), topology.Segment(1, b)]
    graph = topology.SegmentGraph(segments=segs, edges=[(0, 1)])
    cache = encode_graphkv(graph, config, weights)
    tgt = cache.store.get_block(1, 1)
    both = a + b
    pos = list(range(8)) + list(range(8, 14))
    m = np.zeros((14, 14), dtype=bool)
    m[:8, :8] = np.tril(np.ones((8, 8), dtype=bool))
    m[8:, :8] = True
    m[8:, 8:] = np.tril(np.ones((6, 6), dtype=bool))
    ks, vs, _ = oracle.full_attention_reference(both, pos, m, config, weights)
    err = max(_rel_err(tgt.k, ks[:, 8:]), _rel_err(tgt.v, vs[:, 8:]))
    checks.append(("chain_equivalence_vs_oracle", err <= 1e-5, f"rel_err={err:.2e}"))

    # 3. edgeless graphkv equals parallel bitwise
    segs = [topology.Segment(i, rand_tokens(5 + i)) for i in range(3)]
    g0 = topology.SegmentGraph(segments=segs, edges=[])
    c1 = encode_graphkv(g0, config, weights)
    c2 = encode_parallel(g0, config, weights)
    same = all(
        np.array_equal(b1.k, b2.k) and np.array_equal(b1.v, b2.v)
        for b1, b2 in zip(c1.store.get_blocks(), c2.store.get_blocks()))
    checks.append(("edgeless_reduction_bitwise", same, f"{len(c1.store)} blocks"))

    # 4. source-permutation invariance on a 3-source target
    srcs = [rand_tokens(6) for _ in range(3)]
    tgt_toks = rand_tokens(6)
    base = None
    worst = 0.0
    for perm in ([0, 1, 2], [2, 0, 1], [1, 2, 0]):
        blocks = []
        for i in perm:
            e = encode_block(srcs[i], 0, [], config, weights)
            blocks.append(type("B", (), {"k": e.k, "v": e.v})())
        e = encode_block(tgt_toks, 8, blocks, config, weights)
        if base is None:
            base = e
        else:
            worst = max(worst, _rel_err(e.k, base.k), _rel_err(e.v, base.v))
    checks.append(("source_permutation_invariance", worst <= 1e-5, f"rel_err={worst:.2e}"))

    # 5. instrumented counters equal the cost model
    segs = [topology.Segment(i, rand_tokens(int(rng.integers(3, 9)))) for i in range(4)]
    graph = topology.SegmentGraph(segments=segs, edges=[(0, 3), (1, 3), (2, 3)])
    ok = True
    for topo in ("sequential", "parallel", "graphkv"):
        if topo == "sequential":
            cache = encode_sequential(graph, [0, 1, 2, 3], config, weights)
        elif topo == "parallel":
            cache = encode_parallel(graph, config, weights)
        else:
            cache = encode_graphkv(graph, config, weights)
        q = rand_tokens(5)
        res = generate(cache, graph, q, 3, config, weights)
        cm = oracle.cost_model(graph, topo, len(q), len(res.tokens))
        ok = ok and res.metrics.score_count == cm["score_count"]
        ok = ok and res.metrics.kv_entries_total == cm["kv_entries"]
        ok = ok and res.metrics.max_position_index == cm["max_position_index"]
    checks.append(("counters_equal_cost_model", ok, "3 topologies"))

    # 6. cache save/load/decode equals fresh decode bitwise
    import tempfile as _tmp
    cache = encode_graphkv(graph, config, weights)
    q = rand_tokens(5)
    fresh = generate(cache, graph, q, 4, config, weights)
    with _tmp.TemporaryDirectory() as d:
        path = os.path.join(d, "c.gkvc")
        save_cache(path, cache.store, cache.plan, config, "graphkv")
        store, plan, topo, temp, scale = load_cache(path, config)
        loaded = CacheState(store=store, plan=plan, topology=topo,
                            temperature=temp, scale=scale,
                            score_count=cache.score_count,
                            peak_block_tokens=cache.peak_block_tokens)
        replay = generate(loaded, graph, q, 4, config, weights)
    same = (replay.tokens == fresh.tokens
            and np.array_equal(replay.first_logits, fresh.first_logits))
    checks.append(("cache_roundtrip_decode_bitwise", same, f"tokens={fresh.tokens}"))

    return checks


def cmd_verify(args) -> int:
    checks = _verify_checks(default_seed())
    doc = {"schema": VERIFY_SCHEMA,
           "checks": [{"name": n, "passed": p, "detail": d} for n, p, d in checks]}
    for n, p, d in checks:
        print(f"{'PASS' if p else 'FAIL'}  {n}  ({d})")
    if args.out:
        with open(args.out, "w") as f:
            json.dump(doc, f, indent=1)
    return 0 if all(p for _, p, _ in checks) else 1


class InternalInvariantError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graphkv", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run a topology end to end and decode")
    _add_model_args(p)
    _add_topology_args(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--max-new", type=int, default=16)
    p.add_argument("--cache", help="preloaded GKVC cache file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("prefill", help="encode a graph and write a cache file")
    _add_model_args(p)
    _add_topology_args(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prefill)

    p = sub.add_parser("build-graph", help="turn scores into a topology JSON")
    p.add_argument("--graph", required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--full", action="store_true")
    p.add_argument("--star", type=int, help="center segment id")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("bench-memory", help="neighbor sweep vs peak activation")
    _add_model_args(p)
    p.add_argument("--words", type=_int_list, default=[500, 1000])
    p.add_argument("--neighbors", type=_int_list, default=[1, 2, 4, 8, 12, 16])
    p.add_argument("--budget-tokens", type=int, default=12000)
    p.add_argument("--measure", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench_memory)

    p = sub.add_parser("bench-ttft", help="words-per-node sweep vs TTFT")
    _add_model_args(p)
    p.add_argument("--words", type=_int_list, default=[100, 200, 400, 800])
    p.add_argument("--neighbors", type=int, default=10)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--max-new", type=int, default=4)
    p.add_argument("--cache-dir")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench_ttft)

    p = sub.add_parser("verify", help="oracle-equivalence and invariant suite")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("init-weights", help="write seeded random weights (GKVW)")
    _add_model_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_weights)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, KeyError, WeightFormatError,
            CacheFormatError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except InternalInvariantError as e:
        print(f"internal invariant violation: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
