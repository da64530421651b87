"""graphkv: a desk-scale decoder-only inference engine built around a
segment-graph KV cache with shared rotary position ranges."""

from .model import ModelConfig, Weights, encode_block, load_weights, random_weights, save_weights
from .topology import SegmentGraph, Segment, build_bipartite_topm, build_full, build_star, synth_star
from .kvcache import KVBlock, PEPlan, BlockStore, plan_positions, save_cache, load_cache
from .encoders import CacheState, encode_sequential, encode_parallel, encode_graphkv
from .decoder import GenerationResult, RunMetrics, generate, visible_set
from .oracle import full_attention_reference, cost_model

__all__ = [
    "ModelConfig", "Weights", "encode_block", "load_weights", "random_weights",
    "save_weights", "SegmentGraph", "Segment", "build_bipartite_topm",
    "build_full", "build_star", "synth_star", "KVBlock", "PEPlan", "BlockStore",
    "plan_positions", "save_cache", "load_cache", "CacheState",
    "encode_sequential", "encode_parallel", "encode_graphkv",
    "GenerationResult", "RunMetrics", "generate", "visible_set",
    "full_attention_reference", "cost_model",
]
