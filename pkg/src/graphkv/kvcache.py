"""KV block store, shared-range position planning, and cache persistence.

Round 0 blocks all live in the shared rotary range [0, L); round-r target
blocks live in [rL, (r+1)L); the query continues at (R+1)L. Blocks are
immutable once stored and always retrieved in ascending (segment, round)
order so downstream attention is reproducible bit for bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .model import ModelConfig, config_hash
from .topology import SegmentGraph

CACHE_MAGIC = b"GKVC"
CACHE_VERSION = 1


class CacheFormatError(Exception):
    """Raised for malformed or mismatched cache files."""


@dataclass
class KVBlock:
    segment_id: int
    round: int
    position_start: int
    k: np.ndarray  # [n_layers, length, n_heads, d_head], keys post-rotation
    v: np.ndarray  # same shape

    @property
    def length(self) -> int:
        return int(self.k.shape[1])

    @property
    def key(self) -> tuple[int, int]:
        return (self.segment_id, self.round)


@dataclass
class PEPlan:
    """Position ranges per (segment, round) plus the query start index."""
    L: int
    rounds_used: int
    starts: dict[tuple[int, int], int]
    query_start: int


def plan_positions(graph: SegmentGraph, L_override: int | None = None,
                   rounds: int = 1, pe_offset: int = 0) -> PEPlan:
    """Shared-range plan: round-0 at 0, round-r targets at rL, query at (R+1)L.

    L defaults to the graph's max chunk length. pe_offset shifts every range
    uniformly (experimental sink-avoidance knob); default 0.
    """
    L = graph.max_len if L_override is None else int(L_override)
    if L < graph.max_len:
        raise ValueError(f"L_override {L} smaller than max chunk length {graph.max_len}")
    R = rounds if graph.edges else 0
    starts: dict[tuple[int, int], int] = {}
    for s in graph.segments:
        starts[(s.id, 0)] = pe_offset
    for r in range(1, R + 1):
        for t in graph.targets:
            starts[(t, r)] = pe_offset + r * L
    return PEPlan(L=L, rounds_used=R, starts=starts,
                  query_start=pe_offset + (R + 1) * L)


def plan_sequential(graph: SegmentGraph, order: list[int]) -> PEPlan:
    """Contiguous absolute positions for one serialized prefill."""
    starts: dict[tuple[int, int], int] = {}
    pos = 0
    for sid in order:
        starts[(sid, 0)] = pos
        pos += len(graph.segment(sid))
    return PEPlan(L=graph.max_len, rounds_used=0, starts=starts, query_start=pos)


class BlockStore:
    """Blocks keyed by (segment, round); canonical ascending retrieval order."""

    def __init__(self):
        self._blocks: dict[tuple[int, int], KVBlock] = {}

    def put_block(self, block: KVBlock) -> None:
        self._blocks[block.key] = block

    def get_block(self, segment_id: int, round: int) -> KVBlock:
        try:
            return self._blocks[(segment_id, round)]
        except KeyError:
            raise KeyError(f"missing block (segment={segment_id}, round={round})") from None

    def get_blocks(self, selector=None) -> list[KVBlock]:
        """Blocks with selector(segment_id, round) true, ascending key order."""
        keys = sorted(self._blocks)
        if selector is not None:
            keys = [k for k in keys if selector(*k)]
        return [self._blocks[k] for k in keys]

    def __len__(self) -> int:
        return len(self._blocks)

    def __contains__(self, key) -> bool:
        return key in self._blocks


# ---------------------------------------------------------------------------
# GKVC cache file format (little-endian):
#   magic "GKVC" | version u32 | config_hash u64 | L u32 | rounds_used u32 |
#   query_start u32 | topology u8 | temperature f32 | scale f32 |
#   block_count u32
# then per block:
#   segment_id u32 | round u32 | position_start u32 | length u32 |
#   K then V as fp32 [n_layers, length, n_heads, d_head]
# ---------------------------------------------------------------------------

_CACHE_HEADER = struct.Struct("<4sIQIIIBffI")
_BLOCK_HEADER = struct.Struct("<IIII")

_TOPOLOGY_CODES = {"sequential": 0, "parallel": 1, "graphkv": 2}
_TOPOLOGY_NAMES = {v: k for k, v in _TOPOLOGY_CODES.items()}


def save_cache(path, store: BlockStore, plan: PEPlan, config: ModelConfig,
               topology: str, temperature: float = 1.0, scale: float = 1.0) -> None:
    blocks = store.get_blocks()
    with open(path, "wb") as f:
        f.write(_CACHE_HEADER.pack(
            CACHE_MAGIC, CACHE_VERSION, config_hash(config), plan.L,
            plan.rounds_used, plan.query_start, _TOPOLOGY_CODES[topology],
            np.float32(temperature), np.float32(scale), len(blocks)))
        for b in blocks:
            f.write(_BLOCK_HEADER.pack(b.segment_id, b.round, b.position_start, b.length))
            f.write(np.ascontiguousarray(b.k, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(b.v, dtype="<f4").tobytes())


def load_cache(path, config: ModelConfig):
    """Returns (store, plan, topology, temperature, scale).

    Fails if the file's config hash does not match the supplied model config,
    so a cache can never be replayed against the wrong weights.
    """
    nl, nh, dh = config.n_layers, config.n_heads, config.d_head
    with open(path, "rb") as f:
        raw = f.read(_CACHE_HEADER.size)
        if len(raw) < _CACHE_HEADER.size:
            raise CacheFormatError("truncated header")
        (magic, version, chash, L, rounds_used, query_start,
         topo_code, temperature, scale, count) = _CACHE_HEADER.unpack(raw)
        if magic != CACHE_MAGIC:
            raise CacheFormatError(f"bad magic {magic!r}")
        if version != CACHE_VERSION:
            raise CacheFormatError(f"unsupported version {version}")
        if chash != config_hash(config):
            raise CacheFormatError("config hash mismatch: cache built for different weights")
        if topo_code not in _TOPOLOGY_NAMES:
            raise CacheFormatError(f"unknown topology code {topo_code}")
        store = BlockStore()
        starts: dict[tuple[int, int], int] = {}
        for _ in range(count):
            raw = f.read(_BLOCK_HEADER.size)
            if len(raw) < _BLOCK_HEADER.size:
                raise CacheFormatError("truncated block header")
            sid, rnd, pos, length = _BLOCK_HEADER.unpack(raw)
            n = nl * length * nh * dh
            kraw = f.read(4 * n)
            vraw = f.read(4 * n)
            if len(kraw) < 4 * n or len(vraw) < 4 * n:
                raise CacheFormatError(f"truncated block (segment={sid}, round={rnd})")
            shape = (nl, length, nh, dh)
            store.put_block(KVBlock(
                segment_id=sid, round=rnd, position_start=pos,
                k=np.frombuffer(kraw, dtype="<f4").reshape(shape).copy(),
                v=np.frombuffer(vraw, dtype="<f4").reshape(shape).copy()))
            starts[(sid, rnd)] = pos
        if f.read(1):
            raise CacheFormatError("trailing bytes after last block")
    plan = PEPlan(L=L, rounds_used=rounds_used, starts=starts, query_start=query_start)
    return store, plan, _TOPOLOGY_NAMES[topo_code], float(temperature), float(scale)
