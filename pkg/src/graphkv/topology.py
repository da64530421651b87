"""Segment graphs and the three graph families used by the engine:
bipartite top-m (retrieval), star/ego (citation), and Full (all pairwise
dependencies). Plus a deterministic synthetic star generator for the
stress benchmarks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .tokenizer import encode_text

GRAPH_SCHEMA = "gkv-graph-v1"


@dataclass
class Segment:
    id: int
    tokens: list[int]
    text: str = ""

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class SegmentGraph:
    """Token chunks plus directed source -> target edges."""
    segments: list[Segment]
    edges: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        ids = [s.id for s in self.segments]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate segment ids")
        if any(len(s.tokens) == 0 for s in self.segments):
            raise ValueError("empty segment")
        id_set = set(ids)
        seen = set()
        for (u, v) in self.edges:
            if u == v:
                raise ValueError(f"self-edge {u}->{v}")
            if u not in id_set or v not in id_set:
                raise ValueError(f"edge endpoint missing: {u}->{v}")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge {u}->{v}")
            seen.add((u, v))

    def segment(self, sid: int) -> Segment:
        for s in self.segments:
            if s.id == sid:
                return s
        raise KeyError(f"no segment {sid}")

    def sources_of(self, target_id: int) -> list[int]:
        """N(target): source ids in canonical ascending order."""
        return sorted(u for (u, v) in self.edges if v == target_id)

    @property
    def targets(self) -> list[int]:
        return sorted({v for (_, v) in self.edges})

    @property
    def pure_sources(self) -> list[int]:
        tgt = set(self.targets)
        return sorted(s.id for s in self.segments if s.id not in tgt)

    @property
    def max_len(self) -> int:
        return max(len(s) for s in self.segments)

    @property
    def total_len(self) -> int:
        return sum(len(s) for s in self.segments)


def build_bipartite_topm(chunk_ids: list[int], scores: list[float], m: int,
                         segments: list[Segment]) -> SegmentGraph:
    """Top-m scored chunks become sources for every remaining chunk.

    Ties at the m-th score break toward the lower chunk id.
    """
    if len(scores) != len(chunk_ids):
        raise ValueError("scores and chunk_ids length mismatch")
    n = len(chunk_ids)
    if not (1 <= m < n):
        raise ValueError(f"m={m} out of range for n={n}")
    order = sorted(range(n), key=lambda i: (-scores[i], chunk_ids[i]))
    src = sorted(chunk_ids[i] for i in order[:m])
    tgt = sorted(set(chunk_ids) - set(src))
    edges = [(u, v) for v in tgt for u in src]
    return SegmentGraph(segments=segments, edges=sorted(edges))


def build_full(chunk_ids: list[int], segments: list[Segment]) -> SegmentGraph:
    """Every chunk a target of every other chunk; no self-edges."""
    if len(chunk_ids) < 2:
        raise ValueError("full topology needs at least 2 chunks")
    edges = [(u, v) for v in sorted(chunk_ids) for u in sorted(chunk_ids) if u != v]
    return SegmentGraph(segments=segments, edges=edges)


def build_star(center_id: int, leaf_ids: list[int], segments: list[Segment]) -> SegmentGraph:
    """Leaf -> center edge for every leaf."""
    if not leaf_ids:
        raise ValueError("star needs at least one leaf")
    if center_id in leaf_ids:
        raise ValueError("center cannot be a leaf")
    return SegmentGraph(segments=segments, edges=[(u, center_id) for u in sorted(leaf_ids)])


# Short-word lexicon for the synthetic benchmarks; node text is this
# paragraph repeated/truncated (from a seeded start offset) to the requested
# word count, then byte-tokenized.
_LEXICON = (
    "the net maps long text into keys and vals for fast reuse by a graph "
    "core each node holds one span of raw data and every edge ties its src "
    "to a tgt so the query can read both sides at once with low cost and a "
    "tiny span of slots left free for new output"
).split()


def synth_text(num_words: int, rng: np.random.Generator) -> str:
    start = int(rng.integers(0, len(_LEXICON)))
    words = [_LEXICON[(start + i) % len(_LEXICON)] for i in range(num_words)]
    return " ".join(words)


def synth_star(num_leaves: int, words_per_node: int, seed: int) -> SegmentGraph:
    """Deterministic star graph: center id 0, leaves 1..num_leaves."""
    if num_leaves < 1 or words_per_node < 1:
        raise ValueError("num_leaves and words_per_node must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    segments = []
    for sid in range(num_leaves + 1):
        text = synth_text(words_per_node, rng)
        segments.append(Segment(id=sid, tokens=encode_text(text), text=text))
    return build_star(0, list(range(1, num_leaves + 1)), segments)


# ---------------------------------------------------------------------------
# Graph JSON:
# {"schema": "gkv-graph-v1",
#  "segments": [{"id": int, "text": str}, ...],
#  "edges": [[src, tgt], ...],
#  "scores": [float, ...]?}   # optional, parallel to segments
# ---------------------------------------------------------------------------

def load_graph(path) -> tuple[SegmentGraph, list[float] | None]:
    with open(path) as f:
        doc = json.load(f)
    segments = [Segment(id=int(s["id"]), tokens=encode_text(s["text"]), text=s["text"])
                for s in doc["segments"]]
    edges = [(int(u), int(v)) for u, v in doc.get("edges", [])]
    scores = doc.get("scores")
    return SegmentGraph(segments=segments, edges=edges), scores


def save_graph(path, graph: SegmentGraph, scores: list[float] | None = None) -> None:
    doc = {
        "schema": GRAPH_SCHEMA,
        "segments": [{"id": s.id, "text": s.text} for s in graph.segments],
        "edges": [[u, v] for u, v in graph.edges],
    }
    if scores is not None:
        doc["scores"] = scores
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
