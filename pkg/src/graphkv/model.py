"""Tiny decoder-only transformer: pre-norm, rotary multi-head attention,
gated MLP, plus a bit-exact binary weight format ("GKVW") and a seeded
random-weight generator.

The single encoding primitive is :func:`encode_block`: causal self-attention
inside a token block, full attention onto an ordered list of already-encoded
KV blocks. Everything else in the engine (sequential prefill, parallel
prefill, graph-masked target updates, query encoding, decode steps) is a call
pattern over this one function.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import tensor_core as tc
from .tokenizer import VOCAB_SIZE

WEIGHT_MAGIC = b"GKVW"
WEIGHT_VERSION = 1

# Query rows are processed in chunks of this size so long prefills never
# materialize a full t x t score matrix.
QUERY_CHUNK = 512


class WeightFormatError(Exception):
    """Raised for malformed or mismatched weight files."""


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int
    n_heads: int
    d_model: int
    d_ff: int
    vocab_size: int = VOCAB_SIZE
    theta_base: float = 10000.0
    epsilon: float = 1e-5
    max_position: int = 1_000_000

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def validate(self) -> None:
        if min(self.n_layers, self.n_heads, self.d_model, self.d_ff, self.vocab_size) < 1:
            raise ValueError("all model dimensions must be >= 1")
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.d_head % 2 != 0:
            raise ValueError("d_head must be even (rotary pairs)")


@dataclass
class LayerWeights:
    attn_norm: np.ndarray  # [d_model]
    wq: np.ndarray  # [d_model, d_model]
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    mlp_norm: np.ndarray  # [d_model]
    w_gate: np.ndarray  # [d_model, d_ff]
    w_up: np.ndarray  # [d_model, d_ff]
    w_down: np.ndarray  # [d_ff, d_model]


@dataclass
class Weights:
    embedding: np.ndarray  # [vocab_size, d_model]
    layers: list[LayerWeights]
    final_norm: np.ndarray  # [d_model]
    w_out: np.ndarray  # [d_model, vocab_size]


def _tensor_shapes(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """The documented, fixed tensor order of the GKVW format."""
    d, ff, v = config.d_model, config.d_ff, config.vocab_size
    shapes: list[tuple[str, tuple[int, ...]]] = [("embedding", (v, d))]
    for i in range(config.n_layers):
        shapes += [
            (f"layer{i}.attn_norm", (d,)),
            (f"layer{i}.wq", (d, d)),
            (f"layer{i}.wk", (d, d)),
            (f"layer{i}.wv", (d, d)),
            (f"layer{i}.wo", (d, d)),
            (f"layer{i}.mlp_norm", (d,)),
            (f"layer{i}.w_gate", (d, ff)),
            (f"layer{i}.w_up", (d, ff)),
            (f"layer{i}.w_down", (ff, d)),
        ]
    shapes += [("final_norm", (d,)), ("w_out", (d, v))]
    return shapes


def _assemble(config: ModelConfig, tensors: list[np.ndarray]) -> Weights:
    it = iter(tensors)
    embedding = next(it)
    layers = []
    for _ in range(config.n_layers):
        layers.append(LayerWeights(*(next(it) for _ in range(9))))
    return Weights(embedding=embedding, layers=layers, final_norm=next(it), w_out=next(it))


def random_weights(config: ModelConfig, seed: int) -> Weights:
    """Deterministic random weights from NumPy's PCG64 generator.

    Tensors are drawn in GKVW file order as standard normals scaled by
    1/sqrt(d_model), all fp32.
    """
    config.validate()
    rng = np.random.Generator(np.random.PCG64(seed))
    s = 1.0 / np.sqrt(config.d_model)
    tensors = [
        (rng.standard_normal(shape, dtype=np.float32) * np.float32(s))
        for _, shape in _tensor_shapes(config)
    ]
    return _assemble(config, tensors)


# ---------------------------------------------------------------------------
# GKVW weight file format
# ---------------------------------------------------------------------------
# magic "GKVW" | version u32 | n_layers u32 | n_heads u32 | d_model u32 |
# d_ff u32 | vocab_size u32 | theta_base f32 | epsilon f32 | tensors in
# _tensor_shapes order, little-endian fp32, row-major.

_HEADER = struct.Struct("<4sIIIIIIff")


def config_header_bytes(config: ModelConfig) -> bytes:
    return _HEADER.pack(
        WEIGHT_MAGIC, WEIGHT_VERSION, config.n_layers, config.n_heads,
        config.d_model, config.d_ff, config.vocab_size,
        np.float32(config.theta_base), np.float32(config.epsilon),
    )


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def config_hash(config: ModelConfig) -> int:
    """64-bit FNV-1a of the weight-file header; keys caches to their model."""
    return fnv1a64(config_header_bytes(config))


def save_weights(path, config: ModelConfig, weights: Weights) -> None:
    config.validate()
    with open(path, "wb") as f:
        f.write(config_header_bytes(config))
        tensors = [weights.embedding]
        for lw in weights.layers:
            tensors += [lw.attn_norm, lw.wq, lw.wk, lw.wv, lw.wo,
                        lw.mlp_norm, lw.w_gate, lw.w_up, lw.w_down]
        tensors += [weights.final_norm, weights.w_out]
        for t, (name, shape) in zip(tensors, _tensor_shapes(config)):
            if tuple(t.shape) != shape:
                raise WeightFormatError(f"{name}: expected shape {shape}, got {t.shape}")
            f.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def load_weights(path) -> tuple[ModelConfig, Weights]:
    with open(path, "rb") as f:
        header = f.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise WeightFormatError("truncated header")
        magic, version, n_layers, n_heads, d_model, d_ff, vocab, theta, eps = _HEADER.unpack(header)
        if magic != WEIGHT_MAGIC:
            raise WeightFormatError(f"bad magic {magic!r}")
        if version != WEIGHT_VERSION:
            raise WeightFormatError(f"unsupported version {version}")
        config = ModelConfig(n_layers=n_layers, n_heads=n_heads, d_model=d_model,
                             d_ff=d_ff, vocab_size=vocab,
                             theta_base=float(theta), epsilon=float(eps))
        try:
            config.validate()
        except ValueError as e:
            raise WeightFormatError(f"inconsistent header: {e}") from e
        tensors = []
        for name, shape in _tensor_shapes(config):
            n = int(np.prod(shape))
            raw = f.read(4 * n)
            if len(raw) < 4 * n:
                raise WeightFormatError(f"truncated file in tensor {name}")
            tensors.append(np.frombuffer(raw, dtype="<f4").reshape(shape).copy())
        if f.read(1):
            raise WeightFormatError("trailing bytes after last tensor")
    return config, _assemble(config, tensors)


# ---------------------------------------------------------------------------
# Block encoding
# ---------------------------------------------------------------------------

@dataclass
class EncodedBlock:
    """Per-layer K/V of a freshly encoded block; keys stored post-rotation."""
    k: np.ndarray  # [n_layers, t, n_heads, d_head]
    v: np.ndarray  # [n_layers, t, n_heads, d_head]
    logits: np.ndarray | None  # [t, vocab_size] in with-logits mode
    score_count: int  # query-key pairs, counted once (not per layer/head)
    n_tokens: int


def encode_block(
    tokens: list[int],
    start_position: int,
    visible_kv: list,
    config: ModelConfig,
    weights: Weights,
    want_logits: bool = False,
    temperature: float = 1.0,
    scale: float = 1.0,
) -> EncodedBlock:
    """Encode one token block against an ordered list of cached KV blocks.

    Token i sits at rotary position start_position + i. Its keys are the
    concatenation of all visible blocks (in list order) followed by block
    tokens 0..i (causal). Pure function: no shared mutable state.
    """
    config.validate()
    if not tokens:
        raise ValueError("tokens must be non-empty")
    if start_position < 0:
        raise ValueError("start_position must be non-negative")
    bad = [t for t in tokens if not (0 <= t < config.vocab_size)]
    if bad:
        raise ValueError(f"token id {bad[0]} out of range for vocab {config.vocab_size}")
    t = len(tokens)
    if start_position + t > config.max_position:
        raise ValueError(
            f"position overflow: {start_position + t} exceeds max span {config.max_position}")

    nl, nh, dh = config.n_layers, config.n_heads, config.d_head
    positions = start_position + np.arange(t)
    x = weights.embedding[np.asarray(tokens, dtype=np.int64)]  # [t, d_model] f32

    vis_len = sum(int(b.k.shape[1]) for b in visible_kv)
    new_k = np.empty((nl, t, nh, dh), dtype=np.float32)
    new_v = np.empty((nl, t, nh, dh), dtype=np.float32)
    inv_sqrt_dh = np.float32(1.0 / np.sqrt(dh))

    for li, lw in enumerate(weights.layers):
        h = tc.rmsnorm_rows(x, lw.attn_norm, config.epsilon)
        q = tc.matmul(h, lw.wq).reshape(t, nh, dh)
        k = tc.matmul(h, lw.wk).reshape(t, nh, dh)
        v = tc.matmul(h, lw.wv).reshape(t, nh, dh)
        q = tc.rope_rotate_rows(q, positions, config.theta_base)
        k = tc.rope_rotate_rows(k, positions, config.theta_base)
        new_k[li], new_v[li] = k, v

        if visible_kv:
            keys = np.concatenate([b.k[li] for b in visible_kv] + [k], axis=0)
            vals = np.concatenate([b.v[li] for b in visible_kv] + [v], axis=0)
        else:
            keys, vals = k, v

        # fused masked attention, float64 throughout, one rounding at ctx;
        # row i (absolute) may see keys [0, vis_len + i + 1)
        keys64 = keys.astype(np.float64)
        vals64 = vals.astype(np.float64)
        q64 = q.astype(np.float64) * (inv_sqrt_dh * float(scale) / float(temperature))
        ctx = np.empty((t, nh, dh), dtype=np.float32)
        tri_mask = np.triu(np.full((QUERY_CHUNK, QUERY_CHUNK), -np.inf), k=1)
        for c0 in range(0, t, QUERY_CHUNK):
            c1 = min(c0 + QUERY_CHUNK, t)
            c, width = c1 - c0, vis_len + c1
            for hi in range(nh):
                s = q64[c0:c1, hi] @ keys64[:width, hi].T
                # only the intra-chunk causal triangle needs masking
                s[:, vis_len + c0:] += tri_mask[:c, :c]
                s -= s.max(axis=1, keepdims=True)
                np.exp(s, out=s)
                s /= s.sum(axis=1, keepdims=True)
                ctx[c0:c1, hi] = (s @ vals64[:width, hi]).astype(np.float32)
        tc.check_finite(ctx, "attention context")
        x = x + tc.matmul(ctx.reshape(t, config.d_model), lw.wo)

        h2 = tc.rmsnorm_rows(x, lw.mlp_norm, config.epsilon)
        gated = tc.silu(tc.matmul(h2, lw.w_gate)) * tc.matmul(h2, lw.w_up)
        x = x + tc.matmul(gated, lw.w_down)

    logits = None
    if want_logits:
        logits = tc.matmul(tc.rmsnorm_rows(x, weights.final_norm, config.epsilon), weights.w_out)

    score_count = t * vis_len + t * (t + 1) // 2
    return EncodedBlock(k=new_k, v=new_v, logits=logits, score_count=score_count, n_tokens=t)
