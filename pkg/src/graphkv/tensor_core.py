"""Deterministic fp32 numeric kernels.

Every kernel takes float32 arrays and returns float32 arrays. Internally the
contraction/reduction happens in float64 and the result is rounded to float32
exactly once. Because float32 products are exact in float64 and the residual
float64 rounding noise sits far below float32 resolution, the rounded result
does not depend on BLAS blocking or thread count: runs are bitwise
reproducible, and serial and parallel execution agree bit for bit.

Outputs are checked for NaN/Inf; a non-finite value is always an error.
"""

from __future__ import annotations

import numpy as np

F32 = np.float32
F64 = np.float64

# Additive mask value for disallowed attention positions. Finite (so it passes
# the input checks) but large enough that exp() underflows to exactly 0.
MASK_VALUE = np.float32(-1e30)


def check_finite(x: np.ndarray, name: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def _f32(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=F32)
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of two fp32 matrices with float64 accumulation."""
    a = _f32(a, "a")
    b = _f32(b, "b")
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = (a.astype(F64) @ b.astype(F64)).astype(F32)
    return check_finite(out, "matmul output")


def softmax_rows(m: np.ndarray, temperature: float = 1.0, scale: float = 1.0) -> np.ndarray:
    """Row-wise softmax(scale * row / temperature) with max-subtraction.

    temperature and scale are the attention-rescaling knobs; (1, 1) is the
    plain softmax.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if scale <= 0:
        raise ValueError("scale must be positive")
    m = _f32(m, "m")
    check_finite(m, "softmax input")
    z = m.astype(F64) * (float(scale) / float(temperature))
    z -= z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = (e / e.sum(axis=-1, keepdims=True)).astype(F32)
    return check_finite(out, "softmax output")


def rmsnorm(x: np.ndarray, gain: np.ndarray, epsilon: float) -> np.ndarray:
    """x * gain / sqrt(mean(x^2) + epsilon) for a single vector."""
    x = _f32(x, "x")
    gain = _f32(gain, "gain")
    if x.shape != gain.shape or x.ndim != 1:
        raise ValueError(f"rmsnorm length mismatch: {x.shape} vs {gain.shape}")
    return rmsnorm_rows(x[None, :], gain, epsilon)[0]


def rmsnorm_rows(x: np.ndarray, gain: np.ndarray, epsilon: float) -> np.ndarray:
    """rmsnorm applied independently to each row of a [t, d] matrix."""
    x = _f32(x, "x")
    gain = _f32(gain, "gain")
    if x.shape[-1] != gain.shape[0]:
        raise ValueError(f"rmsnorm length mismatch: {x.shape} vs {gain.shape}")
    xd = x.astype(F64)
    denom = np.sqrt(np.mean(xd * xd, axis=-1, keepdims=True) + float(epsilon))
    out = (xd * gain.astype(F64) / denom).astype(F32)
    return check_finite(out, "rmsnorm output")


def rope_rotate(vec: np.ndarray, position: int, theta_base: float = 10000.0) -> np.ndarray:
    """Rotate pairs (vec[2i], vec[2i+1]) by position / theta_base^(2i/d)."""
    vec = _f32(vec, "vec")
    if vec.ndim != 1:
        raise ValueError("rope_rotate expects a 1-D head vector")
    if position < 0:
        raise ValueError("position must be non-negative")
    return rope_rotate_rows(vec[None, :], np.array([position]), theta_base)[0]


def rope_rotate_rows(x: np.ndarray, positions: np.ndarray, theta_base: float = 10000.0) -> np.ndarray:
    """Rotary rotation of [t, ..., d] vectors, row i at positions[i]."""
    x = _f32(x, "x")
    d = x.shape[-1]
    if d % 2 != 0:
        raise ValueError(f"head dimension must be even, got {d}")
    positions = np.asarray(positions, dtype=F64)
    inv_freq = float(theta_base) ** (-(np.arange(0, d, 2, dtype=F64) / d))
    # angles: [t, d/2]; broadcast over any middle (head) axes of x
    ang = positions.reshape((-1,) + (1,) * (x.ndim - 1)) * inv_freq
    cos, sin = np.cos(ang), np.sin(ang)
    xd = x.astype(F64)
    even, odd = xd[..., 0::2], xd[..., 1::2]
    out = np.empty_like(xd)
    out[..., 0::2] = even * cos - odd * sin
    out[..., 1::2] = even * sin + odd * cos
    return check_finite(out.astype(F32), "rope output")


def silu(x: np.ndarray) -> np.ndarray:
    x = _f32(x, "x")
    xd = x.astype(F64)
    return check_finite((xd / (1.0 + np.exp(-xd))).astype(F32), "silu output")
