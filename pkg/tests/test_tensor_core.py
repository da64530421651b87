import math

import numpy as np
import pytest

from graphkv import tensor_core as tc


def triple_loop_matmul(a, b):
    """Naive fp32-in, float64-accumulate triple loop; the independent oracle."""
    m, k = a.shape
    k2, n = b.shape
    out = np.empty((m, n), dtype=np.float32)
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for l in range(k):
                acc += float(a[i, l]) * float(b[l, j])
            out[i, j] = np.float32(acc)
    return out


class TestMatmul:
    def test_identity(self):
        eye = np.eye(2, dtype=np.float32)
        b = np.array([[3, 4], [5, 6]], dtype=np.float32)
        assert np.array_equal(tc.matmul(eye, b), b)

    def test_scalar(self):
        assert tc.matmul(np.array([[2.0]]), np.array([[3.0]]))[0, 0] == 6.0

    def test_matches_triple_loop_bitwise(self):
        rng = np.random.Generator(np.random.PCG64(7))
        a = rng.standard_normal((7, 5), dtype=np.float32)
        b = rng.standard_normal((5, 3), dtype=np.float32)
        assert np.array_equal(tc.matmul(a, b), triple_loop_matmul(a, b))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            tc.matmul(np.ones((2, 3), np.float32), np.ones((2, 3), np.float32))

    def test_deterministic(self):
        rng = np.random.Generator(np.random.PCG64(1))
        a = rng.standard_normal((64, 32), dtype=np.float32)
        b = rng.standard_normal((32, 48), dtype=np.float32)
        assert np.array_equal(tc.matmul(a, b), tc.matmul(a, b))


class TestSoftmaxRows:
    def test_symmetry(self):
        out = tc.softmax_rows(np.zeros((1, 3), np.float32))
        assert np.allclose(out, 1 / 3, atol=1e-7)

    def test_saturation(self):
        out = tc.softmax_rows(np.array([[1000.0, 0.0]], np.float32))
        assert abs(out[0, 0] - 1.0) < 1e-6 and out[0, 1] < 1e-6

    def test_temperature_scalar_oracle(self):
        row = np.array([1.0, 2.0, 3.0], dtype=np.float32)
        out = tc.softmax_rows(row[None, :], temperature=2.0)
        e = [math.exp((x - 3.0) / 2.0) for x in (1.0, 2.0, 3.0)]
        expected = np.array(e) / sum(e)
        assert np.max(np.abs(out[0] - expected)) < 1e-7

    def test_rows_sum_to_one(self):
        rng = np.random.Generator(np.random.PCG64(2))
        m = rng.standard_normal((20, 9), dtype=np.float32) * 5
        out = tc.softmax_rows(m, temperature=0.7, scale=1.3)
        assert np.all(np.abs(out.sum(axis=1) - 1.0) <= 1e-6)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            tc.softmax_rows(np.array([[np.nan, 0.0]], np.float32))

    def test_bad_knobs(self):
        with pytest.raises(ValueError):
            tc.softmax_rows(np.zeros((1, 2), np.float32), temperature=0.0)
        with pytest.raises(ValueError):
            tc.softmax_rows(np.zeros((1, 2), np.float32), scale=-1.0)


class TestRmsnorm:
    def test_ones(self):
        x = np.ones(4, np.float32)
        assert np.allclose(tc.rmsnorm(x, x, 0.0), x)

    def test_scale_cancellation(self):
        out = tc.rmsnorm(np.array([2.0, 2.0], np.float32), np.ones(2, np.float32), 0.0)
        assert np.allclose(out, [1.0, 1.0])

    def test_scalar_oracle(self):
        rng = np.random.Generator(np.random.PCG64(3))
        x = rng.standard_normal(16, dtype=np.float32)
        g = rng.standard_normal(16, dtype=np.float32)
        eps = 1e-5
        rms = math.sqrt(sum(float(v) ** 2 for v in x) / 16 + eps)
        expected = np.array([float(xi) * float(gi) / rms for xi, gi in zip(x, g)])
        assert np.max(np.abs(tc.rmsnorm(x, g, eps) - expected)) < 1e-7

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            tc.rmsnorm(np.ones(3, np.float32), np.ones(4, np.float32), 0.0)


class TestRope:
    def test_position_zero_identity(self):
        rng = np.random.Generator(np.random.PCG64(4))
        v = rng.standard_normal(8, dtype=np.float32)
        assert np.array_equal(tc.rope_rotate(v, 0), v)

    def test_norm_preserved(self):
        rng = np.random.Generator(np.random.PCG64(5))
        for _ in range(20):
            v = rng.standard_normal(8, dtype=np.float32)
            p = int(rng.integers(0, 10000))
            out = tc.rope_rotate(v, p)
            assert abs(np.linalg.norm(out) - np.linalg.norm(v)) < 1e-6 * max(1, np.linalg.norm(v))

    def test_relative_position_property(self):
        # dot(rope(q,p1), rope(k,p2)) depends only on p1-p2
        rng = np.random.Generator(np.random.PCG64(6))
        for _ in range(100):
            q = rng.standard_normal(8, dtype=np.float32)
            k = rng.standard_normal(8, dtype=np.float32)
            p1, p2 = (int(x) for x in rng.integers(0, 500, size=2))
            c = int(rng.integers(0, 500))
            d1 = float(np.dot(tc.rope_rotate(q, p1), tc.rope_rotate(k, p2)))
            d2 = float(np.dot(tc.rope_rotate(q, p1 + c), tc.rope_rotate(k, p2 + c)))
            assert abs(d1 - d2) < 1e-5 * max(1.0, abs(d1))

    def test_odd_dim_rejected(self):
        with pytest.raises(ValueError):
            tc.rope_rotate(np.ones(7, np.float32), 3)
