import numpy as np
import pytest

from graphkv.decoder import generate, visible_set
from graphkv.encoders import encode_graphkv, encode_parallel, encode_sequential
from graphkv.model import random_weights
from graphkv.tokenizer import EOT
from graphkv.topology import Segment, SegmentGraph, build_full

from conftest import make_graph, rand_tokens


def tri(n):
    return n * (n + 1) // 2


class TestVisibleSet:
    def test_star(self, tiny_config, tiny_weights):
        rng = np.random.Generator(np.random.PCG64(50))
        g = make_graph(rng, [4, 4, 4, 5], edges=[(0, 3), (1, 3), (2, 3)])
        cache = encode_graphkv(g, tiny_config, tiny_weights)
        keys = [b.key for b in visible_set(cache, g)]
        assert keys == [(0, 0), (1, 0), (2, 0), (3, 1)]

    def test_edgeless(self, tiny_config, tiny_weights):
        rng = np.random.Generator(np.random.PCG64(51))
        g = make_graph(rng, [4, 4, 4])
        cache = encode_graphkv(g, tiny_config, tiny_weights)
        assert [b.key for b in visible_set(cache, g)] == [(0, 0), (1, 0), (2, 0)]

    def test_full_mode_round1_only(self, tiny_config, tiny_weights):
        rng = np.random.Generator(np.random.PCG64(52))
        g0 = make_graph(rng, [4, 4, 4, 4])
        g = build_full([0, 1, 2, 3], g0.segments)
        cache = encode_graphkv(g, tiny_config, tiny_weights)
        keys = [b.key for b in visible_set(cache, g)]
        assert keys == [(0, 1), (1, 1), (2, 1), (3, 1)]

    def test_sequential_serialization_order(self, tiny_config, tiny_weights):
        rng = np.random.Generator(np.random.PCG64(53))
        g = make_graph(rng, [4, 5, 3])
        cache = encode_sequential(g, [2, 0, 1], tiny_config, tiny_weights)
        assert [b.segment_id for b in visible_set(cache, g)] == [2, 0, 1]


class TestGenerate:
    def test_chain_matches_sequential_at_same_positions(self, tiny_config, tiny_weights):
        # len(A) == len(B) == L puts sequential's query at 2L, exactly where
        # the graph cache puts it, so greedy outputs must agree token for token
        rng = np.random.Generator(np.random.PCG64(54))
        L = 8
        g = make_graph(rng, [L, L], edges=[(0, 1)])
        q = rand_tokens(rng, 5)
        gkv = generate(encode_graphkv(g, tiny_config, tiny_weights),
                       g, q, 6, tiny_config, tiny_weights)
        seq = generate(encode_sequential(g, [0, 1], tiny_config, tiny_weights),
                       g, q, 6, tiny_config, tiny_weights)
        assert gkv.tokens == seq.tokens

    def test_per_token_score_count(self, tiny_config, tiny_weights):
        rng = np.random.Generator(np.random.PCG64(55))
        g = make_graph(rng, [4, 6], edges=[(0, 1)])
        cache = encode_graphkv(g, tiny_config, tiny_weights)
        q, gen = 5, 3
        res = generate(cache, g, rand_tokens(rng, q), gen, tiny_config, tiny_weights)
        assert len(res.tokens) == gen
        V = 4 + 6
        expected = q * V + tri(q) + sum(V + q + k for k in range(1, gen + 1))
        assert res.metrics.decode_score_count == expected

    def test_deterministic(self, tiny_config, tiny_weights):
        rng = np.random.Generator(np.random.PCG64(56))
        g = make_graph(rng, [5, 5], edges=[(0, 1)])
        q = rand_tokens(rng, 4)
        cache = encode_graphkv(g, tiny_config, tiny_weights)
        r1 = generate(cache, g, q, 5, tiny_config, tiny_weights)
        r2 = generate(cache, g, q, 5, tiny_config, tiny_weights)
        assert r1.tokens == r2.tokens
        assert np.array_equal(r1.first_logits, r2.first_logits)

    def test_metrics_fields(self, tiny_config, tiny_weights):
        rng = np.random.Generator(np.random.PCG64(57))
        g = make_graph(rng, [6, 6], edges=[(0, 1)])
        cache = encode_graphkv(g, tiny_config, tiny_weights)
        q = rand_tokens(rng, 4)
        res = generate(cache, g, q, 3, tiny_config, tiny_weights)
        m = res.metrics
        assert m.ttft_ns > 0
        assert m.kv_entries_total == 12 + 4 + len(res.tokens)
        assert m.max_position_index == cache.plan.query_start + 4 + len(res.tokens) - 1
        assert m.peak_block_tokens == max(cache.peak_block_tokens, 4)

    def test_eot_stops_generation(self, tiny_config, tiny_weights):
        # craft weights whose output head always argmaxes to EOT
        w = random_weights(tiny_config, 3)
        w.w_out = w.w_out.copy()
        w.w_out[:, EOT] = 10.0
        rng = np.random.Generator(np.random.PCG64(58))
        g = make_graph(rng, [4])
        cache = encode_parallel(g, tiny_config, w)
        res = generate(cache, g, rand_tokens(rng, 3), 8, tiny_config, w)
        assert res.tokens == []

    def test_empty_query_rejected(self, tiny_config, tiny_weights):
        rng = np.random.Generator(np.random.PCG64(59))
        g = make_graph(rng, [4])
        cache = encode_parallel(g, tiny_config, tiny_weights)
        with pytest.raises(ValueError):
            generate(cache, g, [], 4, tiny_config, tiny_weights)


class TestInputOrderInvariance:
    def _shuffled(self, g, perm):
        return SegmentGraph(segments=[g.segments[i] for i in perm], edges=list(g.edges))

    def test_parallel_and_graphkv_invariant(self, tiny_config, tiny_weights):
        rng = np.random.Generator(np.random.PCG64(60))
        g = make_graph(rng, [5, 6, 4], edges=[(0, 2), (1, 2)])
        q = rand_tokens(rng, 4)
        for encoder in (encode_parallel, encode_graphkv):
            base = generate(encoder(g, tiny_config, tiny_weights),
                            g, q, 4, tiny_config, tiny_weights)
            for perm in ([2, 0, 1], [1, 2, 0]):
                gs = self._shuffled(g, perm)
                res = generate(encoder(gs, tiny_config, tiny_weights),
                               gs, q, 4, tiny_config, tiny_weights)
                assert res.tokens == base.tokens
                assert np.array_equal(res.first_logits, base.first_logits)

    def test_sequential_not_invariant(self, tiny_config, tiny_weights):
        rng = np.random.Generator(np.random.PCG64(61))
        g = make_graph(rng, [6, 6, 6])
        q = rand_tokens(rng, 4)
        a = generate(encode_sequential(g, [0, 1, 2], tiny_config, tiny_weights),
                     g, q, 4, tiny_config, tiny_weights)
        b = generate(encode_sequential(g, [2, 1, 0], tiny_config, tiny_weights),
                     g, q, 4, tiny_config, tiny_weights)
        assert not np.array_equal(a.first_logits, b.first_logits)
