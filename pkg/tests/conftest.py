import numpy as np
import pytest

from graphkv.model import ModelConfig, random_weights
from graphkv.topology import Segment, SegmentGraph


@pytest.fixture(scope="session")
def tiny_config():
    return ModelConfig(n_layers=2, n_heads=2, d_model=16, d_ff=32)


@pytest.fixture(scope="session")
def tiny_weights(tiny_config):
    return random_weights(tiny_config, 42)


def rand_tokens(rng, n):
    return [int(x) for x in rng.integers(0, 256, size=n)]


def make_graph(rng, lengths, edges=()):
    segs = [Segment(id=i, tokens=rand_tokens(rng, n)) for i, n in enumerate(lengths)]
    return SegmentGraph(segments=segs, edges=list(edges))


def rel_err(a, b):
    denom = max(float(np.max(np.abs(np.asarray(b, dtype=np.float64)))), 1e-12)
    return float(np.max(np.abs(np.asarray(a, np.float64) - np.asarray(b, np.float64)))) / denom
