import csv
import statistics

import pytest

from graphkv.bench import (MEM_COLUMNS, TTFT_COLUMNS, bench_memory, bench_ttft,
                           write_csv)
from graphkv.model import ModelConfig, random_weights


@pytest.fixture(scope="module")
def bench_model():
    config = ModelConfig(n_layers=1, n_heads=2, d_model=16, d_ff=32)
    return config, random_weights(config, 42)


class TestBenchMemory:
    def test_cost_model_columns(self, bench_model):
        config, weights = bench_model
        rows = bench_memory(config, weights, words_list=[20],
                            neighbors_list=[1, 2, 4], budget_tokens=10**9)
        gkv = [r for r in rows if r["topology"] == "graphkv"]
        seq = [r for r in rows if r["topology"] == "sequential"]
        # graphkv peak is flat in neighbor count; sequential grows with it
        assert len({r["model_peak_tokens"] for r in gkv}) == 1
        peaks = [r["model_peak_tokens"] for r in seq]
        assert peaks == sorted(peaks) and peaks[0] < peaks[-1]

    def test_budget_abort_keeps_partial_rows(self, bench_model):
        config, weights = bench_model
        graph_peak = bench_memory(config, weights, words_list=[20],
                                  neighbors_list=[1], budget_tokens=10**9)
        L = graph_peak[0]["model_peak_tokens"]  # graphkv peak == chunk length
        budget = 3 * L  # sequential fits only k=1 (2 chunks); graphkv fits all
        rows = bench_memory(config, weights, words_list=[20],
                            neighbors_list=[1, 2, 8], budget_tokens=budget)
        seq_ks = [r["neighbors"] for r in rows if r["topology"] == "sequential"]
        gkv_ks = [r["neighbors"] for r in rows if r["topology"] == "graphkv"]
        assert seq_ks == [1] or seq_ks == [1, 2]
        assert gkv_ks == [1, 2, 8]

    def test_measured_peak_bytes(self, bench_model):
        config, weights = bench_model
        rows = bench_memory(config, weights, words_list=[10],
                            neighbors_list=[1], budget_tokens=10**9, measure=True)
        assert all(r["peak_bytes"] > 0 for r in rows)

    def test_csv_roundtrip(self, bench_model, tmp_path):
        config, weights = bench_model
        rows = bench_memory(config, weights, words_list=[10],
                            neighbors_list=[1, 2], budget_tokens=10**9)
        path = tmp_path / "mem.csv"
        write_csv(path, MEM_COLUMNS, rows)
        with open(path) as f:
            back = list(csv.DictReader(f))
        assert len(back) == len(rows)
        assert back[0]["schema"] == "gkv-mem-v1"


class TestBenchTtft:
    def test_rows_and_medians(self, bench_model, tmp_path):
        config, weights = bench_model
        rows = bench_ttft(config, weights, tmp_path, words_list=[10, 20],
                          neighbors=2, runs=3, max_new=2)
        assert len(rows) == 2 * 2 * 3  # words x topologies x runs
        for topo in ("sequential", "graphkv-cached"):
            for words in (10, 20):
                grp = [r for r in rows
                       if r["topology"] == topo and r["words_per_node"] == words]
                assert [r["run_index"] for r in grp] == [0, 1, 2]
                assert all(r["ttft_ns_median"] ==
                           int(statistics.median(x["ttft_ns"] for x in grp))
                           for r in grp)

    def test_csv_schema(self, bench_model, tmp_path):
        config, weights = bench_model
        rows = bench_ttft(config, weights, tmp_path, words_list=[10],
                          neighbors=1, runs=2, max_new=1)
        path = tmp_path / "ttft.csv"
        write_csv(path, TTFT_COLUMNS, rows)
        with open(path) as f:
            header = f.readline().strip().split(",")
        assert header == TTFT_COLUMNS
