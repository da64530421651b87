import json

import pytest

from graphkv.cli import main


@pytest.fixture()
def graph_file(tmp_path):
    path = tmp_path / "g.json"
    doc = {
        "schema": "gkv-graph-v1",
        "segments": [{"id": 0, "text": "alpha beta gamma"},
                     {"id": 1, "text": "delta epsilon"},
                     {"id": 2, "text": "zeta eta theta iota"}],
        "edges": [[0, 2], [1, 2]],
        "scores": [0.9, 0.5, 0.1],
    }
    path.write_text(json.dumps(doc))
    return path


def run(args):
    return main([str(a) for a in args])


class TestGenerate:
    def test_json_contract(self, graph_file, tmp_path, capsys):
        out = tmp_path / "r.json"
        code = run(["generate", "--graph", graph_file, "--query", "hi",
                    "--max-new", 4, "--topology", "graphkv", "--out", out])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["schema"] == "gkv-gen-v1"
        assert doc["topology"] == "graphkv"
        assert len(doc["output_tokens"]) <= 4
        for key in ("ttft_ns", "score_count", "peak_block_tokens",
                    "kv_entries_total", "max_position_index"):
            assert key in doc["metrics"]

    def test_missing_graph_names_path(self, tmp_path, capsys):
        code = run(["generate", "--graph", tmp_path / "nope.json", "--query", "x"])
        assert code == 1
        assert "nope.json" in capsys.readouterr().err

    def test_parallel_warns_on_edges(self, graph_file, tmp_path, capsys):
        out = tmp_path / "r.json"
        code = run(["generate", "--graph", graph_file, "--query", "hi",
                    "--topology", "parallel", "--max-new", 2, "--out", out])
        assert code == 0
        assert "ignores graph edges" in capsys.readouterr().err

    def test_repeat_run_identical_minus_timing(self, graph_file, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            assert run(["generate", "--graph", graph_file, "--query", "hello",
                        "--max-new", 5, "--out", out]) == 0
            doc = json.loads(out.read_text())
            doc["metrics"].pop("ttft_ns")
            outs.append(doc)
        assert outs[0] == outs[1]


class TestPrefillAndCache:
    def test_cached_decode_matches_fresh(self, graph_file, tmp_path):
        cache = tmp_path / "c.gkvc"
        assert run(["prefill", "--graph", graph_file, "--topology", "graphkv",
                    "--out", cache]) == 0
        fresh, cached = tmp_path / "fresh.json", tmp_path / "cached.json"
        assert run(["generate", "--graph", graph_file, "--query", "hello",
                    "--max-new", 5, "--out", fresh]) == 0
        assert run(["generate", "--graph", graph_file, "--query", "hello",
                    "--max-new", 5, "--cache", cache, "--out", cached]) == 0
        a, b = json.loads(fresh.read_text()), json.loads(cached.read_text())
        assert a["output_tokens"] == b["output_tokens"]

    def test_cache_wrong_model_rejected(self, graph_file, tmp_path, capsys):
        cache = tmp_path / "c.gkvc"
        assert run(["prefill", "--graph", graph_file, "--out", cache]) == 0
        code = run(["generate", "--graph", graph_file, "--query", "x",
                    "--cache", cache, "--layers", 3])
        assert code == 1
        assert "hash mismatch" in capsys.readouterr().err


class TestBuildGraph:
    def test_topm(self, graph_file, tmp_path):
        out = tmp_path / "built.json"
        assert run(["build-graph", "--graph", graph_file, "--m", 1,
                    "--out", out]) == 0
        doc = json.loads(out.read_text())
        assert sorted(map(tuple, doc["edges"])) == [(0, 1), (0, 2)]

    def test_full(self, graph_file, tmp_path):
        out = tmp_path / "built.json"
        assert run(["build-graph", "--graph", graph_file, "--full",
                    "--out", out]) == 0
        assert len(json.loads(out.read_text())["edges"]) == 6

    def test_star(self, graph_file, tmp_path):
        out = tmp_path / "built.json"
        assert run(["build-graph", "--graph", graph_file, "--star", 2,
                    "--out", out]) == 0
        assert sorted(map(tuple, json.loads(out.read_text())["edges"])) == \
            [(0, 2), (1, 2)]

    def test_requires_mode(self, graph_file, tmp_path, capsys):
        assert run(["build-graph", "--graph", graph_file,
                    "--out", tmp_path / "x.json"]) == 1


class TestWeightsRoundtrip:
    def test_init_then_generate(self, graph_file, tmp_path):
        wpath = tmp_path / "m.gkvw"
        assert run(["init-weights", "--out", wpath]) == 0
        direct, viafile = tmp_path / "d.json", tmp_path / "f.json"
        assert run(["generate", "--graph", graph_file, "--query", "hey",
                    "--max-new", 4, "--out", direct]) == 0
        assert run(["generate", "--graph", graph_file, "--query", "hey",
                    "--max-new", 4, "--weights", wpath, "--out", viafile]) == 0
        a, b = json.loads(direct.read_text()), json.loads(viafile.read_text())
        assert a["output_tokens"] == b["output_tokens"]


class TestVerifyAndBench:
    def test_verify_passes(self, capsys):
        assert run(["verify"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out and "PASS" in out

    def test_bench_memory_csv(self, tmp_path):
        out = tmp_path / "mem.csv"
        assert run(["bench-memory", "--words", "10", "--neighbors", "1,2",
                    "--layers", "1", "--out", out]) == 0
        header = out.read_text().splitlines()[0]
        assert header.startswith("schema,topology,neighbors,words")

    def test_bench_ttft_csv(self, tmp_path):
        out = tmp_path / "ttft.csv"
        assert run(["bench-ttft", "--words", "10", "--neighbors", "1",
                    "--runs", "2", "--layers", "1", "--max-new", "1",
                    "--out", out]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "schema,topology,words_per_node,run_index,ttft_ns,ttft_ns_median"
        assert len(lines) == 1 + 2 * 2  # two topologies x two runs
