import json
from pathlib import Path

import pytest

from intentamp.backends import NgramBackend, ScriptedBackend
from intentamp.cli import build_backend, main
from intentamp.errors import IntentAmpError


def run(argv):
    return main([str(a) for a in argv])


def gen_dataset(tmp_path, levels="2:6,4:3", seed=5):
    out = tmp_path / "data"
    assert run(["gen", "--levels", levels, "--seed", seed, "--out", out]) == 0
    return out


def write_corpus(tmp_path, dataset_dir):
    """A text corpus covering every token the dataset prompts use."""
    prompts = [
        json.loads(line)["prompt"]
        for line in (dataset_dir / "dataset.jsonl").read_text().splitlines()
    ]
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("".join(prompts), encoding="utf-8")
    return corpus


class TestGen:
    def test_default_counts(self, tmp_path, capsys):
        out = tmp_path / "full"
        assert run(["gen", "--out", out, "--seed", "0"]) == 0
        assert "wrote 500 instances" in capsys.readouterr().out
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["counts"] == {"2": 300, "3": 100, "4": 100}
        assert manifest["total"] == 500

    def test_regeneration_is_byte_identical(self, tmp_path):
        a = gen_dataset(tmp_path / "a")
        b = gen_dataset(tmp_path / "b")
        assert (a / "dataset.jsonl").read_bytes() == (b / "dataset.jsonl").read_bytes()
        assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()

    def test_different_seed_differs(self, tmp_path):
        a = gen_dataset(tmp_path / "a", seed=1)
        b = gen_dataset(tmp_path / "b", seed=2)
        assert (a / "dataset.jsonl").read_bytes() != (b / "dataset.jsonl").read_bytes()

    def test_invalid_level_is_a_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run(["gen", "--levels", "7:10", "--out", tmp_path / "x"])
        assert exc.value.code == 2

    def test_malformed_levels_string(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run(["gen", "--levels", "banana", "--out", tmp_path / "x"])
        assert exc.value.code == 2


class TestBuildBackend:
    def test_ngram_spec(self, tmp_path):
        corpus = tmp_path / "c.txt"
        corpus.write_text("ab ab ab", encoding="utf-8")
        backend = build_backend(f"ngram:{corpus}:2")
        assert isinstance(backend, NgramBackend)
        smoothed = build_backend(f"ngram:{corpus}:2:0.5")
        assert isinstance(smoothed, NgramBackend)

    def test_scripted_spec(self, tmp_path):
        fixture_dir = tmp_path / "fx"
        assert run(["fixture", "--which", "flip", "--out", fixture_dir]) == 0
        backend = build_backend(f"scripted:{fixture_dir / 'flip_scenario.json'}")
        assert isinstance(backend, ScriptedBackend)

    def test_unknown_scheme(self):
        with pytest.raises(IntentAmpError):
            build_backend("quantum:somewhere")

    def test_missing_spec(self):
        with pytest.raises(IntentAmpError):
            build_backend(None)


@pytest.fixture
def pipeline(tmp_path):
    dataset_dir = gen_dataset(tmp_path)
    corpus = write_corpus(tmp_path, dataset_dir)
    backend_spec = f"ngram:{corpus}:3:1.0"
    return tmp_path, dataset_dir, backend_spec


def decode(tmp_path, dataset_dir, backend_spec, out_name, *extra):
    out = tmp_path / out_name
    code = run([
        "decode", "--dataset", dataset_dir / "dataset.jsonl",
        "--backend", backend_spec, "--max-tokens", "16",
        "--out", out, *extra,
    ])
    assert code == 0
    return out


def read_records(out_dir):
    return [
        json.loads(line)
        for line in (out_dir / "records.jsonl").read_text().splitlines()
    ]


class TestDecode:
    def test_records_cover_dataset_in_order(self, pipeline):
        tmp_path, dataset_dir, backend_spec = pipeline
        out = decode(tmp_path, dataset_dir, backend_spec, "run-ic")
        records = read_records(out)
        dataset_ids = [
            json.loads(line)["id"]
            for line in (dataset_dir / "dataset.jsonl").read_text().splitlines()
        ]
        assert [r["problem_id"] for r in records] == dataset_ids
        assert all("error" not in r for r in records)
        assert all(r["mode"] == "intent_coding" for r in records)
        run_manifest = json.loads((out / "run_manifest.json").read_text())
        dataset_manifest = json.loads((dataset_dir / "manifest.json").read_text())
        assert run_manifest["dataset_manifest_hash"] == dataset_manifest["dataset_sha256"]

    def test_mode_flag_and_determinism(self, pipeline):
        tmp_path, dataset_dir, backend_spec = pipeline
        a = decode(tmp_path, dataset_dir, backend_spec, "g1", "--mode", "greedy")
        b = decode(tmp_path, dataset_dir, backend_spec, "g2", "--mode", "greedy")
        assert (a / "records.jsonl").read_bytes() == (b / "records.jsonl").read_bytes()

    def test_beam_one_matches_greedy_tokens(self, pipeline):
        tmp_path, dataset_dir, backend_spec = pipeline
        greedy = read_records(decode(tmp_path, dataset_dir, backend_spec,
                                     "bg", "--mode", "greedy"))
        beam = read_records(decode(tmp_path, dataset_dir, backend_spec,
                                   "b1", "--mode", "beam", "--beam", "1"))
        assert [r["tokens"] for r in beam] == [r["tokens"] for r in greedy]

    def test_jobs_parallelism_preserves_order_and_content(self, pipeline):
        tmp_path, dataset_dir, backend_spec = pipeline
        serial = decode(tmp_path, dataset_dir, backend_spec, "s", "--mode", "greedy")
        parallel = decode(tmp_path, dataset_dir, backend_spec, "p",
                          "--mode", "greedy", "--jobs", "4")
        assert (serial / "records.jsonl").read_bytes() == \
            (parallel / "records.jsonl").read_bytes()

    def test_mask_constraint(self, pipeline):
        tmp_path, dataset_dir, backend_spec = pipeline
        level4 = tmp_path / "lvl4"
        assert run(["gen", "--levels", "4:3", "--seed", "1", "--out", level4]) == 0
        corpus = write_corpus(level4, level4)
        out = decode(tmp_path, level4, f"ngram:{corpus}:3:1.0",
                     "masked-length", "--mask-constraint", "length")
        records = read_records(out)
        assert len(records) == 3
        assert all("error" not in r for r in records)

    def test_config_file_overrides_flags(self, pipeline):
        tmp_path, dataset_dir, backend_spec = pipeline
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"mode": "greedy", "seed": 9}))
        out = decode(tmp_path, dataset_dir, backend_spec, "cfg-run",
                     "--mode", "intent_coding", "--config", config)
        records = read_records(out)
        assert all(r["mode"] == "greedy" for r in records)
        run_manifest = json.loads((out / "run_manifest.json").read_text())
        assert run_manifest["config"]["mode"] == "greedy"
        assert run_manifest["config"]["seed"] == 9

    def test_unknown_config_key_fails_cleanly(self, pipeline, capsys):
        tmp_path, dataset_dir, backend_spec = pipeline
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"warp_speed": True}))
        code = run([
            "decode", "--dataset", dataset_dir / "dataset.jsonl",
            "--backend", backend_spec, "--config", config,
            "--out", tmp_path / "never",
        ])
        assert code == 1
        assert "warp_speed" in capsys.readouterr().err

    def test_trace_records_candidates(self, pipeline):
        tmp_path, dataset_dir, backend_spec = pipeline
        out = decode(tmp_path, dataset_dir, backend_spec, "traced", "--trace")
        records = read_records(out)
        assert all(r["per_step_candidates"] for r in records)


class TestEvalAndCompare:
    def test_full_pipeline(self, pipeline, capsys):
        tmp_path, dataset_dir, backend_spec = pipeline
        reports = []
        for mode in ("greedy", "intent_coding"):
            run_dir = decode(tmp_path, dataset_dir, backend_spec,
                             f"run-{mode}", "--mode", mode)
            report_path = tmp_path / f"report-{mode}.json"
            code = run([
                "eval", "--dataset", dataset_dir / "dataset.jsonl",
                "--records", run_dir / "records.jsonl", "--out", report_path,
            ])
            assert code == 0
            report = json.loads(report_path.read_text())
            # Mode inferred from run_manifest.json when --mode is omitted.
            assert report["mode"] == mode
            assert 0.0 <= report["accuracy"] <= 1.0
            assert report["total"] == 9
            reports.append(report_path)

        capsys.readouterr()
        table_out = tmp_path / "table.txt"
        code = run(["compare", "--reports", *reports, "--out", table_out])
        assert code == 0
        printed = capsys.readouterr().out
        assert "vs greedy" in printed
        assert "intent_coding" in printed
        assert table_out.read_text() == printed
        rows = json.loads(table_out.with_suffix(".json").read_text())
        assert {r["mode"] for r in rows} == {"greedy", "intent_coding"}

    def test_eval_rejects_records_from_other_dataset(self, pipeline, capsys):
        tmp_path, dataset_dir, backend_spec = pipeline
        run_dir = decode(tmp_path, dataset_dir, backend_spec, "orig-run",
                         "--mode", "greedy")
        other = gen_dataset(tmp_path / "other", levels="2:4", seed=99)
        code = run([
            "eval", "--dataset", other / "dataset.jsonl",
            "--records", run_dir / "records.jsonl",
            "--out", tmp_path / "r.json",
        ])
        assert code == 1
        assert "manifest" in capsys.readouterr().err


class TestFixture:
    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        out = tmp_path / "fx"
        assert run(["fixture", "--out", out]) == 0
        first = {p.name: p.read_bytes() for p in out.glob("*.json")}
        assert set(first) == {"flip_scenario.json", "grouping_scenario.json"}
        assert run(["fixture", "--out", out]) == 0
        second = {p.name: p.read_bytes() for p in out.glob("*.json")}
        assert first == second

    def test_flip_fixture_decodes_differently_by_mode(self, tmp_path):
        from intentamp.decoding import DecodeConfig, run_decode
        from intentamp.fixtures import build_flip_scenario
        from intentamp.masking import PromptPair

        out = tmp_path / "fx"
        assert run(["fixture", "--which", "flip", "--out", out]) == 0
        backend = build_backend(f"scripted:{out / 'flip_scenario.json'}")
        _, meta = build_flip_scenario()
        pair = PromptPair(meta["original_text"], meta["masked_text"], [],
                          meta["original_tokens"], meta["masked_tokens"])
        greedy = run_decode(backend, pair,
                            DecodeConfig(mode="greedy", max_tokens=4))[0]
        intent = run_decode(backend, pair,
                            DecodeConfig(mode="intent_coding", max_tokens=4))[0]
        vocab = backend.vocabulary
        assert vocab.surface(greedy.tokens[0]) == "1"
        assert vocab.surface(intent.tokens[0]) == "2"


def test_missing_backend_is_an_error(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("INTENTAMP_BACKEND", raising=False)
    dataset_dir = gen_dataset(tmp_path, levels="2:3")
    with pytest.raises(SystemExit) as exc:
        run([
            "decode", "--dataset", dataset_dir / "dataset.jsonl",
            "--out", tmp_path / "nope",
        ])
    assert exc.value.code == 2
    assert "--backend" in capsys.readouterr().err
