import json

from gkc.cli import LOCK_NAME, main

FAST = {"n_repeats": 2, "grid": {"n_rounds": [20], "max_depth": [2]}}


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _pipeline(capsys, out, cfg_path, n=60):
    steps = [("synth", "--n-patients", n, "--config", cfg_path), ("profiles",),
             ("curate", "--max-in-flight", 2), ("embed",), ("eval",)]
    outputs = []
    for step in steps:
        code, o, err = run(capsys, *step, "--out", out)
        assert code == 0, err
        outputs.append(json.loads(o))
    return outputs


def test_end_to_end_and_warm_rerun(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(FAST))
    out = tmp_path / "run"
    synth, prof, cur, emb, ev = _pipeline(capsys, out, cfg)
    assert synth["patients"] == 60 and prof["profiles"] == 180
    assert cur["provider_calls"] == cur["reports"] == 180
    manifest = json.loads((out / "embeddings" / "manifest.json").read_text())
    entries = manifest["entries"] if "entries" in manifest else manifest
    assert emb["provider_calls"] == len(entries)
    assert set(ev) == {"ENF", "CTE", "GKC"}
    summary = (out / "results" / "summary.json").read_bytes()
    records = (out / "results" / "records.csv").read_bytes()

    # cached stages make no provider calls and results do not change
    code, o, _ = run(capsys, "curate", "--out", out)
    assert json.loads(o)["provider_calls"] == 0
    code, o, _ = run(capsys, "embed", "--out", out)
    assert json.loads(o)["provider_calls"] == 0
    code, _, _ = run(capsys, "eval", "--out", out)
    assert (out / "results" / "summary.json").read_bytes() == summary
    assert (out / "results" / "records.csv").read_bytes() == records
    assert not list(out.glob("*.PARTIAL")) and not (out / LOCK_NAME).exists()

    code, o, err = run(capsys, "ablate", "--out", out)
    assert code == 0, err
    assert len(json.loads(o)) == 7
    code, o, err = run(capsys, "attribute", "--out", out, "--model", "LogRegEN")
    assert code == 0, err
    shares = json.loads(o)
    assert abs(sum(shares.values()) - 100) <= 1e-9
    code, o, err = run(capsys, "compare", "GKC", "ENF", "--out", out)
    assert code == 0, err
    assert (out / "results" / "compare_GKC_vs_ENF.txt").read_text() == o
    doc = json.loads((out / "results" / "compare_GKC_vs_ENF.json").read_text())
    assert doc["reference"] == "GKC" and len(doc["series"]["ENF"]["auc_roc"]) == 10


def test_missing_stage_is_named(tmp_path, capsys):
    out = tmp_path / "run"
    code, _, err = run(capsys, "profiles", "--out", out)
    assert code == 2 and json.loads(err)["stage"] == "synth"
    run(capsys, "synth", "--n-patients", 30, "--out", out)
    run(capsys, "profiles", "--out", out)
    code, _, err = run(capsys, "eval", "--out", out, "--strategies", "GKC")
    assert code == 2
    assert json.loads(err)["stage"] in ("curate", "embed")
    run(capsys, "curate", "--out", out)
    code, _, err = run(capsys, "eval", "--out", out, "--strategies", "GKC")
    assert code == 2 and json.loads(err)["stage"] == "embed"
    # a failed eval must not rewrite the stored configuration
    cfg = json.loads((out / "configs" / "run.json").read_text())
    assert cfg["strategies"] == ["ENF", "CTE", "GKC"]


def test_lock_blocks_second_run(tmp_path, capsys):
    out = tmp_path / "run"
    out.mkdir()
    (out / LOCK_NAME).write_text("1\n")
    code, _, err = run(capsys, "synth", "--out", out)
    assert code == 3 and json.loads(err)["error"] == "LockedError"


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_repeat": 3}))
    code, _, err = run(capsys, "synth", "--config", cfg, "--out", tmp_path / "r")
    assert code == 1 and "n_repeat" in json.loads(err)["message"]


def test_compare_needs_eval(tmp_path, capsys):
    out = tmp_path / "run"
    run(capsys, "synth", "--n-patients", 30, "--out", out)
    code, _, err = run(capsys, "compare", "GKC", "ENF", "--out", out)
    assert code == 2 and json.loads(err)["stage"] == "eval"
