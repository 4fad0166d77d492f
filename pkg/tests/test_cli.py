"""End-to-end CLI coverage over a miniature dataset."""

import json

import pytest
from click.testing import CliRunner

from uiq.cli import main
from uiq.encoder import EncoderConfig, init_params, save_checkpoint


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """corpus -> forge synth -> split, plus a tiny untrained checkpoint."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    r = runner.invoke(main, ["gen-corpus", "--out", str(root / "corpus"), "--pages", "6", "--seed", "3"])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, [
        "forge", "synth", "--corpus", str(root / "corpus"), "--variants", "2",
        "--seed", "5", "--out", str(root / "ds"),
    ])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, [
        "forge", "split", "--dataset", str(root / "ds"), "--ratios", "0.5,0.25,0.25", "--key", "url",
    ])
    assert r.exit_code == 0, r.output
    cfg = EncoderConfig(d_model=16, depth=1, heads=4, embed_dim=16, vocab_size=256, max_tokens=32)
    save_checkpoint(init_params(cfg, seed=2), root / "model.ckpt")
    return root


def test_forge_outputs(workspace):
    ds = workspace / "ds"
    samples = [json.loads(l) for l in (ds / "samples.jsonl").read_text().splitlines()]
    assert len(samples) == 6 * 3
    assert {s["split"] for s in samples} == {"train", "val", "test"}


def test_score_and_suggest_and_rank(workspace):
    runner = CliRunner()
    ds = workspace / "ds"
    sample = json.loads((ds / "samples.jsonl").read_text().splitlines()[0])
    image = str(ds / sample["image"])
    r = runner.invoke(main, ["score", "--model", str(workspace / "model.ckpt"),
                             "--image", image, "--caption", "login screen"])
    assert r.exit_code == 0, r.output
    float(r.output.strip())
    r = runner.invoke(main, ["suggest", "--model", str(workspace / "model.ckpt"),
                             "--image", image, "--caption", "login screen", "--crap-only"])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, ["rank", "--model", str(workspace / "model.ckpt"),
                             "--caption", "login screen", image, image])
    assert r.exit_code == 0, r.output
    assert len(r.output.strip().splitlines()) == 2


def test_cluster_command(workspace):
    runner = CliRunner()
    r = runner.invoke(main, ["forge", "cluster", "--dataset", str(workspace / "ds"),
                             "--eps", "0.1", "--min-samples", "2"])
    assert r.exit_code == 0, r.output
    samples = [json.loads(l) for l in (workspace / "ds" / "samples.jsonl").read_text().splitlines()]
    assert all(s["key"].startswith(("c", "noise-")) for s in samples)


def test_index_search_eval_roundtrip(workspace, tmp_path):
    runner = CliRunner()
    ds = str(workspace / "ds")
    model = str(workspace / "model.ckpt")
    r = runner.invoke(main, ["index", "--model", model, "--dataset", ds,
                             "--out", str(tmp_path / "index.bin")])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, ["search", "--model", model, "--index", str(tmp_path / "index.bin"),
                             "--query", "login screen", "--k", "3"])
    assert r.exit_code == 0, r.output
    assert len(r.output.strip().splitlines()) == 3
    r = runner.invoke(main, ["eval", "--model", model, "--dataset", ds, "--split", "",
                             "--tasks", "choice,mrr", "--out", str(tmp_path / "report.json")])
    assert r.exit_code == 0, r.output
    report = json.loads((tmp_path / "report.json").read_text())
    assert 0.0 <= report["design_choice"]["overall"] <= 1.0
    assert (tmp_path / "report.txt").exists()
    assert (tmp_path / "report.csv").exists()
    assert (tmp_path / "report_mrr.png").exists()


def test_train_command_tiny(workspace, tmp_path):
    runner = CliRunner()
    ds = str(workspace / "ds")
    out = str(tmp_path / "trained.ckpt")
    r = runner.invoke(main, ["train", "--dataset", ds, "--stage", "1", "--preset", "desk",
                             "--seed", "1", "--out", out, "--init", str(workspace / "model.ckpt"),
                             "--split", ""])
    # desk preset on a tiny dataset: just verify it runs end to end and writes
    assert r.exit_code == 0, r.output
    from uiq.encoder import load_checkpoint

    load_checkpoint(out)
