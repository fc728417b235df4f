import json

from click.testing import CliRunner

from tfcw.cli import main

MINIMAL_OFF = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"


def make_synth(tmp_path, runner, kind="classification", count=8, points=96):
    tr = tmp_path / "train.tfcwpts"
    te = tmp_path / "test.tfcwpts"
    res = runner.invoke(main, [
        "synth", kind, "--out-train", str(tr), "--out-test", str(te),
        "--count", str(count), "--points", str(points), "--seed", "0",
    ])
    assert res.exit_code == 0, res.output
    return tr, te


def test_convert_single_off(tmp_path):
    runner = CliRunner()
    off = tmp_path / "tri.off"
    off.write_text(MINIMAL_OFF)
    out = tmp_path / "tri.tfcwpts"
    res = runner.invoke(main, ["convert", str(off), str(out),
                               "--points", "32", "--seed", "1"])
    assert res.exit_code == 0, res.output
    assert out.exists()


def test_convert_bad_off_exits_3(tmp_path):
    runner = CliRunner()
    off = tmp_path / "bad.off"
    off.write_text("OFX\n1 0 0\n0 0 0\n")
    res = runner.invoke(main, ["convert", str(off), str(tmp_path / "x.tfcwpts")])
    assert res.exit_code == 3


def test_classify_end_to_end(tmp_path):
    runner = CliRunner()
    tr, te = make_synth(tmp_path, runner)
    out = tmp_path / "result.json"
    res = runner.invoke(main, [
        "classify", "--train", str(tr), "--test", str(te),
        "--k", "8", "--out", str(out), "--format", "json",
    ])
    assert res.exit_code == 0, res.output
    payload = json.loads(out.read_text())
    assert payload["metrics"]["overall_accuracy"] >= 0.5


def test_classify_missing_dataset_exits_2(tmp_path):
    runner = CliRunner()
    res = runner.invoke(main, ["classify"])
    assert res.exit_code == 2


def test_classify_bad_k_exits_2(tmp_path):
    runner = CliRunner()
    tr, te = make_synth(tmp_path, runner, count=4)
    res = runner.invoke(main, [
        "classify", "--train", str(tr), "--test", str(te), "--k", "4096",
    ])
    assert res.exit_code == 2


def test_segment_end_to_end(tmp_path):
    runner = CliRunner()
    tr, te = make_synth(tmp_path, runner, kind="segmentation", count=4, points=96)
    res = runner.invoke(main, [
        "segment", "--train", str(tr), "--test", str(te),
        "--k", "8", "--gamma", "1000",
    ])
    assert res.exit_code == 0, res.output
    assert "miou" in res.output


def test_ablate_diagonal(tmp_path):
    runner = CliRunner()
    tr, te = make_synth(tmp_path, runner, count=4)
    out = tmp_path / "ablate.csv"
    res = runner.invoke(main, [
        "ablate", "--which", "diagonal", "--train", str(tr), "--test", str(te),
        "--k", "8", "--out", str(out),
    ])
    assert res.exit_code == 0, res.output
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 6  # header + five formulations


def test_robustness_shuffle(tmp_path):
    runner = CliRunner()
    tr, te = make_synth(tmp_path, runner, count=4)
    res = runner.invoke(main, [
        "robustness", "--check", "shuffle", "--train", str(tr),
        "--test", str(te), "--k", "8",
    ])
    assert res.exit_code == 0, res.output
    assert "bs32" in res.output


def test_scale_small(tmp_path):
    runner = CliRunner()
    out = tmp_path / "scale.csv"
    res = runner.invoke(main, [
        "scale", "--start", "64", "--step", "64", "--limit", "192",
        "--k", "6", "--out", str(out),
    ])
    assert res.exit_code == 0, res.output
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "points,wall_time_s,peak_memory_bytes"
    assert len(lines) == 4


def test_bank_export_import(tmp_path):
    runner = CliRunner()
    tr, _ = make_synth(tmp_path, runner, count=6)
    bank_path = tmp_path / "bank.tfcwbank"
    res = runner.invoke(main, [
        "bank", "export", "--train", str(tr), "--out", str(bank_path), "--k", "8",
    ])
    assert res.exit_code == 0, res.output
    res = runner.invoke(main, ["bank", "import", str(bank_path)])
    assert res.exit_code == 0, res.output
    summary = json.loads(res.output)
    assert summary["rows"] == 6
    assert summary["num_classes"] == 2


def test_config_file_drives_run(tmp_path):
    runner = CliRunner()
    tr, te = make_synth(tmp_path, runner, count=4)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "stages": 4, "k_per_stage": [8, 8, 8, 8],
        "train": str(tr), "test": str(te), "gamma": 100.0,
    }))
    res = runner.invoke(main, ["classify", "--config", str(cfg)])
    assert res.exit_code == 0, res.output
    assert "accuracy" in res.output
