import json
import subprocess
import sys

import pytest

from flexse.audio import read_wav
from flexse.datagen import read_manifest
from flexse.evaluation import evaluate_manifest

TINY_CONFIG = {
    "model": {"variant": "comp", "K": 2, "K_s": 1, "N": 8, "heads": 2,
              "W_F": 4, "W_T": 4, "G": 2},
    "train": {"peak_lr": 1e-3, "warmup_steps": 10, "batch": 2,
              "chunk_seconds": 0.5, "seed": 0},
    "max_steps": 2,
}


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "flexse.cli", *map(str, args)],
        capture_output=True, text=True,
    )


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    proc = run_cli("datagen", "--out", data, "--seed", 31,
                   "--train", 1, "--dev", 1, "--test", 1)
    assert proc.returncode == 0, proc.stderr
    (root / "config.json").write_text(json.dumps(TINY_CONFIG))

    proc = run_cli("train", "--stage", 1, "--config", root / "config.json",
                   "--data", data / "train.jsonl", "--out", root / "run")
    assert proc.returncode == 0, proc.stderr
    assert "checkpoint:" in proc.stdout
    return root


def test_datagen_wrote_manifests(workdir):
    for split in ("train", "dev", "test"):
        records = read_manifest(workdir / "data" / f"{split}.jsonl")
        assert len(records) == 2  # one single + one multi per split


def test_stage1_checkpoint_exists(workdir):
    ckpt = workdir / "run" / "ckpt-stage1"
    assert (ckpt / "config.json").exists()
    assert (ckpt / "weights.bin").exists()
    meta = json.loads((ckpt / "config.json").read_text())["meta"]
    assert meta == {"stage": 1, "step": 2}


def test_stage2_resumes_from_stage1(workdir):
    proc = run_cli(
        "train", "--stage", 2, "--config", workdir / "config.json",
        "--data", workdir / "data" / "train.jsonl",
        "--resume", workdir / "run" / "ckpt-stage1",
        "--out", workdir / "run2", "--steps", 1,
    )
    assert proc.returncode == 0, proc.stderr
    assert (workdir / "run2" / "ckpt-stage2" / "weights.bin").exists()


def test_stage2_without_resume_fails(workdir):
    proc = run_cli("train", "--stage", 2,
                   "--data", workdir / "data" / "train.jsonl",
                   "--out", workdir / "nope")
    assert proc.returncode == 1
    assert proc.stderr.startswith("error:")


def test_bad_config_key_fails(workdir, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": {"variant": "comp", "bogus": 1}}))
    proc = run_cli("train", "--stage", 1, "--config", bad,
                   "--data", workdir / "data" / "train.jsonl",
                   "--out", tmp_path / "run")
    assert proc.returncode == 1
    assert "bogus" in proc.stderr


def test_enhance_single_channel(workdir, tmp_path):
    records = read_manifest(workdir / "data" / "test.jsonl")
    single = next(r for r in records if r.channels == 1)
    out = tmp_path / "enhanced.wav"
    proc = run_cli("enhance", "--ckpt", workdir / "run" / "ckpt-stage1",
                   "--in", single.mixture_path, "--out", out)
    assert proc.returncode == 0, proc.stderr
    wave = read_wav(out)
    noisy = read_wav(single.mixture_path)
    assert wave.channels == 1
    assert wave.length == noisy.length
    assert wave.rate_hz == noisy.rate_hz

    again = tmp_path / "enhanced2.wav"
    proc = run_cli("enhance", "--ckpt", workdir / "run" / "ckpt-stage1",
                   "--in", single.mixture_path, "--out", again)
    assert proc.returncode == 0
    assert out.read_bytes() == again.read_bytes()


def test_enhance_multichannel_to_mono(workdir, tmp_path):
    records = read_manifest(workdir / "data" / "test.jsonl")
    multi = next(r for r in records if r.channels >= 2)
    out = tmp_path / "mono.wav"
    proc = run_cli("enhance", "--ckpt", workdir / "run" / "ckpt-stage1",
                   "--in", multi.mixture_path, "--out", out)
    assert proc.returncode == 0, proc.stderr
    wave = read_wav(out)
    assert wave.channels == 1
    assert wave.length == read_wav(multi.mixture_path).length


def test_evaluate_writes_report(workdir, tmp_path):
    report_path = tmp_path / "report.json"
    proc = run_cli("evaluate", "--ckpt", workdir / "run" / "ckpt-stage1",
                   "--manifest", workdir / "data" / "dev.jsonl",
                   "--report", report_path)
    assert proc.returncode == 0, proc.stderr
    report = json.loads(report_path.read_text())
    assert len(report["rows"]) == 2
    for row in report["rows"]:
        assert set(row) == {
            "id", "sdr_db", "si_sdr_db", "noisy_si_sdr_db", "improvement_db"
        }
    assert report["params"] > 0
    assert report["macs_per_s_1ch"] > 0
    assert "mean si_sdr" in proc.stdout


def test_identity_bypass_pins_improvement_at_zero(workdir):
    records = read_manifest(workdir / "data" / "dev.jsonl")
    report = evaluate_manifest(None, records)
    for row in report.rows:
        assert row.improvement_db == 0.0
    assert report.mean_improvement_db == 0.0


def test_info_from_checkpoint(workdir):
    proc = run_cli("info", "--ckpt", workdir / "run" / "ckpt-stage1")
    assert proc.returncode == 0, proc.stderr
    assert "variant: comp" in proc.stdout
    assert "parameters:" in proc.stdout
    assert "macs per second" in proc.stdout
    assert '"stage": 1' in proc.stdout


def test_info_from_variant_name():
    proc = run_cli("info", "--variant", "swin")
    assert proc.returncode == 0, proc.stderr
    assert "variant: swin" in proc.stdout
    assert "transformer layers: 12" in proc.stdout


def test_missing_checkpoint_fails(tmp_path):
    proc = run_cli("info", "--ckpt", tmp_path / "absent")
    assert proc.returncode == 1
    assert proc.stderr.startswith("error:")
