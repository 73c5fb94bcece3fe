import json
import subprocess
import sys

import pytest

from conftest import HARD_DRIVE_DOCK
from punerboot.cli import main


@pytest.fixture
def dock_files(tmp_path):
    (tmp_path / "dock.conllu").write_text(HARD_DRIVE_DOCK)
    (tmp_path / "gaz.jsonl").write_text(json.dumps({"type": "Component", "phrase": "hard drive"}) + "\n")
    return tmp_path


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def label(tmp, *flags):
    out = tmp / "labels.jsonl"
    rc = main(["label", "--corpus", str(tmp / "dock.conllu"), "--gazetteer", str(tmp / "gaz.jsonl"),
               "--out", str(out), *flags])
    assert rc == 0
    return read_jsonl(out)[0]


def test_label_with_expansion(dock_files):
    rec = label(dock_files, "--expand")
    assert rec["tokens"] == ["hard", "drive", "dock"]
    assert rec["tags"] == ["I-Component"] * 3
    assert rec["provenance"] == ["dictionary", "dictionary", "expansion"]


def test_label_without_expansion(dock_files):
    rec = label(dock_files, "--no-expand")
    assert rec["tags"] == ["I-Component", "I-Component", "O"]
    assert set(rec["provenance"]) <= {"dictionary", "regex", "unlabeled"}


def test_missing_input_exits_2(dock_files, capsys):
    missing = dock_files / "nope.jsonl"
    rc = main(["label", "--corpus", str(dock_files / "dock.conllu"), "--gazetteer", str(missing),
               "--out", str(dock_files / "x.jsonl")])
    assert rc == 2
    assert str(missing) in capsys.readouterr().err


def test_bad_override_exits_2(dock_files, capsys):
    rc = main(["--set", "trainer.nonsense=1", "--show-config"])
    assert rc == 2
    assert "trainer.nonsense" in capsys.readouterr().err


def test_show_config(capsys):
    assert main(["--set", "trainer.prior=0.05", "--show-config"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["trainer"]["prior"] == 0.05
    assert cfg["bootstrap"]["K"] == 5


def test_synth_is_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["synth", "--out-dir", str(tmp_path / d), "--seed", "7", "--documents", "15"]) == 0
    for name in ("train.conllu", "train.gold.jsonl", "test.conllu", "seed.jsonl", "meta.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out-dir", str(d), "--seed", "3", "--documents", "40", "--test-documents", "10",
                 "--distinct-words"]) == 0
    return d


def test_eval_identity(synth_dir, tmp_path):
    gold = str(synth_dir / "test.gold.jsonl")
    assert main(["eval", "--gold", gold, "--pred", gold, "--out", str(tmp_path)]) == 0
    micro = [r for r in read_jsonl(tmp_path / "report.jsonl") if r["type"] == "micro"][0]
    assert micro["f1"] == 1.0
    assert (tmp_path / "scores.png").stat().st_size > 0


def test_train_predict_threshold(synth_dir, tmp_path):
    model = tmp_path / "model.txt"
    assert main(["train", "--corpus", str(synth_dir / "train.conllu"), "--gazetteer", str(synth_dir / "seed.jsonl"),
                 "--model-out", str(model), "--trace-out", str(tmp_path / "trace.json"),
                 "--set", "trainer.epochs=5", "--set", "trainer.prior=0.15"]) == 0
    counts = {}
    for tau in ("0.5", "0.9"):
        out = tmp_path / f"pred{tau}.jsonl"
        assert main(["predict", "--corpus", str(synth_dir / "test.conllu"), "--model", str(model),
                     "--tau", tau, "--out", str(out)]) == 0
        counts[tau] = sum(t != "O" for r in read_jsonl(out) for t in r["tags"])
    assert 0 < counts["0.9"] <= counts["0.5"]
    assert "Component" in json.loads((tmp_path / "trace.json").read_text())


def test_bootstrap_end_to_end(synth_dir, tmp_path):
    run = tmp_path / "run"
    argv = ["bootstrap", "--corpus", str(synth_dir / "train.conllu"), "--seed", str(synth_dir / "seed.jsonl"),
            "--run-dir", str(run), "--gold", str(synth_dir / "test.gold.jsonl"),
            "--eval-corpus", str(synth_dir / "test.conllu"),
            "--set", "bootstrap.K=3", "--set", "bootstrap.I=3", "--set", "trainer.epochs=5",
            "--set", "trainer.prior=0.15"]
    assert main(argv) == 0
    state = json.loads((run / "state.json").read_text())
    assert 1 <= state["iteration"] <= 3
    for name in ("settings.json", "harvest_log.jsonl", "final_gazetteer.jsonl", "recall_curve.png", "report.txt"):
        assert (run / name).exists()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "punerboot", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "bootstrap" in proc.stdout


def test_overrides_on_both_sides_of_the_command(tmp_path, capsys):
    assert main(["--set", "trainer.prior=0.05", "--show-config", "synth", "--set", "bootstrap.K=2",
                 "--out-dir", str(tmp_path)]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["trainer"]["prior"] == 0.05 and cfg["bootstrap"]["K"] == 2
