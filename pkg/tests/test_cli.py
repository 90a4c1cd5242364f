import json
import subprocess
import sys

import numpy as np
import pytest

from adtalk.cli import main
from adtalk.simgen import gen_voiced_audio
from adtalk.speechrate import AudioBuffer, write_wav
from adtalk.vocgraph import read_features_csv


def run(*argv):
    return main([str(a) for a in argv])


def small_corpus(tmp_path, seed=7, n=3):
    out = tmp_path / "sim"
    assert run("simulate", "--seed", seed, "--n-ad", n, "--n-nonad", n, "--target-s", 60, "--out", out) == 0
    return out


def test_simulate_default_class_sizes(tmp_path, capsys):
    assert run("simulate", "--seed", 1, "--target-s", 30, "--out", tmp_path) == 0
    assert "ad: 21" in capsys.readouterr().out
    labels = [ln for ln in (tmp_path / "labels.csv").read_text().splitlines()[3:] if ln]
    assert len(labels) == 38
    head = (tmp_path / "turns.jsonl").read_text().splitlines()[0]
    assert head.startswith("# adtalk 0.1.0 simulate config=") and "seed=1" in head


def test_stochastic_commands_need_seed(tmp_path, capsys):
    assert run("simulate", "--out", tmp_path) == 2
    assert "--seed" in capsys.readouterr().err


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nseed = 5\nn_ad = 2\nn_nonad = 2\ntarget_s = 30\n")
    assert run("simulate", "--config", cfg, "--n-ad", 3, "--out", tmp_path / "o") == 0
    text = (tmp_path / "o" / "labels.csv").read_text()
    assert text.count(",ad\n") == 3 and text.count(",nonad\n") == 2 and "seed=5" in text


def test_bad_config_value(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("seed=1\nframe_dt=fast\n")
    sim = small_corpus(tmp_path)
    assert run("extract", "--config", cfg, "--turns", sim / "turns.jsonl", "--out", tmp_path) == 2
    assert "frame_dt" in capsys.readouterr().err


def test_invalid_profile_field(tmp_path, capsys):
    prof = tmp_path / "p.json"
    prof.write_text(json.dumps({"ad": {"turn_duration_mean_s": -1}}))
    assert run("simulate", "--seed", 1, "--profiles", prof, "--out", tmp_path) == 2
    assert "profile" in capsys.readouterr().err


def test_extract_shapes_and_dot(tmp_path):
    sim = small_corpus(tmp_path, n=1)
    out = tmp_path / "feat"
    assert run("extract", "--turns", sim / "turns.jsonl", "--labels", sim / "labels.csv", "--out", out) == 0
    vecs = read_features_csv((out / "features.csv").read_text())
    assert len(vecs) == 2 and all(v.values.size == 30 for v in vecs)
    for v in vecs:
        g = json.loads((out / "graphs" / f"{v.dialogue_id}.json").read_text())
        probs = np.array(g["probs"])
        counts = np.array(g["counts"])
        for row, c in zip(probs, counts):
            if c.sum():
                assert abs(row.sum() - 1) <= 1e-9
        dot = (out / "graphs" / f"{v.dialogue_id}.dot").read_text()
        assert dot.startswith("// adtalk") and "PatientSpeech" in dot


def test_vgs_without_rates_is_actionable(tmp_path, capsys):
    sim = small_corpus(tmp_path, n=1)
    rc = run("extract", "--schema", "vgs", "--turns", sim / "turns.jsonl", "--labels", sim / "labels.csv",
             "--out", tmp_path)
    assert rc == 2 and "--rates" in capsys.readouterr().err
    rc = run("extract", "--schema", "vgs", "--turns", sim / "turns.jsonl", "--rates", tmp_path / "nope.csv",
             "--out", tmp_path)
    assert rc == 2 and "nope.csv" in capsys.readouterr().err


def test_evaluate_report_fields(tmp_path):
    sim = small_corpus(tmp_path, n=5)
    feat = tmp_path / "feat"
    run("extract", "--turns", sim / "turns.jsonl", "--labels", sim / "labels.csv", "--out", feat)
    out = tmp_path / "ev"
    assert run("evaluate", "--features", feat / "features.csv", "--seed", 3, "--k", 5,
               "--roc-rounds", 2, "--out", out) == 0
    rep = json.loads((out / "metrics.json").read_text())
    fields = {"Accuracy_mu", "Precision_mu", "Recall_mu", "F1_mu", "Precision_M", "Recall_M", "F1_M"}
    assert fields <= set(rep["AD"]) and fields <= set(rep["NonAD"])
    assert "Overall accuracy (LOOCV)" in rep and rep["roc_pooled_pairs"] == 20
    assert (out / "roc.csv").read_text().rstrip().splitlines()[-1].startswith("# auc=")
    assert json.loads((out / "model.json").read_text())["rounds"] <= 10


def test_evaluate_schema_mismatch(tmp_path, capsys):
    sim = small_corpus(tmp_path, n=2)
    feat = tmp_path / "feat"
    run("extract", "--turns", sim / "turns.jsonl", "--labels", sim / "labels.csv", "--out", feat)
    assert run("evaluate", "--features", feat / "features.csv", "--schema", "vgs", "--seed", 1,
               "--out", tmp_path) == 2
    assert "schema" in capsys.readouterr().err


def test_oracle_corpus_loocv_is_perfect(tmp_path):
    lines = ["dialogue_id,label,schema," + ",".join(f"f{i:02d}" for i in range(32))]
    for i in range(10):
        lab = "ad" if i < 5 else "nonad"
        vals = ["0.0"] * 30 + ["", ""]
        vals[0] = "1.0" if lab == "ad" else "-1.0"
        lines.append(f"d{i},{lab},vgo," + ",".join(vals))
    (tmp_path / "f.csv").write_text("\n".join(lines) + "\n")
    assert run("evaluate", "--features", tmp_path / "f.csv", "--seed", 0, "--k", 5, "--roc-rounds", 1,
               "--out", tmp_path) == 0
    assert json.loads((tmp_path / "metrics.json").read_text())["Overall accuracy (LOOCV)"] == 1.0


def test_rate_command(tmp_path):
    wav = tmp_path / "wav"
    wav.mkdir()
    write_wav(wav / "silence.wav", AudioBuffer(16000, np.zeros(16000)))
    for i in range(3):
        # the rate is 1 / burst_s, so vary burst length to spread it
        a, _ = gen_voiced_audio(8, burst_s=0.15 + 0.05 * i, seed=i)
        write_wav(wav / f"burst{i}.wav", a)
    (tmp_path / "words.csv").write_text("utterance_id,word_count\nburst0,5\nburst1,7\nburst2,6\n")
    out = tmp_path / "out"
    assert run("rate", "--wav-dir", wav, "--words", tmp_path / "words.csv", "--out", out) == 0
    rows = {ln.split(",")[0]: ln.split(",") for ln in (out / "nuclei.csv").read_text().splitlines()
            if not ln.startswith("#")}
    assert rows["silence"][3] == "0.000" and rows["silence"][4]
    assert abs(int(rows["burst0"][1]) - 8) <= 1
    corr = json.loads((out / "rate_summary.json").read_text())["correlation"]
    assert set(corr) >= {"r", "t", "df", "p", "n"} and corr["n"] == 3
    assert corr["text"].startswith("rho=") and f"t({corr['df']})=" in corr["text"]


def test_rate_bad_file_continues(tmp_path, capsys):
    (tmp_path / "bad.wav").write_bytes(b"junk")
    a, _ = gen_voiced_audio(3)
    write_wav(tmp_path / "good.wav", a)
    assert run("rate", "--wav", tmp_path / "bad.wav", tmp_path / "good.wav", "--out", tmp_path / "o") == 1
    assert "bad.wav" in capsys.readouterr().err
    assert "good," in (tmp_path / "o" / "nuclei.csv").read_text()


def test_stats_command(tmp_path):
    sim = small_corpus(tmp_path, n=2)
    assert run("stats", "--turns", sim / "turns.jsonl", "--labels", sim / "labels.csv", "--out", tmp_path) == 0
    text = (tmp_path / "stats.csv").read_text()
    assert "feature,non-AD,AD" in text


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "adtalk.cli", "simulate", "--seed", "2", "--n-ad", "1",
                          "--n-nonad", "1", "--target-s", "20", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "nonad: 1" in res.stdout
