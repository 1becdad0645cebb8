import json

import numpy as np
import pytest

from conftest import make_text_line
from ocrforge import nags
from ocrforge.augment import AugmentationPlan, LoResDistortParams, save_plan
from ocrforge.cli import main
from ocrforge.lineimg import load_line, save_line
from ocrforge.evalcer import write_transcript


def fill_corpus(path, n):
    path.mkdir(parents=True, exist_ok=True)
    for i in range(n):
        save_line(make_text_line(width=120, height=64, seed=i),
                  path / f"line{i:03d}.png")
        write_transcript(f"zeile {i}", path / f"line{i:03d}.gt.txt")


def test_prepare(tmp_path, capsys):
    src = tmp_path / "raw"
    fill_corpus(src, 2)
    out = tmp_path / "prepared"
    assert main(["prepare", "--config", "bin48", "--in", str(src),
                 "--out", str(out)]) == 0
    assert "prepared 2 lines" in capsys.readouterr().out
    img = load_line(out / "line000.png")
    assert img.height == 48
    assert set(np.unique(img.pixels)) <= {0, 255}
    # transcripts ride along so the output dir is ingest-ready
    assert (out / "line001.gt.txt").read_bytes() == \
        (src / "line001.gt.txt").read_bytes()


def test_augment(tmp_path, capsys):
    src = tmp_path / "in"
    fill_corpus(src, 2)
    plan_path = tmp_path / "plan.json"
    save_plan(AugmentationPlan(
        ops=[("distort_lowres", LoResDistortParams(8, 0.5))],
        ratio=100.0), plan_path)
    out = tmp_path / "aug"
    assert main(["augment", "--plan", str(plan_path), "--in", str(src),
                 "--out", str(out), "--seed", "3"]) == 0
    assert "wrote 2 augmented lines" in capsys.readouterr().out
    assert len(list(out.glob("aug*.png"))) == 2


def test_nags_enumerate_default_grid(tmp_path, capsys):
    out = tmp_path / "specs.jsonl"
    assert main(["nags", "enumerate", "--out", str(out)]) == 0
    err = capsys.readouterr().err
    assert "672 candidates, 0 invalid, 672 emitted" in err
    lines = out.read_text(encoding="utf-8").strip().splitlines()
    assert len(lines) == 672
    assert all(json.loads(line)["schema"] == 1 for line in lines[:3])


def test_nags_enumerate_custom_grid(tmp_path, capsys):
    grid_path = tmp_path / "grid.json"
    grid_path.write_text(json.dumps({
        "inputs": ["gray48"], "widths": [[64, 2]],
        "k": {"min": 1, "max": 2}, "p": [2],
    }), encoding="utf-8")
    assert main(["nags", "enumerate", "--grid", str(grid_path)]) == 0
    captured = capsys.readouterr()
    assert "2 candidates, 1 invalid, 1 emitted" in captured.err
    assert json.loads(captured.out)["k"] == 2


def test_nags_emit_canonicalizes(tmp_path, capsys):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"input": "gray48", "n": 124, "r": 1.5,
                                     "k": 6, "p": 1, "m": [650]}),
                         encoding="utf-8")
    out_path = tmp_path / "canonical.json"
    assert main(["nags", "emit", "--spec", str(spec_path),
                 "--out", str(out_path)]) == 0
    text = out_path.read_text(encoding="utf-8").strip()
    assert text == nags.emit(nags.tuned_architecture())


def test_eval_dirs_with_harmonization(tmp_path, capsys):
    gt = tmp_path / "gt"
    gt.mkdir()
    write_transcript("dungen ſieht", gt / "a.gt.txt")
    write_transcript("dungen sieht", gt / "a.pred.txt")
    out_json = tmp_path / "report.json"
    assert main(["eval", "--gt", str(gt), "--out-json", str(out_json)]) == 0
    assert "cer 0.000000" in capsys.readouterr().out
    assert json.loads(out_json.read_text())["cer"] == 0.0

    assert main(["eval", "--gt", str(gt), "--no-harmonize"]) == 0
    assert "cer 0.083333" in capsys.readouterr().out


def test_eval_tsv_and_csv(tmp_path, capsys):
    tsv = tmp_path / "pairs.tsv"
    tsv.write_text("abc\tabd\nhello\thello\n", encoding="utf-8")
    out_csv = tmp_path / "report.csv"
    assert main(["eval", "--tsv", str(tsv), "--out-csv", str(out_csv)]) == 0
    assert "cer 0.125000" in capsys.readouterr().out
    assert out_csv.read_text().startswith("line_id,")


def test_eval_empty_inputs_fail(tmp_path, capsys):
    gt = tmp_path / "gt"
    gt.mkdir()
    assert main(["eval", "--gt", str(gt)]) == 1
    assert "no evaluation pairs" in capsys.readouterr().err


def test_vote(tmp_path, capsys):
    src = tmp_path / "folds"
    src.mkdir()
    for i, text in enumerate(["wort", "wort", "wert"]):
        write_transcript(text, src / f"z.fold{i}.pred.txt")
    out = tmp_path / "voted"
    assert main(["vote", "--in", str(src), "--out", str(out)]) == 0
    assert "voted 1 lines" in capsys.readouterr().out
    assert (out / "z.pred.txt").read_text(encoding="utf-8") == "wort\n"


def test_full_orchestration_flow(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    fill_corpus(corpus, 10)
    manifest_path = tmp_path / "manifest.json"
    assert main(["ingest", "--dir", str(corpus),
                 "--out", str(manifest_path)]) == 0
    assert "manifest with 10 lines" in capsys.readouterr().out

    split_path = tmp_path / "split.json"
    assert main(["split", "--manifest", str(manifest_path),
                 "--fractions", "0.8,0.2", "--seed", "5",
                 "--out", str(split_path)]) == 0
    assert "train=8 validation=2" in capsys.readouterr().out

    jobs_dir = tmp_path / "jobs"
    assert main(["plan", "--stages", "1-3", "--budgets", "5,full",
                 "--replicates", "2", "--manifest", str(split_path),
                 "--seed", "1", "--out", str(jobs_dir)]) == 0
    assert "planned 12 jobs" in capsys.readouterr().out

    results = tmp_path / "results"
    results.mkdir()
    for path in jobs_dir.glob("*.json"):
        doc = json.loads(path.read_text(encoding="utf-8"))
        value = 3.0 - 0.5 * doc["stage"]
        (results / f"{doc['job_id']}.cer").write_text(f"{value}\n",
                                                      encoding="utf-8")

    report_csv = tmp_path / "report.csv"
    report_json = tmp_path / "report.json"
    assert main(["collect", "--jobs", str(jobs_dir),
                 "--results", str(results),
                 "--out-json", str(report_json),
                 "--out-csv", str(report_csv)]) == 0
    assert "6 stage/budget rows, 0 missing" in capsys.readouterr().out
    doc = json.loads(report_json.read_text(encoding="utf-8"))
    assert len(doc["rows"]) == 6
    by_key = {(r["budget"], r["stage"]): r for r in doc["rows"]}
    assert by_key[(5, 2)]["delta_mu"] == pytest.approx(-0.5)
    assert report_csv.read_text().startswith("stage,budget,")


def test_stats_values_and_sizing(tmp_path, capsys):
    values = tmp_path / "values.txt"
    values.write_text("1.26\n1.63\n", encoding="utf-8")
    assert main(["stats", "--values", str(values),
                 "--sigma", "0.07", "--detect", "0.05"]) == 0
    out = capsys.readouterr().out
    doc = json.loads(out.splitlines()[0])
    assert doc["n"] == 2
    assert doc["min"] == 1.26
    assert "required replicates: 8" in out


def test_stats_requires_both_sizing_flags(capsys):
    assert main(["stats", "--sigma", "0.07"]) == 2
    assert "together" in capsys.readouterr().err


def test_stats_requires_some_input(capsys):
    assert main(["stats"]) == 2
