import json

import pytest

from sdoh_extract import cli, corpus
from sdoh_extract.cli import main

SUBCOMMANDS = ["ingest", "validate", "split", "select", "synth", "train-ner", "train-re",
               "predict", "score", "adapt", "aggregate", "kappa"]


def write_manifest(path, n):
    with open(path, "w") as fh:
        fh.write("doc_id\tpatient_id\tdomain\n")
        for i in range(n):
            fh.write(f"d{i:04d}\tp{i // 3}\tcancer\n")


def test_unknown_and_missing_subcommand(capsys):
    assert main(["bogus"]) == 2
    assert "usage" in capsys.readouterr().err
    assert main([]) == 2


@pytest.mark.parametrize("name", SUBCOMMANDS)
def test_help_lists_every_flag(name, capsys):
    assert main([name, "--help"]) == 0
    out = capsys.readouterr().out
    _, registry = cli.build_parser()
    for spec in registry[name].specs.values():
        assert spec["flag"] in out


def test_split_reproduces_sizes(tmp_path, capsys):
    write_manifest(tmp_path / "m.tsv", 629)
    out = tmp_path / "split.json"
    assert main(["split", "--manifest", str(tmp_path / "m.tsv"), "--ratio", "0.8", "--val", "0.10",
                 "--seed", "7", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert (len(data["train"]), len(data["validation"]), len(data["test"])) == (452, 51, 126)
    assert "train 452  validation 51  test 126" in capsys.readouterr().out

    write_manifest(tmp_path / "m200.tsv", 200)
    assert main(["split", "--manifest", str(tmp_path / "m200.tsv"), "--ratio", "0.5"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["sizes"] == {"train": 90, "validation": 10, "test": 100}


def test_config_precedence(tmp_path, monkeypatch, capsys):
    write_manifest(tmp_path / "m.tsv", 200)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 1, "split": {"ratio": 0.5, "manifest": str(tmp_path / "m.tsv")}}))
    monkeypatch.setenv(cli.CONFIG_ENV, str(cfg))
    assert main(["split"]) == 0
    from_env = json.loads(capsys.readouterr().out)
    assert from_env["sizes"]["test"] == 100 and from_env["seed"] == 1
    assert main(["split", "--seed", "9", "--ratio", "0.8"]) == 0
    overridden = json.loads(capsys.readouterr().out)
    assert overridden["seed"] == 9 and overridden["sizes"]["test"] == 40
    cfg.write_text(json.dumps({"split": {"nonsense": 1}}))
    assert main(["split"]) == 2


def test_usage_errors(tmp_path, capsys):
    assert main(["ingest", "--out", str(tmp_path / "x")]) == 2
    assert "--input is required" in capsys.readouterr().err
    assert main(["ingest", "--input", str(tmp_path / "nope"), "--out", str(tmp_path / "x")]) == 2
    (tmp_path / "a.txt").write_text("x")
    assert main(["split", "--corpus", str(tmp_path), "--ratio", "1.5"]) == 2


def test_data_and_model_errors(tmp_path, capsys):
    (tmp_path / "a.txt").write_text("everyday smoker")
    (tmp_path / "a.ann").write_text("T1\tTobacco_use 0 15\tsmoker\n")
    assert main(["ingest", "--input", str(tmp_path), "--out", str(tmp_path / "o")]) == 3
    err = capsys.readouterr().err
    assert "data error" in err and "SurfaceMismatch" in err
    bad_model = tmp_path / "bad.model"
    bad_model.write_text("garbage\n")
    assert main(["predict", "--ner", str(bad_model), "--re", str(bad_model), "--input", str(tmp_path),
                 "--out", str(tmp_path / "p")]) == 4
    assert "model error" in capsys.readouterr().err


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    fast = ["--max-epochs", "6", "--patience", "2", "--log-level", "WARNING"]
    assert main(["synth", "--out", str(root / "src"), "--n-docs", "150", "--seed", "1"]) == 0
    assert main(["synth", "--out", str(root / "tgt"), "--n-docs", "40", "--seed", "2", "--id-prefix", "t"]) == 0
    assert main(["split", "--corpus", str(root / "src"), "--seed", "3", "--out", str(root / "split.json")]) == 0
    for cmd, name in (("train-ner", "ner.model"), ("train-re", "re.model")):
        assert main([cmd, "--corpus", str(root / "src"), "--split", str(root / "split.json"),
                     "--out", str(root / name), *fast]) == 0
    return root


def test_training_is_reproducible(workspace):
    again = workspace / "ner2.model"
    assert main(["train-ner", "--corpus", str(workspace / "src"), "--split", str(workspace / "split.json"),
                 "--out", str(again), "--max-epochs", "6", "--patience", "2", "--log-level", "WARNING"]) == 0
    assert again.read_bytes() == (workspace / "ner.model").read_bytes()


def test_predict_score_aggregate_kappa(workspace, capsys):
    w = workspace
    assert main(["predict", "--ner", str(w / "ner.model"), "--re", str(w / "re.model"), "--input", str(w / "tgt"),
                 "--out", str(w / "pred"), "--parallelism", "2"]) == 0
    assert (w / "pred" / "records.tsv").exists() and (w / "pred" / "diagnostics.json").exists()
    capsys.readouterr()

    assert main(["score", "--gold", str(w / "tgt"), "--pred", str(w / "pred"), "--mode", "both",
                 "--json", str(w / "score.json")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[1].split() == ["Prec.", "Rec.", "F(b=1)"] * 2
    assert [l.split()[0] for l in out[2:]] == ["Concept", "Relation", "End-to-end"]
    report = json.loads((w / "score.json").read_text())
    assert report["concept"]["strict"]["micro"]["f1"] >= 0.9

    assert main(["aggregate", "--records", str(w / "pred" / "records.tsv"),
                 "--manifest", str(w / "tgt" / corpus.MANIFEST_NAME), "--title", "Target"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("Target\n") and "Total patients" in out

    assert main(["kappa", "--a", str(w / "tgt"), "--b", str(w / "tgt")]) == 0
    assert capsys.readouterr().out.startswith("kappa 1.0000")
    assert main(["validate", "--corpus", str(w / "pred")]) == 0
    assert main(["ingest", "--input", str(w / "tgt"), "--out", str(w / "copy")]) == 0
    assert sorted(p.name for p in (w / "copy").iterdir()) == sorted(p.name for p in (w / "tgt").iterdir())


def test_select(workspace, tmp_path, capsys):
    lex = tmp_path / "kw.txt"
    lex.write_text("smoker\netoh\ndivorced\n")
    assert main(["select", "--notes", str(workspace / "src"), "--lexicon", str(lex), "--min-unique", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "doc_id\tunique_phrases\ttotal_matches"
    assert all(int(l.split("\t")[1]) >= 1 for l in lines[1:])


def test_adapt_table(workspace, tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "shifted"), "--n-docs", "60", "--seed", "5", "--shift", "0.7",
                 "--id-prefix", "s"]) == 0
    capsys.readouterr()
    assert main(["adapt", "--source-corpus", str(workspace / "src"), "--source-split", str(workspace / "split.json"),
                 "--target-corpus", str(tmp_path / "shifted"), "--ner", str(workspace / "ner.model"),
                 "--re", str(workspace / "re.model"), "--max-epochs", "4", "--json", str(tmp_path / "a.json"),
                 "--log-level", "WARNING"]) == 0
    out = capsys.readouterr().out
    for row in ("Source (in-domain)", "Direct evaluation", "Fine-tuning", "Merge and retrain"):
        assert row in out
    assert set(json.loads((tmp_path / "a.json").read_text())) >= {"Direct evaluation", "Fine-tuning"}
