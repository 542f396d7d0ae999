"""Command-line behavior: exit codes, artifacts, seeds and config files."""

import json
import shutil
import subprocess

import pytest

from pdgsim import cli
from pdgsim.cli import main, parse_config_file
from pdgsim.dataflow import build_pdg
from pdgsim.datagen import BUILT_IN_GROUPS, load_corpus
from pdgsim.graphcore import serialize_pdg
from pdgsim.ir import format_ir, lower_source
from pdgsim.model import attention_scores, deserialize_model

SRC = ("def m(a) { s = 0; i = 0; while (i < a) { s = s + i; i = i + 1; } "
       "return s; }\n")

TINY_CONFIG = """\
# small network, fast epochs
d_hidden = 6
heads_block1 = 2
head_dim_block1 = 3
heads_block2 = 2
out_dim_block2 = 6
lstm_hidden = 6
rounds = 2
graph_dim = 5
classifier_hidden = 4
variant = eu
epochs = 2
batch_size = 8
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "m.src").write_text(SRC)
    (root / "tiny.cfg").write_text(TINY_CONFIG)
    assert main(["dataset-gen", "--out", str(root / "corpus"),
                 "--pairs", "8", "--seed", "1"]) == 0
    assert main(["train", "--data", str(root / "corpus"),
                 "--config", str(root / "tiny.cfg"),
                 "--seed", "0", "--out", str(root / "model.json"),
                 "--history", str(root / "history.csv")]) == 0
    return root


# -------------------------------------------------------------------- pdg


def test_pdg_stdout_matches_library(workdir, capsys):
    assert main(["pdg", str(workdir / "m.src")]) == 0
    out = capsys.readouterr().out
    assert out == serialize_pdg(build_pdg(lower_source(SRC, name="m"))) + "\n"
    json.loads(out)


def test_pdg_writes_files_deterministically(workdir, tmp_path):
    one, two = tmp_path / "one.json", tmp_path / "two.json"
    dot = tmp_path / "g.dot"
    assert main(["pdg", str(workdir / "m.src"), "--out", str(one),
                 "--dot", str(dot)]) == 0
    assert main(["pdg", str(workdir / "m.src"), "--out", str(two)]) == 0
    assert one.read_bytes() == two.read_bytes()
    text = dot.read_text()
    assert text.startswith("digraph") and "->" in text


def test_pdg_ir_mode_agrees_with_source_mode(workdir, tmp_path, capsys):
    ir_file = tmp_path / "m.ir"
    ir_file.write_text(format_ir(lower_source(SRC)))
    assert main(["pdg", str(ir_file), "--ir"]) == 0
    from_ir = json.loads(capsys.readouterr().out)
    assert main(["pdg", str(workdir / "m.src")]) == 0
    from_src = json.loads(capsys.readouterr().out)
    # the IR text format drops source line numbers
    assert all(n["line"] == 0 for n in from_ir["nodes"])
    for n in from_src["nodes"]:
        n["line"] = 0
    assert from_ir == from_src


def test_pdg_missing_file_exits_2(tmp_path, capsys):
    assert main(["pdg", str(tmp_path / "nope.src")]) == 2
    assert "error:" in capsys.readouterr().err


def test_pdg_empty_file_exits_2(tmp_path, capsys):
    empty = tmp_path / "empty.src"
    empty.write_text("")
    assert main(["pdg", str(empty)]) == 2
    assert "ParseError" in capsys.readouterr().err


# ------------------------------------------------------------ dataset-gen


def test_dataset_gen_output_loads(workdir, capsys):
    pairs, (train_idx, val_idx, test_idx) = load_corpus(workdir / "corpus")
    assert len(pairs) == 8
    assert len(train_idx) + len(val_idx) + len(test_idx) == 8


def test_dataset_gen_seed_determinism(tmp_path, monkeypatch):
    monkeypatch.delenv("PDGSIM_SEED", raising=False)
    for name, argv in {
        "flagged": ["--seed", "7"],
        "again": ["--seed", "7"],
        "env": [],
    }.items():
        if name == "env":
            monkeypatch.setenv("PDGSIM_SEED", "7")
        out = tmp_path / name
        assert main(["dataset-gen", "--out", str(out), "--pairs", "6",
                     *argv]) == 0
    flagged = (tmp_path / "flagged" / "index.json").read_bytes()
    assert (tmp_path / "again" / "index.json").read_bytes() == flagged
    assert (tmp_path / "env" / "index.json").read_bytes() == flagged
    assert ((tmp_path / "env" / "pairs" / "0000" / "a.src").read_bytes()
            == (tmp_path / "flagged" / "pairs" / "0000" / "a.src").read_bytes())


def test_flag_beats_env_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("PDGSIM_SEED", "7")
    assert main(["dataset-gen", "--out", str(tmp_path / "flag9"),
                 "--pairs", "6", "--seed", "9"]) == 0
    monkeypatch.delenv("PDGSIM_SEED")
    assert main(["dataset-gen", "--out", str(tmp_path / "plain9"),
                 "--pairs", "6", "--seed", "9"]) == 0
    assert ((tmp_path / "flag9" / "index.json").read_bytes()
            == (tmp_path / "plain9" / "index.json").read_bytes())


def test_invalid_env_seed_exits_2(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PDGSIM_SEED", "soon")
    assert main(["dataset-gen", "--out", str(tmp_path / "x"),
                 "--pairs", "4"]) == 2
    assert "PDGSIM_SEED" in capsys.readouterr().err


def test_dataset_gen_custom_seed_dir(tmp_path):
    seeds = tmp_path / "seeds"
    for group in ("array_sum", "gcd_loop"):
        gdir = seeds / group
        gdir.mkdir(parents=True)
        for i, src in enumerate(BUILT_IN_GROUPS[group]):
            (gdir / f"v{i}.src").write_text(src)
    assert main(["dataset-gen", "--out", str(tmp_path / "custom"),
                 "--pairs", "6", "--seed", "0", "--seeds", str(seeds)]) == 0
    pairs, _ = load_corpus(tmp_path / "custom")
    assert len(pairs) == 6


def test_dataset_gen_rejects_single_group(tmp_path, capsys):
    seeds = tmp_path / "seeds"
    (seeds / "only").mkdir(parents=True)
    (seeds / "only" / "a.src").write_text(SRC)
    assert main(["dataset-gen", "--out", str(tmp_path / "x"),
                 "--pairs", "4", "--seed", "0", "--seeds", str(seeds)]) == 2
    assert "InsufficientSeeds" in capsys.readouterr().err


def test_dataset_gen_rejects_broken_seed(tmp_path, capsys):
    seeds = tmp_path / "seeds"
    for group in ("a", "b"):
        (seeds / group).mkdir(parents=True)
        (seeds / group / "x.src").write_text(SRC)
    (seeds / "a" / "bad.src").write_text("def broken( {")
    assert main(["dataset-gen", "--out", str(tmp_path / "x"),
                 "--pairs", "4", "--seed", "0", "--seeds", str(seeds)]) == 2
    assert "bad.src" in capsys.readouterr().err


# ------------------------------------------------------------------ train


def test_train_artifacts(workdir):
    cfg, threshold, params = deserialize_model(
        (workdir / "model.json").read_text())
    assert cfg.variant == "eu" and cfg.d_hidden == 6
    assert threshold in (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
    history = (workdir / "history.csv").read_text().splitlines()
    assert history[0] == "epoch,loss,val_f1"
    assert len(history) == 3  # two epochs


def test_train_logs_resolved_config(workdir, tmp_path, capsys):
    assert main(["train", "--data", str(workdir / "corpus"),
                 "--config", str(workdir / "tiny.cfg"),
                 "--seed", "0", "--epochs", "1",
                 "--out", str(tmp_path / "m.json")]) == 0
    captured = capsys.readouterr()
    assert "config: epochs=1" in captured.err  # flag beat the file
    assert "config: d_hidden=6" in captured.err
    assert "trained epochs=1" in captured.out
    assert "val precision=" in captured.out
    assert "test precision=" in captured.out


def test_train_reruns_byte_identical(workdir, tmp_path):
    args = ["train", "--data", str(workdir / "corpus"),
            "--config", str(workdir / "tiny.cfg"), "--seed", "4"]
    assert main([*args, "--out", str(tmp_path / "a.json")]) == 0
    assert main([*args, "--out", str(tmp_path / "b.json")]) == 0
    assert ((tmp_path / "a.json").read_bytes()
            == (tmp_path / "b.json").read_bytes())


def test_train_config_seed_yields_to_env(workdir, tmp_path, monkeypatch,
                                         capsys):
    cfg = tmp_path / "seeded.cfg"
    cfg.write_text(TINY_CONFIG + "seed = 5\n")
    args = ["train", "--data", str(workdir / "corpus"), "--config", str(cfg),
            "--epochs", "1", "--out", str(tmp_path / "m.json")]
    assert main(args) == 0
    assert "config: seed=5" in capsys.readouterr().err
    monkeypatch.setenv("PDGSIM_SEED", "6")
    assert main(args) == 0
    assert "config: seed=6" in capsys.readouterr().err
    assert main([*args, "--seed", "7"]) == 0
    assert "config: seed=7" in capsys.readouterr().err


def test_train_unknown_config_key_exits_2(workdir, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(TINY_CONFIG + "dropout = 0.5\n")
    assert main(["train", "--data", str(workdir / "corpus"),
                 "--config", str(cfg), "--out", str(tmp_path / "m.json")]) == 2
    assert "unknown config key" in capsys.readouterr().err


def test_train_bad_config_value_exits_2(workdir, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("epochs = soon\n")
    assert main(["train", "--data", str(workdir / "corpus"),
                 "--config", str(cfg), "--out", str(tmp_path / "m.json")]) == 2
    assert "cannot parse" in capsys.readouterr().err


def test_train_ablation_flags(workdir, tmp_path):
    assert main(["train", "--data", str(workdir / "corpus"),
                 "--config", str(workdir / "tiny.cfg"),
                 "--variant", "ea", "--no-jk", "--pool", "gap",
                 "--heads1", "1", "--epochs", "1",
                 "--seed", "0", "--out", str(tmp_path / "m.json")]) == 0
    cfg, _, _ = deserialize_model((tmp_path / "m.json").read_text())
    assert cfg.variant == "ea" and cfg.no_jk and cfg.pool == "gap"
    assert cfg.heads_block1 == 1


def test_train_missing_corpus_exits_2(tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "nope"),
                 "--out", str(tmp_path / "m.json")]) == 2
    assert "CorpusError" in capsys.readouterr().err


# ----------------------------------------------------------------- detect


def test_detect_prints_score_and_verdict(workdir, capsys):
    argv = ["detect", "--model", str(workdir / "model.json"),
            str(workdir / "m.src"), str(workdir / "m.src")]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert first.startswith("score=")
    assert "verdict=" in first
    score = float(first.split()[0].partition("=")[2])
    assert 0.0 < score < 1.0
    assert main(argv) == 0
    assert capsys.readouterr().out == first  # deterministic


def test_detect_missing_model_exits_2(workdir, tmp_path, capsys):
    assert main(["detect", "--model", str(tmp_path / "nope.json"),
                 str(workdir / "m.src"), str(workdir / "m.src")]) == 2
    assert "error:" in capsys.readouterr().err


def test_detect_unparsable_input_exits_2(workdir, tmp_path, capsys):
    bad = tmp_path / "bad.src"
    bad.write_text("def m( {")
    assert main(["detect", "--model", str(workdir / "model.json"),
                 str(bad), str(workdir / "m.src")]) == 2


# ------------------------------------------------------------------- attn


def test_attn_schema_and_values(workdir, capsys):
    assert main(["attn", "--model", str(workdir / "model.json"),
                 str(workdir / "m.src")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"edges"}
    cfg, _, params = deserialize_model((workdir / "model.json").read_text())
    expected = attention_scores(build_pdg(lower_source(SRC)), params, cfg)
    assert len(doc["edges"]) == len(expected)
    for got, want in zip(doc["edges"], expected):
        assert got["src"] == want["src"] and got["dst"] == want["dst"]
        assert got["kind"] == want["kind"]
        assert got["attn_block1"] == pytest.approx(want["attn_block1"],
                                                   abs=1e-15)
        assert got["attn_block2"] == pytest.approx(want["attn_block2"],
                                                   abs=1e-15)


def test_attn_single_node_graph(workdir, tmp_path, capsys):
    single = tmp_path / "single.src"
    single.write_text("def one() { return 1; }\n")
    assert main(["attn", "--model", str(workdir / "model.json"),
                 str(single)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["edges"] == []  # one node, no PDG edges


# -------------------------------------------------------------- gradcheck


def test_gradcheck_exit_codes(monkeypatch, capsys):
    monkeypatch.setattr(cli, "gradcheck_suite",
                        lambda seed: [("layer_a", 1e-9), ("layer_b", 2e-8)])
    assert main(["gradcheck", "--seed", "0"]) == 0
    out = capsys.readouterr().out
    assert out.count(" ok") == 2 and "worst=" in out
    monkeypatch.setattr(cli, "gradcheck_suite",
                        lambda seed: [("layer_a", 1e-9), ("layer_b", 0.5)])
    assert main(["gradcheck", "--seed", "0"]) == 1
    assert "FAIL" in capsys.readouterr().out


# ------------------------------------------------------------------- eval


def test_eval_metrics_and_roc(workdir, tmp_path, capsys):
    roc = tmp_path / "roc.csv"
    assert main(["eval", "--model", str(workdir / "model.json"),
                 "--data", str(workdir / "corpus"), "--split", "all",
                 "--roc", str(roc)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("all precision=")
    assert "auc=" in out
    lines = roc.read_text().splitlines()
    assert lines[0] == "threshold,tpr,fpr"
    assert len(lines) > 2


def test_eval_default_split_is_test(workdir, capsys):
    assert main(["eval", "--model", str(workdir / "model.json"),
                 "--data", str(workdir / "corpus")]) == 0
    assert capsys.readouterr().out.startswith("test precision=")


def test_eval_empty_split_exits_2(workdir, tmp_path, capsys):
    assert main(["dataset-gen", "--out", str(tmp_path / "three"),
                 "--pairs", "3", "--seed", "2"]) == 0
    capsys.readouterr()
    assert main(["eval", "--model", str(workdir / "model.json"),
                 "--data", str(tmp_path / "three"), "--split", "val"]) == 2
    assert "EmptyDataset" in capsys.readouterr().err


# ------------------------------------------------------------ config file


def test_parse_config_file_types(tmp_path):
    cfg = tmp_path / "full.cfg"
    cfg.write_text(
        "epochs = 12          # trailing comment\n"
        "\n"
        "learning_rate = 0.01\n"
        "no_jk = yes\n"
        "symmetrize = FALSE\n"
        "threshold_grid = 0.25, 0.5, 0.75\n"
        "variant = ea\n")
    parsed = parse_config_file(cfg)
    assert parsed == {"epochs": 12, "learning_rate": 0.01, "no_jk": True,
                      "symmetrize": False,
                      "threshold_grid": (0.25, 0.5, 0.75), "variant": "ea"}


def test_parse_config_file_errors(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("epochs\n")
    with pytest.raises(ValueError, match="key=value"):
        parse_config_file(cfg)
    cfg.write_text("no_jk = maybe\n")
    with pytest.raises(ValueError, match="boolean"):
        parse_config_file(cfg)
    cfg.write_text("mystery = 1\n")
    with pytest.raises(ValueError, match="unknown config key"):
        parse_config_file(cfg)


# -------------------------------------------------------- console script


@pytest.mark.skipif(shutil.which("pdgsim") is None,
                    reason="console script not installed")
def test_console_script_smoke(workdir):
    done = subprocess.run(["pdgsim", "pdg", str(workdir / "m.src")],
                          capture_output=True, text=True)
    assert done.returncode == 0
    json.loads(done.stdout)
    usage = subprocess.run(["pdgsim"], capture_output=True, text=True)
    assert usage.returncode == 2
