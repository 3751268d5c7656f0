import io
import json

import pytest

from tsparser.cli import build_parser, main
from tsparser.config import ConfigError, RunConfig, load_config, parse_config
from tsparser.datasets import load_weak, supervised_record, load_supervised, weak_record
from tsparser.resources import data_path
from tsparser.semantics import load_kb

KB = str(data_path("toy_kb.tsv"))
LINKER = str(data_path("toy_linker.tsv"))
TINY = ["--set", "hidden=12", "--set", "attention_dim=12", "--set", "feature_dim=12",
        "--set", "word_dim=8", "--set", "token_dim=8"]


def run(args, stdin=None, monkeypatch=None):
    out = io.StringIO()
    if stdin is not None:
        monkeypatch.setattr("sys.stdin", io.StringIO(stdin))
    code = main(args, out)
    return code, out.getvalue()


@pytest.fixture(scope="module")
def full_ckpt(tmp_path_factory):
    path = tmp_path_factory.mktemp("ck") / "full.npz"
    code, out = run(["train", "--regime", "full", "--data", str(data_path("toy_geo.jsonl")), "--kb", KB,
                     "--linker", LINKER, "--out", str(path), "--epochs", "2", *TINY])
    assert code == 0, out
    return path


@pytest.fixture(scope="module")
def weak_ckpt(tmp_path_factory):
    path = tmp_path_factory.mktemp("ck") / "weak.npz"
    code, out = run(["train", "--regime", "weak", "--data", str(data_path("toy_weak.jsonl")), "--kb", KB,
                     "--linker", LINKER, "--out", str(path), "--epochs", "1", "--mode", "bu",
                     "--set", "train_beam=20", "--set", "test_beam=20", *TINY])
    assert code == 0, out
    return path


def test_kb_validate(tmp_path):
    code, out = run(["kb", "validate", KB])
    assert code == 0 and out.startswith("ok:")
    bad = tmp_path / "bad.tsv"
    bad.write_text("a\tr\tb\nthis is broken\n")
    assert run(["kb", "validate", str(bad)])[0] == 1


def test_kb_validate_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("a\tr\tb\n\nx\ty\n")
    main(["kb", "validate", str(bad)], io.StringIO())
    assert f"{bad}:3:" in capsys.readouterr().err


def test_usage_errors_exit_2(capsys):
    assert main([], io.StringIO()) == 2
    assert main(["train", "--regime", "full"], io.StringIO()) == 2
    assert main(["eval", "--ckpt", "x", "--data", "y", "--metric", "bleu"], io.StringIO()) == 2
    assert "--regime" in capsys.readouterr().err


def test_missing_files_exit_1(tmp_path):
    assert run(["kb", "validate", str(tmp_path / "nope.tsv")])[0] == 1
    assert run(["parse", "--ckpt", str(tmp_path / "nope.npz"), "x"])[0] == 1


def test_every_subcommand_documents_its_flags():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    for name, p in sub.choices.items():
        for action in p._actions:
            if action.option_strings and action.dest != "help":
                assert action.help, f"{name} {action.option_strings} lacks help"


def test_parse_emits_candidate_lines(full_ckpt, monkeypatch):
    code, out = run(["parse", "--ckpt", str(full_ckpt), "--beam", "5"],
                    "how many daughters does obama have\nwhat is the capital of texas\n", monkeypatch)
    assert code == 0
    lines = [json.loads(l) for l in out.splitlines()]
    assert len(lines) == 2 and all(0 < len(l["candidates"]) <= 5 for l in lines)


def test_answer_and_repl(full_ckpt, monkeypatch):
    code, out = run(["answer", "--ckpt", str(full_ckpt), "--beam", "5", "what", "is", "the", "capital", "of", "texas"])
    rec = json.loads(out)
    assert code == 0 and rec["utterance"] == "what is the capital of texas" and "lf" in rec
    code, out = run(["repl", "--ckpt", str(full_ckpt), "--beam", "5"], "who founded nvidia\n:q\n", monkeypatch)
    assert code == 0 and "lf: " in out and "answer: " in out


def test_eval_metrics_and_sweep(full_ckpt):
    code, out = run(["eval", "--ckpt", str(full_ckpt), "--data", str(data_path("toy_geo.jsonl")),
                     "--metric", "em", "--beam", "3"])
    assert code == 0 and json.loads(out)["metric"] == "em"
    code, out = run(["eval", "--ckpt", str(full_ckpt), "--data", str(data_path("toy_weak_dev.jsonl")),
                     "--beam-sweep", "2,6"])
    rows = out.splitlines()
    assert code == 0 and rows[0].split("\t") == ["width", "answerable", "correct"]
    assert [r.split("\t")[0] for r in rows[1:]] == ["2", "6"]
    assert run(["eval", "--ckpt", str(full_ckpt), "--data", str(data_path("toy_weak_dev.jsonl")),
                "--metric", "em"])[0] == 1
    assert run(["eval", "--ckpt", str(full_ckpt), "--data", str(data_path("toy_weak_dev.jsonl")),
                "--beam-sweep", "a,b"])[0] == 2


def test_weak_checkpoint_carries_ranker(weak_ckpt, monkeypatch):
    from tsparser.cli import Session
    s = Session(weak_ckpt)
    assert s.ranker is not None and s.config.mode == "bu" and s.linker is not None
    code, out = run(["answer", "--ckpt", str(weak_ckpt)], "how many daughters does obama have\n", monkeypatch)
    assert code == 0 and json.loads(out)["lf"]


def test_fixed_seed_is_reproducible(tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"m{i}.npz"
        run(["train", "--regime", "full", "--data", str(data_path("toy_geo.jsonl")), "--kb", KB,
             "--out", str(p), "--epochs", "1", *TINY])
        outs.append(run(["parse", "--ckpt", str(p), "--beam", "4", "what", "is", "the", "area", "of", "idaho"])[1])
    assert outs[0] == outs[1]


def test_regime_must_match_data(tmp_path):
    code, _ = run(["train", "--regime", "full", "--data", str(data_path("toy_weak.jsonl")), "--kb", KB,
                   "--out", str(tmp_path / "x.npz")])
    assert code == 1


def test_synth_distant(tmp_path):
    out_path = tmp_path / "d.jsonl"
    code, _ = run(["synth-distant", "--corpus", str(data_path("toy_distant.jsonl")), "--kb", KB,
                   "--out", str(out_path)])
    assert code == 0
    exs = load_weak(out_path, load_kb(KB))
    assert any(e.utterance == "NVIDIA was founded by Jen-Hsun_Huang and _blank_" for e in exs)


# -- config files ----------------------------------------------------------------------

def test_defaults_match_stated_values():
    c = RunConfig()
    assert (c.word_dim, c.token_dim, c.hidden, c.dropout) == (50, 50, 150, 0.5)
    assert (c.train_beam, c.test_beam) == (500, 300)
    assert (c.max_open_nt, c.max_total_nt, c.max_consecutive_ter) == (10, 10, 5)


def test_config_round_trip_and_overrides(tmp_path):
    c = RunConfig().update({"mode": "bu", "hidden": "64", "lr": 0.05})
    assert parse_config(c.dumps()) == c
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nmode = bu\n\nepochs = 3  # trailing\n")
    assert load_config(path).epochs == 3 and load_config(path).mode == "bu"


def test_config_from_environment(tmp_path, monkeypatch):
    path = tmp_path / "env.cfg"
    path.write_text("seed = 42\n")
    monkeypatch.setenv("TSPARSER_CONFIG", str(path))
    assert load_config().seed == 42


@pytest.mark.parametrize("text", ["nonsense\n", "colour = blue\n", "hidden = lots\n", "mode = sideways\n"])
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text, "x.cfg")


def test_dataset_records_round_trip(tmp_path):
    kb = load_kb(KB)
    sup = load_supervised(data_path("toy_geo.jsonl"))
    (tmp_path / "s.jsonl").write_text("".join(supervised_record(e) + "\n" for e in sup))
    assert [(e.utterance, e.lf) for e in load_supervised(tmp_path / "s.jsonl")] == [(e.utterance, e.lf) for e in sup]
    weak = load_weak(data_path("toy_weak.jsonl"), kb)
    (tmp_path / "w.jsonl").write_text("".join(weak_record(e) + "\n" for e in weak))
    assert load_weak(tmp_path / "w.jsonl", kb) == weak
