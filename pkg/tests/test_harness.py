"""Training loop, checkpoints, CLI."""

import json
import struct
import zipfile

import numpy as np
import pytest

from proptree import cli
from proptree.corpus import read_corpus, write_corpus
from proptree.data import EQUIVALENT, PART_OF, SEGMENT
from proptree.embeddings import (
    EmbeddingTable,
    load_embeddings,
    load_word2vec_binary,
    load_word2vec_text,
)
from proptree.metrics import Counts, MetricsReport
from proptree.synthetic import SyntheticConfig, generate_corpus
from proptree.train import (
    JointRunner,
    TrainConfig,
    TrainLog,
    load_runner,
    predict_records,
    train_joint,
    train_model,
    train_pipeline,
)


def small_corpus(n=12, seed=4, **kw):
    return generate_corpus(SyntheticConfig(n_docs=n, seed=seed, **kw))


def tiny_config(**kw):
    base = dict(model="joint", d=8, l=4, lr=0.01, dropout=0.0,
                max_epochs=2, patience=5, seed=0)
    base.update(kw)
    return TrainConfig(**base)


def test_config_validation():
    cfg = TrainConfig(model="joint-2layer")
    assert cfg.layers == 2 and cfg.resolved_dropout == 0.3
    assert TrainConfig(model="joint").resolved_dropout == 0.5
    assert TrainConfig(dropout=0.1).resolved_dropout == 0.1
    with pytest.raises(ValueError):
        TrainConfig(model="transformer")
    with pytest.raises(ValueError):
        TrainConfig(d=4, l=8)  # needs l < 2d
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=0)


def test_config_overrides():
    cfg = TrainConfig()
    over = cfg.apply_overrides({"model": "pipeline-crf+mtt", "lr": "0.05",
                                "max_epochs": "7", "attention": "none"})
    assert over.model == "pipeline-crf+mtt"
    assert over.lr == 0.05 and over.max_epochs == 7
    assert over.attention is None
    assert cfg.max_epochs == 150  # original untouched
    with pytest.raises(KeyError):
        cfg.apply_overrides({"banana": "1"})


def test_trainlog_csv():
    log = TrainLog()
    log.add(1, 2.5, 40.0, 0.1)
    log.add(2, 1.5, 55.5, 0.1)
    assert log.best_f1 == 55.5
    lines = log.to_csv().strip().splitlines()
    assert lines[0] == "epoch,loss,val_f1,seconds"
    assert lines[2].startswith("2,1.500000,55.5000")


def fake_f1_report(f1_target):
    # P = R = f1 by construction: fp == fn
    table = {50.0: (1, 1), 60.0: (3, 2), 59.0: (59, 41), 58.0: (29, 21)}
    tp, off = table[f1_target]
    return MetricsReport(
        per_label={PART_OF: Counts(tp=tp, fp=off, fn=off),
                   SEGMENT: Counts(), EQUIVALENT: Counts()},
        tree_rate=0.0, n_docs=1)


def test_early_stopping_keeps_best_epoch(monkeypatch):
    docs = small_corpus(n=4)
    sequence = [50.0, 60.0, 59.0, 58.0, 57.0, 56.0]
    snapshots = []

    def scripted_evaluate(self, _docs):
        snapshots.append([p.data.copy() for p in self.model.params()])
        return fake_f1_report(sequence[len(snapshots) - 1])

    monkeypatch.setattr(JointRunner, "evaluate", scripted_evaluate)
    runner, log = train_joint(tiny_config(max_epochs=10, patience=2), docs, [])

    # stops after the second non-improving epoch, keeps the epoch-2 weights
    assert [r.epoch for r in log.records] == [1, 2, 3, 4]
    assert log.best_epoch == 2
    assert log.best_f1 == 60.0
    for p, snap in zip(runner.model.params(), snapshots[1]):
        assert np.array_equal(p.data, snap)


def test_training_is_deterministic():
    docs = small_corpus()
    a_runner, a_log = train_joint(tiny_config(), docs, [])
    b_runner, b_log = train_joint(tiny_config(), docs, [])
    for pa, pb in zip(a_runner.model.params(), b_runner.model.params()):
        assert np.array_equal(pa.data, pb.data)
    assert [(r.epoch, r.loss, r.val_f1) for r in a_log.records] == \
           [(r.epoch, r.loss, r.val_f1) for r in b_log.records]

    c_runner, _ = train_joint(tiny_config(seed=1), docs, [])
    assert not all(np.array_equal(pa.data, pc.data)
                   for pa, pc in zip(a_runner.model.params(), c_runner.model.params()))


def test_joint_checkpoint_roundtrip(tmp_path):
    docs = small_corpus()
    runner, _ = train_joint(tiny_config(attention="additive"), docs, [])
    path = tmp_path / "ck.zip"
    runner.save(path)
    loaded = load_runner(path)
    assert loaded.kind == "joint"
    named, named2 = runner.model.params_named(), loaded.model.params_named()
    assert set(named) == set(named2)
    for name in named:
        assert np.array_equal(named[name].data, named2[name].data), name
    assert np.array_equal(runner.table.matrix, loaded.table.matrix)
    for doc in docs[:3]:
        a, at = runner.predict_doc(doc.tokens)
        b, bt = loaded.predict_doc(doc.tokens)
        assert a == b and at == bt


@pytest.mark.parametrize("kind", ["pipeline-crf+ltm", "pipeline-crf+mtt"])
def test_pipeline_checkpoint_roundtrip(tmp_path, kind):
    docs = small_corpus(n=15)
    runner, log = train_pipeline(tiny_config(model=kind, max_epochs=8, lr=0.05), docs)
    assert log.records[-1].val_f1 >= 0.0
    path = tmp_path / "ck.zip"
    runner.save(path)
    loaded = load_runner(path)
    assert loaded.kind == kind
    assert np.array_equal(runner.crf.w_emit.data, loaded.crf.w_emit.data)
    assert np.array_equal(runner.edge_model.w.data, loaded.edge_model.w.data)
    for doc in docs[:3]:
        assert runner.predict_doc(doc.tokens, doc.id) == loaded.predict_doc(doc.tokens, doc.id)


def test_checkpoint_version_guard(tmp_path):
    docs = small_corpus(n=4)
    runner, _ = train_joint(tiny_config(max_epochs=1), docs, [])
    path = tmp_path / "ck.zip"
    runner.save(path)

    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        rest = {n: zf.read(n) for n in zf.namelist() if n != "manifest.json"}
    manifest["format_version"] = 99
    tampered = tmp_path / "bad.zip"
    with zipfile.ZipFile(tampered, "w") as zf:
        zf.writestr("manifest.json", json.dumps(manifest))
        for n, blob in rest.items():
            zf.writestr(n, blob)
    with pytest.raises(ValueError, match="format_version"):
        load_runner(tampered)


def test_train_model_dispatch():
    docs = small_corpus(n=6)
    joint_runner, _ = train_model(tiny_config(max_epochs=1), docs, [])
    assert joint_runner.kind == "joint"
    pipe_runner, _ = train_model(
        tiny_config(model="pipeline-crf+ltm", max_epochs=2), docs, [])
    assert pipe_runner.kind == "pipeline-crf+ltm"
    with pytest.raises(ValueError):
        train_joint(tiny_config(), [], [])


def test_predict_records_structure():
    docs = small_corpus(n=5)
    runner, _ = train_joint(tiny_config(), docs, [])
    records = predict_records(runner, docs)
    assert len(records) == 5
    for rec, doc in zip(records, docs):
        assert rec["id"] == doc.id
        assert rec["tokens"] == doc.tokens
        assert len(rec["heads"]) == len(doc.tokens)
        assert len(rec["labels"]) == len(doc.tokens)
        assert isinstance(rec["greedy_tree"], bool)
        assert "entities" in rec


def test_embedding_table_basics():
    table = EmbeddingTable.random(["a", "b"], 4, seed=0)
    assert table.vocab[-1] == "<unk>"
    assert table.matrix.shape == (3, 4)
    assert np.array_equal(table.row("zzz"), table.row("<unk>"))
    looked = table.lookup(["b", "a", "zzz"])
    assert looked.shape == (3, 4)
    assert np.array_equal(looked[0], table.row("b"))


def test_word2vec_text_loader(tmp_path):
    path = tmp_path / "vecs.txt"
    path.write_text("2 3\nhuis 0.1 0.2 0.3\ntuin -1 0 1\n")
    table = load_word2vec_text(path)
    assert np.allclose(table.row("huis"), [0.1, 0.2, 0.3])
    assert np.allclose(table.row("tuin"), [-1.0, 0.0, 1.0])

    # headerless variant
    bare = tmp_path / "bare.txt"
    bare.write_text("huis 0.5 0.5\n")
    assert load_word2vec_text(bare).row("huis").tolist() == [0.5, 0.5]


def test_word2vec_binary_loader(tmp_path):
    path = tmp_path / "vecs.bin"
    with open(path, "wb") as fh:
        fh.write(b"2 2\n")
        fh.write(b"huis " + struct.pack("<2f", 1.0, 2.0))
        fh.write(b"tuin " + struct.pack("<2f", 3.0, 4.0))
    table = load_word2vec_binary(path)
    assert np.allclose(table.row("huis"), [1.0, 2.0])
    assert np.allclose(table.row("tuin"), [3.0, 4.0])
    assert np.allclose(load_embeddings(path).row("huis"), [1.0, 2.0])


def run_cli(argv):
    return cli.main([str(a) for a in argv])


def test_cli_generate_split_train_evaluate_predict(tmp_path, capsys):
    corpus = tmp_path / "corpus.jsonl"
    assert run_cli(["generate", "--out", corpus, "--n-docs", "16", "--seed", "3"]) == 0
    assert len(read_corpus(corpus)) == 16

    splits = tmp_path / "splits"
    assert run_cli(["split", corpus, "--out", splits, "--seed", "1",
                    "--dev-frac", "0.25", "--test-frac", "0.25"]) == 0
    assert len(read_corpus(splits / "train.jsonl")) == 8

    out = tmp_path / "run"
    assert run_cli(["train", "--train", splits / "train.jsonl",
                    "--dev", splits / "dev.jsonl", "--model", "joint",
                    "--d", "8", "--l", "4", "--lr", "0.01", "--dropout", "0",
                    "--max-epochs", "2", "--patience", "2", "--out", out]) == 0
    assert (out / "checkpoint.zip").exists()
    assert (out / "trainlog.csv").read_text().startswith("epoch,loss,val_f1,seconds")
    assert json.loads((out / "metrics.json").read_text())["n_docs"] == 4

    metrics = tmp_path / "eval.json"
    assert run_cli(["evaluate", "--checkpoint", out / "checkpoint.zip",
                    "--data", splits / "test.jsonl", "--out", metrics]) == 0
    blob = json.loads(metrics.read_text())
    assert set(blob["labels"]) == {"part-of", "segment", "equivalent"}

    pred_path = tmp_path / "pred.jsonl"
    assert run_cli(["predict", "--checkpoint", out / "checkpoint.zip",
                    "--data", splits / "test.jsonl", "--out", pred_path]) == 0
    records = [json.loads(line) for line in pred_path.read_text().splitlines()]
    assert len(records) == len(read_corpus(splits / "test.jsonl"))
    capsys.readouterr()


def test_cli_gold_as_prediction_is_perfect(tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    run_cli(["generate", "--out", corpus, "--n-docs", "6", "--seed", "0"])
    metrics = tmp_path / "m.json"
    assert run_cli(["evaluate", "--checkpoint", "unused", "--data", corpus,
                    "--gold-as-prediction", "--out", metrics]) == 0
    blob = json.loads(metrics.read_text())
    assert blob["overall_f1"] == 100.0
    assert blob["tree_rate"] == 100.0
    capsys.readouterr()


def test_cli_convert_roundtrip(tmp_path, capsys):
    docs = small_corpus(n=4)
    src = tmp_path / "in.jsonl"
    write_corpus(src, docs)
    dst = tmp_path / "out.jsonl"
    assert run_cli(["convert", src, dst, "--from", "jsonl"]) == 0
    assert read_corpus(dst) == docs
    capsys.readouterr()


def test_cli_config_override_file(tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    run_cli(["generate", "--out", corpus, "--n-docs", "6", "--seed", "2"])
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("# comment\nmax_epochs = 1\nlr=0.02\n")
    out = tmp_path / "run"
    assert run_cli(["train", "--train", corpus, "--d", "8", "--l", "4",
                    "--dropout", "0", "--max-epochs", "99", "--config", cfg,
                    "--out", out]) == 0
    log = (out / "trainlog.csv").read_text().strip().splitlines()
    assert len(log) == 2  # header + exactly one epoch
    capsys.readouterr()


def test_cli_selftest(capsys):
    assert run_cli(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "all 6 checks passed" in out
    for name in ("gradients", "edmonds", "mtt", "crf", "roundtrip", "normalization"):
        assert f"ok - {name}" in out


def test_cli_error_paths(tmp_path, capsys):
    assert run_cli(["evaluate", "--checkpoint", tmp_path / "missing.zip",
                    "--data", tmp_path / "missing.jsonl"]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")

    bad_cfg = tmp_path / "bad.txt"
    bad_cfg.write_text("no equals sign\n")
    corpus = tmp_path / "c.jsonl"
    run_cli(["generate", "--out", corpus, "--n-docs", "2", "--seed", "0"])
    assert run_cli(["train", "--train", corpus, "--config", bad_cfg,
                    "--out", tmp_path / "x"]) == 1
    capsys.readouterr()
