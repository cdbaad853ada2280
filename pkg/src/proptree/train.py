"""Training loops, early stopping, checkpoints, and shared evaluation.

Both model families train document by document (batch size 1) with Adam.
The joint model early-stops on validation overall F1, computed after tree
enforcement, and the best-epoch weights are the ones kept.  Pipelines train
their two stages for a fixed epoch budget.  Runners wrap trained models
behind one interface (evaluate / predict_doc / save) so the CLI and tests
never branch on model family.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import doc_to_json
from .data import Document, TokenHeadAssignment, decode_heads_to_tree, encode_tree_to_heads
from .embeddings import EmbeddingTable
from .joint import JointParser
from .metrics import MetricsReport, aggregate, score_edges
from .mst import is_tree, repair
from .nn import Adam, Tape, load_checkpoint, save_checkpoint
from .pipeline import CrfModel, LtmModel, MttModel, pipeline_predict, train_crf, train_ltm, train_mtt
from .synthetic import vocabulary

MODEL_KINDS = ("joint", "joint-2layer", "pipeline-crf+ltm", "pipeline-crf+mtt")


@dataclass
class TrainConfig:
    model: str = "joint"
    attention: str | None = None
    steps: int = 1
    d: int = 128
    l: int = 32
    p: int = 32
    lr: float = 1e-3
    dropout: float | None = None
    max_epochs: int = 150
    patience: int = 10
    batch_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.model!r}; choose from {MODEL_KINDS}")
        if not all(v > 0 for v in (self.d, self.l, self.p, self.lr,
                                   self.max_epochs, self.patience, self.batch_size)):
            raise ValueError("d, l, p, lr, max_epochs, patience, batch_size must be positive")
        if not self.l < 2 * self.d:
            raise ValueError(f"l={self.l} must be smaller than 2d={2 * self.d}")

    @property
    def layers(self) -> int:
        return 2 if self.model == "joint-2layer" else 1

    @property
    def resolved_dropout(self) -> float:
        if self.dropout is not None:
            return self.dropout
        return 0.3 if self.layers == 2 else 0.5

    def apply_overrides(self, overrides: dict[str, str]) -> "TrainConfig":
        kwargs = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for key, raw in overrides.items():
            if key not in kwargs:
                raise KeyError(f"unknown config key {key!r}")
            if key in ("model", "attention"):
                kwargs[key] = None if raw in ("", "none") else raw
            elif key in ("lr", "dropout"):
                kwargs[key] = float(raw)
            else:
                kwargs[key] = int(raw)
        return TrainConfig(**kwargs)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    val_f1: float
    seconds: float


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def add(self, epoch: int, loss: float, val_f1: float, seconds: float) -> None:
        self.records.append(EpochRecord(epoch, loss, val_f1, seconds))

    @property
    def best_f1(self) -> float:
        return max((r.val_f1 for r in self.records), default=0.0)

    def to_csv(self) -> str:
        lines = ["epoch,loss,val_f1,seconds"]
        for r in self.records:
            lines.append(f"{r.epoch},{r.loss:.6f},{r.val_f1:.4f},{r.seconds:.3f}")
        return "\n".join(lines) + "\n"


class JointRunner:
    """A trained joint parser plus its frozen embedding table."""

    def __init__(self, model: JointParser, table: EmbeddingTable):
        self.model = model
        self.table = table
        self.kind = "joint"

    def predict_doc(self, tokens: list[str]) -> tuple[TokenHeadAssignment, bool]:
        dist = self.model.distribution(tokens)
        greedy = dist.greedy()
        return repair(dist, greedy), is_tree(greedy)

    def evaluate(self, docs: list[Document]) -> MetricsReport:
        counts, flags = [], []
        for doc in docs:
            gold = encode_tree_to_heads(doc)
            predicted, was_tree = self.predict_doc(doc.tokens)
            counts.append(score_edges(predicted, gold))
            flags.append(was_tree)
        return aggregate(counts, flags)

    def save(self, path: str | Path) -> None:
        manifest = {
            "kind": self.kind,
            "config": self.model.config,
            "vocab": self.table.vocab,
        }
        params = {name: p.data for name, p in self.model.params_named().items()}
        params["emb.matrix"] = self.table.matrix
        save_checkpoint(str(path), manifest, params)


class PipelineRunner:
    """A trained CRF segmenter plus an entity-pair attachment model."""

    def __init__(self, crf: CrfModel, edge_model: LtmModel | MttModel):
        self.crf = crf
        self.edge_model = edge_model
        self.kind = f"pipeline-crf+{edge_model.kind}"

    def predict_doc(self, tokens: list[str], doc_id: str = "doc"
                    ) -> tuple[TokenHeadAssignment, bool]:
        tree, was_tree = pipeline_predict(doc_id, tokens, self.crf.tag,
                                          self.edge_model.arc_score)
        return encode_tree_to_heads(tree), was_tree

    def predict_tree(self, tokens: list[str], doc_id: str = "doc") -> Document:
        tree, _ = pipeline_predict(doc_id, tokens, self.crf.tag, self.edge_model.arc_score)
        return tree

    def evaluate(self, docs: list[Document]) -> MetricsReport:
        counts, flags = [], []
        for doc in docs:
            gold = encode_tree_to_heads(doc)
            predicted, was_tree = self.predict_doc(doc.tokens, doc.id)
            counts.append(score_edges(predicted, gold))
            flags.append(was_tree)
        return aggregate(counts, flags)

    def save(self, path: str | Path) -> None:
        manifest = {
            "kind": self.kind,
            "tags": self.crf.tags,
            "crf_features": _names_in_order(self.crf.feature_index),
            "edge_features": _names_in_order(self.edge_model.feature_index),
            "constant_p": getattr(self.edge_model, "constant_p", None),
        }
        params = dict(self.crf.params_named())
        params.update(self.edge_model.params_named())
        params = {name: p.data for name, p in params.items()}
        save_checkpoint(str(path), manifest, params)


def _names_in_order(index: dict[str, int]) -> list[str]:
    return [name for name, _ in sorted(index.items(), key=lambda kv: kv[1])]


def train_joint(config: TrainConfig, train_docs: list[Document],
                dev_docs: list[Document],
                table: EmbeddingTable | None = None) -> tuple[JointRunner, TrainLog]:
    if not train_docs:
        raise ValueError("empty training split")
    if table is None:
        table = EmbeddingTable.random(vocabulary(train_docs), config.d, seed=config.seed)
    model = JointParser(
        table, d=config.d, l=config.l, layers=config.layers,
        dropout=config.resolved_dropout, attention=config.attention,
        steps=config.steps, p=config.p, seed=config.seed,
    )
    runner = JointRunner(model, table)
    golds = [encode_tree_to_heads(doc) for doc in train_docs]
    for g in golds:
        g.validate_gold()
    # Validation on the training split keeps early stopping defined for
    # corpora too small to carve a dev set from.
    val_docs = dev_docs if dev_docs else train_docs

    opt = Adam(model.params(), lr=config.lr)
    shuffle_rng = np.random.default_rng(config.seed)
    drop_rng = np.random.default_rng(config.seed + 1)
    log = TrainLog()
    best_f1 = -1.0
    best_params = None
    stale = 0

    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        total = 0.0
        for idx in shuffle_rng.permutation(len(train_docs)):
            doc = train_docs[idx]
            with Tape() as tape:
                loss = model.loss(doc.tokens, golds[idx], train=True, rng=drop_rng)
            opt.zero_grad()
            tape.backward(loss)
            opt.step()
            total += loss.item()
        val_f1 = runner.evaluate(val_docs).overall.f1
        log.add(epoch, total / len(train_docs), val_f1, time.perf_counter() - started)

        if val_f1 > best_f1:
            best_f1 = val_f1
            log.best_epoch = epoch
            best_params = [p.data.copy() for p in model.params()]
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    if best_params is not None:
        for p, data in zip(model.params(), best_params):
            p.data[...] = data
    return runner, log


def train_pipeline(config: TrainConfig, train_docs: list[Document],
                   dev_docs: list[Document] | None = None) -> tuple[PipelineRunner, TrainLog]:
    if not train_docs:
        raise ValueError("empty training split")
    crf = train_crf(train_docs, lam=10.0, epochs=config.max_epochs,
                    lr=config.lr, seed=config.seed)
    trainer = train_ltm if config.model.endswith("ltm") else train_mtt
    edge_model = trainer(train_docs, c=1.0, epochs=config.max_epochs,
                         lr=config.lr, seed=config.seed)
    runner = PipelineRunner(crf, edge_model)
    log = TrainLog()
    val = dev_docs if dev_docs else train_docs
    log.add(config.max_epochs, 0.0, runner.evaluate(val).overall.f1, 0.0)
    log.best_epoch = config.max_epochs
    return runner, log


def train_model(config: TrainConfig, train_docs: list[Document],
                dev_docs: list[Document],
                table: EmbeddingTable | None = None):
    if config.model.startswith("joint"):
        return train_joint(config, train_docs, dev_docs, table)
    return train_pipeline(config, train_docs, dev_docs)


def load_runner(path: str | Path):
    """Rebuild a runner of the kind recorded in the checkpoint manifest."""
    manifest, params = load_checkpoint(str(path))
    kind = manifest["kind"]
    if kind == "joint":
        table = EmbeddingTable(manifest["vocab"], params["emb.matrix"])
        cfg = manifest["config"]
        model = JointParser(
            table, d=cfg["d"], l=cfg["l"], layers=cfg["layers"], dropout=cfg["dropout"],
            attention=cfg["attention"], steps=cfg["steps"], p=cfg["p"], seed=cfg["seed"],
        )
        for name, tensor in model.params_named().items():
            stored = params[name]
            if stored.shape != tensor.data.shape:
                raise ValueError(f"checkpoint mismatch for {name}: "
                                 f"{stored.shape} vs expected {tensor.data.shape}")
            tensor.data[...] = stored
        return JointRunner(model, table)
    if kind.startswith("pipeline-crf+"):
        crf = CrfModel(manifest["tags"], {f: i for i, f in enumerate(manifest["crf_features"])})
        crf.w_emit.data[...] = params["crf.w_emit"]
        crf.w_trans.data[...] = params["crf.w_trans"]
        edge_index = {f: i for i, f in enumerate(manifest["edge_features"])}
        if kind.endswith("ltm"):
            edge_model = LtmModel(edge_index, constant_p=manifest.get("constant_p"))
            edge_model.w.data[...] = params["ltm.w"]
        else:
            edge_model = MttModel(edge_index)
            edge_model.w.data[...] = params["mtt.w"]
        return PipelineRunner(crf, edge_model)
    raise ValueError(f"unknown checkpoint kind {kind!r}")


def predict_records(runner, docs: list[Document]) -> list[dict]:
    """Token-level assignment plus (when decodable) the tree for each doc."""
    out = []
    for doc in docs:
        assignment, was_tree = _predict(runner, doc)
        record = {
            "id": doc.id,
            "tokens": doc.tokens,
            "heads": assignment.heads,
            "labels": assignment.labels,
            "greedy_tree": was_tree,
        }
        try:
            tree = decode_heads_to_tree(assignment, doc.tokens, doc_id=doc.id)
            record["entities"] = doc_to_json(tree)["entities"]
        except ValueError:
            record["entities"] = None
        out.append(record)
    return out


def _predict(runner, doc: Document) -> tuple[TokenHeadAssignment, bool]:
    if isinstance(runner, PipelineRunner):
        return runner.predict_doc(doc.tokens, doc.id)
    return runner.predict_doc(doc.tokens)
