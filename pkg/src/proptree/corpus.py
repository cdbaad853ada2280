"""Corpus serialization (JSONL), deterministic splitting, and import hooks.

One document per line:

    {"id": "d1", "tokens": ["large", "balcony"],
     "entities": [{"id": "T1", "type": "space",
                   "mentions": [{"start": 1, "end": 3}], "parent": "ROOT"}]}

Token indices are 1-based and spans are half-open.  Other formats plug in via
``register_importer``; an importer maps a file path to a list of documents.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable

import numpy as np

from .data import Document, Entity, Mention, ROOT_ID


def doc_to_json(doc: Document) -> dict:
    return {
        "id": doc.id,
        "tokens": list(doc.tokens),
        "entities": [
            {
                "id": e.id,
                "type": e.type,
                "mentions": [{"start": m.start, "end": m.end} for m in e.mentions],
                "parent": e.parent,
            }
            for e in doc.entities
        ],
    }


def doc_from_json(obj: dict) -> Document:
    doc = Document(
        id=str(obj["id"]),
        tokens=[str(t) for t in obj["tokens"]],
        entities=[
            Entity(
                id=str(e["id"]),
                type=e.get("type"),
                mentions=[Mention(int(m["start"]), int(m["end"])) for m in e["mentions"]],
                parent=str(e.get("parent", ROOT_ID)),
            )
            for e in obj.get("entities", [])
        ],
    )
    _validate(doc)
    return doc


def _validate(doc: Document) -> None:
    if not doc.tokens:
        raise ValueError(f"document {doc.id!r}: empty token list")
    for t in doc.tokens:
        if not t or any(ch.isspace() for ch in t):
            raise ValueError(f"document {doc.id!r}: bad token {t!r}")
    ids = [e.id for e in doc.entities]
    if len(set(ids)) != len(ids):
        raise ValueError(f"document {doc.id!r}: duplicate entity ids")
    known = set(ids)
    for e in doc.entities:
        if not e.mentions:
            raise ValueError(f"document {doc.id!r}: entity {e.id!r} has no mentions")
        if e.parent != ROOT_ID and e.parent not in known:
            raise ValueError(f"document {doc.id!r}: entity {e.id!r} has unknown parent {e.parent!r}")
        for m in e.mentions:
            if m.end > doc.n + 1:
                raise ValueError(
                    f"document {doc.id!r}: mention [{m.start}, {m.end}) exceeds {doc.n} tokens"
                )


def read_corpus(path: str | Path) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                docs.append(doc_from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return docs


def write_corpus(path: str | Path, docs: list[Document]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc_to_json(doc), ensure_ascii=False) + "\n")


def split_corpus(docs: list[Document], seed: int,
                 dev_frac: float = 0.15, test_frac: float = 0.15
                 ) -> tuple[list[Document], list[Document], list[Document]]:
    """Shuffle with ``seed`` and cut into train/dev/test.

    Dev and test sizes are floored; train takes the remainder, so small
    corpora never lose documents to rounding.
    """
    order = np.random.default_rng(seed).permutation(len(docs))
    shuffled = [docs[i] for i in order]
    n_dev = int(len(docs) * dev_frac)
    n_test = int(len(docs) * test_frac)
    n_train = len(docs) - n_dev - n_test
    return (
        shuffled[:n_train],
        shuffled[n_train:n_train + n_dev],
        shuffled[n_train + n_dev:],
    )


Importer = Callable[[str], list[Document]]
_IMPORTERS: dict[str, Importer] = {}


def register_importer(name: str, fn: Importer) -> None:
    """Expose a reader for an external annotation format under ``name``."""
    _IMPORTERS[name] = fn


def get_importer(name: str) -> Importer:
    try:
        return _IMPORTERS[name]
    except KeyError:
        raise KeyError(f"no importer {name!r}; known: {sorted(_IMPORTERS)}") from None


def list_importers() -> list[str]:
    return sorted(_IMPORTERS)


register_importer("jsonl", lambda path: read_corpus(path))
