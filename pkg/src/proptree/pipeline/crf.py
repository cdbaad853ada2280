"""Linear-chain CRF sequence labeler over BIO tags.

Scores decompose into per-position emission features times a feature-by-tag
weight matrix, plus a tag-transition matrix.  The partition function uses
the log-space forward algorithm; training follows the exact gradient
(forward-backward expectations minus empirical counts) of the L2-regularized
conditional log-likelihood.  BIO validity is learned, never hard-constrained.
"""

from __future__ import annotations

import numpy as np

from ..data import Document, bio_encode
from ..nn import Adam, Tensor


def emission_features(tokens: list[str], i: int) -> list[str]:
    """Feature strings for position i (0-based within tokens)."""
    w = tokens[i]
    feats = [
        "bias",
        f"w={w}",
        f"lc={w.lower()}",
        f"p2={w[:2]}",
        f"p3={w[:3]}",
        f"s2={w[-2:]}",
        f"s3={w[-3:]}",
        f"dig={int(w.isdigit())}",
        f"prev={tokens[i - 1] if i > 0 else '<s>'}",
        f"next={tokens[i + 1] if i + 1 < len(tokens) else '</s>'}",
    ]
    return feats


def _logsumexp(a: np.ndarray, axis: int | None = None) -> np.ndarray:
    m = a.max(axis=axis, keepdims=True)
    out = np.log(np.exp(a - m).sum(axis=axis, keepdims=True)) + m
    return out.squeeze(axis) if axis is not None else out.item()


class CrfModel:
    def __init__(self, tags: list[str], feature_index: dict[str, int]):
        self.tags = list(tags)
        self.tag_index = {t: i for i, t in enumerate(self.tags)}
        self.feature_index = dict(feature_index)
        k, f = len(self.tags), len(self.feature_index)
        self.w_emit = Tensor(np.zeros((f, k)), requires_grad=True)
        self.w_trans = Tensor(np.zeros((k, k)), requires_grad=True)

    def params(self) -> list[Tensor]:
        return [self.w_emit, self.w_trans]

    def params_named(self) -> dict[str, Tensor]:
        return {"crf.w_emit": self.w_emit, "crf.w_trans": self.w_trans}

    def feature_ids(self, tokens: list[str]) -> list[list[int]]:
        """Known-feature ids per position; unseen features are dropped."""
        rows = []
        for i in range(len(tokens)):
            ids = [self.feature_index[f] for f in emission_features(tokens, i)
                   if f in self.feature_index]
            rows.append(ids)
        return rows

    def emissions(self, tokens: list[str],
                  feat_rows: list[list[int]] | None = None) -> np.ndarray:
        """(N, K) emission score matrix."""
        rows = feat_rows if feat_rows is not None else self.feature_ids(tokens)
        out = np.zeros((len(tokens), len(self.tags)))
        for i, ids in enumerate(rows):
            if ids:
                out[i] = self.w_emit.data[ids].sum(axis=0)
        return out

    def log_partition(self, tokens: list[str]) -> float:
        if not tokens:
            raise ValueError("cannot score an empty sequence")
        emit = self.emissions(tokens)
        alpha = emit[0]
        for i in range(1, len(tokens)):
            alpha = _logsumexp(alpha[:, None] + self.w_trans.data, axis=0) + emit[i]
        return float(_logsumexp(alpha))

    def sequence_score(self, tokens: list[str], tags: list[str]) -> float:
        emit = self.emissions(tokens)
        y = [self.tag_index[t] for t in tags]
        score = sum(emit[i, y[i]] for i in range(len(y)))
        score += sum(self.w_trans.data[y[i - 1], y[i]] for i in range(1, len(y)))
        return float(score)

    def viterbi(self, tokens: list[str]) -> list[str]:
        if not tokens:
            raise ValueError("cannot tag an empty sequence")
        emit = self.emissions(tokens)
        n, k = emit.shape
        delta = emit[0]
        back = np.zeros((n, k), dtype=int)
        for i in range(1, n):
            cand = delta[:, None] + self.w_trans.data
            back[i] = cand.argmax(axis=0)
            delta = cand.max(axis=0) + emit[i]
        path = [int(delta.argmax())]
        for i in range(n - 1, 0, -1):
            path.append(int(back[i, path[-1]]))
        return [self.tags[j] for j in path[::-1]]

    def tag(self, tokens: list[str]) -> list[str]:
        return self.viterbi(tokens)

    def nll_and_grad(self, tokens: list[str], tags: list[str],
                     feat_rows: list[list[int]] | None = None
                     ) -> tuple[float, np.ndarray, np.ndarray]:
        """Negative log-likelihood of one sequence and its exact gradient."""
        if feat_rows is None:
            feat_rows = self.feature_ids(tokens)
        emit = self.emissions(tokens, feat_rows)
        n, k = emit.shape
        y = [self.tag_index[t] for t in tags]

        alpha = np.zeros((n, k))
        alpha[0] = emit[0]
        for i in range(1, n):
            alpha[i] = _logsumexp(alpha[i - 1][:, None] + self.w_trans.data, axis=0) + emit[i]
        beta = np.zeros((n, k))
        for i in range(n - 2, -1, -1):
            beta[i] = _logsumexp(self.w_trans.data + (emit[i + 1] + beta[i + 1])[None, :], axis=1)
        log_z = float(_logsumexp(alpha[-1]))

        node_marg = np.exp(alpha + beta - log_z)
        g_emit = np.zeros_like(self.w_emit.data)
        for i, ids in enumerate(feat_rows):
            delta = node_marg[i].copy()
            delta[y[i]] -= 1.0
            for f in ids:
                g_emit[f] += delta

        g_trans = np.zeros_like(self.w_trans.data)
        for i in range(1, n):
            pair = (alpha[i - 1][:, None] + self.w_trans.data
                    + (emit[i] + beta[i])[None, :]) - log_z
            g_trans += np.exp(pair)
            g_trans[y[i - 1], y[i]] -= 1.0

        gold = sum(emit[i, y[i]] for i in range(n))
        gold += sum(self.w_trans.data[y[i - 1], y[i]] for i in range(1, n))
        return float(log_z - gold), g_emit, g_trans


def tagset_from_corpus(docs: list[Document]) -> list[str]:
    types = sorted({e.type for doc in docs for e in doc.entities if e.type})
    return ["O"] + [f"{bi}-{t}" for t in types for bi in ("B", "I")]


def feature_index_from_corpus(docs: list[Document]) -> dict[str, int]:
    feats = set()
    for doc in docs:
        for i in range(len(doc.tokens)):
            feats.update(emission_features(doc.tokens, i))
    return {f: i for i, f in enumerate(sorted(feats))}


def crf_objective(model: CrfModel, docs: list[Document], lam: float
                  ) -> tuple[float, np.ndarray, np.ndarray]:
    """Corpus NLL + (lam/2)||w||^2 with its full analytic gradient."""
    total = 0.0
    g_emit = lam * model.w_emit.data.copy()
    g_trans = lam * model.w_trans.data.copy()
    total += 0.5 * lam * (np.sum(model.w_emit.data ** 2) + np.sum(model.w_trans.data ** 2))
    for doc in docs:
        nll, ge, gt = model.nll_and_grad(doc.tokens, bio_encode(doc))
        total += nll
        g_emit += ge
        g_trans += gt
    return total, g_emit, g_trans


def train_crf(docs: list[Document], lam: float = 10.0, epochs: int = 50,
              lr: float = 1e-3, seed: int = 0,
              tags: list[str] | None = None) -> CrfModel:
    """Per-document Adam steps on the regularized NLL, shuffled each epoch."""
    if not docs:
        raise ValueError("empty training corpus")
    model = CrfModel(tags or tagset_from_corpus(docs), feature_index_from_corpus(docs))
    gold = [bio_encode(doc) for doc in docs]
    cached = [model.feature_ids(doc.tokens) for doc in docs]
    opt = Adam(model.params(), lr=lr)
    rng = np.random.default_rng(seed)
    reg = lam / len(docs)
    for _ in range(epochs):
        for idx in rng.permutation(len(docs)):
            doc = docs[idx]
            _, g_emit, g_trans = model.nll_and_grad(doc.tokens, gold[idx], cached[idx])
            opt.zero_grad()
            model.w_emit.grad += g_emit + reg * model.w_emit.data
            model.w_trans.grad += g_trans + reg * model.w_trans.data
            opt.step()
    return model
