"""Joint (head, label) selection: scoring, normalization, loss, greedy decode.

For every dependent token x_i (i = 1..N) the model scores every candidate
head x_j (j = 0..N, position 0 is the dummy root) under each of the four
relation labels, then softmax-normalizes jointly over all (j, k) pairs:

    score(h_j, h_i, c_k) = V_k . tanh(U_k h_j + W_k h_i + b_k)
    P(head=x_j, label=c_k | x_i) = exp(score) / sum over all (j~, k~)

Training minimizes the summed negative log-probability of the gold pairs.
Greedy inference takes the per-dependent argmax; ties resolve to the
smallest head index, then the smallest label index.  The root is never a
dependent.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .attention import augment, make_attention, scorer_input_width
from .data import SKIP, TokenHeadAssignment
from .embeddings import EmbeddingTable
from .encoder import Encoder

N_LABELS = 4


class LabelScorer:
    """One scoring head per relation label over width-m pair inputs."""

    def __init__(self, m: int, l: int, rng: np.random.Generator):
        if not l < m:
            raise ValueError(f"scoring width l={l} must be smaller than input width m={m}")
        self.m = m
        self.l = l
        self.u = [nn.uniform_param((l, m), rng) for _ in range(N_LABELS)]
        self.w = [nn.uniform_param((l, m), rng) for _ in range(N_LABELS)]
        self.v = [nn.uniform_param((l,), rng) for _ in range(N_LABELS)]
        self.b = [nn.zeros_param((l,)) for _ in range(N_LABELS)]

    def params(self) -> list[nn.Tensor]:
        out = []
        for k in range(N_LABELS):
            out.extend([self.u[k], self.w[k], self.v[k], self.b[k]])
        return out

    def param_names(self) -> list[str]:
        return [f"{base}{k}" for k in range(N_LABELS) for base in ("u", "w", "v", "b")]

    def score_triple(self, h_j: nn.Tensor, h_i: nn.Tensor, k: int) -> nn.Tensor:
        """Scalar score of head-vector h_j over dependent-vector h_i, label k."""
        if h_j.shape != (self.m,) or h_i.shape != (self.m,):
            raise ValueError(f"expected width-{self.m} vectors, got {h_j.shape} and {h_i.shape}")
        hidden = nn.tanh(nn.matmul(self.u[k], h_j) + nn.matmul(self.w[k], h_i) + self.b[k])
        return nn.matmul(self.v[k], hidden)

    def score_matrix(self, states: nn.Tensor) -> nn.Tensor:
        """(M, M, 4) scores; axes are [dependent i, head j, label k]."""
        m_pos = states.shape[0]
        per_label = []
        for k in range(N_LABELS):
            head = nn.matmul(states, nn.transpose(self.u[k]))
            dep = nn.matmul(states, nn.transpose(self.w[k]))
            pair = nn.tanh(
                nn.reshape(dep, (m_pos, 1, self.l))
                + nn.reshape(head, (1, m_pos, self.l))
                + self.b[k]
            )
            per_label.append(nn.reshape(
                nn.matmul(nn.reshape(pair, (m_pos * m_pos, self.l)), self.v[k]),
                (m_pos, m_pos),
            ))
        return nn.stack(per_label, axis=2)


class JointDistribution:
    """P[i][j][k] per dependent i >= 1; row 0 (the root) is all zeros."""

    def __init__(self, p: np.ndarray):
        self.p = p

    @property
    def n(self) -> int:
        return self.p.shape[0] - 1

    def greedy(self) -> TokenHeadAssignment:
        heads, labels = [], []
        for i in range(1, self.n + 1):
            flat = int(np.argmax(self.p[i].reshape(-1)))
            heads.append(flat // N_LABELS)
            labels.append(flat % N_LABELS)
        return TokenHeadAssignment(heads, labels)


def distribution_rows(scorer: LabelScorer, states: nn.Tensor) -> nn.Tensor:
    """(N, (N+1)*4) tensor of per-dependent joint softmax rows."""
    m_pos = states.shape[0]
    scores = scorer.score_matrix(states)
    dep_rows = nn.narrow(scores, 0, 1, m_pos)
    return nn.softmax(nn.reshape(dep_rows, (m_pos - 1, m_pos * N_LABELS)), axis=1)


def rows_to_distribution(rows: nn.Tensor) -> JointDistribution:
    n = rows.shape[0]
    p = np.zeros((n + 1, n + 1, N_LABELS))
    p[1:] = rows.data.reshape(n, n + 1, N_LABELS)
    return JointDistribution(p)


def loss_from_rows(rows: nn.Tensor, gold: TokenHeadAssignment) -> nn.Tensor:
    """Summed negative log-likelihood of the gold (head, label) pairs."""
    n = rows.shape[0]
    if gold.n != n:
        raise ValueError(f"gold covers {gold.n} tokens, distribution covers {n}")
    for t in range(1, n + 1):
        if not 0 <= gold.head_of(t) <= n:
            raise ValueError(f"token {t}: gold head {gold.head_of(t)} out of range")
    idx = np.array([gold.head_of(t) * N_LABELS + gold.label_of(t) for t in range(1, n + 1)])
    picked = nn.gather_pairs(rows, idx)
    return nn.scale(nn.reduce_sum(nn.log(picked)), -1.0)


def greedy_decode(dist: JointDistribution) -> TokenHeadAssignment:
    return dist.greedy()


class JointParser:
    """Encoder + optional attention + joint scorer, trained end to end."""

    def __init__(self, table: EmbeddingTable, d: int = 128, l: int = 32,
                 layers: int = 1, dropout: float = 0.5,
                 attention: str | None = None, steps: int = 1, p: int = 32,
                 seed: int = 0):
        rng = np.random.default_rng(seed)
        self.config = {
            "d": d, "l": l, "layers": layers, "dropout": dropout,
            "attention": attention, "steps": steps, "p": p, "seed": seed,
        }
        self.encoder = Encoder(table, d, layers, dropout, rng)
        self.attention = (
            make_attention(attention, d, l, rng, p=p, steps=steps) if attention else None
        )
        self.scorer = LabelScorer(scorer_input_width(d, attention), l, rng)

    def params(self) -> list[nn.Tensor]:
        att = self.attention.params() if self.attention else []
        return self.encoder.params() + att + self.scorer.params()

    def params_named(self) -> dict[str, nn.Tensor]:
        named: dict[str, nn.Tensor] = {}
        for li, layer in enumerate(self.encoder.layers):
            for direction, cell in (("fwd", layer.fwd), ("bwd", layer.bwd)):
                named[f"enc.l{li}.{direction}.wx"] = cell.wx
                named[f"enc.l{li}.{direction}.wh"] = cell.wh
                named[f"enc.l{li}.{direction}.b"] = cell.b
        if self.attention:
            for name, p in zip(self.attention.param_names(), self.attention.params()):
                named[f"att.{name}"] = p
        for name, p in zip(self.scorer.param_names(), self.scorer.params()):
            named[f"scorer.{name}"] = p
        return named

    def forward_rows(self, tokens: list[str], train: bool = False,
                     rng: np.random.Generator | None = None) -> nn.Tensor:
        states = self.encoder.encode(tokens, train=train, rng=rng)
        return distribution_rows(self.scorer, augment(states, self.attention))

    def distribution(self, tokens: list[str]) -> JointDistribution:
        return rows_to_distribution(self.forward_rows(tokens))

    def loss(self, tokens: list[str], gold: TokenHeadAssignment, train: bool = True,
             rng: np.random.Generator | None = None) -> nn.Tensor:
        return loss_from_rows(self.forward_rows(tokens, train=train, rng=rng), gold)
