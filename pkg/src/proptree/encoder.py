"""Embedding lookup plus a (optionally stacked) bidirectional LSTM.

The encoder maps a token sequence to one width-2d vector per position,
position 0 being the dummy root.  The root is represented by a zero vector
that never passes through the LSTM and never receives dropout.  Embeddings
are frozen; only LSTM weights train.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .embeddings import EmbeddingTable


class LstmDirection:
    """One direction of one LSTM layer.

    Gate layout in the stacked weight matrices is [input, forget, candidate,
    output].  The forget-gate bias starts at +1 to keep early memory open.
    """

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.wx = nn.uniform_param((4 * hidden_dim, input_dim), rng)
        self.wh = nn.uniform_param((4 * hidden_dim, hidden_dim), rng)
        bias = np.zeros(4 * hidden_dim)
        bias[hidden_dim:2 * hidden_dim] = 1.0
        self.b = nn.Tensor(bias, requires_grad=True)

    def params(self) -> list[nn.Tensor]:
        return [self.wx, self.wh, self.b]

    def run(self, inputs: list[nn.Tensor]) -> list[nn.Tensor]:
        """Consume inputs in order; initial hidden and cell states are zero."""
        d = self.hidden_dim
        h = nn.Tensor(np.zeros(d))
        c = nn.Tensor(np.zeros(d))
        outs = []
        for x in inputs:
            if x.shape != (self.input_dim,):
                raise ValueError(f"lstm input width {x.shape} != ({self.input_dim},)")
            z = nn.matmul(self.wx, x) + nn.matmul(self.wh, h) + self.b
            i = nn.sigmoid(nn.narrow(z, 0, 0, d))
            f = nn.sigmoid(nn.narrow(z, 0, d, 2 * d))
            g = nn.tanh(nn.narrow(z, 0, 2 * d, 3 * d))
            o = nn.sigmoid(nn.narrow(z, 0, 3 * d, 4 * d))
            c = nn.add(nn.mul(f, c), nn.mul(i, g))
            h = nn.mul(o, nn.tanh(c))
            outs.append(h)
        return outs


class BiLstmLayer:
    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.fwd = LstmDirection(input_dim, hidden_dim, rng)
        self.bwd = LstmDirection(input_dim, hidden_dim, rng)

    def params(self) -> list[nn.Tensor]:
        return self.fwd.params() + self.bwd.params()

    def run(self, inputs: list[nn.Tensor]) -> list[nn.Tensor]:
        left = self.fwd.run(inputs)
        right = self.bwd.run(inputs[::-1])[::-1]
        return [nn.concat([l, r]) for l, r in zip(left, right)]


class Encoder:
    """tokens -> (N+1, 2d) tensor with a zero root row."""

    def __init__(self, table: EmbeddingTable, hidden_dim: int, layers: int,
                 dropout: float, rng: np.random.Generator):
        if layers not in (1, 2):
            raise ValueError(f"layers must be 1 or 2, got {layers}")
        if table.dim != hidden_dim:
            raise ValueError(f"embedding width {table.dim} != hidden width {hidden_dim}")
        self.table = table
        self.hidden_dim = hidden_dim
        self.dropout = dropout
        self.layers = [BiLstmLayer(hidden_dim, hidden_dim, rng)]
        if layers == 2:
            self.layers.append(BiLstmLayer(2 * hidden_dim, hidden_dim, rng))

    @property
    def out_dim(self) -> int:
        return 2 * self.hidden_dim

    def params(self) -> list[nn.Tensor]:
        return [p for layer in self.layers for p in layer.params()]

    def encode(self, tokens: list[str], train: bool = False,
               rng: np.random.Generator | None = None) -> nn.Tensor:
        if not tokens:
            raise ValueError("cannot encode an empty token sequence")
        embedded = self.table.lookup(tokens)
        if train and self.dropout > 0.0:
            # Frozen embeddings carry no gradient, so the input mask can be
            # applied outside the tape.
            mask = (rng.random(embedded.shape) >= self.dropout) / (1.0 - self.dropout)
            embedded = embedded * mask
        states = [nn.Tensor(row) for row in embedded]
        for depth, layer in enumerate(self.layers):
            if depth > 0 and train and self.dropout > 0.0:
                states = [nn.dropout(s, self.dropout, rng) for s in states]
            states = layer.run(states)
        root = nn.Tensor(np.zeros(self.out_dim))
        return nn.stack([root] + states, axis=0)
