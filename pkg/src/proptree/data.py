"""Document model and the tree <-> per-token head assignment codec.

A document is a token sequence plus a forest of typed entities.  Each entity
owns one or more mentions (contiguous token spans, 1-based, half-open) and a
parent link to another entity or to the document root.

The parser never sees that structure directly.  It sees one (head, label)
pair per token, where the label is one of four relations:

* ``PART_OF``    token is the anchor of an entity's first mention and points
                 at its parent entity's anchor (or at position 0 for roots);
* ``SEGMENT``    token sits inside a mention and points at that mention's
                 anchor token;
* ``EQUIVALENT`` token anchors a repeated mention and points at the anchor of
                 the entity's first mention;
* ``SKIP``       token is outside every mention and points at itself.

The anchor of a mention is its last token.  ``encode_tree_to_heads`` and
``decode_heads_to_tree`` convert between the two views and are mutually
inverse on valid documents (entity ids and types are not part of the round
trip; arcs do not carry them).
"""

from __future__ import annotations

from dataclasses import dataclass, field

PART_OF = 0
SEGMENT = 1
EQUIVALENT = 2
SKIP = 3

LABEL_NAMES = ("part-of", "segment", "equivalent", "skip")
ROOT_ID = "ROOT"

# Classes scored in the headline metric; EQUIVALENT is reported separately.
STRUCTURED_LABELS = (SEGMENT, PART_OF)


@dataclass(frozen=True)
class Mention:
    """Contiguous token span, 1-based, half-open: tokens start .. end-1."""

    start: int
    end: int

    def __post_init__(self):
        if not 1 <= self.start < self.end:
            raise ValueError(f"bad mention span [{self.start}, {self.end})")

    @property
    def anchor(self) -> int:
        """Position of the span's last token."""
        return self.end - 1


@dataclass
class Entity:
    id: str
    type: str | None
    mentions: list[Mention]
    parent: str = ROOT_ID

    def main_mention(self) -> Mention:
        """First mention in text order; later ones are treated as repeats."""
        return min(self.mentions, key=lambda m: (m.start, m.end))


@dataclass
class Document:
    id: str
    tokens: list[str]
    entities: list[Entity] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.tokens)

    def entity_by_id(self, eid: str) -> Entity:
        for e in self.entities:
            if e.id == eid:
                return e
        raise KeyError(f"no entity {eid!r} in document {self.id!r}")


class TokenHeadAssignment:
    """One (head, label) pair per token; index t-1 holds token t (1-based)."""

    __slots__ = ("heads", "labels")

    def __init__(self, heads: list[int], labels: list[int]):
        if len(heads) != len(labels):
            raise ValueError(f"length mismatch: {len(heads)} heads vs {len(labels)} labels")
        self.heads = list(heads)
        self.labels = list(labels)

    @property
    def n(self) -> int:
        return len(self.heads)

    def head_of(self, t: int) -> int:
        return self.heads[t - 1]

    def label_of(self, t: int) -> int:
        return self.labels[t - 1]

    def triples(self) -> set[tuple[int, int, int]]:
        """(dependent, head, label) triples for every non-skip token."""
        return {
            (t, self.heads[t - 1], self.labels[t - 1])
            for t in range(1, self.n + 1)
            if self.labels[t - 1] != SKIP
        }

    def validate_gold(self) -> None:
        """Check the invariants encoded gold trees satisfy.

        Predicted assignments may violate all of these until repaired by the
        spanning-tree decoder, so this is only called on gold data.
        """
        for t in range(1, self.n + 1):
            h, c = self.heads[t - 1], self.labels[t - 1]
            if not 0 <= h <= self.n:
                raise ValueError(f"token {t}: head {h} out of range 0..{self.n}")
            if not 0 <= c <= 3:
                raise ValueError(f"token {t}: label {c} out of range 0..3")
            if (c == SKIP) != (h == t):
                raise ValueError(f"token {t}: skip label and self-head must coincide (head={h}, label={c})")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TokenHeadAssignment)
            and self.heads == other.heads
            and self.labels == other.labels
        )

    def __repr__(self) -> str:
        return f"TokenHeadAssignment(heads={self.heads}, labels={self.labels})"


def encode_tree_to_heads(doc: Document) -> TokenHeadAssignment:
    """Flatten a document's entity forest into per-token (head, label) pairs."""
    n = doc.n
    heads = list(range(1, n + 1))
    labels = [SKIP] * n

    def put(t: int, h: int, c: int) -> None:
        if labels[t - 1] != SKIP:
            raise ValueError(f"document {doc.id!r}: token {t} assigned twice (overlapping mentions?)")
        heads[t - 1], labels[t - 1] = h, c

    anchors: dict[str, int] = {e.id: e.main_mention().anchor for e in doc.entities}

    for e in doc.entities:
        main = e.main_mention()
        for m in e.mentions:
            if not m.end - 1 <= n:
                raise ValueError(f"document {doc.id!r}: mention [{m.start}, {m.end}) exceeds {n} tokens")
            for t in range(m.start, m.end - 1):
                put(t, m.anchor, SEGMENT)
            if m is not main and (m.start, m.end) != (main.start, main.end):
                put(m.anchor, main.anchor, EQUIVALENT)
        if e.parent == ROOT_ID:
            put(main.anchor, 0, PART_OF)
        else:
            put(main.anchor, anchors[e.parent], PART_OF)

    return TokenHeadAssignment(heads, labels)


def decode_heads_to_tree(assignment: TokenHeadAssignment, tokens: list[str],
                         doc_id: str = "decoded") -> Document:
    """Rebuild mention spans, entity grouping, and parent links from arcs.

    Entity ids are regenerated (``T1``, ``T2``, ... in text order) and types
    come back as ``None``; arcs carry neither.  Raises ``ValueError`` on
    assignments that do not describe a well-formed forest.
    """
    n = assignment.n
    if len(tokens) != n:
        raise ValueError(f"{len(tokens)} tokens but assignment covers {n}")

    heads, labels = assignment.heads, assignment.labels

    def resolve_anchor(t: int) -> int:
        """Follow segment arcs from token t to its mention anchor."""
        seen = []
        while labels[t - 1] == SEGMENT:
            seen.append(t)
            t = heads[t - 1]
            if t == 0 or t in seen:
                raise ValueError(f"segment arcs from token {seen[0]} do not reach an anchor: {seen + [t]}")
        return t

    anchor_positions = [t for t in range(1, n + 1) if labels[t - 1] in (PART_OF, EQUIVALENT)]
    members: dict[int, list[int]] = {a: [a] for a in anchor_positions}
    for t in range(1, n + 1):
        if labels[t - 1] == SEGMENT:
            a = resolve_anchor(t)
            if labels[a - 1] == SKIP:
                raise ValueError(f"token {t}: segment arc resolves to skip token {a}")
            members[a].append(t)

    spans: dict[int, Mention] = {}
    for a, ts in members.items():
        lo, hi = min(ts), max(ts)
        if hi != a:
            raise ValueError(f"anchor {a} is not the last token of its span [{lo}, {hi}]")
        if sorted(ts) != list(range(lo, hi + 1)):
            raise ValueError(f"mention at anchor {a} is not contiguous: {sorted(ts)}")
        spans[a] = Mention(lo, hi + 1)

    # Group repeat mentions with their first mention.
    group_of: dict[int, int] = {}
    for a in anchor_positions:
        if labels[a - 1] != EQUIVALENT:
            group_of[a] = a
    for a in anchor_positions:
        if labels[a - 1] == EQUIVALENT:
            first = heads[a - 1]
            if first not in group_of:
                raise ValueError(f"token {a}: repeat-mention arc points at {first}, which anchors no first mention")
            if not a > first:
                raise ValueError(f"token {a}: repeat-mention arc must point backwards, got head {first}")
            group_of[a] = first

    mains = sorted(a for a in anchor_positions if labels[a - 1] == PART_OF)
    ids = {a: f"T{i + 1}" for i, a in enumerate(mains)}

    entities: list[Entity] = []
    for a in mains:
        h = heads[a - 1]
        if h == 0:
            parent = ROOT_ID
        else:
            p = resolve_anchor(h) if labels[h - 1] == SEGMENT else h
            if p not in ids:
                raise ValueError(f"token {a}: parent arc points at {h}, which anchors no entity")
            parent = ids[p]
        own = sorted((m for m, g in group_of.items() if g == a), key=lambda m: spans[m].start)
        entities.append(Entity(ids[a], None, [spans[m] for m in own], parent))

    _check_forest(entities, doc_id)
    return Document(doc_id, list(tokens), entities)


def _check_forest(entities: list[Entity], doc_id: str) -> None:
    """Reject parent links that loop back on themselves."""
    parent = {e.id: e.parent for e in entities}
    for start in parent:
        slow = start
        seen = set()
        while slow != ROOT_ID:
            if slow in seen:
                raise ValueError(f"document {doc_id!r}: parent links form a cycle through {slow!r}")
            seen.add(slow)
            slow = parent[slow]


def structure_signature(doc: Document):
    """Id- and type-free summary of (spans, grouping, parents) for comparisons."""
    key = {e.id: tuple(sorted((m.start, m.end) for m in e.mentions)) for e in doc.entities}
    return frozenset(
        (key[e.id], key[e.parent] if e.parent != ROOT_ID else ROOT_ID) for e in doc.entities
    )


def bio_encode(doc: Document) -> list[str]:
    """Per-token BIO tags (``O``, ``B-<type>``, ``I-<type>``) from mention spans."""
    tags = ["O"] * doc.n
    for e in doc.entities:
        for m in e.mentions:
            for t in range(m.start, m.end):
                if tags[t - 1] != "O":
                    raise ValueError(f"document {doc.id!r}: token {t} covered by two mentions")
            tags[m.start - 1] = f"B-{e.type}"
            for t in range(m.start + 1, m.end):
                tags[t - 1] = f"I-{e.type}"
    return tags


def bio_decode_spans(tags: list[str]) -> list[tuple[int, int, str]]:
    """Recover (start, end, type) spans from BIO tags.

    Lenient: a stray ``I-`` after ``O`` or after a different type opens a new
    span rather than failing.
    """
    spans: list[tuple[int, int, str]] = []
    start = None
    cur = None
    for i, tag in enumerate(tags, start=1):
        if tag == "O":
            if start is not None:
                spans.append((start, i, cur))
                start = None
        elif tag.startswith("B-"):
            if start is not None:
                spans.append((start, i, cur))
            start, cur = i, tag[2:]
        elif tag.startswith("I-"):
            if start is None or tag[2:] != cur:
                if start is not None:
                    spans.append((start, i, cur))
                start, cur = i, tag[2:]
        else:
            raise ValueError(f"bad BIO tag {tag!r} at position {i}")
    if start is not None:
        spans.append((start, len(tags) + 1, cur))
    return spans


def has_crossing_arcs(assignment: TokenHeadAssignment) -> bool:
    """True if any two entity-level arcs cross when drawn above the sentence.

    Only ``PART_OF`` and ``EQUIVALENT`` arcs participate; segment arcs live
    inside single mentions and cannot cross anything meaningful.
    """
    arcs = []
    for t in range(1, assignment.n + 1):
        if assignment.labels[t - 1] in (PART_OF, EQUIVALENT):
            h = assignment.heads[t - 1]
            arcs.append((min(t, h), max(t, h)))
    for i in range(len(arcs)):
        a, b = arcs[i]
        for j in range(i + 1, len(arcs)):
            c, e = arcs[j]
            if a < c < b < e or c < a < e < b:
                return True
    return False
