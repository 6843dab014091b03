"""Corpus-level evaluation: labeled brackets, attachment scores, role
tuples, and tag accuracy.

Every function takes parallel per-sentence lists and accumulates counts
commutatively, so corpus results are invariant to sentence order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from lingmtl.corpus import ConstituentTree, DepFrame, SpanFrame

# symbol tags conventionally left out of attachment scores
PUNCT_TAGS = frozenset(["``", "''", ":", ",", "."])


@dataclass(frozen=True)
class PRF:
    matched: int
    predicted: int
    gold: int

    @property
    def precision(self) -> float:
        return self.matched / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return self.matched / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def __add__(self, other: "PRF") -> "PRF":
        return PRF(
            self.matched + other.matched,
            self.predicted + other.predicted,
            self.gold + other.gold,
        )


def bracket_prf(
    predicted: Sequence[ConstituentTree], gold: Sequence[ConstituentTree]
) -> PRF:
    """Labeled bracket match over non-preterminal nodes, root included.

    Brackets compare as (label, start, end) multisets per sentence; joined
    unary labels are re-expanded before comparison.
    """
    if len(predicted) != len(gold):
        raise ValueError("tree lists differ in length")
    total = PRF(0, 0, 0)
    for pred_tree, gold_tree in zip(predicted, gold):
        if len(pred_tree.leaves()) != len(gold_tree.leaves()):
            raise ValueError("predicted and gold trees cover different word counts")
        pred_counts = Counter(pred_tree.brackets())
        gold_counts = Counter(gold_tree.brackets())
        overlap = sum((pred_counts & gold_counts).values())
        total = total + PRF(
            overlap, sum(pred_counts.values()), sum(gold_counts.values())
        )
    return total


def uas_las(
    pred_heads: Sequence[Sequence[int]],
    pred_labels: Sequence[Sequence[str]],
    gold_heads: Sequence[Sequence[int]],
    gold_labels: Sequence[Sequence[str]],
    gold_pos: Sequence[Sequence[str]] | None = None,
    punct_tags: frozenset[str] = PUNCT_TAGS,
) -> tuple[float, float]:
    """Unlabeled and labeled attachment over non-punctuation words."""
    if not (len(pred_heads) == len(pred_labels) == len(gold_heads) == len(gold_labels)):
        raise ValueError("sentence lists differ in length")
    scored = head_hits = both_hits = 0
    for idx in range(len(pred_heads)):
        ph, pl = pred_heads[idx], pred_labels[idx]
        gh, gl = gold_heads[idx], gold_labels[idx]
        if not (len(ph) == len(pl) == len(gh) == len(gl)):
            raise ValueError(f"sentence {idx}: prediction length differs from gold")
        tags = gold_pos[idx] if gold_pos is not None else [""] * len(gh)
        for w in range(len(gh)):
            if tags[w] in punct_tags:
                continue
            scored += 1
            if ph[w] == gh[w]:
                head_hits += 1
                if pl[w] == gl[w]:
                    both_hits += 1
    if scored == 0:
        raise ValueError("no scorable words")
    return head_hits / scored, both_hits / scored


def _frame_tuples(frames, style: str) -> set[tuple]:
    out: set[tuple] = set()
    for frame in frames:
        out.add((frame.predicate, "V"))
        if style == "span":
            for start, end, role in frame.arguments:
                out.add((frame.predicate, start, end, role))
        else:
            for word, role in frame.arguments:
                out.add((frame.predicate, word, role))
    return out


def srl_prf(
    predicted: Sequence[Sequence[SpanFrame]] | Sequence[Sequence[DepFrame]],
    gold: Sequence[Sequence[SpanFrame]] | Sequence[Sequence[DepFrame]],
    style: str,
) -> PRF:
    """Exact tuple match; predicates count as (predicate, "V") tuples so
    end-to-end predicate mistakes show up in the score."""
    if style not in ("span", "dep"):
        raise ValueError(f"unknown style {style!r}")
    if len(predicted) != len(gold):
        raise ValueError("sentence lists differ in length")
    total = PRF(0, 0, 0)
    for pred_frames, gold_frames in zip(predicted, gold):
        p = _frame_tuples(pred_frames, style)
        g = _frame_tuples(gold_frames, style)
        total = total + PRF(len(p & g), len(p), len(g))
    return total


def pos_accuracy(
    predicted: Sequence[Sequence[str]], gold: Sequence[Sequence[str]]
) -> float:
    if len(predicted) != len(gold):
        raise ValueError("sentence lists differ in length")
    hits = total = 0
    for idx, (p, g) in enumerate(zip(predicted, gold)):
        if len(p) != len(g):
            raise ValueError(f"sentence {idx}: prediction length differs from gold")
        total += len(g)
        hits += sum(1 for a, b in zip(p, g) if a == b)
    if total == 0:
        raise ValueError("no words to score")
    return hits / total
