"""Phrase-aware masking: strategy choice, position selection, replacement.

Each sentence gets one of three strategies. Phrase strategies mask all
pieces of randomly drawn constituents or semantic-role phrases; the
fallback masks whole words. Selection never exceeds the piece budget
(15% of maskable pieces by default): units that would overshoot are
skipped and drawing continues with smaller ones.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from lingmtl.corpus import ConstituentTree, SpanFrame
from lingmtl.tokenizer import CLS_ID, MASK_ID, SEP_ID, TokenSequence, Vocab


class Strategy(enum.Enum):
    SYN_PHRASE = "syn_phrase"
    SEM_PHRASE = "sem_phrase"
    WHOLE_WORD = "whole_word"


class Action(enum.Enum):
    MASK = "mask"
    RANDOM = "random"
    KEEP = "keep"


MAX_PHRASE_WORDS = 10


@dataclass(frozen=True)
class PhraseSpan:
    """Inclusive word-index span usable as a masking unit."""

    start: int
    end: int
    kind: str  # "syntactic" | "semantic"
    label: str = ""

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ValueError(f"bad phrase span ({self.start}, {self.end})")

    @property
    def width(self) -> int:
        return self.end - self.start + 1


@dataclass
class MaskPolicy:
    mask_rate: float = 0.15
    mask_prob: float = 0.8
    random_prob: float = 0.1
    keep_prob: float = 0.1
    strategy_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self):
        probs = (self.mask_prob, self.random_prob, self.keep_prob)
        if any(not 0.0 <= p <= 1.0 for p in probs + (self.mask_rate,)):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError("action probabilities must sum to 1")
        if any(w < 0 for w in self.strategy_weights):
            raise ValueError("strategy weights must be nonnegative")
        total = sum(self.strategy_weights)
        if abs(total - 1.0) > 1e-9:
            raise ValueError("strategy weights must sum to 1")


@dataclass
class MaskedExample:
    input_ids: list[int]
    original_ids: list[int]
    mask_positions: list[int]
    actions: list[Action]
    segment_ids: list[int]
    strategy: Strategy
    nsp_label: bool | None = None


def extract_syntactic_phrases(tree: ConstituentTree) -> list[PhraseSpan]:
    """One span per non-preterminal internal node, minus the full sentence."""
    sentence = tree.span()
    out: list[PhraseSpan] = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if node.is_leaf or node.is_preterminal:
            continue
        start, end = node.span()
        if (start, end) != sentence:
            out.append(PhraseSpan(start, end, "syntactic", node.label))
        stack.extend(reversed(node.children))
    return out


def extract_semantic_phrases(frames: list[SpanFrame]) -> list[PhraseSpan]:
    """Width-1 spans for predicates plus one span per argument, de-duplicated."""
    seen: set[tuple[int, int]] = set()
    out: list[PhraseSpan] = []
    for frame in frames:
        pred = (frame.predicate, frame.predicate)
        if pred not in seen:
            seen.add(pred)
            out.append(PhraseSpan(pred[0], pred[1], "semantic", "V"))
        for start, end, role in frame.arguments:
            if (start, end) not in seen:
                seen.add((start, end))
                out.append(PhraseSpan(start, end, "semantic", role))
    return out


def choose_strategy(policy: MaskPolicy, rng: np.random.Generator) -> Strategy:
    order = (Strategy.SYN_PHRASE, Strategy.SEM_PHRASE, Strategy.WHOLE_WORD)
    return order[int(rng.choice(3, p=policy.strategy_weights))]


def _budget(rate: float, maskable: int) -> int:
    if maskable == 0:
        return 0
    return max(1, math.floor(rate * maskable + 0.5))


def _word_units(seq: TokenSequence, vocab: Vocab | None) -> list[list[int]]:
    """Whole-word piece groups over both sentences, special tokens excluded."""
    units: list[list[int]] = []
    start = 1
    for last in seq.word_last_piece:
        units.append(list(range(start, last + 1)))
        start = last + 1
    first_sep = seq.piece_ids.index(SEP_ID)
    tail = range(first_sep + 1, len(seq.piece_ids))
    current: list[int] = []
    for pos in tail:
        pid = seq.piece_ids[pos]
        if pid in (CLS_ID, SEP_ID):
            continue
        continuation = vocab is not None and vocab.token_of(pid).startswith("##")
        if continuation and current:
            current.append(pos)
        else:
            if current:
                units.append(current)
            current = [pos]
    if current:
        units.append(current)
    return units


def _phrase_units(seq: TokenSequence, phrases: list[PhraseSpan]) -> list[list[int]]:
    """Piece ranges for word-span phrases over sentence one."""
    n_words = len(seq.word_last_piece)
    units = []
    for phrase in phrases:
        if phrase.end >= n_words or phrase.width > MAX_PHRASE_WORDS:
            continue
        first = 1 if phrase.start == 0 else seq.word_last_piece[phrase.start - 1] + 1
        last = seq.word_last_piece[phrase.end]
        units.append(list(range(first, last + 1)))
    return units


def _draw_units(
    units: list[list[int]],
    selected: set[int],
    budget: int,
    rng: np.random.Generator,
) -> None:
    if not units:
        return
    for idx in rng.permutation(len(units)):
        unit = units[int(idx)]
        new = [p for p in unit if p not in selected]
        if not new:
            continue  # already covered by an earlier, overlapping unit
        if len(selected) + len(new) > budget:
            continue  # too big: skip and keep trying smaller units
        selected.update(new)


def select_positions(
    seq: TokenSequence,
    phrases: list[PhraseSpan],
    policy: MaskPolicy,
    strategy: Strategy,
    rng: np.random.Generator,
    vocab: Vocab | None = None,
) -> list[int]:
    """Pick piece positions for prediction, whole units at a time."""
    word_units = _word_units(seq, vocab)
    maskable = sum(len(u) for u in word_units)
    budget = _budget(policy.mask_rate, maskable)
    selected: set[int] = set()
    if strategy is not Strategy.WHOLE_WORD:
        kind = "syntactic" if strategy is Strategy.SYN_PHRASE else "semantic"
        matching = [p for p in phrases if p.kind == kind]
        _draw_units(_phrase_units(seq, matching), selected, budget, rng)
    _draw_units(word_units, selected, budget, rng)
    return sorted(selected)


def apply_replacement(
    seq: TokenSequence,
    positions: list[int],
    policy: MaskPolicy,
    rng: np.random.Generator,
    vocab: Vocab,
    strategy: Strategy = Strategy.WHOLE_WORD,
) -> MaskedExample:
    """Apply the mask/random/keep scheme at the selected positions."""
    original = list(seq.piece_ids)
    inputs = list(original)
    actions: list[Action] = []
    n_reserved = len(vocab.reserved_ids)
    for pos in positions:
        draw = float(rng.random())
        if draw < policy.mask_prob:
            action = Action.MASK
            inputs[pos] = MASK_ID
        elif draw < policy.mask_prob + policy.random_prob:
            action = Action.RANDOM
            inputs[pos] = int(rng.integers(n_reserved, len(vocab)))
        else:
            action = Action.KEEP
        actions.append(action)
    return MaskedExample(
        input_ids=inputs,
        original_ids=original,
        mask_positions=list(positions),
        actions=actions,
        segment_ids=list(seq.segment_ids),
        strategy=strategy,
        nsp_label=seq.nsp_label,
    )


def mask_sentence(
    seq: TokenSequence,
    phrases: list[PhraseSpan],
    policy: MaskPolicy,
    rng: np.random.Generator,
    vocab: Vocab,
) -> MaskedExample:
    """Full per-sentence pipeline: strategy, positions, replacement."""
    strategy = choose_strategy(policy, rng)
    positions = select_positions(seq, phrases, policy, strategy, rng, vocab)
    return apply_replacement(seq, positions, policy, rng, vocab, strategy)


def render_preview(example: MaskedExample, vocab: Vocab) -> str:
    """Human-readable original-vs-masked alignment for one sentence."""
    act = {pos: action for pos, action in zip(example.mask_positions, example.actions)}
    lines = [f"strategy: {example.strategy.value}"]
    for pos, (orig, now) in enumerate(zip(example.original_ids, example.input_ids)):
        marker = f" <- {act[pos].value}" if pos in act else ""
        before = vocab.token_of(orig)
        after = vocab.token_of(now)
        shown = before if orig == now else f"{before} -> {after}"
        lines.append(f"{pos:4d}  {shown}{marker}")
    return "\n".join(lines)
