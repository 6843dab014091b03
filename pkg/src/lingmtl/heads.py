"""Task heads and training objectives over one shared encoder.

The generator (masked-token + next-sentence prediction) and the
discriminator (replaced-token detection) are two forward passes through
the same parameter set, not two models. Task heads for POS tagging,
constituent spans, dependency arcs, and semantic roles read word vectors
taken from the discriminator-path hidden states (the generator path when
the discriminator is disabled). Word vectors are the hidden state of each
word's last piece.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from lingmtl.corpus import AnnotatedSentence, ConstituentTree, DepFrame, SpanFrame
from lingmtl.decoders import (
    DEP_STYLE,
    SPAN_STYLE,
    JointSpanNode,
    collapsed_labels,
    derived_arcs,
    joint_span_cky,
    joint_tree_spans,
    joint_tree_to_constituents,
    predict_predicates,
    srl_decode,
)
from lingmtl.encoder import TransformerEncoder, initialize_parameters
from lingmtl.masking import MaskedExample
from lingmtl.tokenizer import (
    CLS_ID,
    PAD_ID,
    RESERVED_TOKENS,
    SEP_ID,
    TruncationError,
    Vocab,
    encode,
)

logger = logging.getLogger(__name__)

MAX_ARGUMENT_SPAN_WORDS = 30
DEFAULT_DISCRIMINATOR_WEIGHT = 50.0


# ---------------------------------------------------------------------------
# label inventories


@dataclass
class TaskInventory:
    """Fixed label sets collected from the training corpus."""

    pos_tags: list[str] = field(default_factory=list)
    constituent_labels: list[str] = field(default_factory=lambda: [""])
    dep_relations: list[str] = field(default_factory=list)
    span_roles: list[str] = field(default_factory=lambda: [""])
    dep_roles: list[str] = field(default_factory=lambda: [""])

    def __post_init__(self):
        if not self.constituent_labels or self.constituent_labels[0] != "":
            raise ValueError("constituent label 0 must be the empty placeholder")
        if not self.span_roles or self.span_roles[0] != "":
            raise ValueError("span role 0 must be the null role")
        if not self.dep_roles or self.dep_roles[0] != "":
            raise ValueError("dependency role 0 must be the null role")
        self.pos_index = {t: i for i, t in enumerate(self.pos_tags)}
        self.constituent_index = {t: i for i, t in enumerate(self.constituent_labels)}
        self.relation_index = {t: i for i, t in enumerate(self.dep_relations)}
        self.span_role_index = {t: i for i, t in enumerate(self.span_roles)}
        self.dep_role_index = {t: i for i, t in enumerate(self.dep_roles)}

    @classmethod
    def from_sentences(cls, sentences: Sequence[AnnotatedSentence]) -> "TaskInventory":
        pos: set[str] = set()
        labels: set[str] = set()
        rels: set[str] = set()
        span_roles: set[str] = set()
        dep_roles: set[str] = set()
        for s in sentences:
            if s.pos_tags:
                pos.update(s.pos_tags)
            if s.tree is not None:
                labels.update(collapsed_labels(s.tree))
            if s.dep_labels:
                rels.update(s.dep_labels)
            for frame in s.span_frames or ():
                span_roles.update(role for _s, _e, role in frame.arguments)
            for frame in s.dep_frames or ():
                dep_roles.update(role for _w, role in frame.arguments)
        return cls(
            pos_tags=sorted(pos),
            constituent_labels=[""] + sorted(labels),
            dep_relations=sorted(rels),
            span_roles=[""] + sorted(span_roles),
            dep_roles=[""] + sorted(dep_roles),
        )

    def to_dict(self) -> dict:
        return {
            "pos_tags": self.pos_tags,
            "constituent_labels": self.constituent_labels,
            "dep_relations": self.dep_relations,
            "span_roles": self.span_roles,
            "dep_roles": self.dep_roles,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TaskInventory":
        return cls(**data)


# ---------------------------------------------------------------------------
# model


class Biaffine(nn.Module):
    """Bilinear scorer with bias rows: score[a, b, o] = [a;1] W_o [b;1]."""

    def __init__(self, left_dim: int, right_dim: int, out_dim: int, dtype=torch.float32):
        super().__init__()
        self.weight = nn.Parameter(
            torch.empty(out_dim, left_dim + 1, right_dim + 1, dtype=dtype)
        )

    def forward(self, left: torch.Tensor, right: torch.Tensor) -> torch.Tensor:
        ones_l = torch.ones(left.shape[0], 1, dtype=left.dtype)
        ones_r = torch.ones(right.shape[0], 1, dtype=right.dtype)
        a = torch.cat([left, ones_l], dim=1)
        b = torch.cat([right, ones_r], dim=1)
        return torch.einsum("ak,okl,bl->abo", a, self.weight, b)


class JointModel(nn.Module):
    """Shared encoder plus every pretraining and task head."""

    def __init__(
        self,
        vocab_size: int,
        inventory: TaskInventory,
        max_len: int = 128,
        layers: int = 2,
        width: int = 64,
        heads: int = 4,
        ffn_width: int = 256,
        dropout: float = 0.0,
        arc_dim: int = 32,
        rel_dim: int = 16,
        role_dim: int = 16,
        span_hidden: int = 64,
        seed: int = 0,
        dtype=torch.float32,
    ):
        super().__init__()
        if width % 2:
            raise ValueError("width must be even for the fencepost split")
        self.inventory = inventory
        self.encoder = TransformerEncoder(
            vocab_size, max_len, layers, width, heads, ffn_width, dropout,
            seed=seed, dtype=dtype,
        )
        self.generator_bias = nn.Parameter(torch.zeros(vocab_size, dtype=dtype))
        self.nsp_head = nn.Linear(width, 1, dtype=dtype)
        self.discriminator_head = nn.Linear(width, 1, dtype=dtype)
        self.pos_head = nn.Linear(width, max(1, len(inventory.pos_tags)), dtype=dtype)
        self.span_hidden = nn.Linear(width, span_hidden, dtype=dtype)
        self.span_out = nn.Linear(span_hidden, len(inventory.constituent_labels), dtype=dtype)
        self.arc_dep = nn.Linear(width, arc_dim, dtype=dtype)
        self.arc_head = nn.Linear(width, arc_dim, dtype=dtype)
        self.root_arc = nn.Parameter(torch.empty(arc_dim, dtype=dtype))
        self.arc_scorer = Biaffine(arc_dim, arc_dim, 1, dtype=dtype)
        self.rel_dep = nn.Linear(width, rel_dim, dtype=dtype)
        self.rel_head = nn.Linear(width, rel_dim, dtype=dtype)
        self.root_rel = nn.Parameter(torch.empty(rel_dim, dtype=dtype))
        self.rel_scorer = Biaffine(rel_dim, rel_dim, max(1, len(inventory.dep_relations)), dtype=dtype)
        self.predicate_head = nn.Linear(width, 1, dtype=dtype)
        self.role_pred = nn.Linear(width, role_dim, dtype=dtype)
        self.role_span_arg = nn.Linear(width, role_dim, dtype=dtype)
        self.role_word_arg = nn.Linear(width, role_dim, dtype=dtype)
        self.role_span_scorer = Biaffine(role_dim, role_dim, len(inventory.span_roles), dtype=dtype)
        self.role_word_scorer = Biaffine(role_dim, role_dim, len(inventory.dep_roles), dtype=dtype)
        initialize_parameters(self, seed)

    # --- representations ----------------------------------------------------

    def forward(self, input_ids: torch.Tensor, segment_ids: torch.Tensor) -> torch.Tensor:
        return self.encoder(input_ids, segment_ids)

    def generator_logits(self, hidden: torch.Tensor) -> torch.Tensor:
        # output projection tied to the token embedding table
        return F.linear(hidden, self.encoder.token_embedding.weight, self.generator_bias)

    def word_vectors(self, hidden_row: torch.Tensor, word_last_piece: Sequence[int]) -> torch.Tensor:
        """One vector per sentence-one word: its final piece's hidden state."""
        if word_last_piece and max(word_last_piece) >= hidden_row.shape[0]:
            raise ValueError("word alignment index outside the sequence")
        index = torch.tensor(list(word_last_piece), dtype=torch.long)
        return hidden_row[index]

    def boundary_vectors(
        self, hidden_row: torch.Tensor, word_last_piece: Sequence[int], sep_position: int
    ) -> torch.Tensor:
        """[CLS] vector, word vectors, [SEP] vector stacked: length n + 2."""
        words = self.word_vectors(hidden_row, word_last_piece)
        return torch.cat([hidden_row[0:1], words, hidden_row[sep_position : sep_position + 1]])

    def fence_reps(self, boundary: torch.Tensor) -> torch.Tensor:
        """Fencepost vectors: front half from the left, back half from the
        right, one per word boundary (n + 1 rows)."""
        half = boundary.shape[1] // 2
        return torch.cat([boundary[:-1, :half], boundary[1:, half:]], dim=1)

    def span_reps(self, boundary: torch.Tensor) -> torch.Tensor:
        """span_reps[i, j] = fence[j + 1] - fence[i]; rows below the
        diagonal are meaningless and never read."""
        fence = self.fence_reps(boundary)
        return fence[None, 1:, :] - fence[:-1, None, :]

    def span_label_scores(self, boundary: torch.Tensor) -> torch.Tensor:
        reps = self.span_reps(boundary)
        return self.span_out(F.gelu(self.span_hidden(reps)))

    def dependency_scores(self, words: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """arc_scores (n, n+1) with column 0 = root; rel_scores (n, n+1, R)."""
        dep_a = F.gelu(self.arc_dep(words))
        head_a = F.gelu(self.arc_head(words))
        heads_aug = torch.cat([self.root_arc[None, :], head_a])
        arc = self.arc_scorer(dep_a, heads_aug).squeeze(-1)
        dep_r = F.gelu(self.rel_dep(words))
        head_r = F.gelu(self.rel_head(words))
        heads_rel = torch.cat([self.root_rel[None, :], head_r])
        rel = self.rel_scorer(dep_r, heads_rel)
        return arc, rel

    def predicate_logits(self, words: torch.Tensor) -> torch.Tensor:
        return self.predicate_head(words).squeeze(-1)

    def role_scores(
        self,
        words: torch.Tensor,
        boundary: torch.Tensor,
        predicates: Sequence[int],
        units: Sequence,
        style: str,
    ) -> torch.Tensor:
        """(predicate, unit, role) scores; role 0 is the null role."""
        preds = F.gelu(self.role_pred(words[list(predicates)]))
        if style == SPAN_STYLE:
            reps = self.span_reps(boundary)
            starts = torch.tensor([u[0] for u in units], dtype=torch.long)
            ends = torch.tensor([u[1] for u in units], dtype=torch.long)
            args = F.gelu(self.role_span_arg(reps[starts, ends]))
            return self.role_span_scorer(preds, args)
        args = F.gelu(self.role_word_arg(words[list(units)]))
        return self.role_word_scorer(preds, args)


# ---------------------------------------------------------------------------
# pretraining objectives


def generator_loss(
    model: JointModel,
    hidden: torch.Tensor,
    examples: Sequence[MaskedExample],
    sources: Sequence[str],
) -> tuple[torch.Tensor, list[list[int]]]:
    """Masked-token cross-entropy plus next-sentence term for silver pairs.

    Gold-source examples contribute no next-sentence term. Returned
    predictions are argmax ids restricted to non-reserved vocabulary, ready
    to corrupt the discriminator input.
    """
    logits = model.generator_logits(hidden)
    rows: list[int] = []
    cols: list[int] = []
    targets: list[int] = []
    for row, ex in enumerate(examples):
        for pos in ex.mask_positions:
            rows.append(row)
            cols.append(pos)
            targets.append(ex.original_ids[pos])
    loss = hidden.new_zeros(())
    predictions: list[list[int]] = [[] for _ in examples]
    if rows:
        picked = logits[rows, cols]
        loss = loss + F.cross_entropy(picked, torch.tensor(targets, dtype=torch.long))
        constrained = picked.detach().clone()
        constrained[:, : len(RESERVED_TOKENS)] = float("-inf")
        ids = constrained.argmax(dim=1).tolist()
        for row, pred in zip(rows, ids):
            predictions[row].append(int(pred))
    nsp_logits = []
    nsp_targets = []
    for row, (ex, source) in enumerate(zip(examples, sources)):
        if ex.nsp_label is not None and source != "gold":
            nsp_logits.append(model.nsp_head(hidden[row, 0]).squeeze(-1))
            nsp_targets.append(1.0 if ex.nsp_label else 0.0)
    if nsp_logits:
        stacked = torch.stack(nsp_logits)
        loss = loss + F.binary_cross_entropy_with_logits(
            stacked, torch.tensor(nsp_targets, dtype=stacked.dtype)
        )
    return loss, predictions


def corrupt_for_discriminator(
    example: MaskedExample, predictions: Sequence[int]
) -> tuple[list[int], list[bool]]:
    """Discriminator input: original ids with generator samples written over
    every selected position. The result never contains [MASK]."""
    if len(predictions) != len(example.mask_positions):
        raise ValueError("one prediction per selected position required")
    ids = list(example.original_ids)
    for pos, pred in zip(example.mask_positions, predictions):
        if pred < len(RESERVED_TOKENS):
            raise ValueError("generator predictions must be non-reserved ids")
        ids[pos] = int(pred)
    flags = [a != b for a, b in zip(ids, example.original_ids)]
    return ids, flags


def discriminator_loss(
    model: JointModel,
    hidden: torch.Tensor,
    flags: Sequence[Sequence[bool]],
    original_ids: Sequence[Sequence[int]],
) -> torch.Tensor:
    """Mean replaced-token binary cross-entropy over real content positions."""
    logits = model.discriminator_head(hidden).squeeze(-1)
    picked = []
    targets = []
    for row, (row_flags, row_ids) in enumerate(zip(flags, original_ids)):
        for pos, orig in enumerate(row_ids):
            if orig in (PAD_ID, CLS_ID, SEP_ID):
                continue
            picked.append(logits[row, pos])
            targets.append(1.0 if row_flags[pos] else 0.0)
    if not picked:
        return hidden.new_zeros(())
    stacked = torch.stack(picked)
    return F.binary_cross_entropy_with_logits(
        stacked, torch.tensor(targets, dtype=stacked.dtype)
    )


# ---------------------------------------------------------------------------
# linguistics objectives


def pos_loss(
    model: JointModel, words: torch.Tensor, tags: Sequence[str]
) -> tuple[torch.Tensor, torch.Tensor]:
    scores = model.pos_head(words)
    try:
        targets = torch.tensor(
            [model.inventory.pos_index[t] for t in tags], dtype=torch.long
        )
    except KeyError as exc:
        raise ValueError(f"POS tag {exc.args[0]!r} missing from the inventory") from None
    return F.cross_entropy(scores, targets), scores


def torch_tree_score(
    root: JointSpanNode, span_scores: torch.Tensor, arc_scores: torch.Tensor
) -> torch.Tensor:
    """Differentiable total score of a fixed tree (same walk as decoding)."""
    total = span_scores.new_zeros(())
    for start, end, label in joint_tree_spans(root):
        total = total + span_scores[start, end, label]
    for dep, head in derived_arcs(root):
        total = total + arc_scores[dep, 0 if head < 0 else head + 1]
    return total


def constituent_hinge_loss(
    span_scores: torch.Tensor,
    arc_scores: torch.Tensor,
    gold_tree: JointSpanNode,
    n: int,
) -> torch.Tensor:
    """Structured hinge with Hamming cost 1 per non-gold labeled span.

    The cost-augmented argmax runs the exact decoder on detached scores; the
    loss itself re-reads the live tensors so gradients flow to every span
    and arc in the predicted-vs-gold difference.
    """
    span_np = span_scores.detach().cpu().numpy().astype(np.float64)
    arc_np = arc_scores.detach().cpu().numpy().astype(np.float64)
    cost = np.ones_like(span_np)
    gold_spans = joint_tree_spans(gold_tree)
    for start, end, label in gold_spans:
        cost[start, end, label] = 0.0
    augmented = joint_span_cky(span_np + cost, arc_np, None, n)
    pred_spans = joint_tree_spans(augmented.root)
    hamming = sum(cost[s, e, l] for s, e, l in pred_spans)
    predicted = torch_tree_score(augmented.root, span_scores, arc_scores) + hamming
    gold = torch_tree_score(gold_tree, span_scores, arc_scores)
    return torch.clamp(predicted - gold, min=0.0)


def dependency_loss(
    arc_scores: torch.Tensor,
    rel_scores: torch.Tensor,
    dep_heads: Sequence[int],
    dep_labels: Sequence[str] | None,
    relation_index: dict[str, int],
) -> torch.Tensor:
    """Mean gold-head cross-entropy plus mean gold-relation cross-entropy
    at the gold arc."""
    heads = torch.tensor(list(dep_heads), dtype=torch.long)
    loss = F.cross_entropy(arc_scores, heads)
    if dep_labels is not None and rel_scores.shape[2] > 0:
        try:
            rels = torch.tensor(
                [relation_index[r] for r in dep_labels], dtype=torch.long
            )
        except KeyError as exc:
            raise ValueError(
                f"dependency relation {exc.args[0]!r} missing from the inventory"
            ) from None
        at_gold = rel_scores[torch.arange(len(dep_heads)), heads]
        loss = loss + F.cross_entropy(at_gold, rels)
    return loss


def syntax_scores_and_loss(
    model: JointModel,
    boundary: torch.Tensor,
    words: torch.Tensor,
    gold_joint: JointSpanNode | None,
    dep_heads: Sequence[int] | None,
    dep_labels: Sequence[str] | None,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Returns (J_1, J_2, span_scores, arc_scores, rel_scores); a missing
    annotation zeroes its term."""
    n = words.shape[0]
    span_scores = model.span_label_scores(boundary)
    arc_scores, rel_scores = model.dependency_scores(words)
    j1 = words.new_zeros(())
    if gold_joint is not None:
        j1 = constituent_hinge_loss(span_scores, arc_scores, gold_joint, n)
    j2 = words.new_zeros(())
    if dep_heads is not None:
        j2 = dependency_loss(
            arc_scores, rel_scores, dep_heads, dep_labels, model.inventory.relation_index
        )
    return j1, j2, span_scores, arc_scores, rel_scores


def candidate_spans(n: int, cap: int = MAX_ARGUMENT_SPAN_WORDS) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i, min(n, i + cap))]


def srl_scores_and_loss(
    model: JointModel,
    boundary: torch.Tensor,
    words: torch.Tensor,
    frames: Sequence[SpanFrame] | Sequence[DepFrame],
    style: str,
) -> tuple[torch.Tensor, int]:
    """Predicate-detection BCE plus role cross-entropy over candidate units.

    Returns the loss and the count of gold arguments skipped for exceeding
    the span width cap.
    """
    n = words.shape[0]
    logits = model.predicate_logits(words)
    is_pred = torch.zeros(n, dtype=words.dtype)
    for frame in frames:
        is_pred[frame.predicate] = 1.0
    loss = F.binary_cross_entropy_with_logits(logits, is_pred)
    skipped = 0
    predicates = sorted({frame.predicate for frame in frames})
    if not predicates:
        return loss, skipped
    if style == SPAN_STYLE:
        units = candidate_spans(n)
        unit_index = {u: k for k, u in enumerate(units)}
        role_index = model.inventory.span_role_index
    else:
        units = list(range(n))
        unit_index = {u: k for k, u in enumerate(units)}
        role_index = model.inventory.dep_role_index
    scores = model.role_scores(words, boundary, predicates, units, style)
    targets = torch.zeros(len(predicates), len(units), dtype=torch.long)
    pred_row = {p: k for k, p in enumerate(predicates)}
    for frame in frames:
        row = pred_row[frame.predicate]
        for arg in frame.arguments:
            if style == SPAN_STYLE:
                start, end, role = arg
                key = (start, end)
            else:
                word, role = arg
                key = word
            if key not in unit_index:
                skipped += 1
                continue
            try:
                targets[row, unit_index[key]] = role_index[role]
            except KeyError:
                raise ValueError(
                    f"role {role!r} missing from the inventory"
                ) from None
    loss = loss + F.cross_entropy(
        scores.reshape(-1, scores.shape[-1]), targets.reshape(-1)
    )
    return loss, skipped


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class TrainingLosses:
    """One step's loss ledger; ``to_record`` emits the contractual keys."""

    generator: float
    discriminator: float
    lm: float
    constituent: float
    dependency: float
    semantic_role: float
    pos: float
    tasks: float
    overall: float
    discriminator_weight: float

    def to_record(self) -> dict[str, float]:
        return {
            "J_G": self.generator,
            "J_D": self.discriminator,
            "J_lm": self.lm,
            "J_1": self.constituent,
            "J_2": self.dependency,
            "J_3": self.semantic_role,
            "J_4": self.pos,
            "J_lt": self.tasks,
            "J_overall": self.overall,
        }


def total_loss(
    generator,
    discriminator,
    constituent,
    dependency,
    semantic_role,
    pos,
    discriminator_weight: float = DEFAULT_DISCRIMINATOR_WEIGHT,
):
    """Combine components: lm = G + weight*D; tasks = J_1+J_2+J_3+J_4;
    overall = lm + tasks. Works on floats and on torch scalars alike."""
    parts = {
        "J_G": generator,
        "J_D": discriminator,
        "J_1": constituent,
        "J_2": dependency,
        "J_3": semantic_role,
        "J_4": pos,
    }
    for name, value in parts.items():
        scalar = float(value.detach()) if isinstance(value, torch.Tensor) else float(value)
        if not np.isfinite(scalar):
            raise ValueError(f"loss component {name} is not finite: {scalar}")
        if scalar < -1e-9:
            raise ValueError(f"loss component {name} is negative: {scalar}")
    lm = generator + discriminator_weight * discriminator
    tasks = constituent + dependency + semantic_role + pos
    overall = lm + tasks
    return lm, tasks, overall


def losses_record(
    generator,
    discriminator,
    constituent,
    dependency,
    semantic_role,
    pos,
    discriminator_weight: float = DEFAULT_DISCRIMINATOR_WEIGHT,
) -> TrainingLosses:
    lm, tasks, overall = total_loss(
        generator, discriminator, constituent, dependency, semantic_role, pos,
        discriminator_weight,
    )
    return TrainingLosses(
        generator=float(generator),
        discriminator=float(discriminator),
        lm=float(lm),
        constituent=float(constituent),
        dependency=float(dependency),
        semantic_role=float(semantic_role),
        pos=float(pos),
        tasks=float(tasks),
        overall=float(overall),
        discriminator_weight=float(discriminator_weight),
    )


# ---------------------------------------------------------------------------
# inference


def annotate(
    model: JointModel,
    vocab: Vocab,
    sentences: Sequence[Sequence[str]],
    max_len: int = 128,
) -> tuple[list[AnnotatedSentence], int]:
    """Produce silver annotations for raw word sequences.

    Oversized sentences are skipped and counted. Every emitted record
    satisfies the AnnotatedSentence invariants by construction.
    """
    inventory = model.inventory
    out: list[AnnotatedSentence] = []
    skipped = 0
    model.eval()
    with torch.no_grad():
        for words in sentences:
            words = list(words.words if hasattr(words, "words") else words)
            if not words:
                skipped += 1
                continue
            try:
                seq = encode(words, vocab=vocab, max_len=max_len)
            except TruncationError:
                skipped += 1
                continue
            ids = torch.tensor([seq.piece_ids], dtype=torch.long)
            segs = torch.tensor([seq.segment_ids], dtype=torch.long)
            hidden = model(ids, segs)[0]
            sep_pos = len(seq.piece_ids) - 1
            word_vecs = model.word_vectors(hidden, seq.word_last_piece)
            boundary = model.boundary_vectors(hidden, seq.word_last_piece, sep_pos)
            n = len(words)

            pos_scores = model.pos_head(word_vecs)
            pos_tags = [
                inventory.pos_tags[int(k)] for k in pos_scores.argmax(dim=1)
            ]

            span_scores = model.span_label_scores(boundary).double().numpy()
            arc_scores, rel_scores = model.dependency_scores(word_vecs)
            decoded = joint_span_cky(
                span_scores, arc_scores.double().numpy(),
                rel_scores.double().numpy(), n,
            )
            tree = joint_tree_to_constituents(
                decoded.root, inventory.constituent_labels, pos_tags
            )
            dep_labels = [
                inventory.dep_relations[k] if inventory.dep_relations else "dep"
                for k in decoded.dep_labels
            ]

            pred_logits = model.predicate_logits(word_vecs).double().numpy()
            predicates = predict_predicates(pred_logits)
            span_frames = []
            dep_frames = []
            if predicates:
                spans = candidate_spans(n)
                span_role = model.role_scores(
                    word_vecs, boundary, predicates, spans, SPAN_STYLE
                ).double().numpy()
                word_units = list(range(n))
                word_role = model.role_scores(
                    word_vecs, boundary, predicates, word_units, DEP_STYLE
                ).double().numpy()
                for row, pred in enumerate(predicates):
                    sel = srl_decode(span_role[row], spans, SPAN_STYLE)
                    span_frames.append(
                        SpanFrame(
                            predicate=pred,
                            arguments=tuple(
                                (s, e, inventory.span_roles[r])
                                for s, e, r in sel.arguments
                            ),
                        )
                    )
                    sel = srl_decode(word_role[row], word_units, DEP_STYLE)
                    dep_frames.append(
                        DepFrame(
                            predicate=pred,
                            arguments=tuple(
                                (w, inventory.dep_roles[r]) for w, r in sel.arguments
                            ),
                        )
                    )
            out.append(
                AnnotatedSentence(
                    words=words,
                    pos_tags=pos_tags,
                    tree=tree,
                    dep_heads=decoded.dep_heads,
                    dep_labels=dep_labels,
                    span_frames=span_frames,
                    dep_frames=dep_frames,
                    provenance="silver",
                )
            )
    if skipped:
        logger.warning("annotate skipped %d oversized sentences", skipped)
    return out, skipped
