"""Training loop: gold/silver batches, the summed objective, evaluation.

Each step draws a batch source, masks the batch, runs the generator pass,
corrupts inputs for the discriminator pass, computes every enabled task
loss on the discriminator-path word vectors, and takes one Adam step over
the single shared parameter set. All randomness comes from named
substreams of the run seed, so runs are reproducible bit for bit.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import torch

from lingmtl.checkpoint import (
    Checkpoint,
    load_into_module,
    model_arrays,
    save_checkpoint,
)
from lingmtl.config import RunConfig
from lingmtl.corpus import (
    AnnotatedSentence,
    GoldSilverMixer,
    MixerPolicy,
    read_conll2005,
    read_conll2009,
    read_ptb,
    read_silver,
)
from lingmtl.decoders import JointSpanNode, build_gold_joint_tree
from lingmtl.encoder import AdamState, adam_step, named_gradients, pad_batch
from lingmtl.heads import (
    DEP_STYLE,
    SPAN_STYLE,
    JointModel,
    TaskInventory,
    annotate,
    corrupt_for_discriminator,
    discriminator_loss,
    generator_loss,
    losses_record,
    pos_loss,
    srl_scores_and_loss,
    syntax_scores_and_loss,
    total_loss,
)
from lingmtl.masking import (
    MaskedExample,
    Strategy,
    extract_semantic_phrases,
    extract_syntactic_phrases,
    mask_sentence,
)
from lingmtl.metrics import PRF, bracket_prf, pos_accuracy, srl_prf, uas_las
from lingmtl.streams import substream
from lingmtl.tokenizer import MASK_ID, TokenSequence, TruncationError, Vocab, encode

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# data assembly


def merge_gold_sentences(
    groups: Sequence[Sequence[AnnotatedSentence]],
) -> list[AnnotatedSentence]:
    """Fuse sentences with identical words across gold sources.

    Bracketed files carry trees, 2005 columns carry span frames, 2009
    columns carry dependencies; the same sentence may appear in several.
    A field annotated twice must agree exactly.
    """
    order: list[tuple[str, ...]] = []
    merged: dict[tuple[str, ...], dict] = {}
    for group in groups:
        for s in group:
            key = tuple(s.words)
            if key not in merged:
                order.append(key)
                merged[key] = {"words": list(s.words)}
            slot = merged[key]
            for name in ("pos_tags", "tree", "dep_heads", "dep_labels",
                         "span_frames", "dep_frames"):
                value = getattr(s, name)
                if value is None:
                    continue
                if name not in slot:
                    slot[name] = value
                elif slot[name] != value:
                    raise ValueError(
                        f"conflicting {name} for sentence {' '.join(key)!r}"
                    )
    return [
        AnnotatedSentence(provenance="gold", **merged[key]) for key in order
    ]


def load_gold_sentences(cfg: RunConfig) -> list[AnnotatedSentence]:
    groups = []
    if cfg.gold_ptb:
        groups.append(read_ptb(Path(cfg.gold_ptb).read_text(encoding="utf-8")))
    if cfg.gold_conll2005:
        with open(cfg.gold_conll2005, encoding="utf-8") as fh:
            groups.append(read_conll2005(fh))
    if cfg.gold_conll2009:
        with open(cfg.gold_conll2009, encoding="utf-8") as fh:
            groups.append(read_conll2009(fh))
    return merge_gold_sentences(groups)


def load_silver_sentences(cfg: RunConfig) -> list[AnnotatedSentence]:
    if not cfg.silver_path:
        return []
    return read_silver(Path(cfg.silver_path).read_text(encoding="utf-8"))


@dataclass
class PreparedSentence:
    sentence: AnnotatedSentence
    seq: TokenSequence
    phrases: list
    gold_joint: JointSpanNode | None


def prepare_sentences(
    sentences: Sequence[AnnotatedSentence],
    vocab: Vocab,
    max_len: int,
    inventory: TaskInventory,
) -> tuple[list[PreparedSentence], int]:
    """Tokenize and pre-extract phrase units and gold joint trees; sentences
    that do not fit the encoder are skipped and counted."""
    prepared: list[PreparedSentence] = []
    skipped = 0
    for s in sentences:
        try:
            seq = encode(s.words, vocab=vocab, max_len=max_len)
        except TruncationError:
            skipped += 1
            continue
        phrases = []
        if s.tree is not None:
            phrases.extend(extract_syntactic_phrases(s.tree))
        if s.span_frames:
            phrases.extend(extract_semantic_phrases(s.span_frames))
        gold_joint = None
        if s.tree is not None and s.dep_heads is not None:
            gold_joint = build_gold_joint_tree(
                s.tree, s.dep_heads, inventory.constituent_index
            )
        prepared.append(PreparedSentence(s, seq, phrases, gold_joint))
    return prepared, skipped


# ---------------------------------------------------------------------------
# the loop


@dataclass
class TrainResult:
    records: list[dict]
    checkpoint_paths: list[str]
    model: JointModel
    inventory: TaskInventory
    vocab_sha256: str
    prepared_gold: int
    prepared_silver: int
    skipped_sentences: int
    skipped_arguments: int
    disc_mask_tokens: int


def model_hyperparameters(cfg: RunConfig, vocab_size: int) -> dict:
    return {
        "vocab_size": vocab_size,
        "max_len": cfg.max_len,
        "layers": cfg.layers,
        "width": cfg.width,
        "heads": cfg.heads,
        "ffn_width": cfg.ffn_width,
    }


def build_model(cfg: RunConfig, vocab_size: int, inventory: TaskInventory) -> JointModel:
    return JointModel(
        vocab_size,
        inventory,
        max_len=cfg.max_len,
        layers=cfg.layers,
        width=cfg.width,
        heads=cfg.heads,
        ffn_width=cfg.ffn_width,
        seed=cfg.seed,
    )


def restore_model(ckpt: Checkpoint, vocab: Vocab) -> JointModel:
    """Rebuild the model a checkpoint describes and load its weights."""
    if ckpt.vocab_sha256 != vocab.content_hash():
        raise ValueError(
            "vocabulary hash mismatch: checkpoint was trained with a "
            "different vocabulary file"
        )
    hp = ckpt.hyperparameters
    inventory = TaskInventory.from_dict(ckpt.inventory)
    model = JointModel(
        hp["vocab_size"],
        inventory,
        max_len=hp["max_len"],
        layers=hp["layers"],
        width=hp["width"],
        heads=hp["heads"],
        ffn_width=hp["ffn_width"],
    )
    load_into_module(model, ckpt.arrays)
    return model


class Trainer:
    def __init__(
        self,
        cfg: RunConfig,
        vocab: Vocab,
        gold: Sequence[AnnotatedSentence],
        silver: Sequence[AnnotatedSentence] = (),
    ):
        cfg.validate()
        self.cfg = cfg
        self.vocab = vocab
        self.inventory = TaskInventory.from_sentences(list(gold) + list(silver))
        self.model = build_model(cfg, len(vocab), self.inventory)
        self.gold, skipped_g = prepare_sentences(gold, vocab, cfg.max_len, self.inventory)
        self.silver, skipped_s = prepare_sentences(silver, vocab, cfg.max_len, self.inventory)
        self.skipped_sentences = skipped_g + skipped_s
        if self.skipped_sentences:
            logger.warning("skipped %d oversized sentences", self.skipped_sentences)
        self.mixer = GoldSilverMixer(
            MixerPolicy(gold_probability=cfg.gold_probability, rng_seed=cfg.seed),
            len(self.gold),
            len(self.silver),
        )
        self.policy = cfg.mask_policy()
        self.rng_mask = substream(cfg.seed, "masking")
        self.rng_nsp = substream(cfg.seed, "nsp")
        self.rng_order = substream(cfg.seed, "data order")
        self.adam = AdamState()
        self.skipped_arguments = 0
        self.disc_mask_tokens = 0
        self._zero = torch.zeros((), dtype=next(self.model.parameters()).dtype)

    # -- batch assembly ----------------------------------------------------

    def _draw_batch(self) -> tuple[list[PreparedSentence], list[MaskedExample], list[str]]:
        source = self.mixer.next_source()
        pool = self.gold if source == "gold" else self.silver
        picks = self.rng_order.integers(0, len(pool), size=self.cfg.batch_size)
        items = [pool[int(i)] for i in picks]
        examples = []
        for pos, item in enumerate(items):
            seq = item.seq
            if source == "silver" and self.cfg.nsp:
                seq = self._paired(pool, int(picks[pos]))
            if self.cfg.mlm:
                examples.append(
                    mask_sentence(seq, item.phrases, self.policy, self.rng_mask, self.vocab)
                )
            else:
                examples.append(
                    MaskedExample(
                        input_ids=list(seq.piece_ids),
                        original_ids=list(seq.piece_ids),
                        mask_positions=[],
                        actions=[],
                        segment_ids=list(seq.segment_ids),
                        strategy=Strategy.WHOLE_WORD,
                        nsp_label=seq.nsp_label,
                    )
                )
        return items, examples, [source] * len(items)

    def _paired(self, pool: list[PreparedSentence], index: int) -> TokenSequence:
        """Pack a sentence pair for the next-sentence objective: the true
        next sentence half the time, a random one otherwise."""
        is_next = bool(self.rng_nsp.random() < 0.5)
        if is_next:
            other = pool[(index + 1) % len(pool)]
        else:
            other = pool[int(self.rng_nsp.integers(0, len(pool)))]
        try:
            return encode(
                pool[index].sentence.words,
                other.sentence.words,
                vocab=self.vocab,
                max_len=self.cfg.max_len,
                nsp_label=is_next,
                truncate_second=True,
            )
        except TruncationError:
            return pool[index].seq

    # -- one step ------------------------------------------------------------

    def step(self, step_number: int) -> dict:
        cfg = self.cfg
        items, examples, sources = self._draw_batch()
        segs_rows = [ex.segment_ids for ex in examples]
        segs = pad_batch(segs_rows, pad_id=0)

        j_g = self._zero
        predictions = None
        gen_hidden = None
        if cfg.mlm:
            gen_ids = pad_batch([ex.input_ids for ex in examples])
            gen_hidden = self.model(gen_ids, segs)
            j_g, predictions = generator_loss(self.model, gen_hidden, examples, sources)

        j_d = self._zero
        task_hidden = None
        if cfg.electra:
            corrupted = []
            flags = []
            for ex, preds in zip(examples, predictions):
                ids, fl = corrupt_for_discriminator(ex, preds)
                self.disc_mask_tokens += ids.count(MASK_ID)
                corrupted.append(ids)
                flags.append(fl)
            disc_ids = pad_batch(corrupted)
            task_hidden = self.model(disc_ids, segs)
            j_d = discriminator_loss(
                self.model, task_hidden, flags, [ex.original_ids for ex in examples]
            )

        any_task = cfg.pos or cfg.constituent or cfg.dependency or cfg.srl_span or cfg.srl_dep
        if any_task and task_hidden is None:
            if gen_hidden is not None:
                task_hidden = gen_hidden
            else:
                task_hidden = self.model(pad_batch([ex.original_ids for ex in examples]), segs)

        j1_terms: list[torch.Tensor] = []
        j2_terms: list[torch.Tensor] = []
        j3_span_terms: list[torch.Tensor] = []
        j3_dep_terms: list[torch.Tensor] = []
        j4_terms: list[torch.Tensor] = []
        if any_task:
            for row, (item, ex) in enumerate(zip(items, examples)):
                s = item.sentence
                wlp = item.seq.word_last_piece
                sep = wlp[-1] + 1
                hidden_row = task_hidden[row]
                words = self.model.word_vectors(hidden_row, wlp)
                boundary = self.model.boundary_vectors(hidden_row, wlp, sep)
                if cfg.pos and s.pos_tags:
                    j4_terms.append(pos_loss(self.model, words, s.pos_tags)[0])
                want_tree = cfg.constituent and item.gold_joint is not None
                want_dep = cfg.dependency and s.dep_heads is not None
                if want_tree or want_dep:
                    j1, j2, *_ = syntax_scores_and_loss(
                        self.model,
                        boundary,
                        words,
                        item.gold_joint if want_tree else None,
                        s.dep_heads if want_dep else None,
                        s.dep_labels if want_dep else None,
                    )
                    if want_tree:
                        j1_terms.append(j1)
                    if want_dep:
                        j2_terms.append(j2)
                if cfg.srl_span and s.span_frames is not None:
                    loss, skipped = srl_scores_and_loss(
                        self.model, boundary, words, s.span_frames, SPAN_STYLE
                    )
                    self.skipped_arguments += skipped
                    j3_span_terms.append(loss)
                if cfg.srl_dep and s.dep_frames is not None:
                    loss, skipped = srl_scores_and_loss(
                        self.model, boundary, words, s.dep_frames, DEP_STYLE
                    )
                    self.skipped_arguments += skipped
                    j3_dep_terms.append(loss)

        def mean_or_zero(terms: list[torch.Tensor]) -> torch.Tensor:
            return torch.stack(terms).mean() if terms else self._zero

        j_1 = mean_or_zero(j1_terms)
        j_2 = mean_or_zero(j2_terms)
        j_3 = mean_or_zero(j3_span_terms) + mean_or_zero(j3_dep_terms)
        j_4 = mean_or_zero(j4_terms)

        _, _, overall = total_loss(
            j_g, j_d, j_1, j_2, j_3, j_4, cfg.discriminator_weight
        )
        if overall.grad_fn is not None:
            grads = named_gradients(overall, self.model)
            adam_step(self.model, grads, self.adam, lr=cfg.learning_rate)
        else:
            # a batch can carry no trainable term (e.g. unannotated data
            # with mlm off); the step still counts and gets a record
            logger.warning("step %d produced a constant loss", step_number)

        def scalar(t: torch.Tensor) -> float:
            return float(t.detach())

        record = losses_record(
            scalar(j_g), scalar(j_d), scalar(j_1), scalar(j_2), scalar(j_3),
            scalar(j_4), cfg.discriminator_weight,
        ).to_record()
        record["step"] = step_number
        record["disc_mask_tokens"] = self.disc_mask_tokens
        return record

    # -- the run ---------------------------------------------------------------

    def run(self, out_dir: str | None = None) -> TrainResult:
        cfg = self.cfg
        out = Path(out_dir) if out_dir else None
        stream = None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            stream = open(out / "metrics.jsonl", "w", encoding="utf-8")
        records: list[dict] = []
        checkpoints: list[Path] = []
        try:
            for step_number in range(1, cfg.steps + 1):
                record = self.step(step_number)
                records.append(record)
                if stream is not None:
                    stream.write(json.dumps(record, sort_keys=True) + "\n")
                if out is not None and (
                    step_number % cfg.checkpoint_every == 0 or step_number == cfg.steps
                ):
                    path = out / f"checkpoint-{step_number:06d}.ckpt"
                    self.save(path, step_number)
                    if not checkpoints or checkpoints[-1] != path:
                        checkpoints.append(path)
                    while len(checkpoints) > cfg.checkpoint_keep:
                        old = checkpoints.pop(0)
                        old.unlink(missing_ok=True)
        finally:
            if stream is not None:
                stream.close()
        return TrainResult(
            records=records,
            checkpoint_paths=[str(p) for p in checkpoints],
            model=self.model,
            inventory=self.inventory,
            vocab_sha256=self.vocab.content_hash(),
            prepared_gold=len(self.gold),
            prepared_silver=len(self.silver),
            skipped_sentences=self.skipped_sentences,
            skipped_arguments=self.skipped_arguments,
            disc_mask_tokens=self.disc_mask_tokens,
        )

    def save(self, path, step_number: int) -> None:
        save_checkpoint(
            path,
            model_arrays(self.model),
            model_hyperparameters(self.cfg, len(self.vocab)),
            self.inventory.to_dict(),
            self.vocab.content_hash(),
            step_number,
        )


# ---------------------------------------------------------------------------
# evaluation


def _prf_dict(prf: PRF) -> dict:
    return {
        "precision": prf.precision,
        "recall": prf.recall,
        "f1": prf.f1,
        "matched": prf.matched,
        "predicted": prf.predicted,
        "gold": prf.gold,
    }


def evaluate_model(
    model: JointModel,
    vocab: Vocab,
    sentences: Sequence[AnnotatedSentence],
    max_len: int = 128,
) -> dict:
    """Decode every sentence and score each task against its gold fields.

    Keys are stable; a task with no gold annotation in the set reports
    null. Oversized sentences are counted and excluded.
    """
    if not sentences:
        raise ValueError("empty evaluation set")
    fitting: list[AnnotatedSentence] = []
    skipped = 0
    for s in sentences:
        try:
            encode(s.words, vocab=vocab, max_len=max_len)
        except TruncationError:
            skipped += 1
            continue
        fitting.append(s)
    if not fitting:
        raise ValueError("every evaluation sentence exceeds the length limit")
    predicted, inner_skipped = annotate(model, vocab, [s.words for s in fitting], max_len)
    if inner_skipped:
        raise RuntimeError("annotate skipped pre-checked sentences")

    report: dict = {
        "sentences": len(fitting),
        "skipped": skipped,
        "pos_accuracy": None,
        "constituent": None,
        "constituent_exact": None,
        "uas": None,
        "las": None,
        "srl_span": None,
        "srl_dep": None,
    }

    pos_pairs = [(p, g) for p, g in zip(predicted, fitting) if g.pos_tags]
    if pos_pairs:
        report["pos_accuracy"] = pos_accuracy(
            [p.pos_tags for p, _ in pos_pairs], [g.pos_tags for _, g in pos_pairs]
        )

    tree_pairs = [(p, g) for p, g in zip(predicted, fitting) if g.tree is not None]
    if tree_pairs:
        report["constituent"] = _prf_dict(
            bracket_prf([p.tree for p, _ in tree_pairs], [g.tree for _, g in tree_pairs])
        )
        exact = sum(
            1
            for p, g in tree_pairs
            if sorted(p.tree.brackets()) == sorted(g.tree.brackets())
        )
        report["constituent_exact"] = exact / len(tree_pairs)

    dep_pairs = [(p, g) for p, g in zip(predicted, fitting) if g.dep_heads is not None]
    if dep_pairs:
        gold_pos = [
            g.pos_tags if g.pos_tags else [""] * len(g.words) for _, g in dep_pairs
        ]
        uas, las = uas_las(
            [p.dep_heads for p, _ in dep_pairs],
            [p.dep_labels for p, _ in dep_pairs],
            [g.dep_heads for _, g in dep_pairs],
            [g.dep_labels if g.dep_labels else [""] * len(g.words) for _, g in dep_pairs],
            gold_pos=gold_pos,
        )
        report["uas"] = uas
        report["las"] = las

    span_pairs = [(p, g) for p, g in zip(predicted, fitting) if g.span_frames is not None]
    if span_pairs:
        report["srl_span"] = _prf_dict(
            srl_prf(
                [p.span_frames for p, _ in span_pairs],
                [g.span_frames for _, g in span_pairs],
                "span",
            )
        )

    dep_frame_pairs = [(p, g) for p, g in zip(predicted, fitting) if g.dep_frames is not None]
    if dep_frame_pairs:
        report["srl_dep"] = _prf_dict(
            srl_prf(
                [p.dep_frames for p, _ in dep_frame_pairs],
                [g.dep_frames for _, g in dep_frame_pairs],
                "dep",
            )
        )
    return report
