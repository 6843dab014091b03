"""Estimator-style wrapper: fit on annotated sentences, predict annotations.

:class:`MultiTaskAnnotator` exposes the training pipeline through the
scikit-learn calling convention (``fit`` / ``predict`` / ``transform`` /
``get_params``) so it composes with that ecosystem's tooling. Parameter
names and defaults mirror :class:`~lingmtl.config.RunConfig`; the file
paths are absent because data arrives as Python objects here.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from lingmtl.config import RunConfig
from lingmtl.corpus import AnnotatedSentence, sentence_to_record
from lingmtl.heads import annotate
from lingmtl.tokenizer import TruncationError, build_vocab, encode
from lingmtl.training import Trainer, evaluate_model
from lingmtl.validation import as_annotated_sentences, as_word_sequences, check_fits_length

# RunConfig fields surfaced as estimator parameters, in signature order.
CONFIG_FIELDS = (
    "seed",
    "gold_probability",
    "mask_rate",
    "mask_prob",
    "random_prob",
    "keep_prob",
    "syntactic_weight",
    "semantic_weight",
    "whole_word_weight",
    "layers",
    "width",
    "heads",
    "ffn_width",
    "vocab_size",
    "max_len",
    "learning_rate",
    "batch_size",
    "steps",
    "discriminator_weight",
    "mlm",
    "nsp",
    "electra",
    "pos",
    "constituent",
    "dependency",
    "srl_span",
    "srl_dep",
)


class MultiTaskAnnotator(BaseEstimator):
    """Joint syntactic and semantic annotator over one shared encoder.

    ``fit`` builds a word-piece vocabulary from the training sentences,
    then trains the full multi-task objective in memory. ``predict``
    returns one :class:`AnnotatedSentence` per input word sequence;
    ``transform`` returns the same annotations as interchange dicts.

    This follows the estimator *convention*, not the full array
    contract: inputs are sentences, not feature matrices.
    """

    def __init__(
        self,
        *,
        seed: int = 0,
        gold_probability: float = 0.10,
        mask_rate: float = 0.15,
        mask_prob: float = 0.8,
        random_prob: float = 0.1,
        keep_prob: float = 0.1,
        syntactic_weight: float = 1 / 3,
        semantic_weight: float = 1 / 3,
        whole_word_weight: float = 1 / 3,
        layers: int = 2,
        width: int = 64,
        heads: int = 4,
        ffn_width: int = 256,
        vocab_size: int = 8192,
        max_len: int = 128,
        learning_rate: float = 3e-5,
        batch_size: int = 32,
        steps: int = 1000,
        discriminator_weight: float = 50.0,
        mlm: bool = True,
        nsp: bool = True,
        electra: bool = True,
        pos: bool = True,
        constituent: bool = True,
        dependency: bool = True,
        srl_span: bool = True,
        srl_dep: bool = True,
    ):
        self.seed = seed
        self.gold_probability = gold_probability
        self.mask_rate = mask_rate
        self.mask_prob = mask_prob
        self.random_prob = random_prob
        self.keep_prob = keep_prob
        self.syntactic_weight = syntactic_weight
        self.semantic_weight = semantic_weight
        self.whole_word_weight = whole_word_weight
        self.layers = layers
        self.width = width
        self.heads = heads
        self.ffn_width = ffn_width
        self.vocab_size = vocab_size
        self.max_len = max_len
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.steps = steps
        self.discriminator_weight = discriminator_weight
        self.mlm = mlm
        self.nsp = nsp
        self.electra = electra
        self.pos = pos
        self.constituent = constituent
        self.dependency = dependency
        self.srl_span = srl_span
        self.srl_dep = srl_dep

    def _config(self) -> RunConfig:
        return RunConfig(**{name: getattr(self, name) for name in CONFIG_FIELDS})

    def fit(self, X, y=None, silver=None) -> "MultiTaskAnnotator":
        """Train on annotated sentences.

        ``X`` is an iterable of gold :class:`AnnotatedSentence` records
        (or interchange dicts); ``silver`` optionally adds model-produced
        sentences, mixed per batch at ``gold_probability``. ``y`` is
        accepted for interface compatibility and ignored: the targets
        live on the sentences themselves.
        """
        cfg = self._config()
        gold = as_annotated_sentences(X)
        silver_pool = as_annotated_sentences(silver) if silver is not None else []
        words = [w for s in gold for w in s.words]
        words += [w for s in silver_pool for w in s.words]
        vocab = build_vocab(words, cfg.vocab_size)
        trainer = Trainer(cfg, vocab, gold, silver_pool)
        result = trainer.run()
        self.model_ = result.model
        self.vocab_ = vocab
        self.inventory_ = result.inventory
        self.records_ = result.records
        self.skipped_sentences_ = result.skipped_sentences
        return self

    def _check_encodable(self, sentences: list[list[str]]) -> None:
        def fits(words) -> bool:
            try:
                encode(words, vocab=self.vocab_, max_len=self.max_len)
            except TruncationError:
                return False
            return True

        check_fits_length(sentences, fits)

    def predict(self, X) -> list[AnnotatedSentence]:
        """Annotate word sequences; one output sentence per input."""
        check_is_fitted(self)
        sentences = as_word_sequences(X)
        self._check_encodable(sentences)
        annotated, skipped = annotate(self.model_, self.vocab_, sentences, self.max_len)
        if skipped:
            raise RuntimeError(f"{skipped} sentence(s) were dropped after the length check")
        return annotated

    def transform(self, X) -> list[dict]:
        """Annotate like :meth:`predict` but return interchange dicts."""
        return [sentence_to_record(s) for s in self.predict(X)]

    def evaluate(self, X) -> dict:
        """Full per-task evaluation report against gold annotations."""
        check_is_fitted(self)
        return evaluate_model(self.model_, self.vocab_, as_annotated_sentences(X), self.max_len)

    def score(self, X, y=None) -> float:
        """Unweighted mean of the headline metrics the gold set supports.

        Pools tagging accuracy, bracket F1, attachment scores, and both
        role-labeling F1s, skipping tasks the evaluation set has no gold
        annotations for.
        """
        report = self.evaluate(X)
        values = [report["pos_accuracy"], report["uas"], report["las"]]
        for task in ("constituent", "srl_span", "srl_dep"):
            values.append(report[task]["f1"] if report[task] is not None else None)
        present = [v for v in values if v is not None]
        if not present:
            raise ValueError("evaluation set carries no gold annotations to score against")
        return sum(present) / len(present)
