import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lingmtl.corpus import SpanFrame, parse_ptb
from lingmtl.masking import (
    Action,
    MaskPolicy,
    PhraseSpan,
    Strategy,
    apply_replacement,
    choose_strategy,
    extract_semantic_phrases,
    extract_syntactic_phrases,
    mask_sentence,
    render_preview,
    select_positions,
)
from lingmtl.tokenizer import CLS_ID, MASK_ID, RESERVED_TOKENS, SEP_ID, Vocab, encode

ALPHABET = sorted(set("abcdefghijklmnopqrstuvwxyz") | {"##" + c for c in "abcdefghijklmnopqrstuvwxyz"})
VOCAB = Vocab(list(RESERVED_TOKENS) + ALPHABET)


def seq_of(words, s2=None):
    return encode(words, s2, vocab=VOCAB, max_len=512)


def word_units_of(seq):
    units = []
    start = 1
    for last in seq.word_last_piece:
        units.append(set(range(start, last + 1)))
        start = last + 1
    return units


class TestExtractSyntactic:
    def test_basic_spans(self):
        tree = parse_ptb("(S (NP (DT The) (NN cat)) (VP (VBZ sleeps)))")
        spans = {(p.start, p.end): p.label for p in extract_syntactic_phrases(tree)}
        assert spans == {(0, 1): "NP", (2, 2): "VP"}

    def test_single_word_tree(self):
        tree = parse_ptb("(X (Y a))")
        assert extract_syntactic_phrases(tree) == []

    def test_three_word_constituent_is_one_unit(self):
        tree = parse_ptb(
            "(S (NP (JJ federal) (NN paper) (NN board)) (VP (VBZ sells) (NP (NN paper))))"
        )
        spans = [(p.start, p.end) for p in extract_syntactic_phrases(tree)]
        assert (0, 2) in spans


class TestExtractSemantic:
    def test_predicate_and_argument(self):
        frames = [SpanFrame(2, ((0, 1, "A0"),))]
        spans = {(p.start, p.end) for p in extract_semantic_phrases(frames)}
        assert spans == {(2, 2), (0, 1)}

    def test_no_frames(self):
        assert extract_semantic_phrases([]) == []

    def test_duplicates_dropped(self):
        frames = [SpanFrame(2, ((0, 1, "A0"),)), SpanFrame(2, ((0, 1, "A1"),))]
        assert len(extract_semantic_phrases(frames)) == 2


class TestChooseStrategy:
    def test_degenerate_weights(self):
        rng = np.random.default_rng(0)
        only_syn = MaskPolicy(strategy_weights=(1.0, 0.0, 0.0))
        assert all(choose_strategy(only_syn, rng) is Strategy.SYN_PHRASE for _ in range(50))
        only_www = MaskPolicy(strategy_weights=(0.0, 0.0, 1.0))
        assert all(choose_strategy(only_www, rng) is Strategy.WHOLE_WORD for _ in range(50))

    def test_uniform_frequencies(self):
        rng = np.random.default_rng(13)
        policy = MaskPolicy()
        counts = {s: 0 for s in Strategy}
        n = 9000
        for _ in range(n):
            counts[choose_strategy(policy, rng)] += 1
        for s in Strategy:
            assert abs(counts[s] / n - 1 / 3) <= 0.02


class TestBudget:
    def test_twenty_maskable_exactly_three(self):
        words = ["a"] * 20  # width-1 units: budget is always reachable
        seq = seq_of(words)
        rng = np.random.default_rng(5)
        picked = select_positions(seq, [], MaskPolicy(), Strategy.WHOLE_WORD, rng, VOCAB)
        assert len(picked) == 3

    def test_minimum_one(self):
        seq = seq_of(["a"])
        rng = np.random.default_rng(5)
        picked = select_positions(seq, [], MaskPolicy(), Strategy.WHOLE_WORD, rng, VOCAB)
        assert len(picked) == 1

    def test_mean_fraction_near_rate(self):
        rng = np.random.default_rng(99)
        policy = MaskPolicy()
        fractions = []
        word_pool = ["a", "ab", "abc", "b", "bc", "c", "ca", "cab"]
        for i in range(1000):
            n = 10 + int(rng.integers(0, 20))
            words = [word_pool[int(rng.integers(0, len(word_pool)))] for _ in range(n)]
            seq = seq_of(words)
            maskable = len(seq.piece_ids) - 2
            picked = select_positions(seq, [], policy, Strategy.WHOLE_WORD, rng, VOCAB)
            fractions.append(len(picked) / maskable)
        assert abs(float(np.mean(fractions)) - 0.15) <= 0.01


class TestSelectionInvariants:
    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_union_of_whole_words_and_within_budget(self, seed):
        rng = np.random.default_rng(seed)
        n = 3 + int(rng.integers(0, 10))
        pool = ["a", "ab", "abc", "bcd"]
        words = [pool[int(rng.integers(0, len(pool)))] for _ in range(n)]
        seq = seq_of(words)
        phrases = []
        if n >= 3:
            phrases = [PhraseSpan(0, 1, "syntactic", "NP"), PhraseSpan(2, n - 1, "syntactic", "VP")]
        strategy = (Strategy.SYN_PHRASE, Strategy.WHOLE_WORD)[seed % 2]
        picked = set(select_positions(seq, phrases, MaskPolicy(), strategy, rng, VOCAB))
        maskable = len(seq.piece_ids) - 2
        budget = max(1, int(np.floor(0.15 * maskable + 0.5)))
        assert len(picked) <= budget
        for unit in word_units_of(seq):
            overlap = picked & unit
            assert overlap in (set(), unit)

    def test_specials_never_selected(self):
        seq = seq_of(["ab", "cd"], ["ef", "gh"])
        rng = np.random.default_rng(3)
        for _ in range(100):
            picked = select_positions(seq, [], MaskPolicy(), Strategy.WHOLE_WORD, rng, VOCAB)
            for pos in picked:
                assert seq.piece_ids[pos] not in (CLS_ID, SEP_ID)

    def test_phrase_selected_atomically(self):
        words = ["ab"] * 12  # maskable 24, budget 4: exactly the 2-word phrase + 0..1 words
        seq = seq_of(words)
        phrase = [PhraseSpan(0, 1, "syntactic", "NP")]
        rng = np.random.default_rng(11)
        seen_phrase = False
        for _ in range(50):
            picked = set(select_positions(seq, phrase, MaskPolicy(), Strategy.SYN_PHRASE, rng, VOCAB))
            phrase_pieces = set(range(1, 5))
            if phrase_pieces & picked:
                assert phrase_pieces <= picked
                seen_phrase = True
        assert seen_phrase

    def test_empty_phrases_fall_back_to_words(self):
        seq = seq_of(["ab", "cd", "ef", "gh", "ij"])
        rng = np.random.default_rng(2)
        picked = select_positions(seq, [], MaskPolicy(), Strategy.SEM_PHRASE, rng, VOCAB)
        assert picked  # fallback still selects

    def test_oversized_phrase_skipped(self):
        words = ["a"] * 30  # budget 4 or 5; a 12-word phrase can never fit
        seq = seq_of(words)
        phrase = [PhraseSpan(0, 11, "syntactic", "NP")]
        rng = np.random.default_rng(8)
        picked = select_positions(seq, phrase, MaskPolicy(), Strategy.SYN_PHRASE, rng, VOCAB)
        assert 0 < len(picked) <= 5

    def test_second_sentence_words_grouped(self):
        seq = seq_of(["ab"], ["abc", "de"])
        rng = np.random.default_rng(4)
        units = []
        policy = MaskPolicy(mask_rate=0.99)
        picked = set(select_positions(seq, [], policy, Strategy.WHOLE_WORD, rng, VOCAB))
        # with a huge budget every whole word gets taken
        assert picked == {1, 2, 4, 5, 6, 7, 8}


class TestApplyReplacement:
    def test_all_mask(self):
        seq = seq_of(["ab", "cd"])
        policy = MaskPolicy(mask_prob=1.0, random_prob=0.0, keep_prob=0.0)
        rng = np.random.default_rng(0)
        ex = apply_replacement(seq, [1, 2], policy, rng, VOCAB)
        assert ex.input_ids[1] == MASK_ID and ex.input_ids[2] == MASK_ID
        assert ex.actions == [Action.MASK, Action.MASK]

    def test_all_keep_records_positions(self):
        seq = seq_of(["ab", "cd"])
        policy = MaskPolicy(mask_prob=0.0, random_prob=0.0, keep_prob=1.0)
        rng = np.random.default_rng(0)
        ex = apply_replacement(seq, [1, 3], policy, rng, VOCAB)
        assert ex.input_ids == ex.original_ids
        assert ex.mask_positions == [1, 3]

    def test_action_proportions(self):
        seq = seq_of(["ab"] * 40)
        policy = MaskPolicy()
        rng = np.random.default_rng(21)
        counts = {a: 0 for a in Action}
        total = 0
        positions = list(range(1, 81))
        for _ in range(125):  # 125 * 80 = 10,000 draws
            ex = apply_replacement(seq, positions, policy, rng, VOCAB)
            for a in ex.actions:
                counts[a] += 1
            total += len(ex.actions)
        assert total == 10_000
        assert abs(counts[Action.MASK] / total - 0.80) <= 0.02
        assert abs(counts[Action.RANDOM] / total - 0.10) <= 0.02
        assert abs(counts[Action.KEEP] / total - 0.10) <= 0.02

    def test_random_draws_non_reserved(self):
        seq = seq_of(["ab"] * 20)
        policy = MaskPolicy(mask_prob=0.0, random_prob=1.0, keep_prob=0.0)
        rng = np.random.default_rng(7)
        ex = apply_replacement(seq, list(range(1, 41)), policy, rng, VOCAB)
        for pos in ex.mask_positions:
            assert ex.input_ids[pos] >= 5

    def test_untouched_outside_positions(self):
        seq = seq_of(["ab", "cd", "ef"])
        rng = np.random.default_rng(9)
        ex = apply_replacement(seq, [1, 2], MaskPolicy(), rng, VOCAB)
        for pos in range(len(ex.input_ids)):
            if pos not in (1, 2):
                assert ex.input_ids[pos] == ex.original_ids[pos]

    def test_deterministic(self):
        seq = seq_of(["ab", "cd", "ef", "gh"])
        a = mask_sentence(seq, [], MaskPolicy(), np.random.default_rng(42), VOCAB)
        b = mask_sentence(seq, [], MaskPolicy(), np.random.default_rng(42), VOCAB)
        assert a == b


class TestPolicyValidation:
    def test_bad_action_sum(self):
        with pytest.raises(ValueError):
            MaskPolicy(mask_prob=0.9, random_prob=0.2, keep_prob=0.1)

    def test_bad_strategy_weights(self):
        with pytest.raises(ValueError):
            MaskPolicy(strategy_weights=(0.5, 0.5, 0.5))

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            MaskPolicy(strategy_weights=(1.5, -0.5, 0.0))


class TestPredicateMasking:
    def test_predicates_become_mask_tokens(self):
        words = ["ab", "cd", "ef", "gh", "ij", "kl", "mn", "op", "qr", "st"]
        seq = seq_of(words)
        frames = [SpanFrame(2, ()), SpanFrame(5, ())]
        phrases = extract_semantic_phrases(frames)
        policy = MaskPolicy(mask_prob=1.0, random_prob=0.0, keep_prob=0.0)
        rng = np.random.default_rng(1)
        hit = False
        for _ in range(40):
            positions = select_positions(seq, phrases, policy, Strategy.SEM_PHRASE, rng, VOCAB)
            ex = apply_replacement(seq, positions, policy, rng, VOCAB, Strategy.SEM_PHRASE)
            pred_pieces = set(range(5, 7)) | set(range(11, 13))  # words 2 and 5
            chosen = pred_pieces & set(positions)
            if chosen:
                hit = True
                for pos in chosen:
                    assert ex.input_ids[pos] == MASK_ID
        assert hit


def test_render_preview_mentions_strategy_and_actions():
    seq = seq_of(["ab", "cd"])
    policy = MaskPolicy(mask_prob=1.0, random_prob=0.0, keep_prob=0.0)
    rng = np.random.default_rng(0)
    ex = apply_replacement(seq, [1], policy, rng, VOCAB, Strategy.SYN_PHRASE)
    text = render_preview(ex, VOCAB)
    assert "syn_phrase" in text
    assert "mask" in text
    assert "[MASK]" in text
