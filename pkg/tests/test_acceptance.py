"""Acceptance gate: ten end-to-end checks with pinned tolerances and budgets.

Each check ends with one PASS/FAIL line carrying its measured numbers;
run with ``-s`` (or ``-rP``) to see the lines for passing checks.
"""

import time

import numpy as np
import pytest
import torch

from lingmtl.checkpoint import load_checkpoint
from lingmtl.config import RunConfig
from lingmtl.decoders import (
    DEP_STYLE,
    SPAN_STYLE,
    brute_force_parse,
    brute_force_srl,
    build_gold_joint_tree,
    joint_span_cky,
    srl_decode,
    validate_joint_tree,
)
from lingmtl.heads import (
    JointModel,
    TaskInventory,
    annotate,
    corrupt_for_discriminator,
    discriminator_loss,
    generator_loss,
    pos_loss,
    srl_scores_and_loss,
    syntax_scores_and_loss,
)
from lingmtl.masking import Action, MaskPolicy, MaskedExample, PhraseSpan, Strategy, mask_sentence
from lingmtl.streams import substream
from lingmtl.tokenizer import RESERVED_TOKENS, Vocab, build_vocab, encode
from lingmtl.toydata import build_toy_corpus
from lingmtl.training import Trainer, evaluate_model, restore_model

from helpers import finite_difference_check


def report(name: str, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# shared corpus and runs


@pytest.fixture(scope="module")
def toy50():
    return build_toy_corpus(50, seed=0)


@pytest.fixture(scope="module")
def toy_vocab(toy50):
    return build_vocab([w for s in toy50 for w in s.words], 512)


def desk_config(**overrides) -> RunConfig:
    base = dict(
        steps=1000, batch_size=16, max_len=32, layers=2, width=64, heads=4,
        ffn_width=256, learning_rate=1e-3, seed=3, checkpoint_every=500,
        checkpoint_keep=3,
    )
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def overfit(toy50, toy_vocab, tmp_path_factory):
    """The 1,000-step training-set overfit run, shared by checks 7, 8, 10."""
    out = tmp_path_factory.mktemp("overfit")
    t0 = time.perf_counter()
    result = Trainer(desk_config(), toy_vocab, toy50).run(out_dir=out)
    elapsed = time.perf_counter() - t0
    return {
        "result": result,
        "report": evaluate_model(result.model, toy_vocab, toy50, max_len=32),
        "elapsed": elapsed,
        "out": out,
    }


@pytest.fixture(scope="module")
def hundred_steps(toy50, toy_vocab):
    return Trainer(desk_config(steps=100, seed=5), toy_vocab, toy50).run()


# ---------------------------------------------------------------------------
# 1. masking statistics


def test_01_masking_statistics():
    alphabet = sorted(set("abcdefghij") | {"##" + c for c in "abcdefghij"})
    vocab = Vocab(list(RESERVED_TOKENS) + alphabet)
    pool = ["a", "ab", "abc", "b", "bc", "c", "ca", "cab", "de", "fgh"]
    policy = MaskPolicy()
    rng = substream(0, "masking")

    t0 = time.perf_counter()
    fractions = []
    counts = {a: 0 for a in Action}
    for _ in range(1200):
        n = 10 + int(rng.integers(0, 21))
        words = [pool[int(rng.integers(0, len(pool)))] for _ in range(n)]
        phrases = []
        pos = 0
        while pos < n - 1:
            end = min(pos + int(rng.integers(1, 4)) - 1, n - 1)
            kind = "syntactic" if rng.random() < 0.5 else "semantic"
            phrases.append(PhraseSpan(pos, end, kind))
            pos = end + 1 + int(rng.integers(0, 2))
        seq = encode(words, vocab=vocab, max_len=128)
        example = mask_sentence(seq, phrases, policy, rng, vocab)
        fractions.append(len(example.mask_positions) / (len(seq.piece_ids) - 2))
        for action in example.actions:
            counts[action] += 1
    elapsed = time.perf_counter() - t0

    mean = float(np.mean(fractions))
    total = sum(counts.values())
    shares = {a: counts[a] / total for a in Action}
    ok = (
        abs(mean - 0.15) <= 0.01
        and abs(shares[Action.MASK] - 0.80) <= 0.02
        and abs(shares[Action.RANDOM] - 0.10) <= 0.02
        and abs(shares[Action.KEEP] - 0.10) <= 0.02
        and elapsed < 10.0
    )
    report(
        "01 masking statistics", ok,
        f"mean fraction {mean:.4f} (0.15±0.01), actions "
        f"{shares[Action.MASK]:.4f}/{shares[Action.RANDOM]:.4f}/{shares[Action.KEEP]:.4f} "
        f"(0.80/0.10/0.10 ±0.02), 1200 sentences in {elapsed:.2f}s (<10s)",
    )


# ---------------------------------------------------------------------------
# 2. joint parse optimality


def test_02_joint_parse_matches_brute_force():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    cases = 0
    for n in range(2, 7):
        for _ in range(200):
            span = rng.normal(size=(n, n, 3))
            arc = rng.normal(size=(n, n + 1))
            tree = joint_span_cky(span, arc, None, n)
            oracle_score, _ = brute_force_parse(span, arc, n)
            assert tree.score == oracle_score, (n, tree.score, oracle_score)
            validate_joint_tree(tree.root, n)
            assert len(tree.dep_heads) == n
            cases += 1
    # relation labels come from the arc actually chosen
    for _ in range(50):
        n = 4
        span = rng.normal(size=(n, n, 3))
        arc = rng.normal(size=(n, n + 1))
        rel = rng.normal(size=(n, n + 1, 5))
        tree = joint_span_cky(span, arc, rel, n)
        for dep, head in enumerate(tree.dep_heads):
            assert tree.dep_labels[dep] == int(rel[dep, head].argmax())
        cases += 1
    elapsed = time.perf_counter() - t0
    ok = elapsed < 120.0
    report(
        "02 joint parse optimality", ok,
        f"{cases} random score sets (200 per n in 2..6) matched exhaustive "
        f"search exactly in {elapsed:.1f}s (<120s)",
    )


# ---------------------------------------------------------------------------
# 3. role decode optimality


def _random_units(rng, n_spans, n_words=10, max_width=4):
    seen, units = set(), []
    while len(units) < n_spans:
        s = int(rng.integers(0, n_words))
        e = s + int(rng.integers(0, max_width))
        if (s, e) not in seen:
            seen.add((s, e))
            units.append((s, e))
    return units


def _assert_no_overlap(arguments):
    spans = sorted((s, e) for s, e, _ in arguments)
    for (s1, e1), (s2, _e2) in zip(spans, spans[1:]):
        assert e1 < s2, spans


def test_03_role_decode_matches_brute_force():
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    for _ in range(200):
        units = _random_units(rng, 1 + int(rng.integers(0, 20)))
        scores = rng.normal(size=(len(units), 5))
        fast = srl_decode(scores, units, SPAN_STYLE)
        slow = brute_force_srl(scores, units, SPAN_STYLE)
        assert fast.score == slow.score
        assert fast.arguments == slow.arguments
        _assert_no_overlap(fast.arguments)
    # fuzz: tie-heavy and degenerate score patterns keep the invariant
    fuzz_cases = 0
    for case in range(120):
        units = _random_units(rng, 1 + int(rng.integers(0, 20)))
        if case % 3 == 0:
            scores = rng.integers(-2, 3, size=(len(units), 4)).astype(float)
        elif case % 3 == 1:
            scores = np.zeros((len(units), 4))
        else:
            scores = rng.normal(size=(len(units), 4))
            scores[:, 0] -= 5.0  # weak null: dense selections
        fast = srl_decode(scores, units, SPAN_STYLE)
        assert fast.score == brute_force_srl(scores, units, SPAN_STYLE).score
        _assert_no_overlap(fast.arguments)
        fuzz_cases += 1
    elapsed = time.perf_counter() - t0
    ok = elapsed < 60.0
    report(
        "03 role decode optimality", ok,
        f"200 random + {fuzz_cases} fuzz score sets (up to 20 spans) matched "
        f"exhaustive search with non-overlap intact in {elapsed:.1f}s (<60s)",
    )


# ---------------------------------------------------------------------------
# 4. gradient correctness


def test_04_gradients_match_finite_differences(toy50, toy_vocab):
    inventory = TaskInventory.from_sentences(toy50)
    # the hinge losses are piecewise linear; central differences need the
    # decoded argmax to hold across the eps window, so the init seed must
    # land clear of decision boundaries (11 and 12 sit within 1e-4 of one)
    model = JointModel(
        len(toy_vocab), inventory, max_len=32, layers=2, width=16, heads=2,
        ffn_width=32, arc_dim=8, rel_dim=4, role_dim=4, span_hidden=8,
        seed=13, dtype=torch.float64,
    )
    names = [n for n, _ in model.named_parameters()]
    assert any(".blocks.0." in n for n in names)
    assert any(".blocks.1." in n for n in names)

    s = toy50[0]
    seq = encode(s.words, vocab=toy_vocab, max_len=32)
    ids = torch.tensor([seq.piece_ids], dtype=torch.long)
    segs = torch.tensor([seq.segment_ids], dtype=torch.long)
    masked_ids = list(seq.piece_ids)
    positions = [1, 3]
    for p in positions:
        masked_ids[p] = 4  # [MASK]
    example = MaskedExample(
        input_ids=masked_ids,
        original_ids=list(seq.piece_ids),
        mask_positions=positions,
        actions=[Action.MASK] * len(positions),
        segment_ids=list(seq.segment_ids),
        strategy=Strategy.WHOLE_WORD,
        nsp_label=None,
    )
    corrupted, flags = corrupt_for_discriminator(example, [6, 7])
    corr_t = torch.tensor([corrupted], dtype=torch.long)
    gold_joint = build_gold_joint_tree(s.tree, s.dep_heads, inventory.constituent_index)
    assert gold_joint is not None

    def words_boundary():
        hidden = model(ids, segs)[0]
        words = model.word_vectors(hidden, seq.word_last_piece)
        boundary = model.boundary_vectors(
            hidden, seq.word_last_piece, seq.word_last_piece[-1] + 1
        )
        return words, boundary

    def masked_lm():
        return generator_loss(model, model(ids, segs), [example], ["gold"])[0]

    def replaced_token():
        return discriminator_loss(model, model(corr_t, segs), [flags], [example.original_ids])

    def tree_hinge():
        words, boundary = words_boundary()
        return syntax_scores_and_loss(model, boundary, words, gold_joint, None, None)[0]

    def dependency_ce():
        words, boundary = words_boundary()
        return syntax_scores_and_loss(model, boundary, words, None, s.dep_heads, s.dep_labels)[1]

    def roles():
        words, boundary = words_boundary()
        span, _ = srl_scores_and_loss(model, boundary, words, s.span_frames, SPAN_STYLE)
        dep, _ = srl_scores_and_loss(model, boundary, words, s.dep_frames, DEP_STYLE)
        return span + dep

    def tagging():
        words, _ = words_boundary()
        return pos_loss(model, words, s.pos_tags)[0]

    losses = [
        ("masked-token", masked_lm),
        ("replaced-token", replaced_token),
        ("tree hinge", tree_hinge),
        ("dependency", dependency_ce),
        ("roles", roles),
        ("tagging", tagging),
    ]
    t0 = time.perf_counter()
    details = []
    all_ok = True
    for i, (name, fn) in enumerate(losses):
        failures = finite_difference_check(
            model, fn, eps=1e-4, rel_tol=1e-3, samples_per_param=3, seed=i
        )
        all_ok &= not failures
        details.append(f"{name} {'ok' if not failures else failures[:2]}")
    elapsed = time.perf_counter() - t0
    ok = all_ok and elapsed < 300.0
    report(
        "04 gradient correctness", ok,
        f"six losses over {len(names)} parameter tensors (2 encoder blocks, width 16) "
        f"at eps=1e-4, rel tol 1e-3: {'; '.join(details)}; {elapsed:.1f}s (<300s)",
    )


# ---------------------------------------------------------------------------
# 5. loss ledger identities


def test_05_loss_ledger_identities(hundred_steps):
    worst = 0.0
    ok = len(hundred_steps.records) == 100
    for r in hundred_steps.records:
        for total, parts in (
            (r["J_lm"], r["J_G"] + 50.0 * r["J_D"]),
            (r["J_lt"], r["J_1"] + r["J_2"] + r["J_3"] + r["J_4"]),
            (r["J_overall"], r["J_lm"] + r["J_lt"]),
        ):
            residual = abs(total - parts)
            worst = max(worst, residual / total if total else residual)
            ok &= residual <= 1e-6 * total
    report(
        "05 loss ledger", ok,
        f"all three sum identities hold on each of 100 steps; "
        f"worst relative residual {worst:.2e} (tol 1e-6)",
    )


# ---------------------------------------------------------------------------
# 6. corrupted inputs never carry the mask id


def test_06_no_mask_ids_reach_discriminator(hundred_steps):
    per_step = [r["disc_mask_tokens"] for r in hundred_steps.records]
    ok = (
        len(per_step) == 100
        and max(per_step) == 0
        and hundred_steps.disc_mask_tokens == 0
    )
    report(
        "06 discriminator inputs", ok,
        f"0 mask ids in corrupted inputs across 100 steps "
        f"(counted {hundred_steps.disc_mask_tokens} total)",
    )


# ---------------------------------------------------------------------------
# 7. toy-corpus overfit


OVERFIT_THRESHOLDS = (
    ("pos_accuracy", 0.99),
    ("constituent", 0.95),
    ("uas", 0.95),
    ("srl_span", 0.90),
    ("srl_dep", 0.90),
)


def _threshold_checks(rep):
    values = {}
    for key, floor in OVERFIT_THRESHOLDS:
        value = rep[key]["f1"] if isinstance(rep[key], dict) else rep[key]
        values[key] = (value, floor)
    return values


def test_07_toy_corpus_overfit(overfit):
    rep = overfit["report"]
    records = overfit["result"].records
    ratio = records[-1]["J_overall"] / records[0]["J_overall"]
    values = _threshold_checks(rep)
    exact = rep["constituent_exact"]
    ok = (
        all(v >= floor for v, floor in values.values())
        and exact >= 0.95
        and ratio < 0.10
        and overfit["elapsed"] <= 900.0
        and len(records) <= 2000
    )
    shown = ", ".join(f"{k} {v:.3f}>={floor}" for k, (v, floor) in values.items())
    report(
        "07 toy-corpus overfit", ok,
        f"{shown}, exact trees {exact:.3f}>=0.95, final/initial loss "
        f"{ratio:.4f}<0.10, {len(records)} steps in {overfit['elapsed']:.0f}s (<=900s)",
    )


def test_early_loss_window_means_decrease(overfit):
    losses = [r["J_overall"] for r in overfit["result"].records[:300]]
    means = [sum(losses[i : i + 50]) / 50 for i in range(0, 300, 50)]
    assert all(b < a for a, b in zip(means, means[1:])), means


# ---------------------------------------------------------------------------
# 8. semi-supervised loop closure


def test_08_silver_loop_closure(overfit, toy50, toy_vocab):
    ckpt = load_checkpoint(overfit["out"] / "checkpoint-001000.ckpt")
    model = restore_model(ckpt, toy_vocab)
    silver, skipped = annotate(model, toy_vocab, [list(s.words) for s in toy50], max_len=32)
    assert skipped == 0 and len(silver) == 50
    assert all(s.provenance == "silver" for s in silver)

    cfg = desk_config(steps=2000, gold_probability=0.10, seed=4)
    t0 = time.perf_counter()
    result = Trainer(cfg, toy_vocab, toy50, silver).run()
    elapsed = time.perf_counter() - t0
    rep = evaluate_model(result.model, toy_vocab, toy50, max_len=32)
    values = _threshold_checks(rep)
    ok = all(v >= floor for v, floor in values.values()) and len(result.records) == 2000
    shown = ", ".join(f"{k} {v:.3f}>={floor}" for k, (v, floor) in values.items())
    report(
        "08 silver loop closure", ok,
        f"retrained from scratch mixing 50 model-annotated sentences at 10% gold: "
        f"{shown} within 2000 steps ({elapsed:.0f}s)",
    )


# ---------------------------------------------------------------------------
# 9. ablation toggles


def test_09_ablation_toggles(toy50, toy_vocab):
    outcomes = []
    ok = True

    cfg = desk_config(steps=50, seed=6, pos=False, constituent=False,
                      dependency=False, srl_span=False, srl_dep=False)
    records = Trainer(cfg, toy_vocab, toy50).run().records
    flat = all(
        r["J_1"] == r["J_2"] == r["J_3"] == r["J_4"] == 0.0
        and r["J_overall"] == r["J_lm"]
        for r in records
    )
    ok &= len(records) == 50 and flat
    outcomes.append(f"lm-only: tasks zero {flat}")

    cfg = desk_config(steps=50, seed=6, electra=False)
    records = Trainer(cfg, toy_vocab, toy50).run().records
    no_disc = all(r["J_D"] == 0.0 and r["J_lm"] == r["J_G"] for r in records)
    ok &= len(records) == 50 and no_disc
    outcomes.append(f"generator-only lm: discriminator zero {no_disc}")

    cfg = desk_config(steps=50, seed=6, syntactic_weight=0.0,
                      semantic_weight=0.0, whole_word_weight=1.0)
    records = Trainer(cfg, toy_vocab, toy50).run().records
    finite = all(np.isfinite(r["J_overall"]) and r["J_G"] > 0 for r in records)
    ok &= len(records) == 50 and finite
    outcomes.append(f"whole-word masking only: completed {finite}")

    report("09 ablation toggles", ok, "; ".join(outcomes))


# ---------------------------------------------------------------------------
# 10. determinism


def test_10_bitwise_determinism(overfit, toy50, toy_vocab, tmp_path_factory):
    out2 = tmp_path_factory.mktemp("rerun")
    result2 = Trainer(desk_config(), toy_vocab, toy50).run(out_dir=out2)
    names = ("checkpoint-000500.ckpt", "checkpoint-001000.ckpt")
    same_bytes = all(
        (overfit["out"] / name).read_bytes() == (out2 / name).read_bytes()
        for name in names
    )
    rep2 = evaluate_model(result2.model, toy_vocab, toy50, max_len=32)
    same_records = result2.records == overfit["result"].records
    same_report = rep2 == overfit["report"]
    ok = same_bytes and same_records and same_report
    report(
        "10 determinism", ok,
        f"same-seed rerun: checkpoints byte-identical {same_bytes}, "
        f"metrics stream identical {same_records}, evaluation identical {same_report}",
    )
