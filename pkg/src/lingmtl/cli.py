"""Command-line front end.

Subcommands cover the whole artifact life cycle: ``vocab-build`` and
``synth-data`` prepare inputs, ``train`` produces checkpoints and a
metrics stream, ``eval`` scores a checkpoint against gold files,
``annotate`` turns raw text into silver interchange records, and
``mask-preview`` dumps masking decisions for eyeball checks.

Every command is a pure function of (config, input files, seed) to
output files. Failures exit nonzero with a single ``error:`` line on
stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from lingmtl.checkpoint import load_checkpoint
from lingmtl.config import RunConfig, apply_overrides, load_config, save_config
from lingmtl.corpus import write_silver
from lingmtl.heads import annotate
from lingmtl.masking import (
    extract_semantic_phrases,
    extract_syntactic_phrases,
    mask_sentence,
    render_preview,
)
from lingmtl.streams import substream
from lingmtl.tokenizer import UNK_ID, TruncationError, Vocab, build_vocab, encode, tokenize_word
from lingmtl.training import (
    Trainer,
    evaluate_model,
    load_gold_sentences,
    load_silver_sentences,
    restore_model,
)


class CommandError(Exception):
    """A user-facing failure; the message becomes the error line."""


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out is not None:
        overrides.append(f"out_dir={args.out}")
    return apply_overrides(cfg, overrides)


def _training_words(gold, silver) -> list[str]:
    return [w for s in gold for w in s.words] + [w for s in silver for w in s.words]


def _load_vocab_arg(args: argparse.Namespace, cfg: RunConfig) -> Vocab:
    path = getattr(args, "vocab", None) or cfg.vocab_path
    if not path:
        raise CommandError("no vocabulary: pass --vocab or set vocab_path")
    return Vocab.load(path)


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    gold = load_gold_sentences(cfg)
    silver = load_silver_sentences(cfg)
    if not gold and not silver:
        raise CommandError("no training data: configure gold paths or silver_path")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.vocab_path:
        vocab = Vocab.load(cfg.vocab_path)
        print(f"vocabulary: {len(vocab)} pieces from {cfg.vocab_path}")
    else:
        vocab = build_vocab(_training_words(gold, silver), cfg.vocab_size)
        vocab.save(out / "vocab.txt")
        print(f"vocabulary: {len(vocab)} pieces -> {out / 'vocab.txt'}")
    save_config(cfg, out / "config.txt")
    trainer = Trainer(cfg, vocab, gold, silver)
    result = trainer.run(out_dir=out)
    last = result.records[-1]
    print(
        f"trained {cfg.steps} steps on {result.prepared_gold} gold / "
        f"{result.prepared_silver} silver sentences "
        f"(skipped {result.skipped_sentences} oversized)"
    )
    print(f"final J_overall {last['J_overall']:.4f} (J_lm {last['J_lm']:.4f}, J_lt {last['J_lt']:.4f})")
    print(f"metrics: {out / 'metrics.jsonl'}")
    for path in result.checkpoint_paths:
        print(f"checkpoint: {path}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    ckpt = load_checkpoint(args.checkpoint)
    vocab = _load_vocab_arg(args, cfg)
    model = restore_model(ckpt, vocab)
    sentences = load_gold_sentences(cfg)
    report = evaluate_model(model, vocab, sentences, ckpt.hyperparameters["max_len"])
    rendered = json.dumps(report, indent=2, sort_keys=True)
    print(rendered)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.json").write_text(rendered + "\n", encoding="utf-8")
        print(f"report: {out / 'eval.json'}", file=sys.stderr)
    return 0


def cmd_annotate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    input_path = args.input or cfg.raw_path
    if not input_path:
        raise CommandError("no input text: pass --input or set raw_path")
    if args.output:
        output_path = Path(args.output)
    elif args.out:
        output_path = Path(args.out) / "silver.jsonl"
    else:
        raise CommandError("no output location: pass --output or --out")
    ckpt = load_checkpoint(args.checkpoint)
    vocab = _load_vocab_arg(args, cfg)
    model = restore_model(ckpt, vocab)
    lines = Path(input_path).read_text(encoding="utf-8").splitlines()
    sentences = [line.split() for line in lines]
    annotated, skipped = annotate(model, vocab, sentences, ckpt.hyperparameters["max_len"])
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text(write_silver(annotated), encoding="utf-8")
    print(f"annotated {len(annotated)} of {len(lines)} sentences (skipped {skipped})")
    print(f"silver corpus: {output_path}")
    return 0


def _preview_sentences(path: Path) -> list[tuple[list[str], list]]:
    """Word lists plus phrase units from silver records or raw lines."""
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    out: list[tuple[list[str], list]] = []
    if stripped.startswith("{"):
        from lingmtl.corpus import read_silver

        for s in read_silver(text):
            phrases = []
            if s.tree is not None:
                phrases.extend(extract_syntactic_phrases(s.tree))
            if s.span_frames:
                phrases.extend(extract_semantic_phrases(s.span_frames))
            out.append((list(s.words), phrases))
    else:
        for line in text.splitlines():
            words = line.split()
            if words:
                out.append((words, []))
    return out


def cmd_mask_preview(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    rows = _preview_sentences(Path(args.input))
    if not rows:
        raise CommandError(f"no sentences in {args.input}")
    if getattr(args, "vocab", None) or cfg.vocab_path:
        vocab = _load_vocab_arg(args, cfg)
    else:
        vocab = build_vocab([w for words, _ in rows for w in words], cfg.vocab_size)
    policy = cfg.mask_policy()
    rng = substream(cfg.seed, "masking")
    for i, (words, phrases) in enumerate(rows):
        print(f"# sentence {i}: {' '.join(words)}")
        try:
            seq = encode(words, vocab=vocab, max_len=cfg.max_len)
        except TruncationError as exc:
            print(f"  skipped: {exc}")
            continue
        example = mask_sentence(seq, phrases, policy, rng, vocab)
        print(render_preview(example, vocab))
        print()
    return 0


def cmd_vocab_build(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    words = _training_words(load_gold_sentences(cfg), load_silver_sentences(cfg))
    if cfg.raw_path:
        for line in Path(cfg.raw_path).read_text(encoding="utf-8").splitlines():
            words.extend(line.split())
    if not words:
        raise CommandError("empty corpus: no words in the configured sources")
    vocab = build_vocab(words, cfg.vocab_size)
    path = Path(cfg.vocab_path) if cfg.vocab_path else Path(cfg.out_dir) / "vocab.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    vocab.save(path)
    covered = 0
    single = 0
    pieces_total = 0
    for word in words:
        pieces = tokenize_word(word, vocab)
        pieces_total += len(pieces)
        covered += UNK_ID not in pieces
        single += len(pieces) == 1
    n = len(words)
    print(f"vocabulary: {len(vocab)} pieces -> {path}")
    print(
        f"word tokens: {n}; covered {covered / n:.1%}; "
        f"single-piece {single / n:.1%}; mean pieces per word {pieces_total / n:.2f}"
    )
    return 0


def cmd_synth_data(args: argparse.Namespace) -> int:
    from lingmtl.toydata import write_toy_dataset

    if args.out is None:
        raise CommandError("synth-data needs --out")
    paths = write_toy_dataset(args.out, count=args.count, seed=args.seed or 0)
    for kind, path in sorted(paths.items()):
        print(f"{kind}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="override the root seed")
    common.add_argument("--out", help="output directory (overrides out_dir)")
    common.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config field; repeatable, wins over --config",
    )

    parser = argparse.ArgumentParser(
        prog="lingmtl",
        description="multi-task language-model training with linguistics heads",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="run the training loop")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="score a checkpoint on gold files")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", help="vocabulary file (default: config vocab_path)")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("annotate", parents=[common], help="write silver annotations for raw text")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", help="vocabulary file (default: config vocab_path)")
    p.add_argument("--input", help="raw text, one sentence per line (default: config raw_path)")
    p.add_argument("--output", help="silver JSONL destination (default: OUT/silver.jsonl)")
    p.set_defaults(fn=cmd_annotate)

    p = sub.add_parser("mask-preview", parents=[common], help="show masking decisions")
    p.add_argument("--input", required=True, help="silver JSONL or raw text")
    p.add_argument("--vocab", help="vocabulary file (default: built from the input)")
    p.set_defaults(fn=cmd_mask_preview)

    p = sub.add_parser("vocab-build", parents=[common], help="build a vocabulary file")
    p.set_defaults(fn=cmd_vocab_build)

    p = sub.add_parser("synth-data", parents=[common], help="write a synthetic annotated corpus")
    p.add_argument("--count", type=int, default=50, help="number of sentences")
    p.set_defaults(fn=cmd_synth_data)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (CommandError, ValueError, OSError, KeyError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
