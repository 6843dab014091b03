"""Deterministic fully annotated toy corpus for end-to-end runs.

Four sentence templates with hand-checked trees, dependencies, and role
frames; every tree is compatible with its dependency arcs under the
head-derivation rule, so all four task losses train on every sentence.
Content words are synthesized from syllables so the corpus is mostly
unique while sharing subword pieces.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from lingmtl.corpus import AnnotatedSentence, DepFrame, SpanFrame, parse_ptb
from lingmtl.streams import substream

_ONSETS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def _make_words(rng, count: int, syllables: int, taken: set[str]) -> list[str]:
    out: list[str] = []
    while len(out) < count:
        word = "".join(
            _ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
            for _ in range(syllables)
        )
        if word not in taken:
            taken.add(word)
            out.append(word)
    return out


def _template_transitive_pp(n1: str, v: str, n2: str) -> AnnotatedSentence:
    text = (
        f"(S (NP (DT the) (NN {n1})) (VP (VBD {v}) "
        f"(PP (IN on) (NP (DT the) (NN {n2})))))"
    )
    return AnnotatedSentence(
        words=["the", n1, v, "on", "the", n2],
        pos_tags=["DT", "NN", "VBD", "IN", "DT", "NN"],
        tree=parse_ptb(text),
        dep_heads=[2, 3, 0, 3, 6, 4],
        dep_labels=["det", "nsubj", "root", "prep", "det", "pobj"],
        span_frames=[SpanFrame(predicate=2, arguments=((0, 1, "A0"), (3, 5, "AM-LOC")))],
        dep_frames=[DepFrame(predicate=2, arguments=((1, "A0"), (3, "AM-LOC")))],
        provenance="gold",
    )


def _template_transitive_adj(adj: str, n1: str, v: str, n2: str) -> AnnotatedSentence:
    text = (
        f"(S (NP (DT a) (JJ {adj}) (NN {n1})) (VP (VBZ {v}) "
        f"(NP (DT the) (NN {n2}))))"
    )
    return AnnotatedSentence(
        words=["a", adj, n1, v, "the", n2],
        pos_tags=["DT", "JJ", "NN", "VBZ", "DT", "NN"],
        tree=parse_ptb(text),
        dep_heads=[3, 3, 4, 0, 6, 4],
        dep_labels=["det", "amod", "nsubj", "root", "det", "dobj"],
        span_frames=[SpanFrame(predicate=3, arguments=((0, 2, "A0"), (4, 5, "A1")))],
        dep_frames=[DepFrame(predicate=3, arguments=((2, "A0"), (5, "A1")))],
        provenance="gold",
    )


def _template_imperative(v: str, n: str) -> AnnotatedSentence:
    text = f"(S (VP (VB {v}) (NP (DT the) (NN {n}))))"
    return AnnotatedSentence(
        words=[v, "the", n],
        pos_tags=["VB", "DT", "NN"],
        tree=parse_ptb(text),
        dep_heads=[0, 3, 1],
        dep_labels=["root", "det", "dobj"],
        span_frames=[SpanFrame(predicate=0, arguments=((1, 2, "A1"),))],
        dep_frames=[DepFrame(predicate=0, arguments=((2, "A1"),))],
        provenance="gold",
    )


def _template_intransitive_adv(n: str, v: str, adv: str) -> AnnotatedSentence:
    text = f"(S (NP (DT the) (NN {n})) (VP (VBD {v}) (ADVP (RB {adv}))))"
    return AnnotatedSentence(
        words=["the", n, v, adv],
        pos_tags=["DT", "NN", "VBD", "RB"],
        tree=parse_ptb(text),
        dep_heads=[2, 3, 0, 3],
        dep_labels=["det", "nsubj", "root", "advmod"],
        span_frames=[SpanFrame(predicate=2, arguments=((0, 1, "A0"), (3, 3, "AM-TMP")))],
        dep_frames=[DepFrame(predicate=2, arguments=((1, "A0"), (3, "AM-TMP")))],
        provenance="gold",
    )


def build_toy_corpus(count: int = 50, seed: int = 0) -> list[AnnotatedSentence]:
    rng = substream(seed, "toydata")
    taken: set[str] = {"the", "a", "on"}
    nouns = _make_words(rng, 2 * count, 2, taken)
    verbs = _make_words(rng, count, 2, taken)
    adjs = _make_words(rng, count, 2, taken)
    advs = _make_words(rng, count, 2, taken)
    sentences: list[AnnotatedSentence] = []
    for i in range(count):
        kind = i % 4
        if kind == 0:
            s = _template_transitive_pp(nouns[2 * i], verbs[i], nouns[2 * i + 1])
        elif kind == 1:
            s = _template_transitive_adj(adjs[i], nouns[2 * i], verbs[i], nouns[2 * i + 1])
        elif kind == 2:
            s = _template_imperative(verbs[i], nouns[2 * i])
        else:
            s = _template_intransitive_adv(nouns[2 * i], verbs[i], advs[i])
        sentences.append(s)
    return sentences


# ---------------------------------------------------------------------------
# file writers matching the corpus readers


def write_ptb_file(sentences: Sequence[AnnotatedSentence], path) -> None:
    lines = []
    for s in sentences:
        if s.tree is None:
            raise ValueError("every sentence needs a tree for the bracketed file")
        lines.append(s.tree.to_string(s.words))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _props_column(frame: SpanFrame, n: int) -> list[str]:
    cells = ["*"] * n
    spans = [(frame.predicate, frame.predicate, "V")] + list(frame.arguments)
    for start, end, role in spans:
        if start == end:
            cells[start] = f"({role}*)"
        else:
            cells[start] = f"({role}*"
            cells[end] = "*)"
    return cells


def write_conll2005_file(sentences: Sequence[AnnotatedSentence], path) -> None:
    blocks = []
    for s in sentences:
        frames = sorted(s.span_frames or [], key=lambda f: f.predicate)
        columns = [list(s.words)] + [_props_column(f, len(s.words)) for f in frames]
        rows = ["\t".join(col[i] for col in columns) for i in range(len(s.words))]
        blocks.append("\n".join(rows))
    Path(path).write_text("\n\n".join(blocks) + "\n", encoding="utf-8")


def write_conll2009_file(sentences: Sequence[AnnotatedSentence], path) -> None:
    blocks = []
    for s in sentences:
        frames = sorted(s.dep_frames or [], key=lambda f: f.predicate)
        predicates = [f.predicate for f in frames]
        rows = []
        for i, word in enumerate(s.words):
            cols = [
                str(i + 1), word, "_", "_",
                s.pos_tags[i] if s.pos_tags else "_", "_", "_", "_",
                str(s.dep_heads[i]), "_",
                s.dep_labels[i] if s.dep_labels else "_", "_",
                "Y" if i in predicates else "_",
                f"{word}.01" if i in predicates else "_",
            ]
            for frame in frames:
                role = next((r for w, r in frame.arguments if w == i), "_")
                cols.append(role)
            rows.append("\t".join(cols))
        blocks.append("\n".join(rows))
    Path(path).write_text("\n\n".join(blocks) + "\n", encoding="utf-8")


def write_raw_file(sentences: Sequence[AnnotatedSentence], path) -> None:
    Path(path).write_text(
        "\n".join(" ".join(s.words) for s in sentences) + "\n", encoding="utf-8"
    )


def write_toy_dataset(out_dir, count: int = 50, seed: int = 0) -> dict[str, str]:
    """Write all four files; returns the path of each."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sentences = build_toy_corpus(count, seed)
    paths = {
        "ptb": str(out / "toy.mrg"),
        "conll2005": str(out / "toy.props"),
        "conll2009": str(out / "toy.conll2009"),
        "raw": str(out / "toy.txt"),
    }
    write_ptb_file(sentences, paths["ptb"])
    write_conll2005_file(sentences, paths["conll2005"])
    write_conll2009_file(sentences, paths["conll2009"])
    write_raw_file(sentences, paths["raw"])
    return paths
