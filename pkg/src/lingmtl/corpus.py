"""Gold corpus readers, the silver interchange format, and gold/silver mixing.

Readers unify bracketed treebank files, span-style role-labeling columns,
and dependency-style columns into :class:`AnnotatedSentence` records. A
sentence may carry any subset of annotations; invariants are checked at
construction so no reader can emit an inconsistent record.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

from lingmtl.streams import substream

logger = logging.getLogger(__name__)


class FormatError(ValueError):
    """An input file does not follow its declared format."""


class InvariantError(ValueError):
    """An annotation record violates a structural invariant."""


# ---------------------------------------------------------------------------
# constituent trees


@dataclass(frozen=True)
class ConstituentTree:
    """A phrase-structure tree node.

    Internal nodes carry a ``label`` and ordered ``children``; leaves carry
    the index of the word they cover in ``word``. Preterminals (POS nodes)
    are internal nodes whose single child is a leaf.
    """

    label: str = ""
    children: tuple["ConstituentTree", ...] = ()
    word: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.word is not None

    @property
    def is_preterminal(self) -> bool:
        return bool(self.children) and all(c.is_leaf for c in self.children)

    def leaves(self) -> list[int]:
        if self.is_leaf:
            return [self.word]
        out: list[int] = []
        for child in self.children:
            out.extend(child.leaves())
        return out

    def span(self) -> tuple[int, int]:
        ids = self.leaves()
        return ids[0], ids[-1]

    def to_string(self, words: Sequence[str]) -> str:
        """Bracketed rendering using ``words`` as terminals."""
        if self.is_leaf:
            return words[self.word]
        inner = " ".join(c.to_string(words) for c in self.children)
        return f"({self.label} {inner})"

    def brackets(self) -> list[tuple[str, int, int]]:
        """Labeled (label, start, end) triples over non-preterminal internal
        nodes, with joined unary labels re-expanded. Preterminals and bare
        leaves contribute nothing."""
        out: list[tuple[str, int, int]] = []
        if self.is_leaf or self.is_preterminal:
            return out
        start, end = self.span()
        for part in self.label.split("+"):
            out.append((part, start, end))
        for child in self.children:
            out.extend(child.brackets())
        return out


def validate_tree(tree: ConstituentTree, n_words: int) -> None:
    """Check leaf coverage (0..n-1 in order, once each) and node arity."""

    def walk(node: ConstituentTree) -> Iterator[int]:
        if node.is_leaf:
            yield node.word
            return
        if not node.children:
            raise InvariantError(f"internal node {node.label!r} has no children")
        for child in node.children:
            yield from walk(child)

    seen = list(walk(tree))
    if seen != list(range(n_words)):
        raise InvariantError(
            f"tree leaves {seen} do not enumerate word indices 0..{n_words - 1}"
        )


# ---------------------------------------------------------------------------
# bracketed-format parsing

_KEEP_DASHED = {"-NONE-", "-LRB-", "-RRB-", "-LCB-", "-RCB-"}


def _strip_label(label: str) -> str:
    """Drop function tags and coindexation (``NP-SBJ-1`` -> ``NP``)."""
    if label in _KEEP_DASHED:
        return label
    cut = len(label)
    for sep in "-=":
        pos = label.find(sep, 1)
        if pos > 0:
            cut = min(cut, pos)
    return label[:cut]


def _tokenize_brackets(text: str) -> list[tuple[str, int]]:
    tokens: list[tuple[str, int]] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in "()":
            tokens.append((ch, i))
            i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            tokens.append((text[i:j], i))
            i = j
    return tokens


def _parse_node(tokens: list[tuple[str, int]], pos: int, text_len: int):
    """Parse one parenthesized node starting at ``tokens[pos]``."""
    tok, off = tokens[pos]
    if tok != "(":
        raise FormatError(f"expected '(' at offset {off}")
    pos += 1
    if pos >= len(tokens):
        raise FormatError(f"unbalanced parentheses at offset {text_len}")
    label, _ = tokens[pos]
    if label in "()":
        label = ""  # PTB file wrapper node "( ... )"
    else:
        pos += 1
    children: list = []
    terminal: str | None = None
    while True:
        if pos >= len(tokens):
            raise FormatError(f"unbalanced parentheses at offset {text_len}")
        tok, off = tokens[pos]
        if tok == ")":
            pos += 1
            break
        if tok == "(":
            child, pos = _parse_node(tokens, pos, text_len)
            children.append(child)
        else:
            terminal = tok
            pos += 1
    if terminal is not None and children:
        raise FormatError(f"node mixes terminals and subtrees near offset {off}")
    return (label, children, terminal), pos


def _build_tree(raw, words: list[str]) -> ConstituentTree | None:
    """Convert a raw parse into a tree, dropping traces and empty nodes."""
    label, children, terminal = raw
    label = _strip_label(label)
    if terminal is not None:
        if label == "-NONE-":
            return None
        index = len(words)
        words.append(terminal)
        return ConstituentTree(label=label, children=(ConstituentTree(word=index),))
    built = tuple(c for c in (_build_tree(ch, words) for ch in children) if c is not None)
    if not built:
        return None
    if label == "" and len(built) == 1:
        return built[0]  # unwrap the file-level "( ... )" shell
    if label == "":
        label = "TOP"
    return ConstituentTree(label=label, children=built)


def parse_ptb_with_words(text: str) -> tuple[ConstituentTree, list[str]]:
    """Parse one bracketed tree, returning the tree and its surface words."""
    tokens = _tokenize_brackets(text)
    if not tokens:
        raise FormatError("empty input")
    raw, pos = _parse_node(tokens, 0, len(text))
    if pos != len(tokens):
        raise FormatError(f"trailing content at offset {tokens[pos][1]}")
    words: list[str] = []
    tree = _build_tree(raw, words)
    if tree is None or not words:
        raise FormatError("tree contains no surface words")
    validate_tree(tree, len(words))
    return tree, words


def parse_ptb(text: str) -> ConstituentTree:
    """Parse one bracketed tree. Function tags are stripped and trace
    subtrees deleted; preterminal POS nodes are retained."""
    tree, _ = parse_ptb_with_words(text)
    return tree


def iter_ptb_trees(text: str) -> Iterator[tuple[ConstituentTree, list[str]]]:
    """Yield every tree in a (possibly multi-tree) bracketed file."""
    tokens = _tokenize_brackets(text)
    pos = 0
    while pos < len(tokens):
        raw, pos = _parse_node(tokens, pos, len(text))
        words: list[str] = []
        tree = _build_tree(raw, words)
        if tree is None:
            continue
        validate_tree(tree, len(words))
        yield tree, words


def read_ptb(text: str) -> list["AnnotatedSentence"]:
    """Read bracketed trees into sentences with trees and POS tags."""
    out = []
    for tree, words in iter_ptb_trees(text):
        tags = pos_tags_from_tree(tree, len(words))
        out.append(
            AnnotatedSentence(words=words, pos_tags=tags, tree=tree, provenance="gold")
        )
    return out


def pos_tags_from_tree(tree: ConstituentTree, n_words: int) -> list[str]:
    tags: list[str | None] = [None] * n_words
    stack = [tree]
    while stack:
        node = stack.pop()
        if node.is_preterminal:
            for child in node.children:
                tags[child.word] = node.label
        else:
            stack.extend(node.children)
    if any(t is None for t in tags):
        raise InvariantError("tree has a word with no preterminal above it")
    return [t for t in tags]  # type: ignore[list-item]


# ---------------------------------------------------------------------------
# sentence records


def _as_tuple_frames(args, width):
    out = []
    for item in args:
        item = tuple(item)
        if len(item) != width:
            raise InvariantError(f"malformed frame argument {item!r}")
        out.append(item)
    return tuple(out)


@dataclass(frozen=True)
class SpanFrame:
    """One predicate with span-style arguments ``(start, end, role)``."""

    predicate: int
    arguments: tuple[tuple[int, int, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "arguments", _as_tuple_frames(self.arguments, 3))


@dataclass(frozen=True)
class DepFrame:
    """One predicate with head-word arguments ``(word, role)``."""

    predicate: int
    arguments: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "arguments", _as_tuple_frames(self.arguments, 2))


def _check_dep_tree(heads: Sequence[int]) -> None:
    n = len(heads)
    roots = [i for i, h in enumerate(heads) if h == 0]
    for i, h in enumerate(heads):
        if not 0 <= h <= n:
            raise InvariantError(f"head index {h} of word {i} outside [0, {n}]")
        if h == i + 1:
            raise InvariantError(f"word {i} is its own head")
    if len(roots) != 1:
        raise InvariantError(f"dependency tree must have exactly one root, got {len(roots)}")
    for i in range(n):
        seen = set()
        node = i
        while heads[node] != 0:
            if node in seen:
                raise InvariantError(f"dependency heads contain a cycle through word {i}")
            seen.add(node)
            node = heads[node] - 1


@dataclass
class AnnotatedSentence:
    """Surface words plus whatever annotations a source provides.

    ``dep_heads`` uses 1-based head indices with 0 for the root, matching
    the column convention of the dependency format readers.
    """

    words: list[str]
    pos_tags: list[str] | None = None
    tree: ConstituentTree | None = None
    dep_heads: list[int] | None = None
    dep_labels: list[str] | None = None
    span_frames: list[SpanFrame] | None = None
    dep_frames: list[DepFrame] | None = None
    provenance: str = "gold"

    def __post_init__(self):
        n = len(self.words)
        if n == 0:
            raise InvariantError("sentence has no words")
        if self.provenance not in ("gold", "silver"):
            raise InvariantError(f"unknown provenance {self.provenance!r}")
        if self.pos_tags is not None and len(self.pos_tags) != n:
            raise InvariantError("pos_tags length differs from word count")
        if self.tree is not None:
            validate_tree(self.tree, n)
        if (self.dep_heads is None) != (self.dep_labels is None) and self.dep_labels is not None:
            raise InvariantError("dep_labels present without dep_heads")
        if self.dep_heads is not None:
            if len(self.dep_heads) != n:
                raise InvariantError("dep_heads length differs from word count")
            _check_dep_tree(self.dep_heads)
            if self.dep_labels is not None and len(self.dep_labels) != n:
                raise InvariantError("dep_labels length differs from word count")
        if self.span_frames is not None:
            for frame in self.span_frames:
                self._check_span_frame(frame, n)
        if self.dep_frames is not None:
            for frame in self.dep_frames:
                self._check_dep_frame(frame, n)

    @staticmethod
    def _check_span_frame(frame: SpanFrame, n: int) -> None:
        if not 0 <= frame.predicate < n:
            raise InvariantError(f"predicate index {frame.predicate} out of range")
        spans = []
        for start, end, role in frame.arguments:
            if not (0 <= start <= end < n):
                raise InvariantError(f"argument span ({start}, {end}) out of range")
            if not role:
                raise InvariantError("empty role string")
            spans.append((start, end))
        spans.sort()
        for (s1, e1), (s2, _e2) in zip(spans, spans[1:]):
            if s2 <= e1:
                raise InvariantError(f"overlapping argument spans ({s1},{e1}) and ({s2},..)")

    @staticmethod
    def _check_dep_frame(frame: DepFrame, n: int) -> None:
        if not 0 <= frame.predicate < n:
            raise InvariantError(f"predicate index {frame.predicate} out of range")
        seen = set()
        for word, role in frame.arguments:
            if not 0 <= word < n:
                raise InvariantError(f"argument word {word} out of range")
            if not role:
                raise InvariantError("empty role string")
            if word in seen:
                raise InvariantError(f"word {word} has two roles for predicate {frame.predicate}")
            seen.add(word)

    def replaced(self, **kwargs) -> "AnnotatedSentence":
        return replace(self, **kwargs)


# ---------------------------------------------------------------------------
# span-style SRL columns (props convention)


def _split_blocks(lines: Iterable[str]) -> Iterator[tuple[int, list[tuple[int, list[str]]]]]:
    """Group lines into blank-separated blocks of (line_no, columns)."""
    block: list[tuple[int, list[str]]] = []
    start = 1
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            if block:
                yield start, block
                block = []
            start = lineno + 1
            continue
        if not block:
            start = lineno
        block.append((lineno, stripped.split()))
    if block:
        yield start, block


def read_conll2005(lines: Iterable[str]) -> list[AnnotatedSentence]:
    """Read span-style SRL blocks: word column plus one bracketed props
    column per predicate."""
    sentences = []
    for _start, rows in _split_blocks(lines):
        width = len(rows[0][1])
        for lineno, cols in rows:
            if len(cols) != width:
                raise FormatError(
                    f"line {lineno}: expected {width} columns, got {len(cols)}"
                )
        words = [cols[0] for _ln, cols in rows]
        frames = []
        for col in range(1, width):
            frames.append(_parse_props_column(rows, col))
        sentences.append(
            AnnotatedSentence(words=words, span_frames=frames, provenance="gold")
        )
    return sentences


def _parse_props_column(rows, col: int) -> SpanFrame:
    open_role: str | None = None
    open_start = -1
    spans: list[tuple[int, int, str]] = []
    for token_index, (lineno, cols) in enumerate(rows):
        cell = cols[col]
        body = cell
        if body.startswith("("):
            if open_role is not None:
                raise FormatError(f"line {lineno}: nested argument bracket in props column")
            star = body.find("*")
            if star <= 1:
                raise FormatError(f"line {lineno}: malformed props cell {cell!r}")
            open_role = body[1:star]
            open_start = token_index
            body = body[star:]
        if not body.startswith("*"):
            raise FormatError(f"line {lineno}: malformed props cell {cell!r}")
        body = body[1:]
        if body == ")":
            if open_role is None:
                raise FormatError(f"line {lineno}: unmatched closing bracket in props column")
            spans.append((open_start, token_index, open_role))
            open_role = None
        elif body:
            raise FormatError(f"line {lineno}: malformed props cell {cell!r}")
    if open_role is not None:
        raise FormatError(f"props column {col}: unclosed argument bracket at sentence end")
    verbs = [s for s in spans if s[2] == "V"]
    if len(verbs) != 1:
        raise FormatError(f"props column {col}: expected exactly one (V*) span, got {len(verbs)}")
    predicate = verbs[0][0]
    arguments = tuple((s, e, r) for s, e, r in spans if r != "V")
    return SpanFrame(predicate=predicate, arguments=arguments)


# ---------------------------------------------------------------------------
# dependency-style columns (2009 layout)

_MIN_2009_COLS = 14


def read_conll2009(lines: Iterable[str]) -> list[AnnotatedSentence]:
    """Read the English 2009 column layout: POS, HEAD, DEPREL, FILLPRED,
    PRED and APRED columns. Morphological feature columns are ignored."""
    sentences = []
    for _start, rows in _split_blocks(lines):
        width = len(rows[0][1])
        if width < _MIN_2009_COLS:
            raise FormatError(
                f"line {rows[0][0]}: expected at least {_MIN_2009_COLS} columns, got {width}"
            )
        for lineno, cols in rows:
            if len(cols) != width:
                raise FormatError(
                    f"line {lineno}: expected {width} columns, got {len(cols)}"
                )
        words = [cols[1] for _ln, cols in rows]
        pos = [cols[4] for _ln, cols in rows]
        heads = []
        for lineno, cols in rows:
            try:
                heads.append(int(cols[8]))
            except ValueError:
                raise FormatError(f"line {lineno}: non-integer HEAD {cols[8]!r}") from None
        labels = [cols[10] for _ln, cols in rows]
        pred_rows = [i for i, (_ln, cols) in enumerate(rows) if cols[12] == "Y"]
        apred_count = width - _MIN_2009_COLS
        if apred_count != len(pred_rows):
            raise FormatError(
                f"line {rows[0][0]}: {apred_count} APRED columns for "
                f"{len(pred_rows)} FILLPRED=Y rows"
            )
        frames = []
        for k, pred in enumerate(pred_rows):
            args = []
            for i, (_ln, cols) in enumerate(rows):
                role = cols[_MIN_2009_COLS + k]
                if role != "_":
                    args.append((i, role))
            frames.append(DepFrame(predicate=pred, arguments=tuple(args)))
        sentences.append(
            AnnotatedSentence(
                words=words,
                pos_tags=pos,
                dep_heads=heads,
                dep_labels=labels,
                dep_frames=frames,
                provenance="gold",
            )
        )
    return sentences


# ---------------------------------------------------------------------------
# silver interchange format (one JSON record per line)

_RECORD_KEYS = (
    "words",
    "pos_tags",
    "tree",
    "dep_heads",
    "dep_labels",
    "span_frames",
    "dep_frames",
    "provenance",
)


def sentence_to_record(sentence: AnnotatedSentence) -> dict:
    return {
        "words": list(sentence.words),
        "pos_tags": list(sentence.pos_tags) if sentence.pos_tags is not None else None,
        "tree": sentence.tree.to_string(sentence.words) if sentence.tree is not None else None,
        "dep_heads": list(sentence.dep_heads) if sentence.dep_heads is not None else None,
        "dep_labels": list(sentence.dep_labels) if sentence.dep_labels is not None else None,
        "span_frames": (
            [{"predicate": f.predicate, "arguments": [list(a) for a in f.arguments]}
             for f in sentence.span_frames]
            if sentence.span_frames is not None
            else None
        ),
        "dep_frames": (
            [{"predicate": f.predicate, "arguments": [list(a) for a in f.arguments]}
             for f in sentence.dep_frames]
            if sentence.dep_frames is not None
            else None
        ),
        "provenance": sentence.provenance,
    }


def record_to_sentence(record: dict) -> AnnotatedSentence:
    if "words" not in record or not isinstance(record["words"], list):
        raise FormatError("record missing required 'words' field")
    tree = None
    if record.get("tree"):
        tree, tree_words = parse_ptb_with_words(record["tree"])
        if tree_words != [str(w) for w in record["words"]]:
            raise FormatError("tree terminals disagree with 'words' field")
    span_frames = None
    if record.get("span_frames") is not None:
        span_frames = [
            SpanFrame(predicate=f["predicate"],
                      arguments=tuple((a[0], a[1], a[2]) for a in f["arguments"]))
            for f in record["span_frames"]
        ]
    dep_frames = None
    if record.get("dep_frames") is not None:
        dep_frames = [
            DepFrame(predicate=f["predicate"],
                     arguments=tuple((a[0], a[1]) for a in f["arguments"]))
            for f in record["dep_frames"]
        ]
    return AnnotatedSentence(
        words=[str(w) for w in record["words"]],
        pos_tags=record.get("pos_tags"),
        tree=tree,
        dep_heads=record.get("dep_heads"),
        dep_labels=record.get("dep_labels"),
        span_frames=span_frames,
        dep_frames=dep_frames,
        provenance=record.get("provenance", "silver"),
    )


def write_silver(sentences: Iterable[AnnotatedSentence]) -> str:
    """Serialize sentences to the line-delimited interchange format."""
    lines = [json.dumps(sentence_to_record(s), ensure_ascii=False, sort_keys=True)
             for s in sentences]
    return "".join(line + "\n" for line in lines)


def read_silver(text: str) -> list[AnnotatedSentence]:
    """Parse the line-delimited interchange format."""
    sentences = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {lineno}: invalid record ({exc.msg})") from None
        try:
            sentences.append(record_to_sentence(record))
        except (FormatError, InvariantError) as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
    return sentences


# ---------------------------------------------------------------------------
# gold/silver mixing


@dataclass
class MixerPolicy:
    gold_probability: float = 0.10
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gold_probability <= 1.0:
            raise InvariantError(
                f"gold_probability {self.gold_probability} outside [0, 1]"
            )


class GoldSilverMixer:
    """Sequential seeded chooser between the gold and silver corpora.

    One instance per training run; each call to :meth:`next_source` is an
    independent draw, so the k-th draw is a pure function of (seed, k).
    """

    def __init__(self, policy: MixerPolicy, gold_size: int, silver_size: int):
        if gold_size <= 0 and silver_size <= 0:
            raise ValueError("both corpora are empty; nothing to train on")
        self._policy = policy
        self._gold = gold_size > 0
        self._silver = silver_size > 0
        self._rng = substream(policy.rng_seed, "mixer")
        if not self._gold:
            logger.warning("gold corpus empty; every batch will be silver")
        if not self._silver:
            logger.warning("silver corpus empty; every batch will be gold")

    def next_source(self) -> str:
        draw = float(self._rng.random())
        if not self._silver:
            return "gold"
        if not self._gold:
            return "silver"
        return "gold" if draw < self._policy.gold_probability else "silver"
