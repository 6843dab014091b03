"""Subword vocabulary, wordpiece tokenization, and sequence framing.

The vocabulary is built by iterative pair merging over word frequencies and
segments words greedily, longest match first, with "##"-prefixed
continuation pieces. Encoding frames one sentence or a packed pair with
[CLS]/[SEP] and keeps, for every word of sentence one, the index of its
last piece so heads can read one vector per word.
"""

from __future__ import annotations

import hashlib
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

RESERVED_TOKENS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")

PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASK_ID = range(5)


class TruncationError(ValueError):
    """An encoding would exceed the maximum sequence length."""


def normalize(word: str) -> str:
    """Lowercase and NFC-normalize, matching vocabulary construction."""
    return unicodedata.normalize("NFC", word.lower())


class Vocab:
    """Immutable id-to-token mapping with fixed reserved ids 0..4."""

    def __init__(self, tokens: Sequence[str]):
        tokens = tuple(tokens)
        if tokens[: len(RESERVED_TOKENS)] != RESERVED_TOKENS:
            raise ValueError("vocabulary must start with the reserved tokens")
        self._tokens = tokens
        self._ids = {tok: i for i, tok in enumerate(tokens)}
        if len(self._ids) != len(tokens):
            dupes = [t for t, c in Counter(tokens).items() if c > 1]
            raise ValueError(f"duplicate vocabulary tokens: {dupes[:5]}")

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def id_of(self, token: str) -> int:
        return self._ids[token]

    def token_of(self, piece_id: int) -> str:
        return self._tokens[piece_id]

    @property
    def reserved_ids(self) -> range:
        return range(len(RESERVED_TOKENS))

    def to_text(self) -> str:
        return "".join(tok + "\n" for tok in self._tokens)

    @classmethod
    def from_text(cls, text: str) -> "Vocab":
        return cls(text.splitlines())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8", newline="\n") as fh:
            return cls.from_text(fh.read())

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


def _symbolize(word: str) -> tuple[str, ...]:
    return tuple(ch if i == 0 else "##" + ch for i, ch in enumerate(word))


def build_vocab(words: Iterable[str], target_size: int) -> Vocab:
    """Build a vocabulary of at most ``target_size`` entries.

    Merging is frequency-greedy over adjacent within-word symbol pairs; ties
    break toward the lexicographically smallest pair, so two runs on the
    same corpus produce identical vocabularies. Merging stops early when no
    pair occurs at least twice.
    """
    freq = Counter(normalize(w) for w in words if w)
    if not freq:
        raise ValueError("empty corpus")
    symbolized = {w: _symbolize(w) for w in freq}
    alphabet = sorted({sym for syms in symbolized.values() for sym in syms})
    floor = len(RESERVED_TOKENS) + len(alphabet)
    if target_size < floor:
        raise ValueError(
            f"target_size {target_size} below reserved+alphabet minimum {floor}"
        )
    merges: list[str] = []
    vocab_size = floor
    while vocab_size < target_size:
        pairs: Counter[tuple[str, str]] = Counter()
        for w, syms in symbolized.items():
            count = freq[w]
            for a, b in zip(syms, syms[1:]):
                pairs[(a, b)] += count
        if not pairs:
            break
        best_count = max(pairs.values())
        if best_count < 2:
            break
        a, b = min(p for p, c in pairs.items() if c == best_count)
        merged = a + b[2:]
        for w, syms in symbolized.items():
            if len(syms) < 2:
                continue
            out = []
            i = 0
            while i < len(syms):
                if i + 1 < len(syms) and syms[i] == a and syms[i + 1] == b:
                    out.append(merged)
                    i += 2
                else:
                    out.append(syms[i])
                    i += 1
            symbolized[w] = tuple(out)
        merges.append(merged)
        vocab_size += 1
    return Vocab(list(RESERVED_TOKENS) + alphabet + merges)


def tokenize_word(word: str, vocab: Vocab) -> list[int]:
    """Greedy longest-match segmentation; whole word falls back to [UNK]."""
    if not word:
        raise ValueError("empty word")
    w = normalize(word)
    if not w:
        return [UNK_ID]
    pieces: list[int] = []
    start = 0
    while start < len(w):
        end = len(w)
        match = -1
        while end > start:
            candidate = w[start:end] if start == 0 else "##" + w[start:end]
            if candidate in vocab:
                match = vocab.id_of(candidate)
                break
            end -= 1
        if match < 0:
            return [UNK_ID]
        pieces.append(match)
        start = end
    return pieces


def detokenize(pieces: Sequence[str]) -> str:
    return "".join(p[2:] if p.startswith("##") else p for p in pieces)


@dataclass
class TokenSequence:
    """One framed model input.

    ``word_last_piece[k]`` is the piece index of the final piece of word k
    of sentence one; [CLS]/[SEP] positions are never listed.
    """

    piece_ids: list[int]
    segment_ids: list[int]
    word_last_piece: list[int]
    nsp_label: bool | None = None

    def __len__(self) -> int:
        return len(self.piece_ids)


def _words_of(sentence) -> Sequence[str]:
    return sentence.words if hasattr(sentence, "words") else sentence


def encode(
    s1,
    s2=None,
    *,
    vocab: Vocab,
    max_len: int = 128,
    nsp_label: bool | None = None,
    truncate_second: bool = False,
) -> TokenSequence:
    """Frame ``[CLS] s1 [SEP]`` or ``[CLS] s1 [SEP] s2 [SEP]``.

    Sentence one is never truncated: if it does not fit, this raises. With
    ``truncate_second`` the trailing whole words of sentence two are dropped
    to fit; otherwise an oversized pair raises too.
    """
    words1 = _words_of(s1)
    ids = [CLS_ID]
    word_last_piece = []
    for word in words1:
        ids.extend(tokenize_word(word, vocab))
        word_last_piece.append(len(ids) - 1)
    ids.append(SEP_ID)
    if len(ids) > max_len:
        raise TruncationError(
            f"sentence one needs {len(ids)} pieces, maximum is {max_len}"
        )
    segments = [0] * len(ids)
    if s2 is not None:
        if len(ids) + 1 > max_len:
            raise TruncationError(
                f"no room for the second sentence separator within {max_len} pieces"
            )
        word_pieces = [tokenize_word(w, vocab) for w in _words_of(s2)]
        budget = max_len - len(ids) - 1
        kept: list[int] = []
        for pieces in word_pieces:
            if len(kept) + len(pieces) > budget:
                if not truncate_second:
                    total = len(ids) + 1 + sum(len(p) for p in word_pieces)
                    raise TruncationError(
                        f"pair needs {total} pieces, maximum is {max_len}"
                    )
                break
            kept.extend(pieces)
        ids.extend(kept)
        ids.append(SEP_ID)
        segments.extend([1] * (len(kept) + 1))
    return TokenSequence(
        piece_ids=ids,
        segment_ids=segments,
        word_last_piece=word_last_piece,
        nsp_label=nsp_label,
    )
