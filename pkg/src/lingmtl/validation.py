"""Input coercion and checks for the estimator-facing API.

The file readers validate their own formats; these helpers guard the
programmatic entry points, where input arrives as Python objects rather
than files.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from lingmtl.corpus import AnnotatedSentence, record_to_sentence


def as_word_sequences(X: Iterable) -> list[list[str]]:
    """Coerce predict-style input into a list of word lists.

    Accepts an iterable whose elements are either whitespace-separated
    strings or sequences of word strings. Words must be non-empty and
    contain no whitespace; a word with internal whitespace would not
    survive the line-oriented file formats.
    """
    if isinstance(X, str):
        raise TypeError("expected an iterable of sentences, got a single string")
    sentences: list[list[str]] = []
    for i, row in enumerate(X):
        if isinstance(row, str):
            words = row.split()
        else:
            try:
                words = list(row)
            except TypeError:
                raise TypeError(
                    f"sentence {i} is not a string or a sequence of words"
                ) from None
        if not words:
            raise ValueError(f"sentence {i} is empty")
        for j, word in enumerate(words):
            if not isinstance(word, str):
                raise TypeError(
                    f"word {j} of sentence {i} is {type(word).__name__}, not str"
                )
            if not word or word.split() != [word]:
                raise ValueError(
                    f"word {j} of sentence {i} ({word!r}) is empty or contains whitespace"
                )
        sentences.append(words)
    if not sentences:
        raise ValueError("no sentences given")
    return sentences


def as_annotated_sentences(data: Iterable) -> list[AnnotatedSentence]:
    """Coerce fit-style input into a list of annotated sentences.

    Elements may be :class:`AnnotatedSentence` records or plain dicts in
    the silver interchange shape; dicts are converted, so a corpus read
    straight from JSON lines works unchanged.
    """
    sentences: list[AnnotatedSentence] = []
    for i, row in enumerate(data):
        if isinstance(row, AnnotatedSentence):
            sentences.append(row)
        elif isinstance(row, dict):
            sentences.append(record_to_sentence(row))
        else:
            raise TypeError(
                f"element {i} is {type(row).__name__}, not an annotated sentence"
            )
    if not sentences:
        raise ValueError("no sentences given")
    return sentences


def check_fits_length(sentences: Sequence[Sequence[str]], fits) -> None:
    """Raise if any sentence fails the ``fits`` predicate, naming offenders."""
    bad = [i for i, words in enumerate(sentences) if not fits(words)]
    if bad:
        shown = ", ".join(str(i) for i in bad[:5])
        more = "" if len(bad) <= 5 else f" (and {len(bad) - 5} more)"
        raise ValueError(
            f"{len(bad)} sentence(s) exceed the model's maximum encoded length: "
            f"index {shown}{more}"
        )
