"""lingmtl: desk-scale multi-task language-model training on syntax and semantics.

The toolkit trains one shared transformer encoder against a masked-token
generator, a replaced-token discriminator, and four linguistic task heads
(POS tagging, constituent parsing, dependency parsing, and semantic role
labeling in both span and dependency styles), with exact chart decoders and
a gold/silver semi-supervised data loop.
"""

from lingmtl.corpus import (
    AnnotatedSentence,
    ConstituentTree,
    DepFrame,
    FormatError,
    InvariantError,
    SpanFrame,
)

__version__ = "0.1.0"


def __getattr__(name):
    # the estimator pulls in torch; load it only when asked for
    if name == "MultiTaskAnnotator":
        from lingmtl.estimator import MultiTaskAnnotator

        return MultiTaskAnnotator
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")

__all__ = [
    "AnnotatedSentence",
    "ConstituentTree",
    "SpanFrame",
    "DepFrame",
    "FormatError",
    "InvariantError",
    "MultiTaskAnnotator",
    "__version__",
]
