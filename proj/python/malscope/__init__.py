"""Repackaged-malware detection workbench: python surface over the C++ core."""

from malscope._malscope import (
    MalscopeError,
    apply_scheme,
    classify,
    cumulative_score,
    evaluate,
    generate_corpus,
    jaccard_lists,
    jaccard_strings,
    levenshtein,
)

__all__ = [
    "MalscopeError",
    "apply_scheme",
    "classify",
    "cumulative_score",
    "evaluate",
    "generate_corpus",
    "jaccard_lists",
    "jaccard_strings",
    "levenshtein",
]
