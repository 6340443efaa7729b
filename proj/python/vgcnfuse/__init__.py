"""NPMI vocabulary graphs and graph-token fusion primitives."""

from ._core import (
    CooccurrenceCounts,
    EncodedDocument,
    VgcnFuseError,
    VocabGraph,
    Vocabulary,
    attention,
    build_graph,
    class_weights,
    clean,
    count_windows,
    dimension_words,
    encode,
    f1_report,
    npmi,
    subgraph_slice,
    tokenize,
    vgcn_classify,
    vgcn_embed,
)

__all__ = [
    "CooccurrenceCounts",
    "EncodedDocument",
    "VgcnFuseError",
    "VocabGraph",
    "Vocabulary",
    "attention",
    "build_graph",
    "class_weights",
    "clean",
    "count_windows",
    "dimension_words",
    "encode",
    "f1_report",
    "npmi",
    "subgraph_slice",
    "tokenize",
    "vgcn_classify",
    "vgcn_embed",
]
