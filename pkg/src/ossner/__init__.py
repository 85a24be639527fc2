"""Distantly supervised NER for open-source-software text."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    ConflictError,
    Document,
    EntityType,
    FormatError,
    LabeledDataset,
    LabeledExample,
    OverlapError,
    PipelineError,
    Provenance,
    Span,
    TAGS,
    Token,
    make_document,
    spans_to_tags,
    tags_to_spans,
    tokenize,
    validate_document,
)
from .dictionary import DictEntry, Dictionary, load_lookup_tables  # noqa: F401
from .matcher import MatchConfig, annotate_corpus, match_document  # noqa: F401
